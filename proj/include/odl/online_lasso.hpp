#ifndef ODL_ONLINE_LASSO_HPP_
#define ODL_ONLINE_LASSO_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "odl/batch.hpp"
#include "odl/glm.hpp"
#include "odl/prox.hpp"

namespace odl {

/// One-step-ahead lasso estimate for a tuning value, kept for the next
/// batch's prediction-error comparison.
struct Candidate {
    double lambda = 0.0;
    Eigen::VectorXd beta;
};

/**
 * Summary statistics of the streaming lasso after `b` batches.
 *
 * `info_agg` is the running sum of per-batch information matrices, each
 * evaluated at the estimate committed for its batch. No raw observations are
 * kept.
 */
struct LassoState {
    std::int64_t b = 0;
    std::int64_t N = 0;
    Eigen::VectorXd beta_hat;
    Eigen::MatrixXd info_agg;
    std::vector<Candidate> candidates;

    static LassoState empty(Eigen::Index p);
    Eigen::Index dim() const { return beta_hat.size(); }
};

struct SurrogateSolution {
    Eigen::VectorXd beta;
    ProxResult solve;
    /// Largest optimality-condition violation at `beta`.
    double kkt = 0.0;
};

/// U~(beta) = J~(b-1) (beta_hat(b-1) - beta) + U_b(beta).
Eigen::VectorXd aggregated_gradient(const LassoState& prev, const Batch& batch,
                                    const Eigen::VectorXd& beta, const Family& family);

/// Solves the surrogate problem at batch prev.b + 1 for one lambda, starting
/// from `warm_start`. The smooth gradient handed to the solver is
/// -U~(beta) / (2 N_b).
SurrogateSolution solve_surrogate(const LassoState& prev, const Batch& batch, double lambda,
                                  const ProxConfig& config, const Family& family,
                                  const Eigen::VectorXd& warm_start);

/// Commits one batch: solves at `lambda` warm-started from beta_hat(b-1),
/// then adds J_b(beta_hat(b)) to the aggregated information. Candidates of
/// `prev` are carried over unchanged; the engine replaces them.
LassoState update_lasso(const LassoState& prev, const Batch& batch, double lambda,
                        const ProxConfig& config, const Family& family,
                        SurrogateSolution* solution = nullptr);

/// Solves the surrogate at every grid value from the canonical state `prev`.
/// Each solve is warm-started from the matching entry of prev.candidates when
/// present, else from prev.beta_hat. Results are in grid order.
std::vector<SurrogateSolution> update_candidates(const LassoState& prev, const Batch& batch,
                                                 std::span<const double> grid,
                                                 const ProxConfig& config, const Family& family);

}  // namespace odl

#endif  // ODL_ONLINE_LASSO_HPP_
