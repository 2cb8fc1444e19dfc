#ifndef ODL_PROJECTION_HPP_
#define ODL_PROJECTION_HPP_

#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "odl/batch.hpp"
#include "odl/prox.hpp"

namespace odl {

/// tau_hat at or below this multiple of N_b is rejected.
inline constexpr double kTauFloorPerSample = 1e-8;

class DegenerateProjection : public std::runtime_error {
  public:
    DegenerateProjection(Eigen::Index coord, double tau);
    Eigen::Index coord() const { return coord_; }

  private:
    Eigen::Index coord_;
};

// Nodewise projection for coordinate r. gamma_hat has p - 1 entries indexed
// over the columns other than r, in their original order.
struct ProjectionState {
    Eigen::Index r = 0;
    Eigen::VectorXd gamma_hat;
    double tau_hat = 0.0;
};

struct ProjectionSolution {
    Eigen::VectorXd gamma;
    ProxResult solve;
    double kkt = 0.0;
};

/// Copies J~ without row and column r into a (p-1) x (p-1) block and the
/// r-th column without entry r.
void split_information(const Eigen::MatrixXd& info, Eigen::Index r, Eigen::MatrixXd& rest,
                       Eigen::VectorXd& cross);

/**
 * Minimises
 *   (J~_rr - 2 J~_{r,-r} gamma + gamma' J~_{-r,-r} gamma) / (2 N_b) + lambda ||gamma||_1
 * by proximal gradient, starting at `init`. Only the blocks of the aggregated
 * information are used. A penalty mask in `config`, when set, is over all p
 * coordinates; entry r is dropped.
 *
 * With the curvature step rule, `curvature_bound` should bound the largest
 * eigenvalue of J~_{-r,-r} / N_b; lambda_max(J~) / N_b works for every r.
 * A nonpositive value makes the routine compute it from the block.
 */
ProjectionSolution update_projection(const Eigen::MatrixXd& info_agg, std::int64_t N_b,
                                     double lambda, Eigen::Index r, const Eigen::VectorXd& init,
                                     const ProxConfig& config, double curvature_bound = 0.0);

/// Extended vector: gamma_hat spread over p slots with -1 at r.
Eigen::VectorXd extended_gamma(const Eigen::VectorXd& gamma_hat, Eigen::Index r);

/// z_r = x_r - X_{-r} gamma_hat on the raw batch columns.
Eigen::VectorXd residual_column(const Batch& batch, const Eigen::VectorXd& gamma_hat,
                                Eigen::Index r);

/// tau_r = J~_rr - J~_{r,-r} gamma_hat. Throws DegenerateProjection when the
/// result is at or below kTauFloorPerSample * N_b.
double tau(const Eigen::MatrixXd& info_agg, const Eigen::VectorXd& gamma_hat, Eigen::Index r,
           std::int64_t N_b);

}  // namespace odl

#endif  // ODL_PROJECTION_HPP_
