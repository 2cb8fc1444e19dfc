#ifndef ODL_ENGINE_HPP_
#define ODL_ENGINE_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "odl/batch.hpp"
#include "odl/glm.hpp"
#include "odl/inference.hpp"
#include "odl/online_lasso.hpp"
#include "odl/projection.hpp"
#include "odl/prox.hpp"

namespace odl {

/// Tracked coordinates default to all of them up to this dimension.
inline constexpr Eigen::Index kDefaultTrackLimit = 600;

struct EngineConfig {
    Family family = Family::bernoulli();
    std::vector<double> lambda_grid{1e-4, 1e-3, 0.01, 0.05};
    ProxConfig prox;
    /// Coordinates to report, in the engine's column space (with an intercept
    /// column 0 is the intercept and feature k sits at column k). Unset means
    /// every column, which is only allowed up to kDefaultTrackLimit columns.
    std::optional<std::vector<Eigen::Index>> tracked;
    double ci_level = 0.95;
    VarianceMode variance_mode = VarianceMode::AsWritten;
    /// Prepend an unpenalised all-ones column to every batch.
    bool intercept = false;
    int cv_folds = 5;
    /// When set, lambda_b = C sqrt(log p / N_b) replaces grid tuning.
    std::optional<double> schedule_constant;

    void validate() const;
};

struct EngineState {
    LassoState lasso;
    std::vector<Eigen::Index> tracked;
    std::vector<ProjectionState> projections;
    std::vector<CoordAccumulator> accumulators;
    std::vector<double> lambda_history;
};

struct SolveStats {
    int solves = 0;
    int converged = 0;
    std::int64_t iterations = 0;
    /// Worst optimality violation over converged solves.
    double max_kkt = 0.0;

    void add(const ProxResult& r, double kkt);
};

struct BatchDiagnostics {
    double lambda = 0.0;
    bool cross_validated = false;
    bool leave_one_out = false;
    SolveStats lasso;
    SolveStats candidates;
    SolveStats projections;
};

struct CvResult {
    double lambda = 0.0;
    bool leave_one_out = false;
    /// Summed held-out deviance per grid value (empty for a singleton grid).
    std::vector<double> deviance;
};

/// PE(lambda) = ||y - g(X beta(lambda))||^2 / n for each candidate; returns
/// the minimiser, preferring the larger lambda on ties.
double select_lambda(std::span<const Candidate> candidates, const Batch& batch,
                     const Family& family);

/// Cross-validated deviance on the first batch with folds i mod K. Falls back
/// to leave-one-out when the batch has fewer than K rows. Ties go to the
/// larger lambda.
CvResult initial_lambda(const Batch& first, const EngineConfig& config);

/// Raised by Engine::restore for a corrupt or incompatible snapshot.
class SnapshotError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/**
 * Streaming debiased-lasso engine. Each call to process_batch consumes one
 * batch: tunes lambda, updates the lasso summary statistics, refreshes the
 * projection of every tracked coordinate and returns one inference record per
 * tracked coordinate. Batches are never stored.
 */
class Engine {
  public:
    /// `width` is the number of covariates in incoming batches.
    Engine(EngineConfig config, Eigen::Index width);

    std::vector<InferenceRecord> process_batch(const Batch& batch);

    const EngineConfig& config() const { return config_; }
    const EngineState& state() const { return state_; }
    const BatchDiagnostics& last_diagnostics() const { return diagnostics_; }
    Eigen::Index width() const { return width_; }
    /// Columns after the optional intercept.
    Eigen::Index dim() const { return state_.lasso.dim(); }

    /// Design as seen by the solvers (intercept column prepended if enabled).
    Batch prepare(const Batch& batch) const;

    std::vector<std::uint8_t> snapshot() const;
    static Engine restore(std::span<const std::uint8_t> bytes);

  private:
    Engine() = default;
    ProxConfig solver_config() const;

    EngineConfig config_;
    Eigen::Index width_ = 0;
    EngineState state_;
    BatchDiagnostics diagnostics_;
};

}  // namespace odl

#endif  // ODL_ENGINE_HPP_
