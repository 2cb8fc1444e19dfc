#ifndef ODL_PROX_HPP_
#define ODL_PROX_HPP_

#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace odl {

/**
 * Settings for the iterative soft-thresholding minimiser.
 *
 * `learning_rate` is the fixed gradient step. An empty `penalty_mask` means
 * every coordinate carries the l1 penalty; otherwise coordinates with a
 * `false` entry are left unpenalised (used for an intercept).
 *
 * The solve stops once the Euclidean norm of one full update (gradient step
 * followed by thresholding) falls to `stop_tol`.
 */
enum class StepRule {
    /// Always use `learning_rate`.
    Fixed,
    /// Use `curvature_scale / L` where L bounds the curvature of the smooth
    /// part (supplied by the caller); falls back to Fixed when no bound is
    /// available.
    Curvature,
};

/// Algorithm for the purely quadratic l1 problems (the nodewise projections).
/// Both reach the same minimiser; coordinate descent needs far fewer passes.
enum class Solver { Proximal, CoordinateDescent };

struct ProxConfig {
    double learning_rate = 0.005;
    StepRule step_rule = StepRule::Fixed;
    double curvature_scale = 1.0;
    Solver solver = Solver::Proximal;
    /// Nesterov momentum with adaptive restart. The stopping test is applied
    /// to the update taken from the extrapolated point; the divergence check
    /// is skipped because momentum makes update norms non-monotone.
    bool accelerate = false;
    double stop_tol = 1e-6;
    int max_iter = 100000;
    std::vector<bool> penalty_mask;

    /// Curvature-scaled accelerated steps for the surrogates and coordinate
    /// descent for the projections. Same minimisers as the defaults at a
    /// fraction of the iterations; used by the simulation tools.
    static ProxConfig fast();

    /// Throws std::invalid_argument when a field is out of range.
    void validate() const;
    bool penalized(Eigen::Index coord) const {
        return penalty_mask.empty() || penalty_mask[static_cast<std::size_t>(coord)];
    }
};

/// S(z; t): shrink z toward zero by t, zero inside [-t, t].
inline double soft_threshold(double z, double t) {
    if (z > t) {
        return z - t;
    }
    if (z < -t) {
        return z + t;
    }
    return 0.0;
}

/// Writes the gradient of the smooth part at `beta` into `grad`.
using GradientFn = std::function<void(const Eigen::VectorXd& beta, Eigen::VectorXd& grad)>;

/// Optional per-iteration hook, called with (iteration, iterate after the update).
using IterationObserver = std::function<void(int, const Eigen::VectorXd&)>;

struct ProxResult {
    Eigen::VectorXd solution;
    int iterations = 0;
    bool converged = false;
};

/// Consecutive growing update norms treated as divergence.
inline constexpr int kDivergenceWindow = 10;

/**
 * Minimises f(beta) + lambda * ||beta||_1 by alternating
 *   beta <- beta - eta * grad f(beta)
 *   beta_k <- S(beta_k; eta * lambda)   (penalised coordinates only)
 * starting from `init`.
 *
 * For convex f with a step below 2/L the update norm never grows, so
 * kDivergenceWindow consecutive increases abort with NumericError, as does a
 * non-finite gradient (the message names the iteration).
 */
ProxResult prox_solve(const GradientFn& grad, Eigen::VectorXd init, double lambda,
                      const ProxConfig& config, const IterationObserver& observer = {},
                      double curvature_bound = 0.0);

/// Largest eigenvalue of a symmetric positive semidefinite matrix.
double largest_eigenvalue(const Eigen::MatrixXd& sym);

/// The step prox_solve will take for this config and curvature bound.
double effective_step(const ProxConfig& config, double curvature_bound);

/**
 * Cyclic coordinate descent for
 *   scale * (x' A x / 2 - c' x) + lambda ||x||_1
 * with A symmetric positive semidefinite. Sweeps the active set until it
 * settles, then confirms with a full sweep. Stops when no coordinate moves by
 * more than config.stop_tol in a full sweep; `iterations` counts sweeps.
 * Coordinates with A_kk = 0 stay at zero.
 */
ProxResult quadratic_lasso_cd(const Eigen::MatrixXd& A, const Eigen::VectorXd& c, double scale,
                              Eigen::VectorXd init, double lambda, const ProxConfig& config);

/// Largest violation of the lasso optimality conditions at `beta` given the
/// smooth gradient there: |g_k| - lambda for zero coordinates and
/// |g_k + lambda sign(beta_k)| otherwise (lambda = 0 for unpenalised ones).
double kkt_violation(const Eigen::VectorXd& beta, const Eigen::VectorXd& gradient, double lambda,
                     const ProxConfig& config);

}  // namespace odl

#endif  // ODL_PROX_HPP_
