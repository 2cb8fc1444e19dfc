#ifndef ODL_INFERENCE_HPP_
#define ODL_INFERENCE_HPP_

#include <string>
#include <string_view>
#include <utility>

#include <Eigen/Dense>

#include "odl/batch.hpp"
#include "odl/glm.hpp"

namespace odl {

/// How the variance statistic v grows per batch.
///  - AsWritten:      v += (z' e)^2, one rank-one term per batch
///  - PerObservation: v += sum_i z_i^2 e_i^2
/// where e = y - g(X beta_hat(b)).
enum class VarianceMode { AsWritten, PerObservation };

std::string_view variance_mode_name(VarianceMode mode);
VarianceMode parse_variance_mode(std::string_view name);

/// p-values are floored here before any -log10 transform.
inline constexpr double kPValueFloor = 1e-300;

/**
 * Fixed-size running statistics for one tracked coordinate r:
 *   s1 = sum_j z_j' (y_j - g(X_j beta_j))
 *   S  = sum_j gamma~_j' J_j(beta_j)
 *   s2 = sum_j gamma~_j' J_j(beta_j) beta_j
 *   v  = variance statistic (see VarianceMode)
 */
struct CoordAccumulator {
    Eigen::Index r = 0;
    double s1 = 0.0;
    double s2 = 0.0;
    Eigen::VectorXd S_row;
    double v = 0.0;

    static CoordAccumulator empty(Eigen::Index r, Eigen::Index p);
};

struct InferenceRecord {
    std::int64_t batch_index = 0;
    Eigen::Index r = 0;
    double beta_lasso = 0.0;
    double beta_debiased = 0.0;
    double se = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    double p_value = 1.0;
    double lambda_used = 0.0;
    /// Empty on success; otherwise why the coordinate could not be reported.
    std::string error;

    bool ok() const { return error.empty(); }
};

/// Folds batch b into the accumulator. `gamma_hat_b` is the projection for
/// coordinate acc.r computed after batch b.
CoordAccumulator accumulate(CoordAccumulator acc, const Batch& batch,
                            const Eigen::VectorXd& beta_hat_b, const Eigen::VectorXd& gamma_hat_b,
                            const Family& family, VarianceMode mode = VarianceMode::AsWritten);

/// beta_hat_r + (s1 + S . beta_hat - s2) / tau. The last two terms form the
/// online error correction and cancel exactly after one batch.
double debiased_estimate(const CoordAccumulator& acc, const Eigen::VectorXd& beta_hat_b,
                         double tau_hat);

/// sqrt(v) / tau.
double standard_error(const CoordAccumulator& acc, double tau_hat);

/// est -/+ z_{1 - alpha/2} se for level = 1 - alpha.
std::pair<double, double> confidence_interval(double est, double se, double level);

/// Two-sided Wald p-value 2 (1 - Phi(|est| / se)).
double wald_pvalue(double est, double se);

}  // namespace odl

#endif  // ODL_INFERENCE_HPP_
