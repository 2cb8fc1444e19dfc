#include "odl/inference.hpp"

#include <cmath>
#include <stdexcept>

#include "odl/normal.hpp"
#include "odl/projection.hpp"

namespace odl {

std::string_view variance_mode_name(VarianceMode mode) {
    return mode == VarianceMode::AsWritten ? "as-written" : "per-observation";
}

VarianceMode parse_variance_mode(std::string_view name) {
    if (name == "as-written") {
        return VarianceMode::AsWritten;
    }
    if (name == "per-observation") {
        return VarianceMode::PerObservation;
    }
    throw std::invalid_argument("unknown variance mode '" + std::string(name) + "'");
}

CoordAccumulator CoordAccumulator::empty(Eigen::Index r, Eigen::Index p) {
    CoordAccumulator acc;
    acc.r = r;
    acc.S_row = Eigen::VectorXd::Zero(p);
    return acc;
}

CoordAccumulator accumulate(CoordAccumulator acc, const Batch& batch,
                            const Eigen::VectorXd& beta_hat_b, const Eigen::VectorXd& gamma_hat_b,
                            const Family& family, VarianceMode mode) {
    check_dimensions(batch.X, &batch.y, &beta_hat_b, "accumulate");
    if (acc.S_row.size() != batch.cols()) {
        throw DimensionError("accumulate: accumulator dimension differs from batch width");
    }
    const Eigen::VectorXd z = residual_column(batch, gamma_hat_b, acc.r);
    const Eigen::VectorXd eta = batch.X * beta_hat_b;
    const Eigen::VectorXd resid = batch.y - mean_vector(family, eta);
    const Eigen::VectorXd w = derivative_vector(family, eta);

    // x_i' gamma~ = -z_i, so gamma~' J_b = -sum_i g'_i z_i x_i'.
    const Eigen::VectorXd s_inc = -(batch.X.transpose() * w.cwiseProduct(z));
    const double zr = z.dot(resid);
    const double v_inc = mode == VarianceMode::AsWritten
                             ? zr * zr
                             : z.cwiseProduct(resid).squaredNorm();

    acc.s1 += zr;
    acc.S_row += s_inc;
    acc.s2 += s_inc.dot(beta_hat_b);
    acc.v += v_inc;
    if (!std::isfinite(acc.s1) || !std::isfinite(acc.s2) || !std::isfinite(acc.v) ||
        !acc.S_row.allFinite()) {
        throw NumericError("accumulate: non-finite summary statistic for coordinate " +
                           std::to_string(acc.r));
    }
    return acc;
}

double debiased_estimate(const CoordAccumulator& acc, const Eigen::VectorXd& beta_hat_b,
                         double tau_hat) {
    if (!(tau_hat > 0.0)) {
        throw DegenerateProjection(acc.r, tau_hat);
    }
    const double correction = acc.S_row.dot(beta_hat_b) - acc.s2;
    return beta_hat_b[acc.r] + (acc.s1 + correction) / tau_hat;
}

double standard_error(const CoordAccumulator& acc, double tau_hat) {
    if (!(tau_hat > 0.0)) {
        throw DegenerateProjection(acc.r, tau_hat);
    }
    if (acc.v < 0.0) {
        throw NumericError("standard_error: negative variance statistic");
    }
    return std::sqrt(acc.v) / tau_hat;
}

std::pair<double, double> confidence_interval(double est, double se, double level) {
    if (!(level > 0.0 && level < 1.0)) {
        throw std::invalid_argument("confidence level must lie in (0, 1)");
    }
    const double half = normal_quantile(0.5 + 0.5 * level) * se;
    return {est - half, est + half};
}

double wald_pvalue(double est, double se) {
    if (est == 0.0) {
        return 1.0;
    }
    if (se == 0.0) {
        return 0.0;
    }
    return std::min(1.0, 2.0 * normal_upper_tail(std::abs(est) / se));
}

}  // namespace odl
