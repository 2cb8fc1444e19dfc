#ifndef ODL_OFFLINE_HPP_
#define ODL_OFFLINE_HPP_

#include <vector>

#include <Eigen/Dense>

#include "odl/batch.hpp"
#include "odl/glm.hpp"
#include "odl/inference.hpp"
#include "odl/prox.hpp"

namespace odl {

struct EngineConfig;

/// Full-data lasso: minimises -loglik / (2N) + lambda ||beta||_1 from zero
/// with the same solver and scaling as the first streaming step.
Eigen::VectorXd offline_lasso(const FullDataset& data, double lambda, const Family& family,
                              const ProxConfig& config);

/// Offline debiased lasso: the whole dataset delivered as one batch to a
/// fresh engine whose tuning grid is {lambda}. The online correction term is
/// identically zero in that case. `base` supplies the remaining settings.
std::vector<InferenceRecord> offline_debiased(const FullDataset& data, double lambda,
                                              const EngineConfig& base,
                                              const std::vector<Eigen::Index>& coords);

struct MleResult {
    Eigen::VectorXd beta;
    Eigen::VectorXd se;
    bool converged = false;
    /// Fitted means numerically at a boundary (complete or quasi separation).
    bool separated = false;
    /// Information matrix was rank deficient at the last iterate.
    bool singular = false;
    int iterations = 0;
};

inline constexpr int kIrlsMaxIter = 100;
inline constexpr int kIrlsMaxHalvings = 20;

/// Newton-Raphson / IRLS for the unpenalised GLM with step halving on the
/// deviance. Problems are reported through the flags, never thrown.
MleResult irls_mle(const FullDataset& data, const Family& family);

}  // namespace odl

#endif  // ODL_OFFLINE_HPP_
