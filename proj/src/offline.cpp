#include "odl/offline.hpp"

#include <cmath>

#include "odl/engine.hpp"
#include "odl/online_lasso.hpp"

namespace odl {

FullDataset FullDataset::concatenate(const std::vector<Batch>& batches) {
    FullDataset out;
    if (batches.empty()) {
        return out;
    }
    Eigen::Index rows = 0;
    const Eigen::Index p = batches.front().cols();
    for (const Batch& b : batches) {
        if (b.cols() != p) {
            throw DimensionError("concatenate: batches disagree on width");
        }
        rows += b.rows();
    }
    out.X.resize(rows, p);
    out.y.resize(rows);
    Eigen::Index at = 0;
    for (const Batch& b : batches) {
        out.X.middleRows(at, b.rows()) = b.X;
        out.y.segment(at, b.rows()) = b.y;
        at += b.rows();
    }
    return out;
}

Eigen::VectorXd offline_lasso(const FullDataset& data, double lambda, const Family& family,
                              const ProxConfig& config) {
    const LassoState empty = LassoState::empty(data.X.cols());
    return solve_surrogate(empty, data.as_batch(), lambda, config, family, empty.beta_hat).beta;
}

std::vector<InferenceRecord> offline_debiased(const FullDataset& data, double lambda,
                                              const EngineConfig& base,
                                              const std::vector<Eigen::Index>& coords) {
    EngineConfig cfg = base;
    cfg.lambda_grid = {lambda};
    cfg.schedule_constant.reset();
    cfg.tracked = coords;
    Engine engine(cfg, data.X.cols());
    return engine.process_batch(data.as_batch());
}

MleResult irls_mle(const FullDataset& data, const Family& family) {
    const Eigen::MatrixXd& X = data.X;
    const Eigen::VectorXd& y = data.y;
    check_dimensions(X, &y, nullptr, "irls_mle");
    const Eigen::Index p = X.cols();

    MleResult out;
    out.beta = Eigen::VectorXd::Zero(p);
    double dev = batch_deviance(family, X, y, out.beta);

    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod;
    for (int iter = 1; iter <= kIrlsMaxIter; ++iter) {
        out.iterations = iter;
        const Eigen::VectorXd score = batch_score(family, X, y, out.beta);
        const Eigen::MatrixXd info = batch_information(family, X, out.beta);
        cod.compute(info);
        out.singular = cod.rank() < p;
        const Eigen::VectorXd step = cod.solve(score);
        if (!step.allFinite()) {
            break;
        }

        Eigen::VectorXd trial = out.beta + step;
        double trial_dev = batch_deviance(family, X, y, trial);
        double scale = 1.0;
        for (int h = 0; h < kIrlsMaxHalvings && !(trial_dev <= dev); ++h) {
            scale *= 0.5;
            trial = out.beta + scale * step;
            trial_dev = batch_deviance(family, X, y, trial);
        }
        if (!(trial_dev <= dev)) {
            break;  // no descent along the Newton direction
        }
        const double change = std::abs(trial_dev - dev) / (std::abs(trial_dev) + 0.1);
        out.beta = trial;
        dev = trial_dev;
        if (change < 1e-8) {
            out.converged = true;
            break;
        }
    }

    if (family.kind == FamilyKind::BernoulliLogit) {
        const Eigen::VectorXd mu = mean_vector(family, X * out.beta);
        for (Eigen::Index i = 0; i < mu.size(); ++i) {
            if (mu[i] < 1e-8 || mu[i] > 1.0 - 1e-8) {
                out.separated = true;
                break;
            }
        }
    }
    if (out.separated) {
        out.converged = false;
    }

    const Eigen::MatrixXd info = batch_information(family, X, out.beta);
    cod.compute(info);
    out.singular = out.singular || cod.rank() < p;
    const Eigen::MatrixXd inv = cod.pseudoInverse();
    out.se = inv.diagonal().cwiseMax(0.0).cwiseSqrt();
    return out;
}

}  // namespace odl
