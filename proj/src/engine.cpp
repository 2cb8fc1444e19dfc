#include "odl/engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "odl/log.hpp"
#include "odl/offline.hpp"
#include "odl/parallel.hpp"

namespace odl {

void EngineConfig::validate() const {
    if (lambda_grid.empty()) {
        throw std::invalid_argument("lambda grid must not be empty");
    }
    for (std::size_t k = 0; k < lambda_grid.size(); ++k) {
        if (!(lambda_grid[k] >= 0.0) || !std::isfinite(lambda_grid[k])) {
            throw std::invalid_argument("lambda grid values must be finite and nonnegative");
        }
        if (k > 0 && !(lambda_grid[k] > lambda_grid[k - 1])) {
            throw std::invalid_argument("lambda grid must be strictly ascending");
        }
    }
    if (!(ci_level > 0.0 && ci_level < 1.0)) {
        throw std::invalid_argument("confidence level must lie in (0, 1)");
    }
    if (cv_folds < 2) {
        throw std::invalid_argument("cross-validation needs at least 2 folds");
    }
    if (schedule_constant && !(*schedule_constant > 0.0)) {
        throw std::invalid_argument("schedule constant must be positive");
    }
    prox.validate();
}

void SolveStats::add(const ProxResult& r, double kkt) {
    ++solves;
    iterations += r.iterations;
    if (r.converged) {
        ++converged;
        max_kkt = std::max(max_kkt, kkt);
    }
}

double select_lambda(std::span<const Candidate> candidates, const Batch& batch,
                     const Family& family) {
    if (candidates.empty()) {
        throw std::invalid_argument("select_lambda: no candidates");
    }
    const double n = static_cast<double>(std::max<Eigen::Index>(batch.rows(), 1));
    double best_pe = std::numeric_limits<double>::infinity();
    double best_lambda = candidates.front().lambda;
    for (const Candidate& c : candidates) {
        check_dimensions(batch.X, &batch.y, &c.beta, "select_lambda");
        const double pe = (batch.y - mean_vector(family, batch.X * c.beta)).squaredNorm() / n;
        const bool better = pe < best_pe;
        const bool tie = pe == best_pe && c.lambda > best_lambda;
        if (better || tie) {
            best_pe = pe;
            best_lambda = c.lambda;
        }
    }
    return best_lambda;
}

CvResult initial_lambda(const Batch& first, const EngineConfig& config) {
    CvResult result;
    const auto& grid = config.lambda_grid;
    if (grid.size() == 1) {
        result.lambda = grid.front();
        return result;
    }
    const Eigen::Index n = first.rows();
    Eigen::Index folds = config.cv_folds;
    if (n < folds) {
        result.leave_one_out = true;
        folds = n;
        log_info("initial_lambda: first batch has " + std::to_string(n) + " rows (< " +
                 std::to_string(config.cv_folds) + " folds); using leave-one-out");
    }
    if (folds < 2) {
        result.lambda = grid.back();
        log_warning("initial_lambda: too few rows to cross-validate; using the largest lambda");
        return result;
    }

    result.deviance.assign(grid.size(), 0.0);
    for (Eigen::Index fold = 0; fold < folds; ++fold) {
        std::vector<Eigen::Index> train;
        std::vector<Eigen::Index> test;
        for (Eigen::Index i = 0; i < n; ++i) {
            (i % folds == fold ? test : train).push_back(i);
        }
        FullDataset train_set{first.X(train, Eigen::all), first.y(train)};
        const Eigen::MatrixXd test_X = first.X(test, Eigen::all);
        const Eigen::VectorXd test_y = first.y(test);
        std::vector<double> fold_dev(grid.size());
        parallel_for(grid.size(), [&](std::size_t k) {
            const Eigen::VectorXd beta = offline_lasso(train_set, grid[k], config.family, config.prox);
            fold_dev[k] = batch_deviance(config.family, test_X, test_y, beta);
        });
        for (std::size_t k = 0; k < grid.size(); ++k) {
            result.deviance[k] += fold_dev[k];
        }
    }

    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < grid.size(); ++k) {
        if (result.deviance[k] <= best) {
            best = result.deviance[k];
            result.lambda = grid[k];
        }
    }
    return result;
}

Engine::Engine(EngineConfig config, Eigen::Index width) : config_(std::move(config)), width_(width) {
    config_.validate();
    if (width_ < 1) {
        throw std::invalid_argument("engine needs at least one covariate");
    }
    const Eigen::Index p = width_ + (config_.intercept ? 1 : 0);
    if (p < 2) {
        throw std::invalid_argument("engine needs at least two columns for projections");
    }
    if (config_.tracked) {
        state_.tracked = *config_.tracked;
        std::sort(state_.tracked.begin(), state_.tracked.end());
        state_.tracked.erase(std::unique(state_.tracked.begin(), state_.tracked.end()),
                             state_.tracked.end());
        for (Eigen::Index r : state_.tracked) {
            if (r < 0 || r >= p) {
                throw std::invalid_argument("tracked coordinate " + std::to_string(r) +
                                            " outside [0, " + std::to_string(p) + ")");
            }
        }
    } else {
        if (p > kDefaultTrackLimit) {
            throw std::invalid_argument("dimension " + std::to_string(p) +
                                        " exceeds the default tracking limit; list coordinates "
                                        "to track explicitly");
        }
        for (Eigen::Index r = 0; r < p; ++r) {
            state_.tracked.push_back(r);
        }
    }
    state_.lasso = LassoState::empty(p);
    for (Eigen::Index r : state_.tracked) {
        state_.projections.push_back({r, Eigen::VectorXd::Zero(p - 1), 0.0});
        state_.accumulators.push_back(CoordAccumulator::empty(r, p));
    }
}

ProxConfig Engine::solver_config() const {
    ProxConfig cfg = config_.prox;
    if (config_.intercept) {
        cfg.penalty_mask.assign(static_cast<std::size_t>(dim()), true);
        cfg.penalty_mask[0] = false;
    }
    return cfg;
}

Batch Engine::prepare(const Batch& batch) const {
    if (batch.cols() != width_) {
        throw DimensionError("batch has " + std::to_string(batch.cols()) + " covariates, engine expects " +
                             std::to_string(width_));
    }
    check_dimensions(batch.X, &batch.y, nullptr, "process_batch");
    if (!config_.intercept) {
        return batch;
    }
    Batch out;
    out.X.resize(batch.rows(), width_ + 1);
    out.X.col(0).setOnes();
    out.X.rightCols(width_) = batch.X;
    out.y = batch.y;
    return out;
}

std::vector<InferenceRecord> Engine::process_batch(const Batch& raw) {
    if (raw.rows() == 0) {
        log_warning("process_batch: empty batch ignored");
        diagnostics_ = {};
        return {};
    }
    const Batch batch = prepare(raw);
    const Eigen::Index p = dim();
    const LassoState& prev = state_.lasso;
    const ProxConfig prox = solver_config();
    BatchDiagnostics diag;

    if (prev.b == 0 && static_cast<double>(batch.rows()) < std::log(static_cast<double>(p))) {
        log_warning("first batch has fewer rows than log(p); lasso consistency is not expected");
    }

    // Tuning.
    const std::int64_t N_b = prev.N + batch.rows();
    double lambda = 0.0;
    if (config_.schedule_constant) {
        lambda = *config_.schedule_constant *
                 std::sqrt(std::log(static_cast<double>(p)) / static_cast<double>(N_b));
    } else if (prev.b == 0 || prev.candidates.empty()) {
        EngineConfig cv_cfg = config_;
        cv_cfg.prox = prox;
        const CvResult cv = initial_lambda(batch, cv_cfg);
        lambda = cv.lambda;
        diag.cross_validated = true;
        diag.leave_one_out = cv.leave_one_out;
    } else {
        lambda = select_lambda(prev.candidates, batch, config_.family);
    }
    diag.lambda = lambda;

    // Online lasso step and next-step candidates, both from the state at b-1.
    SurrogateSolution committed;
    LassoState next = update_lasso(prev, batch, lambda, prox, config_.family, &committed);
    diag.lasso.add(committed.solve, committed.kkt);

    next.candidates.clear();
    if (!config_.schedule_constant) {
        std::vector<double> rest;
        for (double l : config_.lambda_grid) {
            if (l != lambda) {
                rest.push_back(l);
            }
        }
        std::vector<SurrogateSolution> solved;
        if (!rest.empty()) {
            solved = update_candidates(prev, batch, rest, prox, config_.family);
        }
        std::size_t k = 0;
        for (double l : config_.lambda_grid) {
            if (l == lambda) {
                next.candidates.push_back({l, committed.beta});
            } else {
                diag.candidates.add(solved[k].solve, solved[k].kkt);
                next.candidates.push_back({l, std::move(solved[k].beta)});
                ++k;
            }
        }
    }

    // Projections and accumulators for each tracked coordinate.
    const std::size_t m = state_.tracked.size();
    std::vector<InferenceRecord> records(m);
    std::vector<ProjectionState> projections(m);
    std::vector<CoordAccumulator> accumulators(m);
    std::vector<ProjectionSolution> solutions(m);
    double curvature = 0.0;
    if (prox.step_rule == StepRule::Curvature && m > 0) {
        curvature = largest_eigenvalue(next.info_agg) / static_cast<double>(next.N);
    }
    parallel_for(m, [&](std::size_t k) {
        const Eigen::Index r = state_.tracked[k];
        solutions[k] = update_projection(next.info_agg, next.N, lambda, r,
                                         state_.projections[k].gamma_hat, prox, curvature);
        projections[k] = {r, solutions[k].gamma, 0.0};
        accumulators[k] = accumulate(state_.accumulators[k], batch, next.beta_hat,
                                     solutions[k].gamma, config_.family, config_.variance_mode);

        InferenceRecord& rec = records[k];
        rec.batch_index = next.b;
        rec.r = r;
        rec.beta_lasso = next.beta_hat[r];
        rec.lambda_used = lambda;
        try {
            const double t = tau(next.info_agg, solutions[k].gamma, r, next.N);
            projections[k].tau_hat = t;
            rec.beta_debiased = debiased_estimate(accumulators[k], next.beta_hat, t);
            rec.se = standard_error(accumulators[k], t);
            std::tie(rec.ci_low, rec.ci_high) =
                confidence_interval(rec.beta_debiased, rec.se, config_.ci_level);
            rec.p_value = wald_pvalue(rec.beta_debiased, rec.se);
        } catch (const DegenerateProjection& e) {
            const double nan = std::numeric_limits<double>::quiet_NaN();
            rec.beta_debiased = rec.se = rec.ci_low = rec.ci_high = rec.p_value = nan;
            rec.error = e.what();
        }
    });
    for (std::size_t k = 0; k < m; ++k) {
        diag.projections.add(solutions[k].solve, solutions[k].kkt);
    }

    state_.lasso = std::move(next);
    state_.projections = std::move(projections);
    state_.accumulators = std::move(accumulators);
    state_.lambda_history.push_back(lambda);
    diagnostics_ = diag;
    return records;
}

}  // namespace odl
