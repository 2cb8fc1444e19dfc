#include "odl/online_lasso.hpp"

#include <stdexcept>

#include "odl/parallel.hpp"

namespace odl {

namespace {

void check_batch(const LassoState& prev, const Batch& batch, std::string_view where) {
    if (batch.cols() != prev.dim()) {
        throw DimensionError(std::string(where) + ": batch has " + std::to_string(batch.cols()) +
                             " columns, state has dimension " + std::to_string(prev.dim()));
    }
    check_dimensions(batch.X, &batch.y, nullptr, where);
}

}  // namespace

LassoState LassoState::empty(Eigen::Index p) {
    LassoState state;
    state.beta_hat = Eigen::VectorXd::Zero(p);
    state.info_agg = Eigen::MatrixXd::Zero(p, p);
    return state;
}

Eigen::VectorXd aggregated_gradient(const LassoState& prev, const Batch& batch,
                                    const Eigen::VectorXd& beta, const Family& family) {
    check_batch(prev, batch, "aggregated_gradient");
    Eigen::VectorXd u = batch_score(family, batch.X, batch.y, beta);
    if (prev.b > 0) {
        u.noalias() += prev.info_agg * (prev.beta_hat - beta);
    }
    return u;
}

SurrogateSolution solve_surrogate(const LassoState& prev, const Batch& batch, double lambda,
                                  const ProxConfig& config, const Family& family,
                                  const Eigen::VectorXd& warm_start) {
    check_batch(prev, batch, "solve_surrogate");
    if (warm_start.size() != prev.dim()) {
        throw DimensionError("solve_surrogate: warm start has wrong dimension");
    }
    const double scale = 1.0 / (2.0 * static_cast<double>(prev.N + batch.rows()));
    const bool has_history = prev.b > 0;
    Eigen::VectorXd eta(batch.rows());
    Eigen::VectorXd residual(batch.rows());

    // grad = [J~ (beta - beta_hat) - X'(y - g(X beta))] / (2 N_b)
    auto gradient = [&](const Eigen::VectorXd& beta, Eigen::VectorXd& out) {
        eta.noalias() = batch.X * beta;
        residual = batch.y - mean_vector(family, eta);
        out.noalias() = -(batch.X.transpose() * residual);
        if (has_history) {
            out.noalias() += prev.info_agg * (beta - prev.beta_hat);
        }
        out *= scale;
    };

    double curvature = 0.0;
    if (config.step_rule == StepRule::Curvature) {
        const double batch_part =
            batch.rows() < batch.cols()
                ? largest_eigenvalue(batch.X * batch.X.transpose())
                : largest_eigenvalue(batch.X.transpose() * batch.X);
        const double history = has_history ? largest_eigenvalue(prev.info_agg) : 0.0;
        curvature = (history + derivative_bound(family) * batch_part) * scale;
    }

    SurrogateSolution sol;
    sol.solve = prox_solve(gradient, warm_start, lambda, config, {}, curvature);
    sol.beta = sol.solve.solution;
    Eigen::VectorXd g(prev.dim());
    gradient(sol.beta, g);
    sol.kkt = kkt_violation(sol.beta, g, lambda, config);
    return sol;
}

LassoState update_lasso(const LassoState& prev, const Batch& batch, double lambda,
                        const ProxConfig& config, const Family& family,
                        SurrogateSolution* solution) {
    SurrogateSolution sol = solve_surrogate(prev, batch, lambda, config, family, prev.beta_hat);
    LassoState next;
    next.b = prev.b + 1;
    next.N = prev.N + batch.rows();
    next.beta_hat = sol.beta;
    next.info_agg = prev.info_agg + batch_information(family, batch.X, next.beta_hat);
    next.candidates = prev.candidates;
    if (solution != nullptr) {
        *solution = std::move(sol);
    }
    return next;
}

std::vector<SurrogateSolution> update_candidates(const LassoState& prev, const Batch& batch,
                                                 std::span<const double> grid,
                                                 const ProxConfig& config, const Family& family) {
    if (grid.empty()) {
        throw std::invalid_argument("update_candidates: empty tuning grid");
    }
    std::vector<SurrogateSolution> out(grid.size());
    parallel_for(grid.size(), [&](std::size_t k) {
        if (grid[k] < 0.0) {
            throw std::invalid_argument("update_candidates: negative tuning value");
        }
        const Eigen::VectorXd* warm = &prev.beta_hat;
        for (const Candidate& c : prev.candidates) {
            if (c.lambda == grid[k] && c.beta.size() == prev.dim()) {
                warm = &c.beta;
            }
        }
        out[k] = solve_surrogate(prev, batch, grid[k], config, family, *warm);
    });
    return out;
}

}  // namespace odl
