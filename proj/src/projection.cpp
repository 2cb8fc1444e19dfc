#include "odl/projection.hpp"

#include <cmath>

#include "odl/glm.hpp"

namespace odl {

DegenerateProjection::DegenerateProjection(Eigen::Index coord, double tau)
    : std::runtime_error("degenerate projection for coordinate " + std::to_string(coord) +
                         ": tau = " + std::to_string(tau)),
      coord_(coord) {}

namespace {

void check_coord(Eigen::Index r, Eigen::Index p, std::string_view where) {
    if (r < 0 || r >= p) {
        throw DimensionError(std::string(where) + ": coordinate " + std::to_string(r) +
                             " outside [0, " + std::to_string(p) + ")");
    }
}

}  // namespace

void split_information(const Eigen::MatrixXd& info, Eigen::Index r, Eigen::MatrixXd& rest,
                       Eigen::VectorXd& cross) {
    const Eigen::Index p = info.rows();
    const Eigen::Index q = p - 1;
    const Eigen::Index tail = p - r - 1;
    rest.resize(q, q);
    rest.topLeftCorner(r, r) = info.topLeftCorner(r, r);
    rest.topRightCorner(r, tail) = info.topRightCorner(r, tail);
    rest.bottomLeftCorner(tail, r) = info.bottomLeftCorner(tail, r);
    rest.bottomRightCorner(tail, tail) = info.bottomRightCorner(tail, tail);
    cross.resize(q);
    cross.head(r) = info.col(r).head(r);
    cross.tail(tail) = info.col(r).tail(tail);
}

ProjectionSolution update_projection(const Eigen::MatrixXd& info_agg, std::int64_t N_b,
                                     double lambda, Eigen::Index r, const Eigen::VectorXd& init,
                                     const ProxConfig& config, double curvature_bound) {
    const Eigen::Index p = info_agg.rows();
    if (info_agg.cols() != p) {
        throw DimensionError("update_projection: information matrix is not square");
    }
    check_coord(r, p, "update_projection");
    if (init.size() != p - 1) {
        throw DimensionError("update_projection: warm start must have p - 1 entries");
    }
    if (N_b <= 0) {
        throw std::invalid_argument("update_projection: sample count must be positive");
    }

    Eigen::MatrixXd rest;
    Eigen::VectorXd cross;
    split_information(info_agg, r, rest, cross);
    const double scale = 1.0 / static_cast<double>(N_b);

    ProxConfig inner = config;
    if (!config.penalty_mask.empty()) {
        inner.penalty_mask.erase(inner.penalty_mask.begin() + r);
    }

    auto gradient = [&](const Eigen::VectorXd& gamma, Eigen::VectorXd& out) {
        out.noalias() = rest * gamma;
        out -= cross;
        out *= scale;
    };

    if (inner.step_rule == StepRule::Curvature && !(curvature_bound > 0.0)) {
        curvature_bound = largest_eigenvalue(rest) * scale;
    }

    ProjectionSolution sol;
    if (inner.solver == Solver::CoordinateDescent) {
        sol.solve = quadratic_lasso_cd(rest, cross, scale, init, lambda, inner);
    } else {
        sol.solve = prox_solve(gradient, init, lambda, inner, {}, curvature_bound);
    }
    sol.gamma = sol.solve.solution;
    Eigen::VectorXd g(p - 1);
    gradient(sol.gamma, g);
    sol.kkt = kkt_violation(sol.gamma, g, lambda, inner);
    return sol;
}

Eigen::VectorXd extended_gamma(const Eigen::VectorXd& gamma_hat, Eigen::Index r) {
    const Eigen::Index p = gamma_hat.size() + 1;
    check_coord(r, p, "extended_gamma");
    Eigen::VectorXd full(p);
    full.head(r) = gamma_hat.head(r);
    full[r] = -1.0;
    full.tail(p - r - 1) = gamma_hat.tail(p - r - 1);
    return full;
}

Eigen::VectorXd residual_column(const Batch& batch, const Eigen::VectorXd& gamma_hat,
                                Eigen::Index r) {
    const Eigen::Index p = batch.cols();
    check_coord(r, p, "residual_column");
    if (gamma_hat.size() != p - 1) {
        throw DimensionError("residual_column: gamma must have p - 1 entries");
    }
    const Eigen::Index tail = p - r - 1;
    Eigen::VectorXd z = batch.X.col(r);
    z.noalias() -= batch.X.leftCols(r) * gamma_hat.head(r);
    z.noalias() -= batch.X.rightCols(tail) * gamma_hat.tail(tail);
    return z;
}

double tau(const Eigen::MatrixXd& info_agg, const Eigen::VectorXd& gamma_hat, Eigen::Index r,
           std::int64_t N_b) {
    const Eigen::Index p = info_agg.rows();
    check_coord(r, p, "tau");
    if (gamma_hat.size() != p - 1) {
        throw DimensionError("tau: gamma must have p - 1 entries");
    }
    const Eigen::Index tail = p - r - 1;
    const double value = info_agg(r, r) - info_agg.row(r).head(r).dot(gamma_hat.head(r)) -
                         info_agg.row(r).tail(tail).dot(gamma_hat.tail(tail));
    if (!(value > kTauFloorPerSample * static_cast<double>(N_b))) {
        throw DegenerateProjection(r, value);
    }
    return value;
}

}  // namespace odl
