#include "odl/prox.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "odl/glm.hpp"

namespace odl {

void ProxConfig::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
        throw std::invalid_argument("learning rate must be positive");
    }
    if (!(stop_tol > 0.0)) {
        throw std::invalid_argument("stopping tolerance must be positive");
    }
    if (!(curvature_scale > 0.0) || !(curvature_scale < 2.0)) {
        throw std::invalid_argument("curvature scale must lie in (0, 2)");
    }
    if (max_iter < 1) {
        throw std::invalid_argument("max_iter must be at least 1");
    }
}

ProxConfig ProxConfig::fast() {
    ProxConfig config;
    config.step_rule = StepRule::Curvature;
    config.curvature_scale = 1.0;
    config.solver = Solver::CoordinateDescent;
    config.accelerate = true;
    return config;
}

double largest_eigenvalue(const Eigen::MatrixXd& sym) {
    if (sym.size() == 0) {
        return 0.0;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym, Eigen::EigenvaluesOnly);
    return solver.eigenvalues().maxCoeff();
}

double effective_step(const ProxConfig& config, double curvature_bound) {
    if (config.step_rule == StepRule::Curvature && curvature_bound > 0.0 &&
        std::isfinite(curvature_bound)) {
        return config.curvature_scale / curvature_bound;
    }
    return config.learning_rate;
}

ProxResult prox_solve(const GradientFn& grad, Eigen::VectorXd init, double lambda,
                      const ProxConfig& config, const IterationObserver& observer,
                      double curvature_bound) {
    config.validate();
    if (lambda < 0.0 || std::isnan(lambda)) {
        throw std::invalid_argument("prox_solve: lambda must be nonnegative");
    }
    const Eigen::Index p = init.size();
    if (!config.penalty_mask.empty() && static_cast<Eigen::Index>(config.penalty_mask.size()) != p) {
        throw DimensionError("prox_solve: penalty mask length differs from dimension");
    }

    const double eta = effective_step(config, curvature_bound);
    const double threshold = eta * lambda;
    const double tol_sq = config.stop_tol * config.stop_tol;

    ProxResult result;
    result.solution = std::move(init);
    Eigen::VectorXd& beta = result.solution;
    Eigen::VectorXd g(p);
    Eigen::VectorXd next(p);

    double last_step_sq = std::numeric_limits<double>::infinity();
    int growth_run = 0;
    // Momentum state for the accelerated variant: extrapolated point and
    // the previous iterate, with gradient-based adaptive restart.
    Eigen::VectorXd point = beta;
    Eigen::VectorXd previous = beta;
    double momentum = 1.0;

    for (int iter = 1; iter <= config.max_iter; ++iter) {
        const Eigen::VectorXd& at = config.accelerate ? point : beta;
        grad(at, g);
        if (!g.allFinite()) {
            throw NumericError("prox_solve: non-finite gradient at iteration " + std::to_string(iter));
        }
        double step_sq = 0.0;
        for (Eigen::Index k = 0; k < p; ++k) {
            const double z = at[k] - eta * g[k];
            next[k] = config.penalized(k) ? soft_threshold(z, threshold) : z;
            const double d = next[k] - at[k];
            step_sq += d * d;
        }
        result.iterations = iter;
        if (config.accelerate) {
            previous.swap(beta);
            beta = next;
            if (observer) {
                observer(iter, beta);
            }
            if (step_sq <= tol_sq) {
                result.converged = true;
                return result;
            }
            if ((point - beta).dot(beta - previous) > 0.0) {
                momentum = 1.0;
                point = beta;
            } else {
                const double following = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
                point = beta + ((momentum - 1.0) / following) * (beta - previous);
                momentum = following;
            }
            continue;
        }
        beta.swap(next);
        if (observer) {
            observer(iter, beta);
        }
        if (step_sq <= tol_sq) {
            result.converged = true;
            return result;
        }
        growth_run = step_sq > last_step_sq ? growth_run + 1 : 0;
        if (growth_run >= kDivergenceWindow) {
            throw NumericError("prox_solve: update norm grew for " + std::to_string(kDivergenceWindow) +
                               " consecutive iterations (diverging at iteration " +
                               std::to_string(iter) + ")");
        }
        last_step_sq = step_sq;
    }
    return result;
}

ProxResult quadratic_lasso_cd(const Eigen::MatrixXd& A, const Eigen::VectorXd& c, double scale,
                              Eigen::VectorXd init, double lambda, const ProxConfig& config) {
    config.validate();
    const Eigen::Index p = c.size();
    if (A.rows() != p || A.cols() != p || init.size() != p) {
        throw DimensionError("quadratic_lasso_cd: dimension mismatch");
    }
    if (!(scale > 0.0) || lambda < 0.0) {
        throw std::invalid_argument("quadratic_lasso_cd: need scale > 0 and lambda >= 0");
    }
    const double threshold = lambda / scale;

    ProxResult result;
    result.solution = std::move(init);
    Eigen::VectorXd& x = result.solution;
    // grad = A x - c, kept current after every coordinate move.
    Eigen::VectorXd grad = A * x - c;

    auto sweep = [&](const std::vector<Eigen::Index>& coords) {
        double largest = 0.0;
        for (Eigen::Index k : coords) {
            const double a = A(k, k);
            if (!(a > 0.0)) {
                continue;
            }
            const double z = a * x[k] - grad[k];
            const double updated = config.penalized(k) ? soft_threshold(z, threshold) / a : z / a;
            const double delta = updated - x[k];
            if (delta != 0.0) {
                x[k] = updated;
                grad.noalias() += delta * A.col(k);
                largest = std::max(largest, std::abs(delta));
            }
        }
        return largest;
    };

    std::vector<Eigen::Index> all(static_cast<std::size_t>(p));
    for (Eigen::Index k = 0; k < p; ++k) {
        all[static_cast<std::size_t>(k)] = k;
    }
    std::vector<Eigen::Index> active;
    while (result.iterations < config.max_iter) {
        ++result.iterations;
        const double full = sweep(all);
        if (!grad.allFinite()) {
            throw NumericError("quadratic_lasso_cd: non-finite gradient at sweep " +
                               std::to_string(result.iterations));
        }
        if (full <= config.stop_tol) {
            result.converged = true;
            break;
        }
        active.clear();
        for (Eigen::Index k = 0; k < p; ++k) {
            if (x[k] != 0.0) {
                active.push_back(k);
            }
        }
        while (result.iterations < config.max_iter) {
            ++result.iterations;
            if (sweep(active) <= config.stop_tol) {
                break;
            }
        }
    }
    return result;
}

double kkt_violation(const Eigen::VectorXd& beta, const Eigen::VectorXd& gradient, double lambda,
                     const ProxConfig& config) {
    double worst = 0.0;
    for (Eigen::Index k = 0; k < beta.size(); ++k) {
        const double lam = config.penalized(k) ? lambda : 0.0;
        double v = 0.0;
        if (beta[k] == 0.0) {
            v = std::abs(gradient[k]) - lam;
        } else {
            v = std::abs(gradient[k] + lam * (beta[k] > 0.0 ? 1.0 : -1.0));
        }
        worst = std::max(worst, v);
    }
    return worst;
}

}  // namespace odl
