#include "odl/glm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace odl {

namespace {

double clamp_predictor(double t) {
    return std::clamp(t, -kLinearPredictorBound, kLinearPredictorBound);
}

// Only the exp-based links need the guard; the identity link is left alone.
double guard(const Family& family, double t) {
    return family.kind == FamilyKind::GaussianIdentity ? t : clamp_predictor(t);
}

double logistic(double t) {
    if (t >= 0.0) {
        return 1.0 / (1.0 + std::exp(-t));
    }
    const double e = std::exp(t);
    return e / (1.0 + e);
}

double softplus(double t) {
    if (t > 0.0) {
        return t + std::log1p(std::exp(-t));
    }
    return std::log1p(std::exp(t));
}

// y log(y / mu) with the 0 log 0 = 0 convention.
double xlogx_ratio(double y, double mu) {
    return y > 0.0 ? y * std::log(y / mu) : 0.0;
}

void require_finite(double t, std::string_view where) {
    if (!std::isfinite(t)) {
        throw std::domain_error(std::string(where) + ": non-finite linear predictor");
    }
}

}  // namespace

std::string_view family_name(FamilyKind kind) {
    switch (kind) {
        case FamilyKind::BernoulliLogit:
            return "bernoulli";
        case FamilyKind::GaussianIdentity:
            return "gaussian";
        case FamilyKind::PoissonLog:
            return "poisson";
    }
    return "unknown";
}

FamilyKind parse_family(std::string_view name) {
    if (name == "bernoulli" || name == "logistic" || name == "binomial") {
        return FamilyKind::BernoulliLogit;
    }
    if (name == "gaussian" || name == "linear") {
        return FamilyKind::GaussianIdentity;
    }
    if (name == "poisson") {
        return FamilyKind::PoissonLog;
    }
    throw std::invalid_argument("unknown family '" + std::string(name) + "'");
}

double link_mean(const Family& family, double t) {
    require_finite(t, "link_mean");
    switch (family.kind) {
        case FamilyKind::BernoulliLogit:
            return logistic(t);
        case FamilyKind::GaussianIdentity:
            return t;
        case FamilyKind::PoissonLog:
            if (std::abs(t) > kLinearPredictorBound) {
                throw std::domain_error("link_mean: poisson linear predictor outside +-700");
            }
            return std::exp(t);
    }
    return t;
}

double link_derivative(const Family& family, double t) {
    require_finite(t, "link_derivative");
    switch (family.kind) {
        case FamilyKind::BernoulliLogit: {
            // e^{-|t|} / (1 + e^{-|t|})^2 stays positive after clamping.
            const double e = std::exp(-std::abs(clamp_predictor(t)));
            return e / ((1.0 + e) * (1.0 + e));
        }
        case FamilyKind::GaussianIdentity:
            return 1.0;
        case FamilyKind::PoissonLog:
            if (std::abs(t) > kLinearPredictorBound) {
                throw std::domain_error("link_derivative: poisson linear predictor outside +-700");
            }
            return std::exp(t);
    }
    return 1.0;
}

double derivative_bound(const Family& family) {
    switch (family.kind) {
        case FamilyKind::BernoulliLogit:
            return 0.25;
        case FamilyKind::GaussianIdentity:
            return 1.0;
        case FamilyKind::PoissonLog:
            return std::numeric_limits<double>::infinity();
    }
    return std::numeric_limits<double>::infinity();
}

double unit_deviance(const Family& family, double y, double mu) {
    switch (family.kind) {
        case FamilyKind::BernoulliLogit:
            return 2.0 * (xlogx_ratio(y, mu) + xlogx_ratio(1.0 - y, 1.0 - mu));
        case FamilyKind::GaussianIdentity:
            return (y - mu) * (y - mu);
        case FamilyKind::PoissonLog:
            return 2.0 * (xlogx_ratio(y, mu) - (y - mu));
    }
    return 0.0;
}

void check_dimensions(const Eigen::MatrixXd& X, const Eigen::VectorXd* y,
                      const Eigen::VectorXd* beta, std::string_view where) {
    if (y != nullptr && y->size() != X.rows()) {
        throw DimensionError(std::string(where) + ": response has " + std::to_string(y->size()) +
                             " entries, design has " + std::to_string(X.rows()) + " rows");
    }
    if (beta != nullptr && beta->size() != X.cols()) {
        throw DimensionError(std::string(where) + ": coefficient vector has " +
                             std::to_string(beta->size()) + " entries, design has " +
                             std::to_string(X.cols()) + " columns");
    }
}

Eigen::VectorXd mean_vector(const Family& family, const Eigen::VectorXd& eta) {
    Eigen::VectorXd mu(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        mu[i] = link_mean(family, guard(family, eta[i]));
    }
    return mu;
}

Eigen::VectorXd derivative_vector(const Family& family, const Eigen::VectorXd& eta) {
    Eigen::VectorXd w(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        w[i] = link_derivative(family, guard(family, eta[i]));
    }
    return w;
}

double batch_deviance(const Family& family, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                      const Eigen::VectorXd& beta) {
    check_dimensions(X, &y, &beta, "batch_deviance");
    const Eigen::VectorXd mu = mean_vector(family, X * beta);
    double total = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        total += unit_deviance(family, y[i], mu[i]);
    }
    return total;
}

double log_likelihood_kernel(const Family& family, const Eigen::MatrixXd& X,
                             const Eigen::VectorXd& y, const Eigen::VectorXd& beta) {
    check_dimensions(X, &y, &beta, "log_likelihood_kernel");
    const Eigen::VectorXd eta = X * beta;
    double total = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        const double t = guard(family, eta[i]);
        double cumulant = 0.0;
        switch (family.kind) {
            case FamilyKind::BernoulliLogit:
                cumulant = softplus(t);
                break;
            case FamilyKind::GaussianIdentity:
                cumulant = 0.5 * t * t;
                break;
            case FamilyKind::PoissonLog:
                cumulant = std::exp(t);
                break;
        }
        total += y[i] * t - cumulant;
    }
    return total;
}

Eigen::VectorXd batch_score(const Family& family, const Eigen::MatrixXd& X,
                            const Eigen::VectorXd& y, const Eigen::VectorXd& beta) {
    check_dimensions(X, &y, &beta, "batch_score");
    const Eigen::VectorXd residual = y - mean_vector(family, X * beta);
    return X.transpose() * residual;
}

Eigen::MatrixXd batch_information(const Family& family, const Eigen::MatrixXd& X,
                                  const Eigen::VectorXd& beta) {
    check_dimensions(X, nullptr, &beta, "batch_information");
    const Eigen::VectorXd w = derivative_vector(family, X * beta);
    const Eigen::MatrixXd weighted = w.cwiseSqrt().asDiagonal() * X;
    Eigen::MatrixXd info = Eigen::MatrixXd::Zero(X.cols(), X.cols());
    info.selfadjointView<Eigen::Lower>().rankUpdate(weighted.transpose());
    info.triangularView<Eigen::StrictlyUpper>() = info.transpose();
    return info;
}

}  // namespace odl
