#ifndef ODL_GLM_HPP_
#define ODL_GLM_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace odl {

/// Thrown when matrix/vector shapes disagree.
class DimensionError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Thrown on non-finite arithmetic or a diverging iteration.
class NumericError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

enum class FamilyKind { BernoulliLogit, GaussianIdentity, PoissonLog };

std::string_view family_name(FamilyKind kind);
FamilyKind parse_family(std::string_view name);

// Canonical-link exponential families. Dispersion is carried for reporting
// only and is fixed at 1 for the bernoulli and poisson kinds.
struct Family {
    FamilyKind kind = FamilyKind::BernoulliLogit;
    double dispersion = 1.0;

    static Family bernoulli() { return {FamilyKind::BernoulliLogit, 1.0}; }
    static Family gaussian() { return {FamilyKind::GaussianIdentity, 1.0}; }
    static Family poisson() { return {FamilyKind::PoissonLog, 1.0}; }
};

/// Linear predictors of exp-based links are clamped to this magnitude
/// inside the batch-level routines.
inline constexpr double kLinearPredictorBound = 700.0;

/// Mean function g(t). Throws std::domain_error for a poisson predictor
/// beyond the overflow bound or for a non-finite t.
double link_mean(const Family& family, double t);

/// g'(t), strictly positive.
double link_derivative(const Family& family, double t);

/// Supremum of g' over the real line (infinite for poisson-log).
double derivative_bound(const Family& family);

/// Unit deviance d(y; mu) >= 0 with d(y; y) = 0.
double unit_deviance(const Family& family, double y, double mu);

/// Sum of unit deviances for the batch at coefficients beta.
double batch_deviance(const Family& family, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                      const Eigen::VectorXd& beta);

/// Log-likelihood kernel sum_i { y_i * t_i - b(t_i) } with t = X beta and b
/// the cumulant function. Its gradient is batch_score.
double log_likelihood_kernel(const Family& family, const Eigen::MatrixXd& X,
                             const Eigen::VectorXd& y, const Eigen::VectorXd& beta);

/// U(beta) = sum_i x_i (y_i - g(x_i' beta)).
Eigen::VectorXd batch_score(const Family& family, const Eigen::MatrixXd& X,
                            const Eigen::VectorXd& y, const Eigen::VectorXd& beta);

/// J(beta) = sum_i g'(x_i' beta) x_i x_i'.
Eigen::MatrixXd batch_information(const Family& family, const Eigen::MatrixXd& X,
                                  const Eigen::VectorXd& beta);

// Vectorised helpers over a linear predictor (clamped for exp-based links).
Eigen::VectorXd mean_vector(const Family& family, const Eigen::VectorXd& eta);
Eigen::VectorXd derivative_vector(const Family& family, const Eigen::VectorXd& eta);

/// Throws DimensionError unless X is n x p, y has n entries and beta has p.
void check_dimensions(const Eigen::MatrixXd& X, const Eigen::VectorXd* y,
                      const Eigen::VectorXd* beta, std::string_view where);

}  // namespace odl

#endif  // ODL_GLM_HPP_
