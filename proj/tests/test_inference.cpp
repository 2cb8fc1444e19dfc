#include <cmath>
#include <random>

#include "doctest.h"
#include "odl/glm.hpp"
#include "odl/inference.hpp"
#include "odl/normal.hpp"
#include "odl/projection.hpp"
#include "oracles.hpp"

using odl::CoordAccumulator;
using odl::Family;

TEST_CASE("accumulator increments") {
    std::mt19937_64 rng(23);
    Eigen::VectorXd truth(5);
    truth << 1, 0, -0.5, 0, 0.2;

    SUBCASE("exact gaussian fit adds nothing to s1 and v") {
        odl::Batch b = oracle::gaussian_batch(rng, 12, truth, 0.0);
        Eigen::VectorXd gamma(4);
        gamma << 0.1, -0.2, 0.3, 0.0;
        for (auto mode : {odl::VarianceMode::AsWritten, odl::VarianceMode::PerObservation}) {
            CoordAccumulator acc =
                odl::accumulate(CoordAccumulator::empty(1, 5), b, truth, gamma, Family::gaussian(), mode);
            CHECK(std::abs(acc.s1) < 1e-12);
            CHECK(acc.v < 1e-20);
        }
    }
    SUBCASE("zero projection subtracts row r of the batch information") {
        odl::Batch b = oracle::logistic_batch(rng, 12, truth);
        CoordAccumulator acc = odl::accumulate(CoordAccumulator::empty(2, 5), b, truth,
                                               Eigen::VectorXd::Zero(4), Family::bernoulli());
        const Eigen::MatrixXd J = oracle::logistic_information(b.X, truth);
        CHECK(oracle::max_abs_diff(acc.S_row, -J.row(2).transpose()) < 1e-12);
    }
    SUBCASE("random logistic batches against the displayed formulas") {
        std::vector<odl::Batch> batches;
        std::vector<Eigen::VectorXd> betas;
        std::vector<Eigen::VectorXd> gammas;
        for (int j = 0; j < 3; ++j) {
            batches.push_back(oracle::logistic_batch(rng, 9, truth));
            betas.push_back(truth + 0.1 * oracle::gaussian_matrix(rng, 5, 1).col(0));
            gammas.push_back(0.2 * oracle::gaussian_matrix(rng, 4, 1).col(0));
        }
        const Eigen::Index r = 3;
        for (auto mode : {odl::VarianceMode::AsWritten, odl::VarianceMode::PerObservation}) {
            CoordAccumulator acc = CoordAccumulator::empty(r, 5);
            double s1 = 0, s2 = 0, v = 0;
            Eigen::VectorXd S = Eigen::VectorXd::Zero(5);
            for (int j = 0; j < 3; ++j) {
                const odl::Batch& b = batches[j];
                acc = odl::accumulate(acc, b, betas[j], gammas[j], Family::bernoulli(), mode);
                Eigen::VectorXd gt(5);
                for (Eigen::Index k = 0, m = 0; k < 5; ++k) {
                    gt[k] = k == r ? -1.0 : gammas[j][m++];
                }
                Eigen::VectorXd z(b.rows()), e(b.rows());
                for (Eigen::Index i = 0; i < b.rows(); ++i) {
                    z[i] = -b.X.row(i).dot(gt);
                    e[i] = b.y[i] - oracle::sigmoid(b.X.row(i).dot(betas[j]));
                }
                const Eigen::VectorXd inc = oracle::logistic_information(b.X, betas[j]).transpose() * gt;
                s1 += z.dot(e);
                S += inc;
                s2 += inc.dot(betas[j]);
                v += mode == odl::VarianceMode::AsWritten
                         ? z.dot(e) * z.dot(e)
                         : (z.array().square() * e.array().square()).sum();
            }
            CHECK(std::abs(acc.s1 - s1) <= 1e-10);
            CHECK(std::abs(acc.s2 - s2) <= 1e-10);
            CHECK(std::abs(acc.v - v) <= 1e-10);
            CHECK(oracle::max_abs_diff(acc.S_row, S) <= 1e-10);
        }
    }
}

TEST_CASE("debiased estimate") {
    CoordAccumulator acc = CoordAccumulator::empty(0, 3);
    Eigen::Vector3d beta(0.7, 0.0, -1.0);
    CHECK(odl::debiased_estimate(acc, beta, 2.0) == 0.7);
    acc.s1 = 1.0;
    acc.S_row = Eigen::Vector3d(1.0, 2.0, 0.0);
    acc.s2 = 0.5;
    // 0.7 + (1 + 0.7 - 0.5) / 2
    CHECK(odl::debiased_estimate(acc, beta, 2.0) == doctest::Approx(1.3));
}

TEST_CASE("standard error and interval") {
    CoordAccumulator acc = CoordAccumulator::empty(0, 2);
    CHECK(odl::standard_error(acc, 3.0) == 0.0);
    acc.v = 4.0;
    CHECK(odl::standard_error(acc, 8.0) == doctest::Approx(0.25));
    auto [lo, hi] = odl::confidence_interval(0.0, 1.0, 0.95);
    CHECK(lo == doctest::Approx(-1.959964).epsilon(1e-6));
    CHECK(hi == doctest::Approx(1.959964).epsilon(1e-6));
    auto [lo2, hi2] = odl::confidence_interval(2.0, 0.0, 0.95);
    CHECK(lo2 == 2.0);
    CHECK(hi2 == 2.0);
}

TEST_CASE("Wald p-values") {
    CHECK(odl::wald_pvalue(0.0, 1.0) == 1.0);
    CHECK(odl::wald_pvalue(1.959964, 1.0) == doctest::Approx(0.05).epsilon(1e-6));
    // erfc(3 / sqrt 2) = 0.0026997960632601891
    CHECK(odl::wald_pvalue(-3.0, 1.0) == doctest::Approx(0.0026997960632601891).epsilon(1e-12));
    // Far tails come from erfc directly, with no cancellation.
    CHECK(odl::wald_pvalue(30.0, 1.0) == doctest::Approx(9.813427854296374e-198).epsilon(1e-10));
}

TEST_CASE("normal functions") {
    CHECK(odl::normal_cdf(0.0) == 0.5);
    CHECK(odl::normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-13));
    CHECK(odl::normal_quantile(1e-10) == doctest::Approx(-6.361340902404056).epsilon(1e-12));
    CHECK(odl::normal_quantile(0.5) == doctest::Approx(0.0));
    for (double p : {1e-6, 0.01, 0.2, 0.6, 0.93, 0.999}) {
        CHECK(odl::normal_cdf(odl::normal_quantile(p)) == doctest::Approx(p).epsilon(1e-13));
    }
    CHECK(odl::normal_upper_tail(10.0) == doctest::Approx(7.619853024160527e-24).epsilon(1e-12));
    CHECK_THROWS_AS(odl::normal_quantile(0.0), std::domain_error);
    CHECK_THROWS_AS(odl::normal_quantile(1.0), std::domain_error);
}

TEST_CASE("variance mode names") {
    CHECK(odl::parse_variance_mode("as-written") == odl::VarianceMode::AsWritten);
    CHECK(odl::parse_variance_mode("per-observation") == odl::VarianceMode::PerObservation);
    CHECK(odl::variance_mode_name(odl::VarianceMode::PerObservation) == "per-observation");
    CHECK_THROWS(odl::parse_variance_mode("sandwich"));
}
