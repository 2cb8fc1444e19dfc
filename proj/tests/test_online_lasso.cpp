#include <random>
#include <vector>

#include "doctest.h"
#include "odl/offline.hpp"
#include "odl/online_lasso.hpp"
#include "oracles.hpp"

using odl::Family;
using odl::LassoState;

namespace {

odl::ProxConfig tight() {
    odl::ProxConfig cfg = odl::ProxConfig::fast();
    cfg.stop_tol = 1e-13;
    return cfg;
}

LassoState run(const std::vector<odl::Batch>& batches, double lambda, const odl::ProxConfig& cfg,
               const Family& fam) {
    LassoState s = LassoState::empty(batches.front().cols());
    for (const auto& b : batches) {
        s = odl::update_lasso(s, b, lambda, cfg, fam);
    }
    return s;
}

}  // namespace

TEST_CASE("aggregated gradient") {
    std::mt19937_64 rng(21);
    Eigen::VectorXd truth(4);
    truth << 1, -1, 0, 0.5;
    SUBCASE("empty history reduces to the batch score") {
        odl::Batch b = oracle::logistic_batch(rng, 15, truth);
        LassoState s = LassoState::empty(4);
        Eigen::VectorXd at = 0.1 * truth;
        CHECK(oracle::max_abs_diff(odl::aggregated_gradient(s, b, at, Family::bernoulli()),
                                   oracle::logistic_score(b.X, b.y, at)) < 1e-12);
    }
    SUBCASE("vanishes at the previous estimate for an exact gaussian batch") {
        odl::Batch b1 = oracle::gaussian_batch(rng, 10, truth, 1.0);
        LassoState s = odl::update_lasso(LassoState::empty(4), b1, 0.05, tight(), Family::gaussian());
        odl::Batch b2 = oracle::gaussian_batch(rng, 10, truth, 0.0);
        b2.y = b2.X * s.beta_hat;
        Eigen::VectorXd u = odl::aggregated_gradient(s, b2, s.beta_hat, Family::gaussian());
        CHECK(u.cwiseAbs().maxCoeff() < 1e-12);
    }
    SUBCASE("two logistic batches against raw-data evaluation") {
        odl::Batch b1 = oracle::logistic_batch(rng, 20, truth);
        odl::Batch b2 = oracle::logistic_batch(rng, 20, truth);
        LassoState s = odl::update_lasso(LassoState::empty(4), b1, 0.02, tight(), Family::bernoulli());
        Eigen::VectorXd at(4);
        at << 0.3, -0.2, 0.1, 0.05;
        const Eigen::MatrixXd J1 = oracle::logistic_information(b1.X, s.beta_hat);
        const Eigen::VectorXd expected = J1 * (s.beta_hat - at) + oracle::logistic_score(b2.X, b2.y, at);
        CHECK(oracle::max_abs_diff(odl::aggregated_gradient(s, b2, at, Family::bernoulli()), expected) <
              1e-10);
    }
}

TEST_CASE("first batch equals the offline lasso") {
    std::mt19937_64 rng(31);
    Eigen::VectorXd truth = Eigen::VectorXd::Zero(8);
    truth[0] = 1.0;
    truth[1] = -1.0;
    odl::Batch b = oracle::logistic_batch(rng, 40, truth);
    for (odl::ProxConfig cfg : {odl::ProxConfig{}, tight()}) {
        LassoState s = odl::update_lasso(LassoState::empty(8), b, 0.02, cfg, Family::bernoulli());
        odl::FullDataset full{b.X, b.y};
        Eigen::VectorXd off = odl::offline_lasso(full, 0.02, Family::bernoulli(), cfg);
        CHECK(oracle::max_abs_diff(s.beta_hat, off) <= 1e-8);
        CHECK(s.b == 1);
        CHECK(s.N == 40);
        CHECK((s.info_agg - oracle::logistic_information(b.X, s.beta_hat)).cwiseAbs().maxCoeff() <
              1e-10);
    }
}

TEST_CASE("gaussian with no penalty reproduces cumulative least squares") {
    std::mt19937_64 rng(77);
    Eigen::VectorXd truth(5);
    truth << 0.5, -1, 2, 0, 0.3;
    std::vector<odl::Batch> batches;
    for (int j = 0; j < 3; ++j) {
        batches.push_back(oracle::gaussian_batch(rng, 30, truth, 1.0));
    }
    for (std::size_t upto = 2; upto <= 3; ++upto) {
        std::vector<odl::Batch> head(batches.begin(), batches.begin() + static_cast<long>(upto));
        LassoState s = run(head, 0.0, tight(), Family::gaussian());
        odl::Batch all = oracle::stack(head);
        CHECK(oracle::max_abs_diff(s.beta_hat, oracle::ols(all.X, all.y)) <= 1e-8);
    }
}

TEST_CASE("pure noise with a large penalty stays at zero") {
    std::mt19937_64 rng(5);
    std::vector<odl::Batch> batches;
    for (int j = 0; j < 3; ++j) {
        batches.push_back(oracle::logistic_batch(rng, 20, Eigen::VectorXd::Zero(10)));
    }
    LassoState s = run(batches, 0.5, odl::ProxConfig{}, Family::bernoulli());
    CHECK(s.beta_hat.isZero(0.0));
}

TEST_CASE("dimension checks") {
    LassoState s = LassoState::empty(3);
    odl::Batch b{Eigen::MatrixXd::Zero(4, 2), Eigen::VectorXd::Zero(4)};
    CHECK_THROWS_AS(odl::update_lasso(s, b, 0.1, odl::ProxConfig{}, Family::gaussian()),
                    odl::DimensionError);
}

TEST_CASE("candidate solutions") {
    std::mt19937_64 rng(13);
    Eigen::VectorXd truth = Eigen::VectorXd::Zero(6);
    truth[0] = 1.0;
    truth[2] = -0.8;
    odl::Batch b1 = oracle::gaussian_batch(rng, 25, truth, 1.0);
    odl::Batch b2 = oracle::gaussian_batch(rng, 25, truth, 1.0);
    const odl::ProxConfig cfg = tight();
    LassoState s1 = odl::update_lasso(LassoState::empty(6), b1, 0.05, cfg, Family::gaussian());

    SUBCASE("singleton grid equals the committed update") {
        const std::vector<double> grid{0.05};
        auto cand = odl::update_candidates(s1, b2, grid, cfg, Family::gaussian());
        LassoState s2 = odl::update_lasso(s1, b2, 0.05, cfg, Family::gaussian());
        REQUIRE(cand.size() == 1);
        CHECK(oracle::max_abs_diff(cand[0].beta, s2.beta_hat) <= 1e-10);
    }
    SUBCASE("l1 norm does not grow along an ascending grid") {
        const std::vector<double> grid{0.0, 0.01, 0.05, 0.1, 0.3, 1.0};
        auto cand = odl::update_candidates(s1, b2, grid, cfg, Family::gaussian());
        for (std::size_t k = 1; k < cand.size(); ++k) {
            CHECK(cand[k].beta.lpNorm<1>() <= cand[k - 1].beta.lpNorm<1>() + 1e-9);
        }
    }
    SUBCASE("grid endpoints") {
        LassoState s0 = odl::update_lasso(LassoState::empty(6), b1, 0.0, cfg, Family::gaussian());
        const std::vector<double> grid{0.0, 1e6};
        auto cand = odl::update_candidates(s0, b2, grid, cfg, Family::gaussian());
        odl::Batch all = oracle::stack({b1, b2});
        CHECK(oracle::max_abs_diff(cand[0].beta, oracle::ols(all.X, all.y)) <= 1e-8);
        CHECK(cand[1].beta.isZero(0.0));
    }
    SUBCASE("negative or empty grids are rejected") {
        CHECK_THROWS(odl::update_candidates(s1, b2, std::vector<double>{}, cfg, Family::gaussian()));
        CHECK_THROWS(
            odl::update_candidates(s1, b2, std::vector<double>{-1.0}, cfg, Family::gaussian()));
    }
}
