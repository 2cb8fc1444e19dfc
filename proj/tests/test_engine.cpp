#include <cmath>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "doctest.h"
#include "odl/engine.hpp"
#include "odl/log.hpp"
#include "odl/offline.hpp"
#include "odl/projection.hpp"
#include "oracles.hpp"

using odl::Engine;
using odl::EngineConfig;
using odl::Family;

namespace {

EngineConfig tight_config(Family fam, std::vector<double> grid) {
    EngineConfig cfg;
    cfg.family = fam;
    cfg.lambda_grid = std::move(grid);
    cfg.prox = odl::ProxConfig::fast();
    cfg.prox.stop_tol = 1e-13;
    return cfg;
}

// Captures log lines for the lifetime of the object.
struct LogCapture {
    std::vector<std::string> lines;
    odl::LogSink previous;
    LogCapture() {
        previous = odl::set_log_sink(
            [this](odl::LogLevel, std::string_view msg) { lines.emplace_back(msg); });
    }
    ~LogCapture() { odl::set_log_sink(previous); }
    bool contains(const std::string& needle) const {
        for (const auto& l : lines) {
            if (l.find(needle) != std::string::npos) {
                return true;
            }
        }
        return false;
    }
};

bool same_record(const odl::InferenceRecord& a, const odl::InferenceRecord& b, double tol) {
    return a.r == b.r && a.batch_index == b.batch_index &&
           std::abs(a.beta_lasso - b.beta_lasso) <= tol &&
           std::abs(a.beta_debiased - b.beta_debiased) <= tol && std::abs(a.se - b.se) <= tol &&
           std::abs(a.ci_low - b.ci_low) <= tol && std::abs(a.ci_high - b.ci_high) <= tol &&
           std::abs(a.p_value - b.p_value) <= tol;
}

bool identical(const odl::InferenceRecord& a, const odl::InferenceRecord& b) {
    return a.r == b.r && a.batch_index == b.batch_index && a.beta_lasso == b.beta_lasso &&
           a.beta_debiased == b.beta_debiased && a.se == b.se && a.ci_low == b.ci_low &&
           a.ci_high == b.ci_high && a.p_value == b.p_value && a.lambda_used == b.lambda_used;
}

}  // namespace

TEST_CASE("prediction-error tuning") {
    std::mt19937_64 rng(4);
    Eigen::VectorXd truth(3);
    truth << 2, -1, 0;
    odl::Batch b = oracle::logistic_batch(rng, 30, truth);
    SUBCASE("ties go to the larger lambda") {
        std::vector<odl::Candidate> c{{0.001, truth}, {0.01, truth}, {0.05, truth}};
        CHECK(odl::select_lambda(c, b, Family::bernoulli()) == 0.05);
    }
    SUBCASE("a perfect predictor wins") {
        odl::Batch g = oracle::gaussian_batch(rng, 20, truth, 0.0);
        std::vector<odl::Candidate> c{{0.001, Eigen::VectorXd::Zero(3)}, {0.01, truth},
                                      {0.05, 0.5 * truth}};
        CHECK(odl::select_lambda(c, g, Family::gaussian()) == 0.01);
    }
    SUBCASE("overfit small-lambda candidate loses to the PE table") {
        Eigen::VectorXd overfit(3);
        overfit << 9.0, 6.0, -7.0;
        std::vector<odl::Candidate> c{{1e-4, overfit}, {0.05, 0.8 * truth}};
        std::vector<double> pe;
        for (const auto& cand : c) {
            double s = 0.0;
            for (Eigen::Index i = 0; i < b.rows(); ++i) {
                const double e = b.y[i] - oracle::sigmoid(b.X.row(i).dot(cand.beta));
                s += e * e;
            }
            pe.push_back(s / b.rows());
        }
        REQUIRE(pe[1] < pe[0]);
        CHECK(odl::select_lambda(c, b, Family::bernoulli()) == 0.05);
    }
}

TEST_CASE("first-batch cross-validation") {
    SUBCASE("singleton grid") {
        EngineConfig cfg;
        cfg.lambda_grid = {0.3};
        odl::Batch b{Eigen::MatrixXd::Ones(4, 2), Eigen::VectorXd::Ones(4)};
        CHECK(odl::initial_lambda(b, cfg).lambda == 0.3);
    }
    SUBCASE("pure noise prefers the largest lambda") {
        EngineConfig cfg;
        cfg.prox = odl::ProxConfig::fast();
        int largest = 0;
        for (int seed = 0; seed < 100; ++seed) {
            std::mt19937_64 rng(1000 + seed);
            odl::Batch b = oracle::logistic_batch(rng, 10, Eigen::VectorXd::Zero(100));
            largest += odl::initial_lambda(b, cfg).lambda == cfg.lambda_grid.back() ? 1 : 0;
        }
        CHECK(largest >= 80);
    }
    SUBCASE("three rows with five folds switch to leave-one-out") {
        LogCapture capture;
        EngineConfig cfg;
        std::mt19937_64 rng(2);
        odl::Batch b = oracle::logistic_batch(rng, 3, Eigen::VectorXd::Zero(4));
        odl::CvResult cv = odl::initial_lambda(b, cfg);
        CHECK(cv.leave_one_out);
        CHECK(cv.deviance.size() == cfg.lambda_grid.size());
        CHECK(capture.contains("leave-one-out"));
    }
}

TEST_CASE("exact gaussian fit through the engine") {
    std::mt19937_64 rng(6);
    odl::Batch b{oracle::gaussian_matrix(rng, 20, 3), Eigen::VectorXd()};
    b.y = b.X.col(0);
    EngineConfig cfg = tight_config(Family::gaussian(), {0.0});
    cfg.tracked = std::vector<Eigen::Index>{0};
    Engine engine(cfg, 3);
    auto recs = engine.process_batch(b);
    REQUIRE(recs.size() == 1);
    CHECK(recs[0].ok());
    CHECK(recs[0].beta_debiased == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(recs[0].p_value < 1e-6);
}

TEST_CASE("empty tracked set still advances the lasso") {
    std::mt19937_64 rng(7);
    EngineConfig cfg = tight_config(Family::bernoulli(), {0.01, 0.05});
    cfg.tracked = std::vector<Eigen::Index>{};
    Engine engine(cfg, 5);
    auto recs = engine.process_batch(oracle::logistic_batch(rng, 20, Eigen::VectorXd::Ones(5)));
    CHECK(recs.empty());
    CHECK(engine.state().lasso.b == 1);
    CHECK(engine.state().lasso.N == 20);
}

TEST_CASE("first batch equals the offline debiased lasso") {
    std::mt19937_64 rng(8);
    Eigen::VectorXd truth = Eigen::VectorXd::Zero(12);
    truth[0] = 1;
    truth[1] = 0.01;
    odl::Batch b = oracle::logistic_batch(rng, 30, truth);
    EngineConfig cfg = tight_config(Family::bernoulli(), {1e-4, 1e-3, 0.01, 0.05});
    Engine engine(cfg, 12);
    auto online = engine.process_batch(b);
    const double lambda = engine.state().lambda_history.front();
    std::vector<Eigen::Index> coords(12);
    for (Eigen::Index r = 0; r < 12; ++r) {
        coords[static_cast<std::size_t>(r)] = r;
    }
    auto offline = odl::offline_debiased({b.X, b.y}, lambda, cfg, coords);
    REQUIRE(offline.size() == online.size());
    for (std::size_t k = 0; k < online.size(); ++k) {
        CHECK(same_record(online[k], offline[k], 1e-8));
    }
}

TEST_CASE("three-batch debiased estimate against raw-data evaluation") {
    std::mt19937_64 rng(10);
    Eigen::VectorXd truth = Eigen::VectorXd::Zero(6);
    truth[0] = 1;
    truth[3] = -0.5;
    EngineConfig cfg = tight_config(Family::bernoulli(), {0.01, 0.05});
    Engine engine(cfg, 6);

    std::vector<odl::Batch> batches;
    std::vector<Eigen::VectorXd> betas;
    std::vector<std::vector<Eigen::VectorXd>> gammas;
    std::vector<odl::InferenceRecord> last;
    for (int j = 0; j < 3; ++j) {
        batches.push_back(oracle::logistic_batch(rng, 25, truth));
        last = engine.process_batch(batches.back());
        betas.push_back(engine.state().lasso.beta_hat);
        std::vector<Eigen::VectorXd> g;
        for (const auto& proj : engine.state().projections) {
            g.push_back(proj.gamma_hat);
        }
        gammas.push_back(g);
    }
    const Eigen::MatrixXd Jsum = oracle::logistic_information(batches[0].X, betas[0]) +
                                 oracle::logistic_information(batches[1].X, betas[1]) +
                                 oracle::logistic_information(batches[2].X, betas[2]);
    for (std::size_t k = 0; k < last.size(); ++k) {
        const Eigen::Index r = last[k].r;
        double debias = 0.0;
        double correction = 0.0;
        double v = 0.0;
        for (int j = 0; j < 3; ++j) {
            const odl::Batch& b = batches[j];
            Eigen::VectorXd gt(6);
            for (Eigen::Index c = 0, m = 0; c < 6; ++c) {
                gt[c] = c == r ? -1.0 : gammas[j][k][m++];
            }
            Eigen::VectorXd z = -b.X * gt;
            Eigen::VectorXd e(b.rows());
            for (Eigen::Index i = 0; i < b.rows(); ++i) {
                e[i] = b.y[i] - oracle::sigmoid(b.X.row(i).dot(betas[j]));
            }
            debias += z.dot(e);
            correction += gt.dot(oracle::logistic_information(b.X, betas[j]) * (betas[2] - betas[j]));
            v += z.dot(e) * z.dot(e);
        }
        Eigen::VectorXd g3(5);
        for (Eigen::Index c = 0, m = 0; c < 6; ++c) {
            if (c != r) {
                g3[m++] = Jsum(r, c);
            }
        }
        const double tau = Jsum(r, r) - g3.dot(gammas[2][k]);
        const double est = betas[2][r] + (debias + correction) / tau;
        CHECK(std::abs(last[k].beta_debiased - est) <= 1e-10);
        CHECK(std::abs(last[k].se - std::sqrt(v) / tau) <= 1e-10);
        CHECK(last[k].ci_low <= last[k].beta_debiased);
        CHECK(last[k].ci_high - last[k].beta_debiased ==
              doctest::Approx(last[k].beta_debiased - last[k].ci_low));
    }
}

TEST_CASE("counters and history") {
    std::mt19937_64 rng(12);
    Engine engine(tight_config(Family::bernoulli(), {0.01, 0.05}), 4);
    for (int j = 1; j <= 3; ++j) {
        engine.process_batch(oracle::logistic_batch(rng, 10, Eigen::VectorXd::Ones(4)));
        CHECK(engine.state().lasso.b == j);
        CHECK(engine.state().lasso.N == 10 * j);
        CHECK(engine.state().lambda_history.size() == static_cast<std::size_t>(j));
        CHECK(engine.state().lasso.candidates.size() == 2);
    }
}

TEST_CASE("empty batches are skipped with a warning") {
    LogCapture capture;
    Engine engine(EngineConfig{}, 3);
    odl::Batch empty{Eigen::MatrixXd(0, 3), Eigen::VectorXd(0)};
    CHECK(engine.process_batch(empty).empty());
    CHECK(engine.state().lasso.b == 0);
    CHECK(capture.contains("empty batch"));
}

TEST_CASE("small first batch warns") {
    LogCapture capture;
    std::mt19937_64 rng(1);
    Engine engine(tight_config(Family::bernoulli(), {0.05}), 100);
    engine.process_batch(oracle::logistic_batch(rng, 4, Eigen::VectorXd::Zero(100)));
    CHECK(capture.contains("log(p)"));
}

TEST_CASE("a degenerate coordinate does not abort the others") {
    std::mt19937_64 rng(14);
    odl::Batch b = oracle::gaussian_batch(rng, 15, Eigen::Vector3d(1, 0, 0), 0.3);
    b.X.col(1).setZero();
    EngineConfig cfg = tight_config(Family::gaussian(), {0.01});
    Engine engine(cfg, 3);
    auto recs = engine.process_batch(b);
    REQUIRE(recs.size() == 3);
    CHECK(recs[0].ok());
    CHECK_FALSE(recs[1].ok());
    CHECK(std::isnan(recs[1].se));
    CHECK(recs[2].ok());
}

TEST_CASE("intercept column") {
    std::mt19937_64 rng(15);
    odl::Batch b = oracle::gaussian_batch(rng, 40, Eigen::Vector2d(1, 0), 0.1);
    b.y.array() += 3.0;
    EngineConfig cfg = tight_config(Family::gaussian(), {0.5});
    cfg.intercept = true;
    Engine engine(cfg, 2);
    CHECK(engine.dim() == 3);
    auto recs = engine.process_batch(b);
    REQUIRE(recs.size() == 3);
    // A large penalty leaves the unpenalised intercept near the response mean.
    CHECK(engine.state().lasso.beta_hat[0] > 2.0);
    CHECK(engine.state().lasso.beta_hat[2] == 0.0);
}

TEST_CASE("configuration validation") {
    EngineConfig cfg;
    cfg.lambda_grid = {0.1, 0.01};
    CHECK_THROWS_AS(Engine(cfg, 3), std::invalid_argument);
    cfg.lambda_grid = {};
    CHECK_THROWS_AS(Engine(cfg, 3), std::invalid_argument);
    cfg = EngineConfig{};
    cfg.ci_level = 1.0;
    CHECK_THROWS_AS(Engine(cfg, 3), std::invalid_argument);
    cfg = EngineConfig{};
    cfg.tracked = std::vector<Eigen::Index>{5};
    CHECK_THROWS_AS(Engine(cfg, 3), std::invalid_argument);
    Engine ok(EngineConfig{}, 3);
    odl::Batch wrong{Eigen::MatrixXd::Zero(4, 2), Eigen::VectorXd::Zero(4)};
    CHECK_THROWS_AS(ok.process_batch(wrong), odl::DimensionError);
}

TEST_CASE("no raw batch memory is retained") {
    std::mt19937_64 rng(16);
    EngineConfig cfg = tight_config(Family::bernoulli(), {0.01, 0.05});
    Engine a(cfg, 5);
    Engine b(cfg, 5);
    auto first = std::make_shared<odl::Batch>(oracle::logistic_batch(rng, 10, Eigen::VectorXd::Ones(5)));
    std::weak_ptr<odl::Batch> watch = first;
    a.process_batch(*first);
    b.process_batch(*first);
    first.reset();
    CHECK(watch.expired());
    a.process_batch(oracle::logistic_batch(rng, 10, Eigen::VectorXd::Ones(5)));
    b.process_batch(oracle::logistic_batch(rng, 2000, Eigen::VectorXd::Ones(5)));
    // State size depends on p, the grid and the batch count, never on rows.
    CHECK(a.snapshot().size() == b.snapshot().size());
}

TEST_CASE("snapshots") {
    std::mt19937_64 rng(18);
    Eigen::VectorXd truth = Eigen::VectorXd::Zero(8);
    truth[0] = 1;
    std::vector<odl::Batch> stream;
    for (int j = 0; j < 5; ++j) {
        stream.push_back(oracle::logistic_batch(rng, 12, truth));
    }
    EngineConfig cfg;
    cfg.prox = odl::ProxConfig::fast();
    cfg.variance_mode = odl::VarianceMode::PerObservation;

    Engine straight(cfg, 8);
    std::vector<std::vector<odl::InferenceRecord>> expected;
    for (const auto& b : stream) {
        expected.push_back(straight.process_batch(b));
    }

    Engine first(cfg, 8);
    for (int j = 0; j < 2; ++j) {
        first.process_batch(stream[j]);
    }
    const std::vector<std::uint8_t> bytes = first.snapshot();

    SUBCASE("restore then snapshot reproduces the bytes") {
        CHECK(Engine::restore(bytes).snapshot() == bytes);
    }
    SUBCASE("resuming matches the uninterrupted run bit for bit") {
        Engine resumed = Engine::restore(bytes);
        for (int j = 2; j < 5; ++j) {
            auto recs = resumed.process_batch(stream[j]);
            REQUIRE(recs.size() == expected[j].size());
            for (std::size_t k = 0; k < recs.size(); ++k) {
                CHECK(identical(recs[k], expected[j][k]));
            }
        }
        CHECK(resumed.snapshot() == straight.snapshot());
    }
    SUBCASE("damaged snapshots are rejected") {
        std::vector<std::uint8_t> cut(bytes.begin(), bytes.end() - 9);
        try {
            Engine::restore(cut);
            FAIL("expected SnapshotError");
        } catch (const odl::SnapshotError& e) {
            CHECK(std::string(e.what()).find("checksum") != std::string::npos);
        }
        std::vector<std::uint8_t> flipped = bytes;
        flipped[bytes.size() / 2] ^= 0x01;
        CHECK_THROWS_AS(Engine::restore(flipped), odl::SnapshotError);
        std::vector<std::uint8_t> magic = bytes;
        magic[0] = 'X';
        CHECK_THROWS_AS(Engine::restore(magic), odl::SnapshotError);
        CHECK_THROWS_AS(Engine::restore(std::vector<std::uint8_t>(5, 0)), odl::SnapshotError);
    }
    SUBCASE("a different format version is refused") {
        std::vector<std::uint8_t> other = bytes;
        other[8] = 99;  // version field follows the 8-byte magic
        std::uint64_t h = 14695981039346656037ULL;  // FNV-1a over everything but the trailer
        for (std::size_t i = 0; i + 8 < other.size(); ++i) {
            h = (h ^ other[i]) * 1099511628211ULL;
        }
        for (int i = 0; i < 8; ++i) {
            other[other.size() - 8 + static_cast<std::size_t>(i)] =
                static_cast<std::uint8_t>(h >> (8 * i));
        }
        try {
            Engine::restore(other);
            FAIL("expected SnapshotError");
        } catch (const odl::SnapshotError& e) {
            CHECK(std::string(e.what()).find("version") != std::string::npos);
        }
    }
}
