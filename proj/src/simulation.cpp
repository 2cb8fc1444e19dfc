#include "odl/simulation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>

#include "odl/normal.hpp"
#include "odl/offline.hpp"
#include "odl/parallel.hpp"

namespace odl {

std::string_view sigma_name(SigmaKind kind) {
    return kind == SigmaKind::Identity ? "identity" : "ar";
}

SigmaKind parse_sigma(std::string_view name) {
    if (name == "identity" || name == "I") {
        return SigmaKind::Identity;
    }
    if (name == "ar" || name == "ar-half" || name == "ar1") {
        return SigmaKind::ArHalf;
    }
    throw std::invalid_argument("unknown covariance kind '" + std::string(name) + "'");
}

SimConfig SimConfig::setting(int which, SigmaKind sigma) {
    SimConfig cfg;
    cfg.sigma = sigma;
    if (which == 1) {
        cfg.batch_sizes.assign(12, 10);
        cfg.p = 100;
        cfg.s0 = 6;
    } else if (which == 2) {
        cfg.batch_sizes.assign(12, 52);
        cfg.p = 600;
        cfg.s0 = 10;
    } else {
        throw std::invalid_argument("unknown setting " + std::to_string(which));
    }
    cfg.report_at = {2, 4, 6, 8, 10, 12};
    return cfg;
}

std::int64_t SimConfig::total_rows() const {
    return std::accumulate(batch_sizes.begin(), batch_sizes.end(), std::int64_t{0});
}

void SimConfig::validate() const {
    if (batch_sizes.empty()) {
        throw std::invalid_argument("simulation needs at least one batch");
    }
    for (Eigen::Index n : batch_sizes) {
        if (n < 1) {
            throw std::invalid_argument("batch sizes must be positive");
        }
    }
    if (p < 2 || s0 < 0 || s0 > p) {
        throw std::invalid_argument("need p >= 2 and 0 <= s0 <= p");
    }
    if (replications < 1 || first_replication < 0) {
        throw std::invalid_argument("need at least one replication and a nonnegative first index");
    }
    for (std::int64_t b : report_at) {
        if (b < 1 || b > static_cast<std::int64_t>(batch_sizes.size())) {
            throw std::invalid_argument("report index " + std::to_string(b) + " outside the stream");
        }
    }
    engine.validate();
}

Eigen::VectorXd SimConfig::true_beta() const {
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    const Eigen::Index strong = (s0 + 1) / 2;
    for (Eigen::Index k = 0; k < s0; ++k) {
        beta[k] = k < strong ? strong_value : weak_value;
    }
    return beta;
}

std::uint64_t replication_seed(std::uint64_t seed, int rep) {
    // splitmix64 finaliser over the pair
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(rep) + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::vector<Batch> generate_stream(const SimConfig& config, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    const Eigen::VectorXd beta0 = config.true_beta();
    const double innovation = std::sqrt(0.75);

    std::vector<Batch> stream;
    stream.reserve(config.batch_sizes.size());
    for (Eigen::Index n : config.batch_sizes) {
        Batch batch;
        batch.X.resize(n, config.p);
        batch.y.resize(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index k = 0; k < config.p; ++k) {
                const double e = normal(rng);
                batch.X(i, k) = (config.sigma == SigmaKind::ArHalf && k > 0)
                                    ? 0.5 * batch.X(i, k - 1) + innovation * e
                                    : e;
            }
            const double t = batch.X.row(i).dot(beta0);
            const double mu = 1.0 / (1.0 + std::exp(-t));
            batch.y[i] = uniform(rng) < mu ? 1.0 : 0.0;
        }
        stream.push_back(std::move(batch));
    }
    return stream;
}

Group group_of(double beta0_value) {
    if (beta0_value == 0.0) {
        return Group::Zero;
    }
    return std::abs(beta0_value) >= 0.5 ? Group::Strong : Group::Weak;
}

std::array<GroupMetrics, 3> group_metrics(const EstimateSet& set, const Eigen::VectorXd& beta0,
                                          double ci_level) {
    const double z = normal_quantile(0.5 + 0.5 * ci_level);
    const std::size_t reps = set.est.size();
    const Eigen::Index p = beta0.size();

    struct Sums {
        double abias = 0, mae = 0, ase = 0, cp = 0, acl = 0, ese = 0;
        std::int64_t n = 0, errors = 0, coords = 0, ese_coords = 0;
        std::vector<double> abs_err;
    };
    std::array<Sums, 3> sums;

    std::vector<Eigen::Index> coords = set.coords;
    if (coords.empty()) {
        coords.resize(static_cast<std::size_t>(p));
        std::iota(coords.begin(), coords.end(), Eigen::Index{0});
    }
    for (Eigen::Index r : coords) {
        Sums& s = sums[static_cast<std::size_t>(group_of(beta0[r]))];
        double mean = 0.0;
        double m2 = 0.0;
        std::int64_t count = 0;
        for (std::size_t rep = 0; rep < reps; ++rep) {
            const auto k = static_cast<std::size_t>(r);
            const double est = set.est[rep][k];
            const double se = set.se[rep][k];
            if (!set.ok[rep][k] || !std::isfinite(est) || !std::isfinite(se)) {
                ++s.errors;
                continue;
            }
            s.mae += std::abs(est - beta0[r]);
            s.abs_err.push_back(std::abs(est - beta0[r]));
            s.ase += se;
            s.acl += 2.0 * z * se;
            s.cp += (std::abs(est - beta0[r]) <= z * se) ? 1.0 : 0.0;
            ++s.n;
            ++count;
            const double delta = est - mean;
            mean += delta / static_cast<double>(count);
            m2 += delta * (est - mean);
        }
        if (count > 0) {
            s.abias += std::abs(mean - beta0[r]);
            ++s.coords;
        }
        if (count > 1) {
            s.ese += std::sqrt(m2 / static_cast<double>(count - 1));
            ++s.ese_coords;
        }
    }

    std::array<GroupMetrics, 3> out{};
    for (std::size_t g = 0; g < 3; ++g) {
        Sums& s = sums[g];
        GroupMetrics& m = out[g];
        m.records = s.n;
        m.errors = s.errors;
        if (s.n > 0) {
            const double n = static_cast<double>(s.n);
            m.abias = s.abias / static_cast<double>(s.coords);
            m.mae = s.mae / n;
            auto mid = s.abs_err.begin() + static_cast<std::ptrdiff_t>(s.abs_err.size() / 2);
            std::nth_element(s.abs_err.begin(), mid, s.abs_err.end());
            m.median_ae = *mid;
            m.ase = s.ase / n;
            m.cp = s.cp / n;
            m.acl = s.acl / n;
        }
        if (s.ese_coords > 0) {
            m.ese = s.ese / static_cast<double>(s.ese_coords);
        }
    }
    return out;
}

namespace {

EstimateSet make_set(int reps, Eigen::Index p) {
    EstimateSet set;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    set.est.assign(reps, std::vector<double>(p, nan));
    set.se.assign(reps, std::vector<double>(p, nan));
    set.ok.assign(reps, std::vector<bool>(p, false));
    return set;
}

struct ReplicationOutput {
    // Indexed by reported batch.
    std::vector<std::vector<InferenceRecord>> records;
    std::vector<double> lambdas;
    SolveStats lasso, candidates, projections, offline_projections;
    std::vector<InferenceRecord> offline;
    MleResult mle;
    double odl_seconds = 0, offline_seconds = 0, mle_seconds = 0;
    std::string error;
};

void merge(SolveStats& into, const SolveStats& from) {
    into.solves += from.solves;
    into.converged += from.converged;
    into.iterations += from.iterations;
    into.max_kkt = std::max(into.max_kkt, from.max_kkt);
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace

SimulationResult run_replications(const SimConfig& config, const ReplicationObserver& observer) {
    config.validate();
    const Eigen::VectorXd beta0 = config.true_beta();
    const Eigen::Index p = config.p;
    const int reps = config.replications;

    EngineConfig engine_cfg = config.engine;
    if (!engine_cfg.tracked) {
        std::vector<Eigen::Index> all(static_cast<std::size_t>(p));
        std::iota(all.begin(), all.end(), Eigen::Index{0});
        engine_cfg.tracked = all;
    }
    const std::vector<Eigen::Index> coords = *engine_cfg.tracked;

    std::vector<ReplicationOutput> outputs(static_cast<std::size_t>(reps));
    parallel_for(outputs.size(), [&](std::size_t rep) {
        ReplicationOutput& out = outputs[rep];
        const std::vector<Batch> stream =
            generate_stream(config, replication_seed(config.seed, config.first_replication +
                                                                     static_cast<int>(rep)));
        try {
            const auto start = Clock::now();
            Engine engine(engine_cfg, p);
            for (std::size_t j = 0; j < stream.size(); ++j) {
                std::vector<InferenceRecord> recs = engine.process_batch(stream[j]);
                const BatchDiagnostics& d = engine.last_diagnostics();
                merge(out.lasso, d.lasso);
                merge(out.candidates, d.candidates);
                merge(out.projections, d.projections);
                if (observer) {
                    observer(config.first_replication + static_cast<int>(rep), engine, recs);
                }
                const auto b = static_cast<std::int64_t>(j + 1);
                if (std::find(config.report_at.begin(), config.report_at.end(), b) !=
                    config.report_at.end()) {
                    out.records.push_back(std::move(recs));
                    out.lambdas.push_back(d.lambda);
                }
            }
            out.odl_seconds = seconds_since(start);

            if (config.baselines) {
                const FullDataset full = FullDataset::concatenate(stream);
                auto t0 = Clock::now();
                out.mle = irls_mle(full, config.engine.family);
                out.mle_seconds = seconds_since(t0);

                t0 = Clock::now();
                const double lambda = initial_lambda(full.as_batch(), engine_cfg).lambda;
                EngineConfig off_cfg = engine_cfg;
                off_cfg.lambda_grid = {lambda};
                Engine offline(off_cfg, p);
                out.offline = offline.process_batch(full.as_batch());
                merge(out.offline_projections, offline.last_diagnostics().projections);
                out.offline_seconds = seconds_since(t0);
            }
        } catch (const std::exception& e) {
            out.error = e.what();
        }
    });

    SimulationResult result;
    MetricsTable& table = result.table;
    table.replications = reps;
    table.has_baselines = config.baselines;
    for (double v : {0.0, config.weak_value, config.strong_value}) {
        std::ostringstream os;
        os << v;
        table.group_labels.push_back(os.str());
    }
    std::vector<std::int64_t> reported = config.report_at;
    std::sort(reported.begin(), reported.end());
    reported.erase(std::unique(reported.begin(), reported.end()), reported.end());
    table.batch_indices = reported;
    table.lambda_counts.resize(reported.size());

    std::vector<EstimateSet> odl_sets(reported.size(), make_set(reps, p));
    for (EstimateSet& set : odl_sets) {
        set.coords = coords;
    }
    EstimateSet mle_set = make_set(reps, p);
    EstimateSet offline_set = make_set(reps, p);
    offline_set.coords = coords;
    const std::size_t last = reported.size() - 1;

    for (std::size_t rep = 0; rep < outputs.size(); ++rep) {
        const ReplicationOutput& out = outputs[rep];
        if (!out.error.empty()) {
            ++table.failed_replications;
            continue;
        }
        merge(result.diagnostics.lasso, out.lasso);
        merge(result.diagnostics.candidates, out.candidates);
        merge(result.diagnostics.projections, out.projections);
        merge(result.diagnostics.offline_projections, out.offline_projections);
        table.odl_seconds += out.odl_seconds;
        table.offline_seconds += out.offline_seconds;
        table.mle_seconds += out.mle_seconds;
        for (std::size_t k = 0; k < reported.size(); ++k) {
            table.lambda_counts[k][out.lambdas[k]] += 1;
            for (const InferenceRecord& rec : out.records[k]) {
                const auto r = static_cast<std::size_t>(rec.r);
                odl_sets[k].est[rep][r] = rec.beta_debiased;
                odl_sets[k].se[rep][r] = rec.se;
                odl_sets[k].ok[rep][r] = rec.ok();
                if (k == last && rec.ok() && beta0[rec.r] == 0.0 && rec.se > 0.0) {
                    result.diagnostics.standardized_zero.push_back(rec.beta_debiased / rec.se);
                }
            }
        }
        if (config.baselines) {
            if (!out.mle.converged) {
                ++table.mle_nonconverged;
            }
            for (Eigen::Index r = 0; r < p; ++r) {
                const auto k = static_cast<std::size_t>(r);
                mle_set.est[rep][k] = out.mle.beta[r];
                mle_set.se[rep][k] = out.mle.se[r];
                mle_set.ok[rep][k] = true;
            }
            for (const InferenceRecord& rec : out.offline) {
                const auto r = static_cast<std::size_t>(rec.r);
                offline_set.est[rep][r] = rec.beta_debiased;
                offline_set.se[rep][r] = rec.se;
                offline_set.ok[rep][r] = rec.ok();
            }
        }
    }

    const double level = config.engine.ci_level;
    for (const EstimateSet& set : odl_sets) {
        table.odl.push_back(group_metrics(set, beta0, level));
    }
    if (config.baselines) {
        table.mle = group_metrics(mle_set, beta0, level);
        table.offline = group_metrics(offline_set, beta0, level);
    }
    return result;
}

}  // namespace odl
