// odl: simulate, stream-fit and report subcommands.
//
// Exit codes: 0 success, 1 runtime or data error, 2 usage error.

#include <chrono>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "CLI11.hpp"
#include "cli_support.hpp"
#include "json.hpp"
#include "odl/engine.hpp"
#include "odl/log.hpp"
#include "odl/parallel.hpp"
#include "odl/simulation.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace odl;
using namespace odl::cli;

#ifndef ODL_VERSION
#define ODL_VERSION "0.0.0"
#endif

namespace {

/// Bad flag values detected after parsing; reported like CLI11 errors.
class UsageError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

constexpr char kSnapshotMagic[8] = {'O', 'D', 'L', 'S', 'T', 'R', 'M', '1'};

json versions() {
    return {{"odl", ODL_VERSION},
            {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                          "." + std::to_string(EIGEN_MINOR_VERSION)},
            {"compiler", __VERSION__}};
}

void write_manifest(const fs::path& dir, const std::string& command, json config,
                    std::optional<std::uint64_t> seed, double seconds,
                    const std::vector<fs::path>& files) {
    json list = json::array();
    for (const fs::path& f : files) {
        list.push_back(f.string());
    }
    json m{{"command", command},
           {"config", std::move(config)},
           {"seed", seed ? json(*seed) : json(nullptr)},
           {"versions", versions()},
           {"threads", worker_count()},
           {"timing", {{"wall_seconds", seconds}}},
           {"files", list}};
    write_atomic(dir / "manifest.json", m.dump(2) + "\n");
}

ProxConfig solver_preset(const std::string& name) {
    return name == "reference" ? ProxConfig{} : ProxConfig::fast();
}

json prox_json(const ProxConfig& p) {
    return {{"learning_rate", p.learning_rate},
            {"step_rule", p.step_rule == StepRule::Fixed ? "fixed" : "curvature"},
            {"curvature_scale", p.curvature_scale},
            {"projection_solver", p.solver == Solver::Proximal ? "proximal" : "coordinate-descent"},
            {"accelerate", p.accelerate},
            {"stop_tol", p.stop_tol},
            {"max_iter", p.max_iter}};
}

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json metrics_json(const GroupMetrics& m) {
    return {{"abias", number(m.abias)}, {"mae", number(m.mae)}, {"median_ae", number(m.median_ae)},
            {"ase", number(m.ase)},     {"ese", number(m.ese)}, {"cp", number(m.cp)},
            {"acl", number(m.acl)},     {"records", m.records}, {"errors", m.errors}};
}

json stats_json(const SolveStats& s) {
    return {{"solves", s.solves},
            {"converged", s.converged},
            {"iterations", s.iterations},
            {"max_kkt", number(s.max_kkt)}};
}

// ---------------------------------------------------------------- simulate

struct SimulateOptions {
    int setting = 1;
    std::string sigma = "identity";
    int reps = 200;
    std::uint64_t seed = 1;
    int first_replication = 0;
    std::string out = ".";
    bool baselines = false;
    std::string variance_mode = "as-written";
    std::string solver = "fast";
};

int run_simulate(const SimulateOptions& o) {
    const auto start = std::chrono::steady_clock::now();
    SimConfig cfg = SimConfig::setting(o.setting, parse_sigma(o.sigma));
    cfg.replications = o.reps;
    cfg.first_replication = o.first_replication;
    cfg.seed = o.seed;
    cfg.baselines = o.baselines;
    cfg.engine.variance_mode = parse_variance_mode(o.variance_mode);
    cfg.engine.prox = solver_preset(o.solver);
    cfg.validate();

    const SimulationResult result = run_replications(cfg);
    const MetricsTable& t = result.table;

    const fs::path dir(o.out);
    fs::create_directories(dir);

    struct Column {
        const char* name;
        double GroupMetrics::*field;
    };
    const Column columns[] = {{"A.bias", &GroupMetrics::abias},
                              {"ASE", &GroupMetrics::ase},
                              {"ESE", &GroupMetrics::ese},
                              {"CP", &GroupMetrics::cp},
                              {"ACL", &GroupMetrics::acl}};
    std::ostringstream csv;
    csv << "metric,group";
    for (std::int64_t b : t.batch_indices) {
        csv << "," << b;
    }
    if (t.has_baselines) {
        csv << ",mle,offline";
    }
    csv << "\n";
    for (const Column& c : columns) {
        for (std::size_t g = 0; g < kGroups.size(); ++g) {
            csv << c.name << "," << t.group_labels[g];
            for (const auto& row : t.odl) {
                csv << "," << format_double(row[g].*c.field);
            }
            if (t.has_baselines) {
                csv << "," << format_double(t.mle[g].*c.field) << ","
                    << format_double(t.offline[g].*c.field);
            }
            csv << "\n";
        }
    }
    write_atomic(dir / "metrics.csv", csv.str());

    json odl_cols = json::array();
    for (std::size_t k = 0; k < t.batch_indices.size(); ++k) {
        json groups = json::object();
        for (std::size_t g = 0; g < kGroups.size(); ++g) {
            groups[t.group_labels[g]] = metrics_json(t.odl[k][g]);
        }
        json lambdas = json::object();
        for (const auto& [lambda, count] : t.lambda_counts[k]) {
            lambdas[format_double(lambda)] = count;
        }
        odl_cols.push_back(
            {{"batch_index", t.batch_indices[k]}, {"groups", groups}, {"lambda_counts", lambdas}});
    }
    json doc{{"setting", o.setting},
             {"sigma", std::string(sigma_name(cfg.sigma))},
             {"replications", t.replications},
             {"failed_replications", t.failed_replications},
             {"odl", odl_cols},
             {"timing",
              {{"odl_seconds", t.odl_seconds},
               {"offline_seconds", t.offline_seconds},
               {"mle_seconds", t.mle_seconds}}},
             {"solver_stats",
              {{"lasso", stats_json(result.diagnostics.lasso)},
               {"candidates", stats_json(result.diagnostics.candidates)},
               {"projections", stats_json(result.diagnostics.projections)},
               {"offline_projections", stats_json(result.diagnostics.offline_projections)}}}};
    if (t.has_baselines) {
        json mle = json::object();
        json off = json::object();
        for (std::size_t g = 0; g < kGroups.size(); ++g) {
            mle[t.group_labels[g]] = metrics_json(t.mle[g]);
            off[t.group_labels[g]] = metrics_json(t.offline[g]);
        }
        doc["mle"] = mle;
        doc["mle_nonconverged"] = t.mle_nonconverged;
        doc["offline"] = off;
    }
    write_atomic(dir / "metrics.json", doc.dump(2) + "\n");

    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    json config{{"setting", o.setting},         {"sigma", o.sigma},
                {"reps", o.reps},               {"first_replication", o.first_replication},
                {"baselines", o.baselines},     {"variance_mode", o.variance_mode},
                {"solver", o.solver},           {"prox", prox_json(cfg.engine.prox)},
                {"out", o.out}};
    write_manifest(dir, "simulate", config, o.seed, seconds,
                   {dir / "metrics.csv", dir / "metrics.json", dir / "manifest.json"});
    return 0;
}

// -------------------------------------------------------------- stream-fit

struct StreamOptions {
    std::string input = "-";
    std::string output = "records.csv";
    std::string family = "bernoulli";
    std::string track;
    std::string grid;
    bool intercept = false;
    double ci_level = 0.95;
    std::string variance_mode = "as-written";
    std::string solver = "fast";
    std::int64_t snapshot_every = 0;
    std::string snapshot;
    std::string resume;
    std::int64_t max_batches = -1;
};

// Stream snapshots wrap the engine snapshot with the number of input batches
// already consumed, which differs from the engine's batch counter when the
// input contains empty batches.
std::vector<std::uint8_t> wrap_snapshot(const Engine& engine, std::int64_t consumed) {
    std::vector<std::uint8_t> out(kSnapshotMagic, kSnapshotMagic + 8);
    for (int k = 0; k < 8; ++k) {
        out.push_back(static_cast<std::uint8_t>(static_cast<std::uint64_t>(consumed) >> (8 * k)));
    }
    const std::vector<std::uint8_t> inner = engine.snapshot();
    out.insert(out.end(), inner.begin(), inner.end());
    return out;
}

std::pair<Engine, std::int64_t> unwrap_snapshot(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 16 || std::memcmp(bytes.data(), kSnapshotMagic, 8) != 0) {
        throw SnapshotError("not a stream-fit snapshot (bad magic)");
    }
    std::uint64_t consumed = 0;
    for (int k = 0; k < 8; ++k) {
        consumed |= static_cast<std::uint64_t>(bytes[8 + k]) << (8 * k);
    }
    Engine engine = Engine::restore(std::span<const std::uint8_t>(bytes).subspan(16));
    return {std::move(engine), static_cast<std::int64_t>(consumed)};
}

std::int64_t user_coord(const EngineConfig& cfg, Eigen::Index column) {
    return cfg.intercept ? column : column + 1;
}

int run_stream_fit(const StreamOptions& o, const CLI::App& app) {
    std::ifstream file;
    std::istream* in = &std::cin;
    if (o.input != "-") {
        file.open(o.input, std::ios::binary);
        if (!file) {
            throw std::runtime_error("cannot open input " + o.input);
        }
        in = &file;
    }
    BatchReader reader(*in);
    const auto start = std::chrono::steady_clock::now();
    const fs::path out_path(o.output);
    if (out_path.has_parent_path()) {
        fs::create_directories(out_path.parent_path());
    }

    std::vector<std::string> lines;
    std::optional<Engine> engine;
    std::int64_t skip = 0;

    if (!o.resume.empty()) {
        for (const char* flag : {"--family", "--track", "--grid", "--intercept", "--ci-level",
                                 "--variance-mode", "--solver"}) {
            if (app.count(flag) > 0) {
                throw UsageError(std::string(flag) +
                                 " cannot be combined with --resume; the snapshot fixes the model");
            }
        }
        auto [restored, consumed] = unwrap_snapshot(read_bytes(o.resume));
        engine.emplace(std::move(restored));
        skip = consumed;
        // Keep rows up to the snapshot point from the earlier run.
        const std::int64_t done = engine->state().lasso.b;
        std::ifstream prev(out_path);
        if (prev) {
            std::string line;
            std::getline(prev, line);
            while (std::getline(prev, line)) {
                if (line.empty()) {
                    continue;
                }
                const std::int64_t b = std::stoll(line.substr(0, line.find(',')));
                if (b <= done) {
                    lines.push_back(line);
                }
            }
        }
        if (reader.width() && *reader.width() != engine->width()) {
            throw std::runtime_error("input has " + std::to_string(*reader.width()) +
                                     " covariates but the snapshot expects " +
                                     std::to_string(engine->width()));
        }
    } else if (reader.width()) {
        EngineConfig cfg;
        cfg.family = Family{parse_family(o.family), 1.0};
        cfg.intercept = o.intercept;
        cfg.ci_level = o.ci_level;
        cfg.variance_mode = parse_variance_mode(o.variance_mode);
        cfg.prox = solver_preset(o.solver);
        if (!o.grid.empty()) {
            cfg.lambda_grid = parse_number_list(o.grid);
        }
        if (!o.track.empty()) {
            std::vector<Eigen::Index> cols;
            const std::int64_t lo = o.intercept ? 0 : 1;
            for (std::int64_t c : parse_index_list(o.track)) {
                if (c < lo || c > *reader.width()) {
                    throw UsageError("--track coordinate " + std::to_string(c) + " outside [" +
                                     std::to_string(lo) + ", " + std::to_string(*reader.width()) + "]");
                }
                cols.push_back(o.intercept ? c : c - 1);
            }
            cfg.tracked = cols;
        }
        engine.emplace(cfg, *reader.width());
    }

    auto flush = [&](std::int64_t consumed) {
        std::string text = std::string(kRecordHeader) + "\n";
        for (const std::string& l : lines) {
            text += l;
            text += "\n";
        }
        write_atomic(out_path, text);
        if (!o.snapshot.empty() && engine) {
            write_atomic(o.snapshot, wrap_snapshot(*engine, consumed));
        }
    };

    std::int64_t processed = 0;
    while (engine) {
        if (o.max_batches >= 0 && reader.consumed() >= skip + o.max_batches) {
            break;
        }
        std::optional<Batch> batch = reader.next();
        if (!batch) {
            break;
        }
        if (reader.consumed() <= skip) {
            continue;
        }
        for (const InferenceRecord& r : engine->process_batch(*batch)) {
            RecordRow row;
            row.batch_index = r.batch_index;
            row.coord = user_coord(engine->config(), r.r);
            row.lambda = r.lambda_used;
            const double nan = std::nan("");
            row.beta_lasso = r.beta_lasso;
            row.beta_debiased = r.ok() ? r.beta_debiased : nan;
            row.se = r.ok() ? r.se : nan;
            row.ci_low = r.ok() ? r.ci_low : nan;
            row.ci_high = r.ok() ? r.ci_high : nan;
            row.p_value = r.ok() ? r.p_value : nan;
            if (!r.ok()) {
                log_warning("batch " + std::to_string(r.batch_index) + ", coord " +
                            std::to_string(row.coord) + ": " + r.error);
            }
            lines.push_back(format_record(row));
        }
        ++processed;
        if (o.snapshot_every > 0 && processed % o.snapshot_every == 0) {
            flush(reader.consumed());
        }
    }
    if (skip > 0 && reader.consumed() < skip) {
        throw std::runtime_error("input ends after " + std::to_string(reader.consumed()) +
                                 " batches but the snapshot had consumed " + std::to_string(skip));
    }
    flush(reader.consumed());

    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    json config{{"input", o.input},
                {"output", o.output},
                {"resume", o.resume},
                {"snapshot", o.snapshot},
                {"snapshot_every", o.snapshot_every},
                {"max_batches", o.max_batches},
                {"batches_read", reader.consumed()},
                {"batches_processed", processed}};
    if (engine) {
        const EngineConfig& c = engine->config();
        json tracked = json::array();
        for (Eigen::Index r : engine->state().tracked) {
            tracked.push_back(user_coord(c, r));
        }
        config["family"] = std::string(family_name(c.family.kind));
        config["grid"] = c.lambda_grid;
        config["intercept"] = c.intercept;
        config["ci_level"] = c.ci_level;
        config["variance_mode"] = std::string(variance_mode_name(c.variance_mode));
        config["prox"] = prox_json(c.prox);
        config["track"] = tracked;
    }
    std::vector<fs::path> files{out_path};
    if (!o.snapshot.empty() && engine) {
        files.emplace_back(o.snapshot);
    }
    const fs::path dir = out_path.has_parent_path() ? out_path.parent_path() : fs::path(".");
    files.push_back(dir / "manifest.json");
    write_manifest(dir, "stream-fit", config, std::nullopt, seconds, files);
    return 0;
}

// ------------------------------------------------------------------ report

struct ReportOptions {
    std::string records;
    std::string out = "report";
};

int run_report(const ReportOptions& o) {
    const auto start = std::chrono::steady_clock::now();
    std::ifstream in(o.records);
    if (!in) {
        throw std::runtime_error("cannot open records " + o.records);
    }
    const std::vector<RecordRow> rows = read_records(in);
    std::map<std::int64_t, std::vector<const RecordRow*>> by_coord;
    for (const RecordRow& r : rows) {
        by_coord[r.coord].push_back(&r);
    }

    std::string trace = "coord,batch_index,neg_log10_p\n";
    std::string bands = "coord,batch_index,estimate,ci_low,ci_high\n";
    std::string auc = "coord,points,auc\n";
    for (auto& [coord, list] : by_coord) {
        std::stable_sort(list.begin(), list.end(), [](const RecordRow* a, const RecordRow* b) {
            return a->batch_index < b->batch_index;
        });
        std::vector<std::int64_t> idx;
        std::vector<double> p;
        for (const RecordRow* r : list) {
            const std::string head = std::to_string(coord) + "," + std::to_string(r->batch_index) + ",";
            bands += head + format_double(r->beta_debiased) + "," + format_double(r->ci_low) + "," +
                     format_double(r->ci_high) + "\n";
            if (std::isnan(r->p_value)) {
                continue;
            }
            trace += head + format_double(-std::log10(std::max(r->p_value, kPValueFloor))) + "\n";
            idx.push_back(r->batch_index);
            p.push_back(r->p_value);
        }
        auc += std::to_string(coord) + "," + std::to_string(idx.size()) + "," +
               format_double(normalized_auc(idx, p)) + "\n";
    }

    const fs::path dir(o.out);
    fs::create_directories(dir);
    write_atomic(dir / "trace.csv", trace);
    write_atomic(dir / "bands.csv", bands);
    write_atomic(dir / "auc.csv", auc);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_manifest(dir, "report", {{"records", o.records}, {"out", o.out}, {"rows", rows.size()}},
                   std::nullopt, seconds,
                   {dir / "trace.csv", dir / "bands.csv", dir / "auc.csv", dir / "manifest.json"});
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Online debiased lasso for streaming GLM data"};
    app.set_version_flag("--version", ODL_VERSION);
    app.require_subcommand(1);

    SimulateOptions sim;
    CLI::App* simulate = app.add_subcommand("simulate", "Monte-Carlo study of the logistic designs");
    simulate->add_option("--setting", sim.setting, "1: p=100, batches of 10; 2: p=600, batches of 52")
        ->check(CLI::IsMember({1, 2}));
    simulate->add_option("--sigma", sim.sigma, "Covariate covariance")
        ->check(CLI::IsMember({"identity", "ar-half"}));
    simulate->add_option("--reps", sim.reps, "Replications")->check(CLI::PositiveNumber);
    simulate->add_option("--seed", sim.seed, "Base seed");
    simulate->add_option("--first-replication", sim.first_replication,
                         "Index of the first replication, for pooling runs")
        ->check(CLI::NonNegativeNumber);
    simulate->add_option("--out", sim.out, "Output directory");
    simulate->add_flag("--baselines", sim.baselines, "Also fit the full-data MLE and offline debiased lasso");
    simulate->add_option("--variance-mode", sim.variance_mode, "Variance accumulator")
        ->check(CLI::IsMember({"as-written", "per-observation"}));
    simulate->add_option("--solver", sim.solver,
                         "fast: curvature steps with momentum; reference: fixed step 0.005")
        ->check(CLI::IsMember({"fast", "reference"}));

    StreamOptions st;
    CLI::App* stream = app.add_subcommand("stream-fit", "Fit a stream of '#batch'-separated CSV blocks");
    stream->add_option("--input", st.input, "Batch file, or '-' for stdin");
    stream->add_option("--output", st.output, "Records CSV");
    stream->add_option("--family", st.family, "Response family")
        ->check(CLI::IsMember({"bernoulli", "gaussian", "poisson"}));
    stream->add_option("--track", st.track,
                       "Comma-separated coordinates: k for column xk, 0 for the intercept");
    stream->add_option("--grid", st.grid, "Comma-separated lambda grid");
    stream->add_flag("--intercept", st.intercept, "Add an unpenalised intercept");
    stream->add_option("--ci-level", st.ci_level, "Confidence level")->check(CLI::Range(0.5, 0.999999));
    stream->add_option("--variance-mode", st.variance_mode, "Variance accumulator")
        ->check(CLI::IsMember({"as-written", "per-observation"}));
    stream->add_option("--solver", st.solver, "fast or reference")
        ->check(CLI::IsMember({"fast", "reference"}));
    stream->add_option("--snapshot", st.snapshot, "Snapshot file, written at the end of the run");
    stream->add_option("--snapshot-every", st.snapshot_every, "Also snapshot every k batches")
        ->check(CLI::NonNegativeNumber);
    stream->add_option("--resume", st.resume, "Continue from a snapshot, appending to --output");
    stream->add_option("--max-batches", st.max_batches, "Stop after this many new batches")
        ->check(CLI::NonNegativeNumber);

    ReportOptions rep;
    CLI::App* report = app.add_subcommand("report", "Traces, CI bands and AUC from a records file");
    report->add_option("--records", rep.records, "Records CSV from stream-fit")->required();
    report->add_option("--out", rep.out, "Output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (simulate->parsed()) {
            return run_simulate(sim);
        }
        if (stream->parsed()) {
            if (st.snapshot_every > 0 && st.snapshot.empty()) {
                throw UsageError("--snapshot-every requires --snapshot");
            }
            return run_stream_fit(st, *stream);
        }
        return run_report(rep);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n" << app.help();
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
