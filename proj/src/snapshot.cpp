// Binary snapshot of an Engine.
//
// Layout (all integers and floats little-endian):
//   magic "ODLSNAP\0" | u32 version | u64 p | u64 b | u64 N | u32 family | f64[] grid
//   config block | state block | u64 FNV-1a checksum of every preceding byte
// Every array is written as a u64 element count followed by its elements.

#include <bit>
#include <cstring>

#include "odl/engine.hpp"

namespace odl {

static_assert(std::endian::native == std::endian::little,
              "snapshot encoding assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'O', 'D', 'L', 'S', 'N', 'A', 'P', '\0'};
constexpr std::uint32_t kVersion = 1;

std::uint64_t fnv1a(std::span<const std::uint8_t> bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::uint8_t c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

class Writer {
  public:
    template <typename T>
    void put(T value) {
        static_assert(std::is_trivially_copyable_v<T>);
        const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
        out_.insert(out_.end(), p, p + sizeof(T));
    }
    void put_vector(const Eigen::VectorXd& v) {
        put<std::uint64_t>(static_cast<std::uint64_t>(v.size()));
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            put<double>(v[i]);
        }
    }
    void put_doubles(const std::vector<double>& v) {
        put<std::uint64_t>(v.size());
        for (double x : v) {
            put<double>(x);
        }
    }
    std::vector<std::uint8_t> finish() {
        const std::uint64_t sum = fnv1a(out_);
        put<std::uint64_t>(sum);
        return std::move(out_);
    }

  private:
    std::vector<std::uint8_t> out_;
};

class Reader {
  public:
    explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    template <typename T>
    T get() {
        if (pos_ + sizeof(T) > bytes_.size()) {
            throw SnapshotError("snapshot: unexpected end of data");
        }
        T value;
        std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return value;
    }
    std::uint64_t get_count(std::uint64_t limit) {
        const auto n = get<std::uint64_t>();
        if (n > limit) {
            throw SnapshotError("snapshot: array length out of range");
        }
        return n;
    }
    Eigen::VectorXd get_vector(std::uint64_t expected) {
        const std::uint64_t n = get_count(expected);
        if (n != expected) {
            throw SnapshotError("snapshot: array length mismatch");
        }
        Eigen::VectorXd v(static_cast<Eigen::Index>(n));
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            v[i] = get<double>();
        }
        return v;
    }
    std::vector<double> get_doubles() {
        const std::uint64_t n = get_count(remaining() / sizeof(double));
        std::vector<double> v(n);
        for (double& x : v) {
            x = get<double>();
        }
        return v;
    }
    std::size_t remaining() const { return bytes_.size() - pos_; }

  private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> Engine::snapshot() const {
    Writer w;
    const auto p = static_cast<std::uint64_t>(dim());
    const LassoState& lasso = state_.lasso;
    for (char c : kMagic) {
        w.put<char>(c);
    }
    w.put<std::uint32_t>(kVersion);
    w.put<std::uint64_t>(p);
    w.put<std::uint64_t>(static_cast<std::uint64_t>(lasso.b));
    w.put<std::uint64_t>(static_cast<std::uint64_t>(lasso.N));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(config_.family.kind));
    w.put_doubles(config_.lambda_grid);

    // config
    w.put<std::uint64_t>(static_cast<std::uint64_t>(width_));
    w.put<double>(config_.family.dispersion);
    w.put<double>(config_.prox.learning_rate);
    w.put<double>(config_.prox.stop_tol);
    w.put<std::int64_t>(config_.prox.max_iter);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(config_.prox.step_rule));
    w.put<double>(config_.prox.curvature_scale);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(config_.prox.solver));
    w.put<std::uint8_t>(config_.prox.accelerate ? 1 : 0);
    w.put<std::uint64_t>(config_.prox.penalty_mask.size());
    for (bool b : config_.prox.penalty_mask) {
        w.put<std::uint8_t>(b ? 1 : 0);
    }
    w.put<double>(config_.ci_level);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(config_.variance_mode));
    w.put<std::uint8_t>(config_.intercept ? 1 : 0);
    w.put<std::int32_t>(config_.cv_folds);
    w.put<std::uint8_t>(config_.schedule_constant ? 1 : 0);
    w.put<double>(config_.schedule_constant.value_or(0.0));
    w.put<std::uint8_t>(config_.tracked ? 1 : 0);

    // state
    w.put_vector(lasso.beta_hat);
    w.put<std::uint64_t>(p * p);
    for (Eigen::Index j = 0; j < lasso.info_agg.cols(); ++j) {
        for (Eigen::Index i = 0; i < lasso.info_agg.rows(); ++i) {
            w.put<double>(lasso.info_agg(i, j));
        }
    }
    w.put<std::uint64_t>(lasso.candidates.size());
    for (const Candidate& c : lasso.candidates) {
        w.put<double>(c.lambda);
        w.put_vector(c.beta);
    }
    w.put_doubles(state_.lambda_history);
    w.put<std::uint64_t>(state_.tracked.size());
    for (std::size_t k = 0; k < state_.tracked.size(); ++k) {
        const ProjectionState& proj = state_.projections[k];
        const CoordAccumulator& acc = state_.accumulators[k];
        w.put<std::uint64_t>(static_cast<std::uint64_t>(state_.tracked[k]));
        w.put_vector(proj.gamma_hat);
        w.put<double>(proj.tau_hat);
        w.put<double>(acc.s1);
        w.put<double>(acc.s2);
        w.put_vector(acc.S_row);
        w.put<double>(acc.v);
    }
    return w.finish();
}

Engine Engine::restore(std::span<const std::uint8_t> bytes) {
    constexpr std::size_t kMinSize = sizeof(kMagic) + sizeof(std::uint32_t) + sizeof(std::uint64_t);
    if (bytes.size() < kMinSize) {
        throw SnapshotError("snapshot: checksum failure (data truncated)");
    }
    if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
        throw SnapshotError("snapshot: bad magic");
    }
    const auto body = bytes.first(bytes.size() - sizeof(std::uint64_t));
    std::uint64_t stored = 0;
    std::memcpy(&stored, bytes.data() + body.size(), sizeof(stored));
    if (fnv1a(body) != stored) {
        throw SnapshotError("snapshot: checksum failure");
    }

    Reader r(body);
    for (std::size_t i = 0; i < sizeof(kMagic); ++i) {
        r.get<char>();
    }
    const auto version = r.get<std::uint32_t>();
    if (version != kVersion) {
        throw SnapshotError("snapshot: unsupported version " + std::to_string(version));
    }
    const auto p = r.get<std::uint64_t>();
    if (p < 2 || p > (1ULL << 20)) {
        throw SnapshotError("snapshot: implausible dimension");
    }
    const auto b = r.get<std::uint64_t>();
    const auto N = r.get<std::uint64_t>();
    const auto kind = r.get<std::uint32_t>();
    if (kind > static_cast<std::uint32_t>(FamilyKind::PoissonLog)) {
        throw SnapshotError("snapshot: unknown family");
    }

    EngineConfig cfg;
    cfg.family.kind = static_cast<FamilyKind>(kind);
    cfg.lambda_grid = r.get_doubles();
    const auto width = r.get<std::uint64_t>();
    cfg.family.dispersion = r.get<double>();
    cfg.prox.learning_rate = r.get<double>();
    cfg.prox.stop_tol = r.get<double>();
    cfg.prox.max_iter = static_cast<int>(r.get<std::int64_t>());
    const auto step_rule = r.get<std::uint8_t>();
    cfg.prox.curvature_scale = r.get<double>();
    const auto solver = r.get<std::uint8_t>();
    if (step_rule > 1 || solver > 1) {
        throw SnapshotError("snapshot: unknown solver settings");
    }
    cfg.prox.step_rule = static_cast<StepRule>(step_rule);
    cfg.prox.solver = static_cast<Solver>(solver);
    cfg.prox.accelerate = r.get<std::uint8_t>() != 0;
    const std::uint64_t mask_len = r.get_count(p);
    for (std::uint64_t i = 0; i < mask_len; ++i) {
        cfg.prox.penalty_mask.push_back(r.get<std::uint8_t>() != 0);
    }
    cfg.ci_level = r.get<double>();
    const auto mode = r.get<std::uint32_t>();
    if (mode > 1) {
        throw SnapshotError("snapshot: unknown variance mode");
    }
    cfg.variance_mode = static_cast<VarianceMode>(mode);
    cfg.intercept = r.get<std::uint8_t>() != 0;
    cfg.cv_folds = r.get<std::int32_t>();
    const bool has_schedule = r.get<std::uint8_t>() != 0;
    const double schedule = r.get<double>();
    if (has_schedule) {
        cfg.schedule_constant = schedule;
    }
    const bool explicit_tracking = r.get<std::uint8_t>() != 0;

    Engine engine;
    engine.config_ = cfg;
    engine.width_ = static_cast<Eigen::Index>(width);
    if (width + (cfg.intercept ? 1 : 0) != p) {
        throw SnapshotError("snapshot: width inconsistent with dimension");
    }
    try {
        engine.config_.validate();
    } catch (const std::invalid_argument& e) {
        throw SnapshotError(std::string("snapshot: invalid configuration: ") + e.what());
    }

    EngineState& st = engine.state_;
    st.lasso.b = static_cast<std::int64_t>(b);
    st.lasso.N = static_cast<std::int64_t>(N);
    st.lasso.beta_hat = r.get_vector(p);
    const Eigen::VectorXd flat = r.get_vector(p * p);
    st.lasso.info_agg = Eigen::Map<const Eigen::MatrixXd>(flat.data(), static_cast<Eigen::Index>(p),
                                                          static_cast<Eigen::Index>(p));
    const std::uint64_t ncand = r.get_count(cfg.lambda_grid.size());
    for (std::uint64_t i = 0; i < ncand; ++i) {
        Candidate c;
        c.lambda = r.get<double>();
        c.beta = r.get_vector(p);
        st.lasso.candidates.push_back(std::move(c));
    }
    st.lambda_history = r.get_doubles();
    if (st.lambda_history.size() != b) {
        throw SnapshotError("snapshot: lambda history length differs from batch count");
    }
    const std::uint64_t ntracked = r.get_count(p);
    for (std::uint64_t i = 0; i < ntracked; ++i) {
        const auto coord = static_cast<Eigen::Index>(r.get<std::uint64_t>());
        if (coord >= static_cast<Eigen::Index>(p)) {
            throw SnapshotError("snapshot: tracked coordinate out of range");
        }
        ProjectionState proj{coord, r.get_vector(p - 1), r.get<double>()};
        CoordAccumulator acc;
        acc.r = coord;
        acc.s1 = r.get<double>();
        acc.s2 = r.get<double>();
        acc.S_row = r.get_vector(p);
        acc.v = r.get<double>();
        st.tracked.push_back(coord);
        st.projections.push_back(std::move(proj));
        st.accumulators.push_back(std::move(acc));
    }
    if (explicit_tracking) {
        engine.config_.tracked = st.tracked;
    }
    if (r.remaining() != 0) {
        throw SnapshotError("snapshot: trailing bytes");
    }
    return engine;
}

}  // namespace odl
