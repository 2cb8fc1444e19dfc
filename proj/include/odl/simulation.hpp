#ifndef ODL_SIMULATION_HPP_
#define ODL_SIMULATION_HPP_

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "odl/batch.hpp"
#include "odl/engine.hpp"

namespace odl {

enum class SigmaKind { Identity, ArHalf };

std::string_view sigma_name(SigmaKind kind);
SigmaKind parse_sigma(std::string_view name);

/// Logistic simulation design: covariates N(0, Sigma), the first s0
/// coefficients nonzero (ceil(s0/2) strong, then weak), the rest zero.
struct SimConfig {
    std::vector<Eigen::Index> batch_sizes;
    Eigen::Index p = 100;
    Eigen::Index s0 = 6;
    SigmaKind sigma = SigmaKind::Identity;
    double strong_value = 1.0;
    double weak_value = 0.01;
    int replications = 200;
    /// Index of the first replication; shifts the seeds so that separate runs
    /// can be pooled without overlap.
    int first_replication = 0;
    std::uint64_t seed = 1;
    EngineConfig engine;
    /// 1-based batch indices at which metrics are reported.
    std::vector<std::int64_t> report_at;
    /// Also fit the full-data MLE and offline debiased lasso at the last batch.
    bool baselines = false;

    /// Setting 1: 12 batches of 10, p = 100, s0 = 6. Setting 2: 12 batches of
    /// 52, p = 600, s0 = 10. Both report at batches 2, 4, ..., 12.
    static SimConfig setting(int which, SigmaKind sigma);

    std::int64_t total_rows() const;
    void validate() const;
    Eigen::VectorXd true_beta() const;
};

/// Seed for replication `rep` derived from the base seed.
std::uint64_t replication_seed(std::uint64_t seed, int rep);

/// Draws one stream. Deterministic in (config, seed).
std::vector<Batch> generate_stream(const SimConfig& config, std::uint64_t seed);

enum class Group { Zero = 0, Weak = 1, Strong = 2 };
inline constexpr std::array<Group, 3> kGroups{Group::Zero, Group::Weak, Group::Strong};

/// Group summaries over replications. `abias` is |mean estimate - truth| per
/// coordinate averaged over the group; `mae` is the mean of |estimate - truth|
/// over all records. ASE, CP and ACL average over records, ESE is the
/// across-replication SD per coordinate averaged over the group.
struct GroupMetrics {
    double abias = 0.0;
    double mae = 0.0;
    /// Median of |estimate - truth|; keeps the unstable MLE column legible.
    double median_ae = 0.0;
    double ase = 0.0;
    double ese = 0.0;
    double cp = 0.0;
    double acl = 0.0;
    std::int64_t records = 0;
    std::int64_t errors = 0;
};

/// Per-estimate input to the metric aggregation: est[rep][coord], se[rep][coord].
struct EstimateSet {
    std::vector<std::vector<double>> est;
    std::vector<std::vector<double>> se;
    std::vector<std::vector<bool>> ok;
    /// Coordinates to aggregate over; empty means all.
    std::vector<Eigen::Index> coords;
};

/// Aggregates one column of the metrics table. Non-finite or failed records
/// are skipped and counted in `errors`.
std::array<GroupMetrics, 3> group_metrics(const EstimateSet& set, const Eigen::VectorXd& beta0,
                                          double ci_level);

Group group_of(double beta0_value);

struct MetricsTable {
    std::vector<std::int64_t> batch_indices;
    /// odl[k][g] for batch_indices[k] and group g.
    std::vector<std::array<GroupMetrics, 3>> odl;
    bool has_baselines = false;
    std::array<GroupMetrics, 3> mle{};
    std::array<GroupMetrics, 3> offline{};
    std::vector<std::string> group_labels;
    /// Selected-lambda histogram per reported batch index.
    std::vector<std::map<double, int>> lambda_counts;
    double odl_seconds = 0.0;
    double offline_seconds = 0.0;
    double mle_seconds = 0.0;
    int mle_nonconverged = 0;
    int replications = 0;
    int failed_replications = 0;
};

/// Solver diagnostics pooled across all replications.
struct SimDiagnostics {
    SolveStats lasso;
    SolveStats candidates;
    SolveStats projections;
    SolveStats offline_projections;
    /// (est - beta0) / se for zero-coefficient coordinates at the last batch.
    std::vector<double> standardized_zero;
};

struct SimulationResult {
    MetricsTable table;
    SimDiagnostics diagnostics;
};

/// Called after every processed batch of every replication.
using ReplicationObserver =
    std::function<void(int rep, const Engine& engine, const std::vector<InferenceRecord>& records)>;

SimulationResult run_replications(const SimConfig& config,
                                  const ReplicationObserver& observer = {});

}  // namespace odl

#endif  // ODL_SIMULATION_HPP_
