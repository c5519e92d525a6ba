#pragma once

#include "tabreason/aggregate.hpp"
#include "tabreason/evalkit.hpp"
#include "tabreason/gateway.hpp"
#include "tabreason/normalizer.hpp"
#include "tabreason/reasoners.hpp"
#include "tabreason/sandbox.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

// Batch stages behind the command-line tool. Every stage reads and writes
// under one output directory:
//
//   <out>/manifest.json                         run configuration, hash and counts
//   <out>/tables/<perturbation>.jsonl            perturbed tables
//   <out>/norm/<perturbation>.jsonl              normalization traces
//   <out>/traces/<method>__<perturbation>.jsonl  one record per (task, sample)
//   <out>/predictions/<label>__<perturbation>.jsonl
//   <out>/eval/grid.csv, <out>/eval/bins.csv
//   <out>/report.md | report.csv
namespace tabreason {

struct RunConfig {
    std::filesystem::path dataset;
    std::vector<Method> methods = {Method::dp};
    std::vector<PerturbationKind> perturbations = {PerturbationKind::original};
    NormMode norm = NormMode::off;
    int samples = 1;
    /// Unset: 0.0 for a single sample, 0.8 otherwise.
    std::optional<double> temperature;
    GatewayMode mode = GatewayMode::replay;
    std::filesystem::path fixtures;
    std::uint64_t seed = 0;
    std::filesystem::path out = "out";
    int workers = 1;
    std::string sandbox_command;
    int max_actions = 5;
    int max_turns = 10;
    int exec_timeout_ms = 10000;
    ProviderConfig provider;
    RoutingConfig routing;

    double effective_temperature() const;
    ReasonerConfig reasoner_config(int sample_index) const;
    /// Throws std::invalid_argument on an inconsistent configuration.
    void validate() const;

    /// Everything that influences results; paths to outputs and fixtures are
    /// left out, the dataset is represented by its content hash.
    nlohmann::json identity() const;
    std::string hash() const;

    nlohmann::json to_json() const;
    static RunConfig from_json(const nlohmann::json& j);
};

/// Model and sandbox access for a run. Built from the config, or injected by
/// tests.
struct Services {
    std::shared_ptr<CompletionClient> client;
    std::shared_ptr<Gateway> gateway; ///< same object as client when it is a Gateway
    SandboxFactory sandbox_factory;
};

Services make_services(const RunConfig& config);

struct RunSummary {
    std::size_t records = 0;
    std::size_t failed = 0;
    std::vector<std::string> aborted_tasks;
    nlohmann::json manifest;
};

/// Executes methods x perturbations x samples over the dataset and writes the
/// run artifacts. Replay misses propagate immediately.
RunSummary cmd_run(const RunConfig& config, Services& services);

RunConfig load_run_config(const std::filesystem::path& out);

struct TraceRecord {
    std::string task_id;
    Method method = Method::dp;
    PerturbationKind perturbation = PerturbationKind::original;
    NormMode norm = NormMode::off;
    int sample_index = 0;
    ReasoningTrace trace;
};

/// All records of one traces file, or empty when the file is absent.
std::vector<TraceRecord> load_traces(const std::filesystem::path& out, Method method, PerturbationKind p);

enum class Strategy { single, sc, mix_sc, self_eval };

std::string_view to_string(Strategy s);
Strategy parse_strategy(std::string_view name);

struct AggregateConfig {
    std::filesystem::path out = "out";
    Strategy strategy = Strategy::single;
    int n_dp = 5;
    int n_py = 5;
    /// Agent variant pooled by mix_sc and self_eval.
    Method agent = Method::pyagent;
};

/// Writes predictions/<label>__<perturbation>.jsonl for every perturbation in
/// the run and returns the labels written. self_eval needs `services`.
std::vector<std::string> cmd_aggregate(const AggregateConfig& config, Services* services = nullptr);

struct EvalConfig {
    std::filesystem::path out = "out";
    int k_shuffles = 100;
    std::uint64_t seed = 0;
    std::size_t bins = 10;
};

/// Scores every predictions file against the dataset; writes eval/grid.csv
/// and eval/bins.csv.
ReportGrid cmd_eval(const EvalConfig& config);

/// Renders eval/grid.csv to <out>/report.md or report.csv and returns the text.
std::string cmd_report(const std::filesystem::path& out, ReportFormat format);

struct SweepConfig {
    std::filesystem::path out = "out";
    PerturbationKind perturbation = PerturbationKind::original;
    Method agent = Method::pyagent;
    int total = 10;
    int trials = 100;
    std::uint64_t seed = 0;
};

/// Writes sweep/<perturbation>.csv and returns its text.
std::string cmd_sweep(const SweepConfig& config);

} // namespace tabreason
