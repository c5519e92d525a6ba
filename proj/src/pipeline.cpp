#include "tabreason/pipeline.hpp"

#include "tabreason/dataset.hpp"
#include "tabreason/hash.hpp"
#include "tabreason/rng.hpp"
#include "tabreason/text.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <exception>
#include <map>
#include <mutex>
#include <thread>

namespace fs = std::filesystem;

namespace tabreason {

// RunConfig ---------------------------------------------------------------------

double RunConfig::effective_temperature() const {
    if (temperature) return *temperature;
    return samples == 1 ? 0.0 : 0.8;
}

ReasonerConfig RunConfig::reasoner_config(int sample_index) const {
    ReasonerConfig rc;
    rc.temperature = effective_temperature();
    rc.sample_index = sample_index;
    rc.max_actions = max_actions;
    rc.max_turns = max_turns;
    rc.exec_timeout_ms = exec_timeout_ms;
    return rc;
}

void RunConfig::validate() const {
    if (dataset.empty()) throw std::invalid_argument("dataset path is required");
    if (methods.empty()) throw std::invalid_argument("at least one method is required");
    if (perturbations.empty()) throw std::invalid_argument("at least one perturbation is required");
    if (samples < 1) throw std::invalid_argument("samples must be at least 1");
    if (workers < 1) throw std::invalid_argument("workers must be at least 1");
    if (max_actions < 1 || max_turns < 1) throw std::invalid_argument("agent budgets must be positive");
    if (const double t = effective_temperature(); t < 0.0 || t > 2.0)
        throw std::invalid_argument("temperature must lie in [0, 2]");
    if (mode != GatewayMode::live && fixtures.empty())
        throw std::invalid_argument(std::string(to_string(mode)) + " mode requires a fixture directory");
    const bool agent = std::any_of(methods.begin(), methods.end(), is_agent);
    if (agent && mode != GatewayMode::replay && sandbox_command.empty())
        throw std::invalid_argument("agent methods need a sandbox command outside replay mode");
}

namespace {

nlohmann::json names_of(const std::vector<Method>& v) {
    auto j = nlohmann::json::array();
    for (auto m : v) j.push_back(to_string(m));
    return j;
}

nlohmann::json names_of(const std::vector<PerturbationKind>& v) {
    auto j = nlohmann::json::array();
    for (auto p : v) j.push_back(to_string(p));
    return j;
}

nlohmann::json routing_json(const RoutingConfig& r) {
    return {{"small_model", r.small_model},
            {"large_model", r.large_model},
            {"small_ctx_max_tokens", r.small_ctx_max_tokens}};
}

} // namespace

nlohmann::json RunConfig::identity() const {
    nlohmann::json prompts = nlohmann::json::object();
    for (auto id : kAllTemplates) prompts[std::string(to_string(id))] = pinned_digest(id);
    return {{"dataset_sha256", sha256_hex(read_file(dataset))},
            {"methods", names_of(methods)},
            {"perturbations", names_of(perturbations)},
            {"norm", to_string(norm)},
            {"samples", samples},
            {"temperature", effective_temperature()},
            {"seed", seed},
            {"max_actions", max_actions},
            {"max_turns", max_turns},
            {"exec_timeout_ms", exec_timeout_ms},
            {"routing", routing_json(routing)},
            {"prompts", prompts}};
}

std::string RunConfig::hash() const { return sha256_hex(identity().dump()); }

nlohmann::json RunConfig::to_json() const {
    return {{"dataset", dataset.string()},
            {"methods", names_of(methods)},
            {"perturbations", names_of(perturbations)},
            {"norm", to_string(norm)},
            {"samples", samples},
            {"temperature", temperature ? nlohmann::json(*temperature) : nlohmann::json(nullptr)},
            {"mode", to_string(mode)},
            {"fixtures", fixtures.string()},
            {"seed", seed},
            {"out", out.string()},
            {"workers", workers},
            {"sandbox_command", sandbox_command},
            {"max_actions", max_actions},
            {"max_turns", max_turns},
            {"exec_timeout_ms", exec_timeout_ms},
            {"provider",
             {{"base_url", provider.base_url},
              {"path", provider.path},
              {"api_key_env", provider.api_key_env},
              {"timeout_s", provider.timeout.count()}}},
            {"routing", routing_json(routing)}};
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
    RunConfig c;
    c.dataset = j.at("dataset").get<std::string>();
    c.methods.clear();
    for (const auto& m : j.at("methods")) c.methods.push_back(parse_method(m.get<std::string>()));
    c.perturbations.clear();
    for (const auto& p : j.at("perturbations")) c.perturbations.push_back(parse_perturbation_kind(p.get<std::string>()));
    c.norm = parse_norm_mode(j.at("norm").get<std::string>());
    c.samples = j.at("samples");
    if (!j.at("temperature").is_null()) c.temperature = j.at("temperature").get<double>();
    c.mode = parse_gateway_mode(j.at("mode").get<std::string>());
    c.fixtures = j.at("fixtures").get<std::string>();
    c.seed = j.at("seed");
    c.out = j.at("out").get<std::string>();
    c.workers = j.at("workers");
    c.sandbox_command = j.at("sandbox_command");
    c.max_actions = j.at("max_actions");
    c.max_turns = j.at("max_turns");
    c.exec_timeout_ms = j.at("exec_timeout_ms");
    const auto& p = j.at("provider");
    c.provider.base_url = p.at("base_url");
    c.provider.path = p.at("path");
    c.provider.api_key_env = p.at("api_key_env");
    c.provider.timeout = std::chrono::seconds(p.at("timeout_s").get<long>());
    const auto& r = j.at("routing");
    c.routing.small_model = r.at("small_model");
    c.routing.large_model = r.at("large_model");
    c.routing.small_ctx_max_tokens = r.at("small_ctx_max_tokens");
    return c;
}

// Services ----------------------------------------------------------------------

Services make_services(const RunConfig& config) {
    config.validate();
    GatewayConfig gc;
    gc.mode = config.mode;
    gc.routing = config.routing;
    std::shared_ptr<Transport> transport;
    std::shared_ptr<FixtureStore> store;
    std::shared_ptr<ObservationStore> observations;
    if (config.mode != GatewayMode::replay) transport = make_http_transport(config.provider);
    if (config.mode != GatewayMode::live) {
        store = std::make_shared<FixtureStore>(config.fixtures);
        observations = std::make_shared<ObservationStore>(config.fixtures);
    }

    Services s;
    s.gateway = std::make_shared<Gateway>(gc, transport, store);
    s.client = s.gateway;

    SandboxLimits limits;
    limits.default_timeout_ms = config.exec_timeout_ms;
    const auto argv = split_command(config.sandbox_command);
    switch (config.mode) {
    case GatewayMode::replay:
        s.sandbox_factory = [observations] { return std::make_unique<ReplaySandbox>(observations); };
        break;
    case GatewayMode::record:
        s.sandbox_factory = [observations, argv, limits] {
            return std::make_unique<RecordingSandbox>(std::make_unique<SubprocessSandbox>(argv, limits), observations);
        };
        break;
    case GatewayMode::live:
        s.sandbox_factory = [argv, limits] { return std::make_unique<SubprocessSandbox>(argv, limits); };
        break;
    }
    return s;
}

// Shared helpers ------------------------------------------------------------------

namespace {

std::string jsonl(const std::vector<nlohmann::json>& records) {
    std::string out;
    for (const auto& r : records) out += r.dump() + "\n";
    return out;
}

std::vector<nlohmann::json> read_jsonl(const fs::path& path) {
    std::vector<nlohmann::json> out;
    if (!fs::exists(path)) return out;
    for (const auto& line : text::split_lines(read_file(path))) {
        if (text::trim(line).empty()) continue;
        out.push_back(nlohmann::json::parse(line));
    }
    return out;
}

std::string trace_file_name(Method m, PerturbationKind p) {
    return std::string(to_string(m)) + "__" + std::string(to_string(p)) + ".jsonl";
}

/// Runs body(i) for i in [0, n) on `workers` threads. The first exception
/// stops further work and is rethrown.
template <typename Body>
void parallel_for(std::size_t n, int workers, Body body) {
    std::atomic<std::size_t> next{0};
    std::atomic<bool> stop{false};
    std::exception_ptr error;
    std::mutex error_mu;
    auto worker = [&] {
        for (;;) {
            if (stop) return;
            const auto i = next++;
            if (i >= n) return;
            try {
                body(i);
            } catch (...) {
                std::lock_guard lock(error_mu);
                if (!error) error = std::current_exception();
                stop = true;
            }
        }
    };
    const auto count = static_cast<std::size_t>(std::max(1, workers));
    if (count == 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        for (std::size_t t = 0; t < std::min(count, n); ++t) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }
    if (error) std::rethrow_exception(error);
}

nlohmann::json table_cells_json(const Table& t) { return t.cells(); }

Table table_from_cells(const nlohmann::json& j, const std::string& title) {
    return Table(title, j.get<std::vector<Table::Row>>(), Orientation::row_table);
}

} // namespace

// Run ------------------------------------------------------------------------------

namespace {

struct TaskOutput {
    nlohmann::json table_record;
    std::optional<nlohmann::json> norm_record;
    std::map<Method, std::vector<nlohmann::json>> traces;
    std::size_t failed = 0;
    bool aborted = false;
};

ReasoningTrace run_agent_session(const Task& task, Method method, Services& services, const ReasonerConfig& rc) {
    auto sandbox = services.sandbox_factory();
    try {
        sandbox->start(TablePayload::from_table(task.table));
    } catch (const ObservationMiss&) {
        throw;
    } catch (const std::exception& e) {
        ReasoningTrace t;
        t.method = method;
        t.failed = true;
        t.failure_reason = std::string("sandbox_error: ") + e.what();
        return t;
    }
    const auto view = method == Method::pyagent_omitted ? TableView::head_tail_3 : TableView::full;
    auto trace = run_pyagent(task, *sandbox, *services.client, view, rc);
    sandbox->shutdown();
    return trace;
}

TaskOutput process_task(const Task& task, PerturbationKind kind, const RunConfig& config, const std::string& hash,
                        Services& services, const PromptLibrary& prompts) {
    TaskOutput out;
    const Perturbation pert{kind, derive_seed(config.seed, task.id)};
    const Table perturbed = perturb(task.table, pert);
    out.table_record = {{"task_id", task.id},
                        {"perturbation", to_string(kind)},
                        {"seed", pert.seed},
                        {"orientation", to_string(perturbed.orientation())},
                        {"cells", table_cells_json(perturbed)},
                        {"config_hash", hash}};

    Task working = task;
    working.table = perturbed;
    try {
        if (config.norm != NormMode::off) {
            NormContext ctx{*services.client, prompts};
            const auto n = normalize(perturbed, NormOptions{config.norm == NormMode::full}, ctx);
            working.table = n.table;
            out.norm_record = {{"task_id", task.id},
                               {"perturbation", to_string(kind)},
                               {"trace", n.trace.to_json()},
                               {"cells", table_cells_json(n.table)},
                               {"config_hash", hash}};
        }
        for (const auto method : config.methods) {
            auto& records = out.traces[method];
            for (int s = 0; s < config.samples; ++s) {
                const auto rc = config.reasoner_config(s);
                auto trace = method == Method::dp ? run_dp(working, *services.client, rc, prompts)
                                                  : run_agent_session(working, method, services, rc);
                if (trace.failed) ++out.failed;
                records.push_back({{"task_id", task.id},
                                   {"method", to_string(method)},
                                   {"perturbation", to_string(kind)},
                                   {"norm", to_string(config.norm)},
                                   {"sample_index", s},
                                   {"trace", trace.to_json()},
                                   {"config_hash", hash}});
            }
        }
    } catch (const FixtureMiss&) {
        throw;
    } catch (const ObservationMiss&) {
        throw;
    } catch (const GatewayError& e) {
        spdlog::error("task {} aborted: {}", task.id, e.what());
        out.aborted = true;
        out.norm_record.reset();
        out.traces.clear();
        out.failed = 0;
    }
    return out;
}

} // namespace

RunSummary cmd_run(const RunConfig& config, Services& services) {
    config.validate();
    const auto tasks = load_dataset(config.dataset);
    const auto hash = config.hash();
    const auto& prompts = PromptLibrary::bundled();
    prompts.validate();

    for (const char* sub : {"tables", "traces", "norm"}) fs::create_directories(config.out / sub);

    RunSummary summary;
    nlohmann::json files = nlohmann::json::object();
    for (const auto kind : config.perturbations) {
        std::vector<TaskOutput> outputs(tasks.size());
        parallel_for(tasks.size(), config.workers, [&](std::size_t i) {
            outputs[i] = process_task(tasks[i], kind, config, hash, services, prompts);
        });

        std::vector<nlohmann::json> table_records;
        std::vector<nlohmann::json> norm_records;
        std::map<Method, std::vector<nlohmann::json>> trace_records;
        for (std::size_t i = 0; i < tasks.size(); ++i) {
            auto& o = outputs[i];
            table_records.push_back(o.table_record);
            if (o.aborted) {
                summary.aborted_tasks.push_back(tasks[i].id + "@" + std::string(to_string(kind)));
                continue;
            }
            if (o.norm_record) norm_records.push_back(*o.norm_record);
            for (auto& [m, recs] : o.traces)
                for (auto& r : recs) trace_records[m].push_back(std::move(r));
            summary.failed += o.failed;
        }

        const auto pname = std::string(to_string(kind)) + ".jsonl";
        write_file(config.out / "tables" / pname, jsonl(table_records));
        if (config.norm != NormMode::off) write_file(config.out / "norm" / pname, jsonl(norm_records));
        for (const auto m : config.methods) {
            const auto& recs = trace_records[m];
            const auto name = trace_file_name(m, kind);
            write_file(config.out / "traces" / name, jsonl(recs));
            files["traces/" + name] = recs.size();
            summary.records += recs.size();
        }
    }

    nlohmann::json manifest = {{"config", config.to_json()},
                               {"config_hash", hash},
                               {"identity", config.identity()},
                               {"tasks", tasks.size()},
                               {"records", summary.records},
                               {"files", files},
                               {"failed_traces", summary.failed},
                               {"aborted", summary.aborted_tasks}};
    if (services.gateway) {
        const auto st = services.gateway->stats();
        manifest["gateway"] = {{"mode", to_string(services.gateway->config().mode)},
                               {"requests", st.requests},
                               {"fixture_hits", st.fixture_hits},
                               {"live_calls", st.live_calls}};
    }
    write_file(config.out / "manifest.json", manifest.dump(2) + "\n");
    summary.manifest = std::move(manifest);
    return summary;
}

RunConfig load_run_config(const fs::path& out) {
    const auto path = out / "manifest.json";
    if (!fs::exists(path)) throw std::runtime_error("no run manifest at " + path.string());
    return RunConfig::from_json(nlohmann::json::parse(read_file(path)).at("config"));
}

namespace {

std::string manifest_hash(const fs::path& out) {
    return nlohmann::json::parse(read_file(out / "manifest.json")).at("config_hash").get<std::string>();
}

} // namespace

std::vector<TraceRecord> load_traces(const fs::path& out, Method method, PerturbationKind p) {
    std::vector<TraceRecord> records;
    for (const auto& j : read_jsonl(out / "traces" / trace_file_name(method, p))) {
        TraceRecord r;
        r.task_id = j.at("task_id");
        r.method = parse_method(j.at("method").get<std::string>());
        r.perturbation = parse_perturbation_kind(j.at("perturbation").get<std::string>());
        r.norm = parse_norm_mode(j.at("norm").get<std::string>());
        r.sample_index = j.at("sample_index");
        r.trace = ReasoningTrace::from_json(j.at("trace"));
        records.push_back(std::move(r));
    }
    return records;
}

// Aggregate ---------------------------------------------------------------------

std::string_view to_string(Strategy s) {
    switch (s) {
    case Strategy::single: return "single";
    case Strategy::sc: return "sc";
    case Strategy::mix_sc: return "mix_sc";
    case Strategy::self_eval: return "self_eval";
    }
    return "single";
}

Strategy parse_strategy(std::string_view name) {
    if (name == "single") return Strategy::single;
    if (name == "sc") return Strategy::sc;
    if (name == "mix_sc") return Strategy::mix_sc;
    if (name == "self_eval") return Strategy::self_eval;
    throw std::invalid_argument("unknown aggregation strategy: " + std::string(name));
}

namespace {

/// Samples of one task, indexed by sample number.
using TaskSamples = std::map<std::string, std::vector<ReasoningTrace>>;

TaskSamples group_by_task(std::vector<TraceRecord> records) {
    std::sort(records.begin(), records.end(), [](const TraceRecord& a, const TraceRecord& b) {
        return std::tie(a.task_id, a.sample_index) < std::tie(b.task_id, b.sample_index);
    });
    TaskSamples out;
    for (auto& r : records) out[r.task_id].push_back(std::move(r.trace));
    return out;
}

nlohmann::json answer_items(const CanonicalAnswer& a) { return a.items; }

nlohmann::json prediction(const std::string& task_id, const std::string& label, PerturbationKind p, NormMode norm,
                          const std::optional<VoteResult>& vote, const std::string& hash) {
    nlohmann::json j = {{"task_id", task_id},
                        {"label", label},
                        {"perturbation", to_string(p)},
                        {"norm", to_string(norm)},
                        {"config_hash", hash}};
    if (!vote) {
        j["answer"] = nlohmann::json::array();
        j["failed"] = true;
        j["tied"] = false;
        j["tie_set"] = nlohmann::json::array();
        return j;
    }
    j["answer"] = answer_items(vote->winner);
    j["failed"] = false;
    j["tied"] = vote->tied;
    auto ties = nlohmann::json::array();
    if (vote->tied)
        for (const auto& t : vote->tie_set) ties.push_back(answer_items(t));
    j["tie_set"] = ties;
    return j;
}

std::optional<VoteResult> vote_or_none(const std::vector<ReasoningTrace>& traces) {
    try {
        return self_consistency(traces);
    } catch (const AllFailed&) {
        return std::nullopt;
    }
}

std::vector<ReasoningTrace> first_n(const std::vector<ReasoningTrace>& v, int n, const std::string& what) {
    if (static_cast<int>(v.size()) < n)
        throw std::invalid_argument(what + " has " + std::to_string(v.size()) + " samples, " + std::to_string(n) +
                                    " requested");
    return {v.begin(), v.begin() + n};
}

std::map<std::string, Table> working_tables(const fs::path& out, PerturbationKind p, NormMode norm,
                                            const std::vector<Task>& tasks) {
    std::map<std::string, std::string> titles;
    for (const auto& t : tasks) titles[t.id] = t.title();
    const auto dir = norm == NormMode::off ? "tables" : "norm";
    std::map<std::string, Table> tables;
    for (const auto& j : read_jsonl(out / dir / (std::string(to_string(p)) + ".jsonl"))) {
        const std::string id = j.at("task_id");
        tables.emplace(id, table_from_cells(j.at("cells"), titles[id]));
    }
    return tables;
}

bool has_method(const RunConfig& cfg, Method m) {
    return std::find(cfg.methods.begin(), cfg.methods.end(), m) != cfg.methods.end();
}

} // namespace

std::vector<std::string> cmd_aggregate(const AggregateConfig& config, Services* services) {
    const auto run = load_run_config(config.out);
    const auto hash = manifest_hash(config.out);
    const auto tasks = load_dataset(run.dataset);
    fs::create_directories(config.out / "predictions");

    std::vector<std::string> labels;
    auto write = [&](const std::string& label, PerturbationKind p, const std::vector<nlohmann::json>& recs) {
        write_file(config.out / "predictions" / (label + "__" + std::string(to_string(p)) + ".jsonl"), jsonl(recs));
        if (std::find(labels.begin(), labels.end(), label) == labels.end()) labels.push_back(label);
    };

    for (const auto p : run.perturbations) {
        switch (config.strategy) {
        case Strategy::single:
        case Strategy::sc: {
            for (const auto m : run.methods) {
                const auto grouped = group_by_task(load_traces(config.out, m, p));
                const std::string label =
                    std::string(to_string(m)) + (config.strategy == Strategy::sc ? "_sc" : "");
                std::vector<nlohmann::json> recs;
                for (const auto& task : tasks) {
                    const auto it = grouped.find(task.id);
                    if (it == grouped.end()) continue;
                    const auto& samples = it->second;
                    const auto pool =
                        config.strategy == Strategy::sc ? samples : std::vector<ReasoningTrace>{samples.front()};
                    recs.push_back(prediction(task.id, label, p, run.norm, vote_or_none(pool), hash));
                }
                write(label, p, recs);
            }
            break;
        }
        case Strategy::mix_sc: {
            if (!has_method(run, Method::dp) || !has_method(run, config.agent))
                throw std::invalid_argument("mix_sc needs dp and " + std::string(to_string(config.agent)) + " traces");
            const auto dp = group_by_task(load_traces(config.out, Method::dp, p));
            const auto py = group_by_task(load_traces(config.out, config.agent, p));
            std::vector<nlohmann::json> recs;
            for (const auto& task : tasks) {
                const auto d = dp.find(task.id);
                const auto a = py.find(task.id);
                if (d == dp.end() || a == py.end()) continue;
                std::optional<VoteResult> vote;
                try {
                    vote = mix_self_consistency(first_n(d->second, config.n_dp, "dp@" + task.id),
                                                first_n(a->second, config.n_py, "agent@" + task.id));
                } catch (const AllFailed&) {
                }
                recs.push_back(prediction(task.id, "mix_sc", p, run.norm, vote, hash));
            }
            write("mix_sc", p, recs);
            break;
        }
        case Strategy::self_eval: {
            if (!services || !services->client) throw std::invalid_argument("self_eval needs a model client");
            const auto dp = group_by_task(load_traces(config.out, Method::dp, p));
            const auto py = group_by_task(load_traces(config.out, config.agent, p));
            const auto tables = working_tables(config.out, p, run.norm, tasks);
            std::vector<nlohmann::json> recs;
            for (const auto& task : tasks) {
                const auto d = dp.find(task.id);
                const auto a = py.find(task.id);
                const auto t = tables.find(task.id);
                if (d == dp.end() || a == py.end() || t == tables.end()) continue;
                const auto& dt = d->second.front();
                const auto& at = a->second.front();
                std::optional<VoteResult> vote;
                nlohmann::json verdict = nullptr;
                const auto pick = [&](const ReasoningTrace& tr) {
                    VoteResult v;
                    v.winner = canonicalize_answer(tr.answer);
                    v.tie_set = {v.winner};
                    return v;
                };
                if (!dt.failed && !at.failed) {
                    const auto ca = canonicalize_answer(dt.answer);
                    const auto cb = canonicalize_answer(at.answer);
                    if (answers_match(ca, cb)) {
                        vote = pick(dt);
                    } else {
                        Task working = task;
                        working.table = t->second;
                        const auto v = self_evaluate(working, ca.display, cb.display, *services->client);
                        verdict = {{"choice", v.choice == VerdictChoice::A ? "A" : "B"},
                                   {"fallback", v.fallback},
                                   {"raw", v.raw}};
                        vote = pick(v.choice == VerdictChoice::A ? dt : at);
                    }
                } else if (!dt.failed) {
                    vote = pick(dt);
                } else if (!at.failed) {
                    vote = pick(at);
                }
                auto rec = prediction(task.id, "self_eval", p, run.norm, vote, hash);
                rec["verdict"] = verdict;
                recs.push_back(std::move(rec));
            }
            write("self_eval", p, recs);
            break;
        }
        }
    }
    return labels;
}

// Eval ------------------------------------------------------------------------------

namespace {

struct PredictionFile {
    std::string label;
    PerturbationKind perturbation;
    NormMode norm;
    std::map<std::string, VoteResult> votes;
};

PredictionFile read_predictions(const fs::path& path) {
    PredictionFile f;
    const auto stem = path.stem().string();
    const auto sep = stem.rfind("__");
    if (sep == std::string::npos) throw std::runtime_error("unexpected predictions file name: " + stem);
    f.label = stem.substr(0, sep);
    f.perturbation = parse_perturbation_kind(stem.substr(sep + 2));
    f.norm = NormMode::off;
    for (const auto& j : read_jsonl(path)) {
        f.norm = parse_norm_mode(j.at("norm").get<std::string>());
        if (j.at("failed").get<bool>()) continue;
        VoteResult v;
        v.winner.items = j.at("answer").get<std::vector<std::string>>();
        v.tied = j.at("tied").get<bool>();
        for (const auto& t : j.at("tie_set")) v.tie_set.push_back({t.get<std::vector<std::string>>(), {}});
        f.votes.emplace(j.at("task_id").get<std::string>(), std::move(v));
    }
    return f;
}

std::vector<TaskVote> task_votes(const PredictionFile& f, const std::vector<const Task*>& tasks) {
    std::vector<TaskVote> out;
    for (const auto* t : tasks) {
        TaskVote tv;
        tv.gold = t->gold;
        if (const auto it = f.votes.find(t->id); it != f.votes.end()) tv.vote = it->second;
        out.push_back(std::move(tv));
    }
    return out;
}

} // namespace

ReportGrid cmd_eval(const EvalConfig& config) {
    const auto run = load_run_config(config.out);
    const auto hash = manifest_hash(config.out);
    const auto tasks = load_dataset(run.dataset);
    if (tasks.empty()) throw EmptyResults();
    std::vector<const Task*> all;
    std::map<std::string, const Task*> by_id;
    for (const auto& t : tasks) {
        all.push_back(&t);
        by_id[t.id] = &t;
    }

    std::vector<fs::path> files;
    if (fs::exists(config.out / "predictions"))
        for (const auto& e : fs::directory_iterator(config.out / "predictions"))
            if (e.path().extension() == ".jsonl") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw std::runtime_error("no predictions under " + (config.out / "predictions").string());

    const auto bins = bin_by_rows(tasks, std::min(config.bins, tasks.size()));
    ReportGrid grid;
    std::vector<BinAccuracy> bin_rows;
    for (const auto& path : files) {
        const auto f = read_predictions(path);
        const auto seed = derive_seed(config.seed, path.stem().string());
        grid[GridKey{f.label, f.perturbation, f.norm}] = tie_average_accuracy(task_votes(f, all), config.k_shuffles, seed);
        for (const auto& bin : bins) {
            std::vector<const Task*> subset;
            for (const auto& id : bin.task_ids) subset.push_back(by_id.at(id));
            bin_rows.push_back({bin.label, f.label + "/" + std::string(to_string(f.perturbation)),
                                tie_average_accuracy(task_votes(f, subset), config.k_shuffles,
                                                     derive_seed(seed, bin.label))});
        }
    }

    fs::create_directories(config.out / "eval");
    write_file(config.out / "eval" / "grid.csv", emit_report(grid, ReportFormat::csv, hash));
    write_file(config.out / "eval" / "bins.csv", "# config_hash: " + hash + "\n" + emit_bin_csv(bin_rows));
    return grid;
}

std::string cmd_report(const fs::path& out, ReportFormat format) {
    const auto csv = read_file(out / "eval" / "grid.csv");
    std::string hash;
    constexpr std::string_view marker = "# config_hash: ";
    for (const auto& line : text::split_lines(csv))
        if (line.rfind(marker, 0) == 0) hash = line.substr(marker.size());
    const auto grid = parse_report_csv(csv);
    const auto doc = emit_report(grid, format, hash);
    write_file(out / (format == ReportFormat::markdown ? "report.md" : "report.csv"), doc);
    return doc;
}

// Sweep ----------------------------------------------------------------------------

std::string cmd_sweep(const SweepConfig& config) {
    const auto run = load_run_config(config.out);
    const auto hash = manifest_hash(config.out);
    const auto tasks = load_dataset(run.dataset);
    const auto dp = group_by_task(load_traces(config.out, Method::dp, config.perturbation));
    const auto py = group_by_task(load_traces(config.out, config.agent, config.perturbation));
    if (dp.empty()) throw InsufficientPool("dp", "no dp traces for " + std::string(to_string(config.perturbation)));
    if (py.empty())
        throw InsufficientPool(std::string(to_string(config.agent)),
                               "no " + std::string(to_string(config.agent)) + " traces for " +
                                   std::string(to_string(config.perturbation)));

    auto pool_of = [](const TaskSamples& g, const std::string& id) {
        std::vector<std::optional<CanonicalAnswer>> pool;
        if (const auto it = g.find(id); it != g.end())
            for (const auto& t : it->second)
                pool.push_back(t.failed ? std::nullopt : std::optional(canonicalize_answer(t.answer)));
        return pool;
    };
    std::vector<SweepTask> sweep_tasks;
    for (const auto& t : tasks) sweep_tasks.push_back({pool_of(dp, t.id), pool_of(py, t.id), t.gold});

    std::string csv;
    try {
        csv = ablation_sweep(sweep_tasks, config.total, config.trials, config.seed).to_csv();
    } catch (const InsufficientPool& e) {
        const auto method = e.method() == "dp" ? std::string("dp") : std::string(to_string(config.agent));
        throw InsufficientPool(method, method + ": " + e.what());
    }
    fs::create_directories(config.out / "sweep");
    const auto doc = "# config_hash: " + hash + "\n" + csv;
    write_file(config.out / "sweep" / (std::string(to_string(config.perturbation)) + ".csv"), doc);
    return doc;
}

} // namespace tabreason
