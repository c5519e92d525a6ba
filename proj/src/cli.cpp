#include "tabreason/cli.hpp"

#include "tabreason/dataset.hpp"
#include "tabreason/pipeline.hpp"
#include "tabreason/rng.hpp"
#include "tabreason/text.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <iostream>
#include <map>

namespace fs = std::filesystem;

namespace tabreason {

namespace {

const std::vector<std::string> kMethodNames = {"dp", "pyagent", "pyagent_omitted"};
const std::vector<std::string> kPerturbationNames = {"original",          "none",     "row_shuffle",
                                                     "shuffle",           "transpose", "transpose_shuffle",
                                                     "transpose_and_shuffle"};
const std::vector<std::string> kNormNames = {"off", "full", "no_resort"};
const std::vector<std::string> kModeNames = {"live", "record", "replay"};
const std::vector<std::string> kStrategyNames = {"single", "sc", "mix_sc", "self_eval"};
const std::vector<std::string> kFormatNames = {"markdown", "md", "csv"};

struct IngestOptions {
    std::string wtq;
    std::string root = ".";
    std::string table;
    std::string id;
    std::string title;
    std::string question;
    std::vector<std::string> answers;
    std::string out;
};

struct PerturbOptions {
    std::string dataset;
    std::string kind = "original";
    std::uint64_t seed = 0;
    std::string out;
};

struct FixtureOptions {
    std::string dir;
};

void do_ingest(const IngestOptions& o) {
    if (o.wtq.empty() == o.table.empty()) throw CLI::ValidationError("ingest", "give exactly one of --wtq or --table");
    if (!o.wtq.empty()) {
        const auto tasks = load_wtq_questions(o.wtq, o.root);
        save_dataset(o.out, tasks);
        std::cout << "wrote " << tasks.size() << " tasks to " << o.out << "\n";
        return;
    }
    if (o.id.empty() || o.question.empty() || o.answers.empty())
        throw CLI::ValidationError("ingest", "--table needs --id, --question and at least one --answer");
    const auto format = fs::path(o.table).extension() == ".tsv" ? TableFormat::tsv : TableFormat::csv;
    Task task;
    task.id = o.id;
    task.table = load_table_file(o.table, format, o.title.empty() ? fs::path(o.table).stem().string() : o.title);
    task.question = o.question;
    task.gold = o.answers;
    append_task(o.out, task);
    std::cout << "appended " << task.id << " to " << o.out << "\n";
}

void do_perturb(const PerturbOptions& o) {
    const auto tasks = load_dataset(o.dataset);
    std::string out;
    for (const auto& t : tasks) {
        const Perturbation p{parse_perturbation_kind(o.kind), derive_seed(o.seed, t.id)};
        const auto table = perturb(t.table, p);
        nlohmann::json j = {{"task_id", t.id},
                            {"perturbation", to_string(p.kind)},
                            {"seed", p.seed},
                            {"orientation", to_string(table.orientation())},
                            {"title", table.title()},
                            {"cells", table.cells()}};
        out += j.dump() + "\n";
    }
    write_file(o.out, out);
    std::cout << "wrote " << tasks.size() << " tables to " << o.out << "\n";
}

int do_fixtures(const std::string& action, const FixtureOptions& o) {
    FixtureStore store(o.dir);
    const auto keys = store.keys();
    if (action == "list") {
        for (const auto& k : keys) {
            const auto f = store.find(k);
            std::cout << k << "\t" << f->model << "\t" << f->sample_index << "\t" << f->turn << "\n";
        }
        return kExitOk;
    }
    if (action == "stats") {
        std::map<std::string, std::size_t> by_model;
        std::map<int, std::size_t> by_turn;
        for (const auto& k : keys) {
            const auto f = store.find(k);
            ++by_model[f->model];
            ++by_turn[f->turn];
        }
        std::cout << "responses\t" << keys.size() << "\n";
        for (const auto& [m, n] : by_model) std::cout << "model:" << m << "\t" << n << "\n";
        for (const auto& [t, n] : by_turn) std::cout << "turn:" << t << "\t" << n << "\n";
        std::cout << "observations\t" << ObservationStore(o.dir).size() << "\n";
        return kExitOk;
    }
    // verify
    std::size_t bad = 0;
    for (const auto& k : keys) {
        const auto f = store.find(k);
        CompletionRequest req;
        req.prompt = f->prompt;
        req.temperature = f->temperature;
        req.sample_index = f->sample_index;
        req.turn = f->turn;
        if (fixture_key(req, f->model) != k) {
            std::cerr << "key mismatch: " << k << "\n";
            ++bad;
        }
    }
    PromptLibrary::bundled().validate();
    std::cout << keys.size() - bad << "/" << keys.size() << " fixtures verified\n";
    return bad == 0 ? kExitOk : kExitRuntime;
}

Services services_from_manifest(const fs::path& out, const std::string& mode, const std::string& fixtures) {
    auto run = load_run_config(out);
    if (!mode.empty()) run.mode = parse_gateway_mode(mode);
    if (!fixtures.empty()) run.fixtures = fixtures;
    return make_services(run);
}

} // namespace

int dispatch(int argc, const char* const* argv) {
    CLI::App app{"Table question answering evaluation harness", "tabreason"};
    app.set_config("--config", "", "INI file with one [section] per subcommand; flags win");
    app.require_subcommand(1);
    bool verbose = false;
    app.add_flag("-v,--verbose", verbose, "Debug logging");

    IngestOptions ingest;
    auto* ingest_cmd = app.add_subcommand("ingest", "Build a dataset file");
    ingest_cmd->add_option("--wtq", ingest.wtq, "WikiTableQuestions question TSV");
    ingest_cmd->add_option("--root", ingest.root, "Directory the TSV's table paths are relative to");
    ingest_cmd->add_option("--table", ingest.table, "Single CSV/TSV table to append as one task");
    ingest_cmd->add_option("--id", ingest.id, "Task id for --table");
    ingest_cmd->add_option("--title", ingest.title, "Table title for --table");
    ingest_cmd->add_option("--question", ingest.question, "Question for --table");
    ingest_cmd->add_option("--answer", ingest.answers, "Gold answer item (repeatable)");
    ingest_cmd->add_option("--out", ingest.out, "Dataset JSONL")->required();

    PerturbOptions pert;
    auto* perturb_cmd = app.add_subcommand("perturb", "Write perturbed tables for a dataset");
    perturb_cmd->add_option("--dataset", pert.dataset, "Dataset JSONL")->required();
    perturb_cmd->add_option("--kind", pert.kind, "Perturbation")->check(CLI::IsMember(kPerturbationNames));
    perturb_cmd->add_option("--seed", pert.seed, "Base seed");
    perturb_cmd->add_option("--out", pert.out, "Output JSONL")->required();

    RunConfig run;
    std::string run_dataset, run_out = "out", run_fixtures, run_norm = "off", run_mode = "replay", api_base;
    std::vector<std::string> run_methods = {"dp"}, run_perturbs = {"original"};
    std::optional<double> run_temperature;
    auto* run_cmd = app.add_subcommand("run", "Run reasoning methods over the dataset");
    run_cmd->add_option("--dataset", run_dataset, "Dataset JSONL")->required();
    run_cmd->add_option("--method", run_methods, "dp, pyagent, pyagent_omitted (repeatable)")
        ->delimiter(',')
        ->check(CLI::IsMember(kMethodNames));
    run_cmd->add_option("--perturb", run_perturbs, "original, row_shuffle, transpose, transpose_shuffle")
        ->delimiter(',')
        ->check(CLI::IsMember(kPerturbationNames));
    run_cmd->add_option("--norm", run_norm, "off, full, no_resort")->check(CLI::IsMember(kNormNames));
    run_cmd->add_option("--samples", run.samples, "Samples per method")->check(CLI::PositiveNumber);
    run_cmd->add_option("--temperature", run_temperature, "Defaults to 0 for one sample, else 0.8");
    run_cmd->add_option("--mode", run_mode, "live, record, replay")->check(CLI::IsMember(kModeNames));
    run_cmd->add_option("--fixtures", run_fixtures, "Fixture directory");
    run_cmd->add_option("--seed", run.seed, "Base seed for perturbations");
    run_cmd->add_option("--out", run_out, "Output directory");
    run_cmd->add_option("--workers", run.workers, "Tasks processed concurrently")->check(CLI::PositiveNumber);
    run_cmd->add_option("--sandbox-cmd", run.sandbox_command, "Code-execution worker command line");
    run_cmd->add_option("--max-actions", run.max_actions, "Executed actions per agent run");
    run_cmd->add_option("--max-turns", run.max_turns, "Model turns per agent run");
    run_cmd->add_option("--exec-timeout-ms", run.exec_timeout_ms, "Per-exec sandbox timeout");
    run_cmd->add_option("--api-base", api_base, "Chat-completion service base URL");
    run_cmd->add_option("--small-model", run.routing.small_model, "Model for short prompts");
    run_cmd->add_option("--large-model", run.routing.large_model, "Model for long prompts");

    AggregateConfig agg;
    std::string agg_out = "out", agg_mode, agg_fixtures, agg_strategy = "single", agg_agent = "pyagent";
    auto* agg_cmd = app.add_subcommand("aggregate", "Turn traces into per-task predictions");
    agg_cmd->add_option("--out", agg_out, "Run directory");
    agg_cmd->add_option("--strategy", agg_strategy, "single, sc, mix_sc, self_eval")
        ->check(CLI::IsMember(kStrategyNames));
    agg_cmd->add_option("--n-dp", agg.n_dp, "DP samples pooled by mix_sc")->check(CLI::NonNegativeNumber);
    agg_cmd->add_option("--n-py", agg.n_py, "Agent samples pooled by mix_sc")->check(CLI::NonNegativeNumber);
    agg_cmd->add_option("--agent", agg_agent, "Agent variant for mix_sc and self_eval")
        ->check(CLI::IsMember({"pyagent", "pyagent_omitted"}));
    agg_cmd->add_option("--mode", agg_mode, "Gateway mode override for self_eval")->check(CLI::IsMember(kModeNames));
    agg_cmd->add_option("--fixtures", agg_fixtures, "Fixture directory override for self_eval");

    EvalConfig ev;
    std::string ev_out = "out";
    auto* eval_cmd = app.add_subcommand("eval", "Score predictions against gold answers");
    eval_cmd->add_option("--out", ev_out, "Run directory");
    eval_cmd->add_option("--shuffles", ev.k_shuffles, "Tie-breaking shuffles")->check(CLI::PositiveNumber);
    eval_cmd->add_option("--seed", ev.seed, "Tie-breaking seed");
    eval_cmd->add_option("--bins", ev.bins, "Row-count bins")->check(CLI::PositiveNumber);

    SweepConfig sw;
    std::string sw_out = "out", sw_perturb = "original", sw_agent = "pyagent";
    auto* sweep_cmd = app.add_subcommand("sweep", "DP/agent output-mix ablation");
    sweep_cmd->add_option("--out", sw_out, "Run directory");
    sweep_cmd->add_option("--perturb", sw_perturb, "Perturbation whose traces are pooled")
        ->check(CLI::IsMember(kPerturbationNames));
    sweep_cmd->add_option("--agent", sw_agent, "Agent variant")->check(CLI::IsMember({"pyagent", "pyagent_omitted"}));
    sweep_cmd->add_option("--total", sw.total, "Outputs per vote")->check(CLI::PositiveNumber);
    sweep_cmd->add_option("--trials", sw.trials, "Random subsamples per combination")->check(CLI::PositiveNumber);
    sweep_cmd->add_option("--seed", sw.seed, "Sampling seed");

    std::string rep_out = "out", rep_format = "markdown";
    auto* report_cmd = app.add_subcommand("report", "Render the accuracy grid");
    report_cmd->add_option("--out", rep_out, "Run directory");
    report_cmd->add_option("--format", rep_format, "markdown or csv")->check(CLI::IsMember(kFormatNames));

    FixtureOptions fx;
    std::string fx_action;
    auto* fixtures_cmd = app.add_subcommand("fixtures", "Inspect a fixture directory");
    fixtures_cmd->add_option("action", fx_action, "list, verify or stats")
        ->required()
        ->check(CLI::IsMember({"list", "verify", "stats"}));
    fixtures_cmd->add_option("--fixtures", fx.dir, "Fixture directory")->required()->check(CLI::ExistingDirectory);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        std::cerr << app.help();
        return kExitUsage;
    }

    auto logger = spdlog::get("tabreason");
    if (!logger) logger = spdlog::stderr_color_mt("tabreason");
    spdlog::set_default_logger(logger);
    spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

    try {
        if (*ingest_cmd) {
            do_ingest(ingest);
        } else if (*perturb_cmd) {
            do_perturb(pert);
        } else if (*run_cmd) {
            run.dataset = fs::absolute(run_dataset);
            run.methods.clear();
            for (const auto& m : run_methods) run.methods.push_back(parse_method(m));
            run.perturbations.clear();
            for (const auto& p : run_perturbs) run.perturbations.push_back(parse_perturbation_kind(p));
            run.norm = parse_norm_mode(run_norm);
            run.mode = parse_gateway_mode(run_mode);
            run.out = run_out;
            run.temperature = run_temperature;
            if (!run_fixtures.empty()) run.fixtures = fs::absolute(run_fixtures);
            if (!api_base.empty()) run.provider.base_url = api_base;
            run.validate();
            auto services = make_services(run);
            const auto summary = cmd_run(run, services);
            std::cout << "wrote " << summary.records << " trace records (" << summary.failed << " failed, "
                      << summary.aborted_tasks.size() << " aborted) to " << run.out.string() << "\n";
        } else if (*agg_cmd) {
            agg.out = agg_out;
            agg.strategy = parse_strategy(agg_strategy);
            agg.agent = parse_method(agg_agent);
            std::optional<Services> services;
            if (agg.strategy == Strategy::self_eval) services = services_from_manifest(agg.out, agg_mode, agg_fixtures);
            const auto labels = cmd_aggregate(agg, services ? &*services : nullptr);
            std::cout << "wrote predictions for " << text::join(labels, ", ") << "\n";
        } else if (*eval_cmd) {
            ev.out = ev_out;
            std::cout << emit_report(cmd_eval(ev), ReportFormat::markdown);
        } else if (*sweep_cmd) {
            sw.out = sw_out;
            sw.perturbation = parse_perturbation_kind(sw_perturb);
            sw.agent = parse_method(sw_agent);
            std::cout << cmd_sweep(sw);
        } else if (*report_cmd) {
            std::cout << cmd_report(rep_out, parse_report_format(rep_format));
        } else if (*fixtures_cmd) {
            return do_fixtures(fx_action, fx);
        }
    } catch (const CLI::ValidationError& e) {
        std::cerr << e.what() << "\n";
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitOk;
}

} // namespace tabreason
