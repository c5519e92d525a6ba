// Builds the offline fixture pack under data/wtq_mini from its dataset: a
// rule-based stand-in for the chat model and a stand-in code sandbox answer
// every request of two record-mode runs (normalization off and full), then the
// usual aggregate/eval/report stages produce the expected reports that replay
// runs are compared against.
//
//   make_fixture_pack --pack data/wtq_mini

#include "tabreason/dataset.hpp"
#include "tabreason/gateway.hpp"
#include "tabreason/hash.hpp"
#include "tabreason/normalizer.hpp"
#include "tabreason/pipeline.hpp"
#include "tabreason/sandbox.hpp"
#include "tabreason/text.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <iostream>
#include <map>
#include <mutex>

namespace fs = std::filesystem;
using namespace tabreason;

namespace {

/// Deterministic draw in [0, 1) from the request text and how often that exact
/// text has been seen; repeated identical prompts are the sampled variants.
class Dice {
public:
    double roll(const std::string& prompt, const std::string& salt) {
        std::lock_guard lock(mu_);
        const auto n = seen_[prompt + salt]++;
        return static_cast<double>(sha256_u64(salt + "\n" + std::to_string(n) + "\n" + prompt) >> 11) /
               static_cast<double>(1ULL << 53);
    }

private:
    std::mutex mu_;
    std::map<std::string, int> seen_;
};

class SyntheticModel final : public Transport {
public:
    explicit SyntheticModel(std::vector<Task> tasks) : tasks_(std::move(tasks)) {}

    TransportResponse send(const ChatPayload& payload) override {
        const std::string reply = respond(payload.prompt);
        nlohmann::json body = {{"choices", {{{"index", 0}, {"message", {{"role", "assistant"}, {"content", reply}}}}}}};
        return {200, body.dump(), std::nullopt};
    }

private:
    const Task* by_title(const std::string& prompt) const {
        for (const auto& t : tasks_)
            if (prompt.find("regarding \"" + t.title() + "\"") != std::string::npos) return &t;
        throw std::runtime_error("prompt names no known table");
    }

    /// The first markdown row of the prompt carries the original headings.
    static bool row_oriented(const std::string& prompt, const Task& t) {
        for (const auto& line : text::split_lines(prompt)) {
            if (line.rfind("|", 0) != 0) continue;
            const auto cells = text::split(line, "|");
            int hits = 0;
            for (const auto& c : cells)
                for (const auto& h : t.table.header())
                    if (text::trim(c) == h) ++hits;
            return hits >= 2;
        }
        return true;
    }

    static std::string wrong_answer(const Task& t, double r) {
        const auto& cells = t.table.cells();
        const auto row = 1 + static_cast<std::size_t>(r * 1000) % (cells.size() - 1);
        const auto col = static_cast<std::size_t>(r * 7919) % cells[row].size();
        const auto& v = cells[row][col];
        return v == text::join(t.gold, ", ") ? std::string("none") : v;
    }

    std::string answer(const Task& t, double p_correct, double r) const {
        return r < p_correct ? text::join(t.gold, ", ") : wrong_answer(t, r);
    }

    std::string respond(const std::string& prompt) {
        const Task& t = *by_title(prompt);
        if (prompt.find("Directly give your choice") != std::string::npos) {
            const double r = dice_.roll(prompt, "orient");
            if (r < 0.05) return "The headings are in the first row.";
            return row_oriented(prompt, t) ? "Choice: (A)" : "Choice: (B)";
        }
        if (prompt.find("Sort by: N/A") != std::string::npos) {
            // Suggest the first column when the source table is ordered by it.
            std::vector<std::string> warnings;
            const auto sorted = apply_sort(t.table, SortSpec{{t.table.header()[0]}, "", false}, &warnings);
            return sorted == t.table ? "Sort by: " + t.table.header()[0] : "Sort by: N/A";
        }
        if (prompt.find("[[A]]") != std::string::npos) {
            const double r = dice_.roll(prompt, "judge");
            const auto gold = text::join(t.gold, ", ");
            const bool b_right = prompt.find("Answer B is " + gold + ".") != std::string::npos;
            const bool a_right = prompt.find("Answer A is " + gold + ".") != std::string::npos;
            if (r < 0.1) return "Both answers look plausible.";
            if (r < 0.8 && (a_right || b_right))
                return "Answer " + std::string(a_right ? "A" : "B") + " matches the table. Verdict: [[" +
                       (a_right ? "A" : "B") + "]]";
            return "Answer A follows the table directly. Verdict: [[A]]";
        }
        if (prompt.find("python_repl_ast") != std::string::npos) return agent_turn(prompt, t);
        const double r = dice_.roll(prompt, "dp");
        if (r > 0.97) return "The table does not contain enough information to answer.";
        const double p = row_oriented(prompt, t) ? 0.65 : 0.5;
        return "Let's read the relevant rows of the table step by step.\nFinal Answer: " + answer(t, p, r);
    }

    std::string agent_turn(const std::string& prompt, const Task& t) {
        std::size_t observations = 0;
        for (std::size_t pos = prompt.find("\nObservation: "); pos != std::string::npos;
             pos = prompt.find("\nObservation: ", pos + 1))
            ++observations;
        const double r = dice_.roll(prompt, "agent");
        const double p = row_oriented(prompt, t) ? 0.6 : 0.2;
        switch (observations) {
        case 0:
            if (r < 0.08) return "Thought: I should search for this.\nAction: web_search\nAction Input: " + t.question;
            if (r < 0.12) return "I think I can answer directly from the table.";
            return "Thought: I need to see how large the dataframe is.\nAction: python_repl_ast\nAction Input: df.shape";
        case 1:
            if (r < 0.5)
                return "Thought: Let me check the column names.\nAction: python_repl_ast\nAction Input: "
                       "```python\ndf.columns.tolist()\n```";
            [[fallthrough]];
        default:
            return "Thought: I have checked the table and the observations against the question.\nFinal Answer: " +
                   answer(t, p, r);
        }
    }

    std::vector<Task> tasks_;
    Dice dice_;
};

class SyntheticSandbox final : public Sandbox {
public:
    void start(const TablePayload& table) override { table_ = table; }

    Observation execute(const std::string& code, int) override {
        Observation o;
        if (code == "df.shape") {
            o.output = "(" + std::to_string(table_.rows.size()) + ", " + std::to_string(table_.header.size()) + ")";
        } else if (code == "df.columns.tolist()") {
            std::string out = "[";
            for (std::size_t i = 0; i < table_.header.size(); ++i)
                out += (i ? ", '" : "'") + text::replace_all(table_.header[i], "'", "\\'") + "'";
            o.output = out + "]";
        } else {
            o.ok = false;
            o.error = SandboxError{"NameError", "name is not defined", ""};
        }
        return o;
    }

    bool ping() override { return true; }
    void shutdown() override {}

private:
    TablePayload table_;
};

RunConfig pack_config(const fs::path& pack, NormMode norm) {
    RunConfig c;
    c.dataset = pack / "dataset.jsonl";
    c.methods = {Method::dp, Method::pyagent};
    c.perturbations = {PerturbationKind::original, PerturbationKind::row_shuffle, PerturbationKind::transpose,
                       PerturbationKind::transpose_shuffle};
    c.norm = norm;
    c.samples = 3;
    c.mode = GatewayMode::record;
    c.fixtures = pack / "fixtures";
    c.seed = 0;
    c.sandbox_command = "synthetic";
    return c;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Regenerate the offline fixture pack"};
    std::string pack = "data/wtq_mini";
    std::string work;
    app.add_option("--pack", pack, "Pack directory holding dataset.jsonl");
    app.add_option("--work", work, "Scratch directory for the record run (default <pack>/.work)");
    CLI11_PARSE(app, argc, argv);

    const fs::path root = pack;
    const fs::path scratch = work.empty() ? root / ".work" : fs::path(work);
    fs::remove_all(root / "fixtures");
    fs::remove_all(scratch);

    const auto tasks = load_dataset(root / "dataset.jsonl");
    GatewayConfig gc;
    gc.mode = GatewayMode::record;
    auto store = std::make_shared<FixtureStore>(root / "fixtures");
    auto observations = std::make_shared<ObservationStore>(root / "fixtures");
    auto gateway = std::make_shared<Gateway>(gc, std::make_shared<SyntheticModel>(tasks), store);
    gateway->set_clock([] { return std::string("2024-01-01T00:00:00Z"); });

    Services services;
    services.client = gateway;
    services.gateway = gateway;
    services.sandbox_factory = [observations] {
        return std::make_unique<RecordingSandbox>(std::make_unique<SyntheticSandbox>(), observations);
    };

    std::size_t traces = 0;
    fs::create_directories(root / "expected");
    for (const auto norm : {NormMode::off, NormMode::full}) {
        auto config = pack_config(root, norm);
        config.out = scratch / to_string(norm);
        traces += cmd_run(config, services).records;
        for (auto s : {Strategy::single, Strategy::sc, Strategy::mix_sc, Strategy::self_eval}) {
            AggregateConfig ac;
            ac.out = config.out;
            ac.strategy = s;
            ac.n_dp = config.samples;
            ac.n_py = config.samples;
            cmd_aggregate(ac, &services);
        }
        EvalConfig ec;
        ec.out = config.out;
        cmd_eval(ec);
        const auto stem = "report_" + std::string(to_string(norm));
        write_file(root / "expected" / (stem + ".md"), cmd_report(config.out, ReportFormat::markdown));
        write_file(root / "expected" / (stem + ".csv"), cmd_report(config.out, ReportFormat::csv));
    }
    fs::remove_all(scratch);

    const auto st = gateway->stats();
    std::cout << "recorded " << store->keys().size() << " responses and " << observations->size()
              << " observations for " << traces << " traces (" << st.requests << " requests)\n";
    return 0;
}
