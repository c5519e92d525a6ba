#include "tabreason/reasoners.hpp"

#include "tabreason/text.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>

namespace tabreason {

std::string_view to_string(Method m) {
    switch (m) {
    case Method::dp: return "dp";
    case Method::pyagent: return "pyagent";
    case Method::pyagent_omitted: return "pyagent_omitted";
    }
    return "dp";
}

Method parse_method(std::string_view name) {
    if (name == "dp") return Method::dp;
    if (name == "pyagent") return Method::pyagent;
    if (name == "pyagent_omitted") return Method::pyagent_omitted;
    throw std::invalid_argument("unknown method: " + std::string(name));
}

std::size_t ReasoningTrace::executed_actions() const {
    return static_cast<std::size_t>(
        std::count_if(steps.begin(), steps.end(), [](const AgentStep& s) { return s.action == kPythonTool; }));
}

nlohmann::json ReasoningTrace::to_json() const {
    nlohmann::json turns_json = nlohmann::json::array();
    for (const auto& t : turns) turns_json.push_back({{"role", t.role}, {"text", t.text}});
    nlohmann::json steps_json = nlohmann::json::array();
    for (const auto& s : steps) {
        steps_json.push_back({{"thought", s.thought},
                              {"action", s.action},
                              {"action_input", s.action_input},
                              {"observation", s.observation},
                              {"truncated", s.truncated}});
    }
    return {{"method", to_string(method)},
            {"turns", std::move(turns_json)},
            {"steps", std::move(steps_json)},
            {"answer", answer},
            {"failed", failed},
            {"failure_reason", failure_reason ? nlohmann::json(*failure_reason) : nlohmann::json(nullptr)}};
}

ReasoningTrace ReasoningTrace::from_json(const nlohmann::json& j) {
    ReasoningTrace t;
    t.method = parse_method(j.at("method").get<std::string>());
    for (const auto& turn : j.at("turns")) t.turns.push_back({turn.at("role"), turn.at("text")});
    for (const auto& s : j.at("steps")) {
        t.steps.push_back({s.at("thought"), s.at("action"), s.at("action_input"), s.at("observation"),
                           s.value("truncated", false)});
    }
    t.answer = j.at("answer").get<std::vector<std::string>>();
    t.failed = j.at("failed").get<bool>();
    if (!j.at("failure_reason").is_null()) t.failure_reason = j.at("failure_reason").get<std::string>();
    return t;
}

// Parsers ------------------------------------------------------------------------

namespace {

std::vector<std::string> split_answer_line(std::string_view line) {
    std::vector<std::string> items;
    for (const auto& part : text::split(line, ", ")) {
        auto item = text::trim_copy(part);
        if (!item.empty()) items.push_back(std::move(item));
    }
    return items;
}

bool is_action_line(std::string_view line) {
    line = text::trim(line);
    while (!line.empty() && line.front() == '*') line.remove_prefix(1);
    return text::starts_with_ci(line, "Action:");
}

std::string strip_fences(std::string s) {
    s = text::trim_copy(s);
    if (s.rfind("```", 0) == 0) {
        const auto nl = s.find('\n');
        s = nl == std::string::npos ? s.substr(3) : s.substr(nl + 1);
        const auto close = s.rfind("```");
        if (close != std::string::npos) s = s.substr(0, close);
        return text::trim_copy(s);
    }
    if (s.size() >= 2 && s.front() == '`' && s.back() == '`') return text::trim_copy(s.substr(1, s.size() - 2));
    return s;
}

std::string clean_action_name(std::string_view s) {
    std::string out = text::trim_copy(s);
    auto strip = [&](std::string_view chars) {
        while (!out.empty() && chars.find(out.front()) != std::string_view::npos) out.erase(out.begin());
        while (!out.empty() && chars.find(out.back()) != std::string_view::npos) out.pop_back();
    };
    strip("`*\"' ");
    return out;
}

} // namespace

std::vector<std::string> parse_final_answer(std::string_view input) {
    constexpr std::string_view marker = "final answer:";
    const auto pos = text::irfind(input, marker);
    if (pos == std::string_view::npos) throw NoFinalAnswer("no \"Final Answer:\" line");
    auto rest = input.substr(pos + marker.size());
    rest = rest.substr(0, rest.find('\n'));
    auto items = split_answer_line(rest);
    if (items.empty()) throw NoFinalAnswer("empty final answer");
    return items;
}

AgentTurn parse_agent_step(std::string_view input) {
    const auto lines = text::split_lines(input);
    std::optional<std::size_t> final_line;
    std::optional<std::size_t> action_line;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (!final_line && text::ifind(lines[i], "final answer:") != std::string_view::npos) final_line = i;
        if (!action_line && is_action_line(lines[i])) action_line = i;
    }

    if (final_line && (!action_line || *final_line < *action_line)) {
        std::string prefix;
        for (std::size_t i = 0; i <= *final_line; ++i) prefix += lines[i] + "\n";
        try {
            return AgentFinal{parse_final_answer(prefix)};
        } catch (const NoFinalAnswer& e) {
            return AgentMalformed{e.what()};
        }
    }
    if (!action_line) return AgentMalformed{"no Action or Final Answer line"};

    AgentAct act;
    const auto& aline = lines[*action_line];
    act.action = clean_action_name(aline.substr(aline.find(':') + 1));

    std::string thought;
    for (std::size_t i = 0; i < *action_line; ++i) thought += lines[i] + "\n";
    thought = text::trim_copy(thought);
    if (text::starts_with_ci(thought, "Thought:")) thought = text::trim_copy(thought.substr(8));
    act.thought = thought;

    std::string after;
    for (std::size_t i = *action_line + 1; i < lines.size(); ++i) after += lines[i] + "\n";
    const auto input_pos = text::ifind(after, "Action Input:");
    if (input_pos == std::string::npos) return AgentMalformed{"Action without Action Input"};
    std::string code = after.substr(input_pos + 13);
    if (const auto obs = code.find("Observation:"); obs != std::string::npos) code = code.substr(0, obs);
    act.action_input = strip_fences(code);
    return act;
}

// Drivers --------------------------------------------------------------------------

std::string render_dp_prompt(const Task& task, const PromptLibrary& prompts) {
    return prompts.render(TemplateId::dp, {{Placeholder::title, task.title()},
                                           {Placeholder::table, render_markdown(task.table)},
                                           {Placeholder::question, task.question}});
}

std::string render_agent_prompt(const Task& task, TableView view, const PromptLibrary& prompts) {
    return prompts.render(TemplateId::pyagent, {{Placeholder::title, task.title()},
                                                {Placeholder::table, render_markdown(task.table, view)},
                                                {Placeholder::question, task.question}});
}

ReasoningTrace run_dp(const Task& task, CompletionClient& client, const ReasonerConfig& cfg,
                      const PromptLibrary& prompts) {
    ReasoningTrace trace;
    trace.method = Method::dp;
    CompletionRequest req;
    req.prompt = render_dp_prompt(task, prompts);
    req.temperature = cfg.temperature;
    req.max_output_tokens = cfg.dp_max_tokens;
    req.sample_index = cfg.sample_index;
    const auto response = client.complete(req);
    trace.turns.push_back({"user", req.prompt});
    trace.turns.push_back({"assistant", response});
    try {
        trace.answer = parse_final_answer(response);
    } catch (const NoFinalAnswer& e) {
        trace.failed = true;
        trace.failure_reason = std::string("no_final_answer: ") + e.what();
    }
    return trace;
}

namespace {

// The model sometimes writes its own "Observation:"; everything from there on
// is discarded before the real observation is appended.
std::string cut_at_observation(const std::string& response) {
    const auto pos = response.find("Observation:");
    return text::trim_copy(pos == std::string::npos ? response : response.substr(0, pos));
}

void fail(ReasoningTrace& trace, std::string reason) {
    trace.failed = true;
    trace.answer.clear();
    trace.failure_reason = std::move(reason);
}

} // namespace

ReasoningTrace run_pyagent(const Task& task, Sandbox& sandbox, CompletionClient& client, TableView view,
                           const ReasonerConfig& cfg, const PromptLibrary& prompts) {
    ReasoningTrace trace;
    trace.method = view == TableView::full ? Method::pyagent : Method::pyagent_omitted;
    const std::string base_prompt = render_agent_prompt(task, view, prompts);
    trace.turns.push_back({"user", base_prompt});

    std::string scratchpad;
    int executed = 0;
    for (int turn = 0;; ++turn) {
        if (turn >= cfg.max_turns) {
            fail(trace, "turn_budget");
            return trace;
        }
        CompletionRequest req;
        req.prompt = scratchpad.empty() ? base_prompt : base_prompt + "\n" + scratchpad;
        req.temperature = cfg.temperature;
        req.max_output_tokens = cfg.agent_max_tokens;
        req.sample_index = cfg.sample_index;
        req.turn = turn;

        std::string response;
        try {
            response = client.complete(req);
        } catch (const FixtureMiss&) {
            throw;
        } catch (const GatewayError& e) {
            fail(trace, std::string("gateway_error: ") + e.what());
            return trace;
        }
        const std::string kept = cut_at_observation(response);
        trace.turns.push_back({"assistant", kept});

        const auto parsed = parse_agent_step(kept);
        if (const auto* final = std::get_if<AgentFinal>(&parsed)) {
            trace.answer = final->answer;
            return trace;
        }

        AgentStep step;
        if (const auto* act = std::get_if<AgentAct>(&parsed)) {
            step.thought = act->thought;
            step.action = act->action;
            step.action_input = act->action_input;
            if (act->action == kPythonTool) {
                if (executed >= cfg.max_actions) {
                    fail(trace, "step_budget");
                    return trace;
                }
                Observation obs;
                try {
                    obs = sandbox.execute(act->action_input, cfg.exec_timeout_ms);
                } catch (const ObservationMiss&) {
                    throw;
                } catch (const std::exception& e) {
                    fail(trace, std::string("sandbox_error: ") + e.what());
                    return trace;
                }
                ++executed;
                step.observation = obs.render();
                step.truncated = obs.truncated;
                if (text::utf8_length(step.observation) > cfg.observation_limit) {
                    step.observation = text::utf8_truncate(step.observation, cfg.observation_limit);
                    step.observation += kTruncationMarker;
                    step.truncated = true;
                }
            } else {
                step.observation = std::string(kInvalidActionObservation);
            }
        } else {
            step.observation = std::string(kMalformedObservation);
        }

        scratchpad += kept + "\nObservation: " + step.observation + "\n";
        trace.turns.push_back({"observation", step.observation});
        trace.steps.push_back(std::move(step));
    }
}

} // namespace tabreason
