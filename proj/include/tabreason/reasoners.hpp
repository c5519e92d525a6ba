#pragma once

#include "tabreason/dataset.hpp"
#include "tabreason/gateway.hpp"
#include "tabreason/prompts.hpp"
#include "tabreason/sandbox.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace tabreason {

enum class Method { dp, pyagent, pyagent_omitted };

std::string_view to_string(Method m);
Method parse_method(std::string_view name);
inline bool is_agent(Method m) { return m != Method::dp; }

inline constexpr std::string_view kPythonTool = "python_repl_ast";

struct AgentStep {
    std::string thought;
    std::string action;
    std::string action_input;
    std::string observation;
    bool truncated = false;
};

struct Turn {
    std::string role; ///< "user", "assistant" or "observation"
    std::string text;
};

struct ReasoningTrace {
    Method method = Method::dp;
    std::vector<Turn> turns;
    std::vector<AgentStep> steps;
    std::vector<std::string> answer;
    bool failed = false;
    std::optional<std::string> failure_reason;

    /// Number of steps actually sent to the sandbox.
    std::size_t executed_actions() const;

    nlohmann::json to_json() const;
    static ReasoningTrace from_json(const nlohmann::json& j);
};

class NoFinalAnswer : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Last case-insensitive "Final Answer:", rest of that line, split on ", ".
std::vector<std::string> parse_final_answer(std::string_view text);

struct AgentAct {
    std::string thought;
    std::string action;
    std::string action_input;
};
struct AgentFinal {
    std::vector<std::string> answer;
};
struct AgentMalformed {
    std::string reason;
};
using AgentTurn = std::variant<AgentAct, AgentFinal, AgentMalformed>;

/// Final when a "Final Answer:" line precedes every "Action:" line; Act when
/// both "Action:" and "Action Input:" are present (input runs to
/// "Observation:" or the end, code fences stripped); Malformed otherwise.
AgentTurn parse_agent_step(std::string_view text);

struct ReasonerConfig {
    double temperature = 0.0;
    int sample_index = 0;
    int dp_max_tokens = 2048;
    int agent_max_tokens = 1024;
    /// Executed sandbox actions before the run is abandoned.
    int max_actions = 5;
    /// Hard cap on model turns; invalid and malformed turns count here.
    int max_turns = 10;
    std::size_t observation_limit = 2000;
    int exec_timeout_ms = 10000;
};

inline constexpr std::string_view kTruncationMarker = " …[truncated]";
inline constexpr std::string_view kInvalidActionObservation = "Invalid action; only python_repl_ast is allowed";
inline constexpr std::string_view kMalformedObservation =
    "Invalid format; reply with Thought/Action/Action Input, or Thought/Final Answer";

/// Prompt for the agent at turn 0. Exposed so tests can check the view.
std::string render_agent_prompt(const Task& task, TableView view, const PromptLibrary& prompts);
std::string render_dp_prompt(const Task& task, const PromptLibrary& prompts);

/// Single textual chain-of-thought pass. Gateway errors propagate; a response
/// without a final answer yields a failed trace.
ReasoningTrace run_dp(const Task& task, CompletionClient& client, const ReasonerConfig& cfg,
                      const PromptLibrary& prompts = PromptLibrary::bundled());

/// Thought/Action/Observation loop against `sandbox`, which must already hold
/// the task's table. Replay misses (FixtureMiss, ObservationMiss) propagate;
/// other gateway and sandbox errors end the run as a failed trace.
ReasoningTrace run_pyagent(const Task& task, Sandbox& sandbox, CompletionClient& client, TableView view,
                           const ReasonerConfig& cfg, const PromptLibrary& prompts = PromptLibrary::bundled());

} // namespace tabreason
