#pragma once

#include "tabreason/aggregate.hpp"
#include "tabreason/normalizer.hpp"
#include "tabreason/reasoners.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>

namespace testkit {

/// Runs the parser named by the fixture's "kind" on its "input". Returns a
/// description of the first disagreement with "expect", or nullopt.
inline std::optional<std::string> transcript_mismatch(const nlohmann::json& f) {
    using namespace tabreason;
    const std::string kind = f.at("kind");
    const std::string input = f.at("input");
    const auto& expect = f.at("expect");
    const bool wants_error = expect.contains("error");
    auto show = [](const std::vector<std::string>& v) { return nlohmann::json(v).dump(); };

    try {
        if (kind == "final_answer") {
            const auto got = parse_final_answer(input);
            if (wants_error) return "parsed " + show(got) + ", expected an error";
            if (got != expect.at("answer").get<std::vector<std::string>>()) return "answer " + show(got);
        } else if (kind == "agent_step") {
            const auto step = parse_agent_step(input);
            const std::string type = expect.at("type");
            if (type == "act") {
                const auto* act = std::get_if<AgentAct>(&step);
                if (!act) return std::string("not an action");
                if (act->action != expect.at("action").get<std::string>()) return "action " + act->action;
                if (act->action_input != expect.at("input").get<std::string>()) return "input " + act->action_input;
            } else if (type == "final") {
                const auto* fin = std::get_if<AgentFinal>(&step);
                if (!fin) return std::string("not a final answer");
                if (fin->answer != expect.at("answer").get<std::vector<std::string>>()) return "answer " + show(fin->answer);
            } else if (!std::holds_alternative<AgentMalformed>(step)) {
                return std::string("expected a malformed turn");
            }
        } else if (kind == "choice") {
            const auto got = std::string(to_string(parse_choice(input)));
            if (wants_error) return "parsed " + got + ", expected an error";
            if (got != expect.at("choice").get<std::string>()) return "choice " + got;
        } else if (kind == "sort") {
            const auto keys = parse_sort(input);
            if (wants_error) return keys ? std::optional<std::string>("parsed " + show(*keys)) : std::nullopt;
            if (!keys) return std::string("no sort line");
            if (*keys != expect.at("keys").get<std::vector<std::string>>()) return "keys " + show(*keys);
        } else if (kind == "detector") {
            const bool got = parse_transpose_verdict(input);
            if (wants_error) return std::string("parsed, expected an error");
            if (got != expect.at("transpose").get<bool>()) return std::string("wrong verdict");
        } else if (kind == "verdict") {
            const auto v = parse_verdict(input);
            if (expect.at("verdict").is_null()) return v ? std::optional<std::string>("parsed a verdict") : std::nullopt;
            if (!v) return std::string("no verdict");
            if ((*v == VerdictChoice::A ? "A" : "B") != expect.at("verdict").get<std::string>())
                return std::string("wrong verdict");
        } else {
            return "unknown fixture kind " + kind;
        }
    } catch (const NoFinalAnswer& e) {
        if (!wants_error || kind != "final_answer") return std::string("threw: ") + e.what();
    } catch (const UnparseableChoice& e) {
        if (!wants_error || kind != "choice") return std::string("threw: ") + e.what();
    } catch (const UnparseableVerdict& e) {
        if (!wants_error || kind != "detector") return std::string("threw: ") + e.what();
    } catch (const std::exception& e) {
        return std::string("threw: ") + e.what();
    }
    return std::nullopt;
}

} // namespace testkit
