#pragma once

#include <filesystem>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include "geobench/trajectory.hpp"

namespace geobench {

enum class TurnKind { tool_call, plan, final_answer };

std::string_view to_string(TurnKind kind);

struct PlanStep {
    std::string description;
    std::optional<std::string> suggested_tool;

    bool operator==(const PlanStep&) const = default;
};

struct Plan {
    std::vector<PlanStep> steps;
};

struct ModelTurn {
    TurnKind kind = TurnKind::final_answer;
    std::optional<std::string> tool;
    std::optional<ArgMap> args;
    std::vector<PlanStep> plan_steps;
    std::optional<std::string> text;  // thought for tool calls, answer for final_answer

    bool operator==(const ModelTurn&) const = default;
};

// Reply format: one JSON object with the fields kind, tool, args, plan, text.
// Surrounding whitespace and a ```json fence are tolerated; unknown fields,
// a missing kind, or a turn breaking its invariants raise ModelProtocolViolation.
ModelTurn parse_model_turn(std::string_view reply);
std::string render_model_turn(const ModelTurn& turn);
ModelTurn turn_from_json(const Json& j);
Json turn_to_json(const ModelTurn& turn);

enum class Role { system, user, assistant };

struct Message {
    Role role = Role::user;
    std::string content;

    bool operator==(const Message&) const = default;
};

std::string_view to_string(Role role);

// A model backend. Implementations must not keep state between calls; the
// message list is the whole context.
class ModelClient {
public:
    virtual ~ModelClient() = default;
    virtual std::string generate(const std::vector<Message>& context, const std::string& manifest) = 0;
};

// First line of the user message that asks for a plan.
inline constexpr std::string_view kPlanRequestHeader = "PLAN REQUEST";

// Deterministic backend replaying a script. The reply is a function of the
// context only: the position in `turns` is recovered by counting earlier
// assistant replies that were not reactions.
//
// Script document:
//   {"plan": ["step", {"description": "...", "tool": "..."}],
//    "turns": [<turn>, ...],
//    "reactions": [{"match": "<regex>", "turn": <turn>}],
//    "on_exhausted": "final_answer" | "repeat_last"}
class ScriptedModel final : public ModelClient {
public:
    struct Reaction {
        std::string pattern;
        ModelTurn turn;
    };

    enum class Exhausted { final_answer, repeat_last };

    ScriptedModel(std::optional<std::vector<PlanStep>> plan, std::vector<ModelTurn> turns,
                  std::vector<Reaction> reactions = {}, Exhausted on_exhausted = Exhausted::final_answer);

    static ScriptedModel from_json(const Json& script);  // MalformedDocument
    static ScriptedModel load(const std::filesystem::path& file);

    std::string generate(const std::vector<Message>& context, const std::string& manifest) override;

    // Raw replies are overridable so tests can script malformed output.
    void set_raw_turn(std::size_t index, std::string raw);

private:
    std::optional<std::size_t> reaction_for(const Message& prompt) const;
    std::string reply_for_turn(std::size_t index) const;

    std::optional<std::vector<PlanStep>> plan_;
    std::vector<ModelTurn> turns_;
    std::vector<std::optional<std::string>> raw_;
    std::vector<Reaction> reactions_;
    std::vector<std::regex> compiled_;
    Exhausted on_exhausted_;
};

} // namespace geobench
