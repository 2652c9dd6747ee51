#include "geobench/model.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <fmt/core.h>

#include "geobench/errors.hpp"

namespace geobench {

std::string_view to_string(TurnKind kind) {
    switch (kind) {
    case TurnKind::tool_call: return "tool_call";
    case TurnKind::plan: return "plan";
    case TurnKind::final_answer: return "final_answer";
    }
    return "final_answer";
}

std::string_view to_string(Role role) {
    switch (role) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
    }
    return "user";
}

namespace {

std::string_view strip(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

// Body of a ```/```json fence when the reply is one, else the reply itself.
std::string_view unfence(std::string_view s) {
    s = strip(s);
    if (s.substr(0, 3) != "```") return s;
    auto nl = s.find('\n');
    if (nl == std::string_view::npos) return s;
    auto body = s.substr(nl + 1);
    auto close = body.rfind("```");
    if (close == std::string_view::npos) return s;
    return strip(body.substr(0, close));
}

PlanStep plan_step_from_json(const Json& j) {
    if (j.is_string()) return {j.get<std::string>(), std::nullopt};
    if (!j.is_object()) throw ModelProtocolViolation("plan steps must be strings or objects");
    PlanStep step;
    for (const auto& [key, value] : j.items()) {
        if (key == "description" && value.is_string()) {
            step.description = value.get<std::string>();
        } else if (key == "tool" && value.is_string()) {
            step.suggested_tool = value.get<std::string>();
        } else if (key == "tool" && value.is_null()) {
        } else {
            throw ModelProtocolViolation(fmt::format("plan step: unexpected field '{}'", key));
        }
    }
    if (strip(step.description).empty()) throw ModelProtocolViolation("plan step without description");
    return step;
}

} // namespace

ModelTurn turn_from_json(const Json& j) {
    if (!j.is_object()) throw ModelProtocolViolation("reply must be a JSON object");
    static const std::set<std::string> fields{"kind", "tool", "args", "plan", "text"};
    for (const auto& [key, value] : j.items()) {
        if (!fields.contains(key)) throw ModelProtocolViolation(fmt::format("unknown field '{}'", key));
    }
    if (!j.contains("kind") || !j["kind"].is_string()) {
        throw ModelProtocolViolation("field 'kind' is required");
    }
    ModelTurn t;
    const auto kind = j["kind"].get<std::string>();
    if (kind == "tool_call") {
        t.kind = TurnKind::tool_call;
    } else if (kind == "plan") {
        t.kind = TurnKind::plan;
    } else if (kind == "final_answer") {
        t.kind = TurnKind::final_answer;
    } else {
        throw ModelProtocolViolation(fmt::format("unknown kind '{}'", kind));
    }
    if (j.contains("text") && !j["text"].is_null()) {
        if (!j["text"].is_string()) throw ModelProtocolViolation("field 'text' must be a string");
        t.text = j["text"].get<std::string>();
    }
    if (j.contains("tool") && !j["tool"].is_null()) {
        if (!j["tool"].is_string()) throw ModelProtocolViolation("field 'tool' must be a string");
        t.tool = j["tool"].get<std::string>();
    }
    if (j.contains("args") && !j["args"].is_null()) {
        if (!j["args"].is_object()) throw ModelProtocolViolation("field 'args' must be an object");
        ArgMap args;
        for (const auto& [k, v] : j["args"].items()) args.emplace(k, v);
        t.args = std::move(args);
    }
    if (j.contains("plan") && !j["plan"].is_null()) {
        if (!j["plan"].is_array()) throw ModelProtocolViolation("field 'plan' must be a list");
        for (const auto& s : j["plan"]) t.plan_steps.push_back(plan_step_from_json(s));
    }
    switch (t.kind) {
    case TurnKind::tool_call:
        if (!t.tool || t.tool->empty() || !t.args) {
            throw ModelProtocolViolation("tool_call needs 'tool' and 'args'");
        }
        break;
    case TurnKind::plan:
        if (t.plan_steps.empty()) throw ModelProtocolViolation("plan needs a non-empty 'plan'");
        break;
    case TurnKind::final_answer:
        break;
    }
    return t;
}

Json turn_to_json(const ModelTurn& t) {
    Json j{{"kind", to_string(t.kind)}};
    if (t.tool) j["tool"] = *t.tool;
    if (t.args) {
        Json args = Json::object();
        for (const auto& [k, v] : *t.args) args[k] = v;
        j["args"] = std::move(args);
    }
    if (!t.plan_steps.empty()) {
        Json plan = Json::array();
        for (const auto& s : t.plan_steps) {
            if (s.suggested_tool) {
                plan.push_back({{"description", s.description}, {"tool", *s.suggested_tool}});
            } else {
                plan.push_back(s.description);
            }
        }
        j["plan"] = std::move(plan);
    }
    if (t.text) j["text"] = *t.text;
    return j;
}

ModelTurn parse_model_turn(std::string_view reply) {
    const auto body = unfence(reply);
    Json j;
    try {
        j = Json::parse(body);
    } catch (const Json::parse_error& e) {
        throw ModelProtocolViolation(fmt::format("reply is not a JSON object: {}", e.what()));
    }
    return turn_from_json(j);
}

std::string render_model_turn(const ModelTurn& turn) { return turn_to_json(turn).dump(); }

ScriptedModel::ScriptedModel(std::optional<std::vector<PlanStep>> plan, std::vector<ModelTurn> turns,
                             std::vector<Reaction> reactions, Exhausted on_exhausted)
    : plan_(std::move(plan)),
      turns_(std::move(turns)),
      raw_(turns_.size()),
      reactions_(std::move(reactions)),
      on_exhausted_(on_exhausted) {
    for (const auto& r : reactions_) {
        try {
            compiled_.emplace_back(r.pattern, std::regex::ECMAScript);
        } catch (const std::regex_error& e) {
            throw MalformedDocument(fmt::format("script reaction pattern '{}': {}", r.pattern, e.what()));
        }
    }
}

ScriptedModel ScriptedModel::from_json(const Json& script) {
    try {
        if (!script.is_object()) throw MalformedDocument("script must be an object");
        static const std::set<std::string> fields{"plan", "turns", "reactions", "on_exhausted"};
        for (const auto& [key, value] : script.items()) {
            if (!fields.contains(key)) throw MalformedDocument(fmt::format("script: unknown field '{}'", key));
        }
        std::optional<std::vector<PlanStep>> plan;
        if (script.contains("plan")) {
            plan.emplace();
            for (const auto& s : script["plan"]) plan->push_back(plan_step_from_json(s));
        }
        std::vector<ModelTurn> turns;
        for (const auto& t : script.value("turns", Json::array())) turns.push_back(turn_from_json(t));
        std::vector<Reaction> reactions;
        for (const auto& r : script.value("reactions", Json::array())) {
            reactions.push_back({r.at("match").get<std::string>(), turn_from_json(r.at("turn"))});
        }
        const auto exhausted = script.value("on_exhausted", std::string("final_answer"));
        if (exhausted != "final_answer" && exhausted != "repeat_last") {
            throw MalformedDocument(fmt::format("script: unknown on_exhausted '{}'", exhausted));
        }
        return ScriptedModel(std::move(plan), std::move(turns), std::move(reactions),
                             exhausted == "repeat_last" ? Exhausted::repeat_last : Exhausted::final_answer);
    } catch (const ModelProtocolViolation& e) {
        throw MalformedDocument(fmt::format("script: {}", e.what()));
    } catch (const Json::exception& e) {
        throw MalformedDocument(fmt::format("script: {}", e.what()));
    }
}

ScriptedModel ScriptedModel::load(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw MalformedDocument(fmt::format("cannot read script '{}'", file.string()));
    try {
        return from_json(Json::parse(in));
    } catch (const Json::parse_error& e) {
        throw MalformedDocument(fmt::format("script '{}': {}", file.string(), e.what()));
    }
}

void ScriptedModel::set_raw_turn(std::size_t index, std::string raw) {
    if (index >= raw_.size()) throw std::out_of_range("no such scripted turn");
    raw_[index] = std::move(raw);
}

std::optional<std::size_t> ScriptedModel::reaction_for(const Message& prompt) const {
    for (std::size_t i = 0; i < compiled_.size(); ++i) {
        if (std::regex_search(prompt.content, compiled_[i])) return i;
    }
    return std::nullopt;
}

std::string ScriptedModel::reply_for_turn(std::size_t index) const {
    if (index < turns_.size()) return raw_[index] ? *raw_[index] : render_model_turn(turns_[index]);
    if (on_exhausted_ == Exhausted::repeat_last && !turns_.empty()) {
        return reply_for_turn(turns_.size() - 1);
    }
    return render_model_turn({TurnKind::final_answer, {}, {}, {}, std::string("done")});
}

std::string ScriptedModel::generate(const std::vector<Message>& context, const std::string&) {
    auto is_plan_request = [](const Message& m) {
        return m.role == Role::user && m.content.rfind(kPlanRequestHeader, 0) == 0;
    };

    std::size_t cursor = 0;
    const Message* prompt = nullptr;
    for (const auto& m : context) {
        if (m.role != Role::assistant) {
            prompt = &m;
            continue;
        }
        if (!prompt || (plan_ && is_plan_request(*prompt))) continue;
        if (!reaction_for(*prompt)) ++cursor;
    }
    if (!prompt) return reply_for_turn(cursor);
    if (plan_ && is_plan_request(*prompt)) {
        ModelTurn plan;
        plan.kind = TurnKind::plan;
        plan.plan_steps = *plan_;
        return render_model_turn(plan);
    }
    if (auto r = reaction_for(*prompt)) return render_model_turn(reactions_[*r].turn);
    return reply_for_turn(cursor);
}

} // namespace geobench
