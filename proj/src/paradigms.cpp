#include "geobench/paradigms.hpp"

#include <algorithm>
#include <set>

#include <fmt/core.h>

#include "geobench/errors.hpp"

namespace geobench {

std::string_view to_string(Paradigm p) {
    switch (p) {
    case Paradigm::base: return "base";
    case Paradigm::react: return "react";
    case Paradigm::plan_solve: return "plan-solve";
    case Paradigm::plan_react: return "plan-react";
    }
    return "base";
}

std::optional<Paradigm> parse_paradigm(std::string_view text) {
    for (auto p : all_paradigms()) {
        if (to_string(p) == text) return p;
    }
    if (text == "plan_solve") return Paradigm::plan_solve;
    if (text == "plan_react") return Paradigm::plan_react;
    return std::nullopt;
}

const std::vector<Paradigm>& all_paradigms() {
    static const std::vector<Paradigm> all{Paradigm::base, Paradigm::react, Paradigm::plan_solve,
                                           Paradigm::plan_react};
    return all;
}

std::string task_message(const TaskSpec& task) {
    std::string out = fmt::format("TASK {}\n{}\n", task.id, task.task_description);
    if (!task.data_description.empty()) {
        out += "\nData in the workspace:\n";
        for (const auto& d : task.data_description) {
            out += d.metadata.empty() ? fmt::format("- {}\n", d.path)
                                      : fmt::format("- {}: {}\n", d.path, d.metadata);
        }
    }
    if (!task.drawing_style.empty()) out += fmt::format("\nDrawing style: {}\n", task.drawing_style);
    out += fmt::format("\nResult file: {}\n", task.result_filename);
    return out;
}

std::string plan_request() {
    return fmt::format(
        "{}\nBefore calling any tool, break the task into an ordered list of sub-tasks, one tool "
        "call each. Reply with a plan.",
        kPlanRequestHeader);
}

std::string step_request(const std::vector<PlanStep>& plan, std::size_t index) {
    const auto& step = plan[index];
    std::string out = fmt::format("STEP {} of {}: {}", index + 1, plan.size(), step.description);
    if (step.suggested_tool) out += fmt::format(" (planned tool: {})", *step.suggested_tool);
    out += "\nReply with the tool call for this step.";
    return out;
}

std::string observation_message(const ToolCallRecord& r, bool with_hint) {
    if (r.status == CallStatus::success) {
        return fmt::format("OBSERVATION step {} {}: success{}", r.step, r.tool,
                           r.observation ? ". " + *r.observation : std::string());
    }
    const auto category = r.error_category.value_or(ErrorCategory::internal);
    std::string out = fmt::format("OBSERVATION step {} {}: {} [{}] {}", r.step, r.tool, to_string(r.status),
                                  to_string(category), r.error_message.value_or(""));
    if (with_hint) {
        if (auto hint = remediation_hint(category)) out += fmt::format("\nHint: {}", *hint);
    }
    return out;
}

namespace {

std::string corrective_message(std::string_view problem, std::string_view expected) {
    return fmt::format("FORMAT ERROR: {}. Reply again with a single JSON object: {}.", problem, expected);
}

struct Expect {
    std::set<TurnKind> kinds;
    bool thought = false;
    bool plan = false;  // failures raise MissingPlan
};

std::string describe(const Expect& e) {
    std::vector<std::string> names;
    for (auto k : e.kinds) names.emplace_back(to_string(k));
    std::string out = "kind " + names.front();
    for (std::size_t i = 1; i < names.size(); ++i) out += " or " + names[i];
    if (e.thought) out += ", with your reasoning in 'text'";
    return out;
}

class Session {
public:
    Session(const TaskSpec& task, const ToolRegistry& registry, Workspace& ws, ModelClient& model)
        : registry_(registry), ws_(ws), model_(model), manifest_(registry.render_manifest()) {
        trajectory_.task_id = task.id;
        context_.push_back({Role::system, std::string(system_prompt()) + manifest_});
        context_.push_back({Role::user, task_message(task)});
    }

    std::vector<Message>& context() { return context_; }
    Trajectory& trajectory() { return trajectory_; }

    // Asks the model for a turn, allowing one corrective re-prompt. The
    // accepted raw reply is appended to the context.
    ModelTurn ask(const Expect& expect) {
        std::string problem;
        for (int attempt = 0; attempt < 2; ++attempt) {
            auto raw = model_.generate(context_, manifest_);
            context_.push_back({Role::assistant, raw});
            try {
                auto turn = parse_model_turn(raw);
                if (!expect.kinds.contains(turn.kind)) {
                    problem = fmt::format("kind '{}' is not expected here", to_string(turn.kind));
                } else if (expect.thought && turn.kind == TurnKind::tool_call &&
                           (!turn.text || turn.text->find_first_not_of(" \t\r\n") == std::string::npos)) {
                    problem = "a tool call must carry its reasoning in 'text'";
                } else {
                    return turn;
                }
            } catch (const ModelProtocolViolation& e) {
                problem = e.what();
            }
            if (attempt == 0) context_.push_back({Role::user, corrective_message(problem, describe(expect))});
        }
        const auto msg = fmt::format("task '{}': {}", trajectory_.task_id, problem);
        if (expect.plan) throw MissingPlan(msg);
        throw ModelProtocolViolation(msg);
    }

    // Runs a tool call; nullopt once the step cap is hit.
    std::optional<ToolCallRecord> execute(const ModelTurn& turn, std::optional<int> plan_step = std::nullopt) {
        try {
            return ws_.execute_tool(registry_, *turn.tool, *turn.args, plan_step);
        } catch (const StepCapExceeded&) {
            trajectory_.terminal = Terminal::step_cap_exceeded;
            return std::nullopt;
        }
    }

    Trajectory finish() {
        trajectory_.records = ws_.records();
        return trajectory_;
    }

private:
    const ToolRegistry& registry_;
    Workspace& ws_;
    ModelClient& model_;
    std::string manifest_;
    std::vector<Message> context_;
    Trajectory trajectory_;
};

Trajectory run_loop(const TaskSpec& task, const ToolRegistry& registry, Workspace& ws, ModelClient& model,
                    bool react) {
    Session s(task, registry, ws, model);
    const Expect expect{{TurnKind::tool_call, TurnKind::final_answer}, react, false};
    for (;;) {
        auto turn = s.ask(expect);
        if (turn.kind == TurnKind::final_answer) {
            s.trajectory().final_answer = turn.text;
            break;
        }
        auto record = s.execute(turn);
        if (!record) break;
        s.context().push_back({Role::user, observation_message(*record, react)});
    }
    return s.finish();
}

std::vector<PlanStep> ask_plan(Session& s) {
    s.context().push_back({Role::user, plan_request()});
    return s.ask({{TurnKind::plan}, false, true}).plan_steps;
}

} // namespace

Trajectory run_base(const TaskSpec& task, const ToolRegistry& registry, Workspace& workspace,
                    ModelClient& model, const AgentConfig&) {
    return run_loop(task, registry, workspace, model, false);
}

Trajectory run_react(const TaskSpec& task, const ToolRegistry& registry, Workspace& workspace,
                     ModelClient& model, const AgentConfig&) {
    return run_loop(task, registry, workspace, model, true);
}

Trajectory run_plan_solve(const TaskSpec& task, const ToolRegistry& registry, Workspace& workspace,
                          ModelClient& model, const AgentConfig&) {
    Session s(task, registry, workspace, model);
    const auto plan = ask_plan(s);
    // Observations never enter the context: each step is answered from the
    // plan and the calls made so far.
    for (std::size_t i = 0; i < plan.size(); ++i) {
        s.context().push_back({Role::user, step_request(plan, i)});
        auto turn = s.ask({{TurnKind::tool_call}, false, false});
        if (!s.execute(turn, static_cast<int>(i + 1))) break;
    }
    return s.finish();
}

Trajectory run_plan_react(const TaskSpec& task, const ToolRegistry& registry, Workspace& workspace,
                          ModelClient& model, const AgentConfig& config) {
    Session s(task, registry, workspace, model);
    const auto plan = ask_plan(s);
    const Expect expect{{TurnKind::tool_call, TurnKind::final_answer}, true, false};
    for (std::size_t i = 0; i < plan.size(); ++i) {
        const auto& step = plan[i];
        s.context().push_back({Role::user, step_request(plan, i)});
        for (int attempt = 0; attempt < config.retry_budget; ++attempt) {
            auto turn = s.ask(expect);
            if (turn.kind == TurnKind::final_answer) break;

            // No skipping ahead: a later step's tool is refused unless this step plans it too.
            std::optional<std::size_t> later;
            for (std::size_t k = i + 1; k < plan.size() && *turn.tool != step.suggested_tool; ++k) {
                if (plan[k].suggested_tool == *turn.tool) {
                    later = k;
                    break;
                }
            }
            if (later) {
                s.context().push_back(
                    {Role::user, fmt::format("REFUSED: {} is planned for step {}. Finish step {} first.",
                                             *turn.tool, *later + 1, i + 1)});
                continue;
            }

            auto record = s.execute(turn, static_cast<int>(i + 1));
            if (!record) return s.finish();
            s.context().push_back({Role::user, observation_message(*record, true)});
            const bool done = record->status == CallStatus::success &&
                              (!step.suggested_tool || *step.suggested_tool == record->tool);
            if (done) break;
        }
    }
    return s.finish();
}

Trajectory run_paradigm(Paradigm paradigm, const TaskSpec& task, const ToolRegistry& registry,
                        Workspace& workspace, ModelClient& model, const AgentConfig& config) {
    switch (paradigm) {
    case Paradigm::base: return run_base(task, registry, workspace, model, config);
    case Paradigm::react: return run_react(task, registry, workspace, model, config);
    case Paradigm::plan_solve: return run_plan_solve(task, registry, workspace, model, config);
    case Paradigm::plan_react: return run_plan_react(task, registry, workspace, model, config);
    }
    throw std::invalid_argument("unknown paradigm");
}

} // namespace geobench
