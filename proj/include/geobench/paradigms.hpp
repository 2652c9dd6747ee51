#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "geobench/model.hpp"
#include "geobench/registry.hpp"
#include "geobench/sandbox.hpp"
#include "geobench/trajectory.hpp"

namespace geobench {

enum class Paradigm { base, react, plan_solve, plan_react };

std::string_view to_string(Paradigm paradigm);
std::optional<Paradigm> parse_paradigm(std::string_view text);  // "plan-solve" etc.
const std::vector<Paradigm>& all_paradigms();

inline constexpr int kDefaultRetryBudget = 3;

struct AgentConfig {
    int retry_budget = kDefaultRetryBudget;  // attempts per plan step in plan-react
};

// Shared prompt pieces. The system prompt is a versioned asset compiled into
// the library.
inline constexpr std::string_view kSystemPromptVersion = "v1";
std::string_view system_prompt();
std::string task_message(const TaskSpec& task);
std::string plan_request();
std::string step_request(const std::vector<PlanStep>& plan, std::size_t index);
std::string observation_message(const ToolCallRecord& record, bool with_hint);

// Drives one task through `workspace` and returns the trajectory. Malformed
// model output is re-prompted once; a second failure raises
// ModelProtocolViolation (MissingPlan when the plan itself never arrives).
Trajectory run_base(const TaskSpec& task, const ToolRegistry& registry, Workspace& workspace,
                    ModelClient& model, const AgentConfig& config = {});
Trajectory run_react(const TaskSpec& task, const ToolRegistry& registry, Workspace& workspace,
                     ModelClient& model, const AgentConfig& config = {});
Trajectory run_plan_solve(const TaskSpec& task, const ToolRegistry& registry, Workspace& workspace,
                          ModelClient& model, const AgentConfig& config = {});
Trajectory run_plan_react(const TaskSpec& task, const ToolRegistry& registry, Workspace& workspace,
                          ModelClient& model, const AgentConfig& config = {});

Trajectory run_paradigm(Paradigm paradigm, const TaskSpec& task, const ToolRegistry& registry,
                        Workspace& workspace, ModelClient& model, const AgentConfig& config = {});

} // namespace geobench
