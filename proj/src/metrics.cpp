#include "geobench/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <fmt/core.h>

#include "geobench/errors.hpp"

namespace fs = std::filesystem;

namespace geobench {

namespace {

void require_gold(std::size_t n) {
    if (n == 0) throw EmptyGold("gold toolchain is empty");
}

bool close(double a, double b, double tolerance) {
    if (a == b) return true;
    return std::abs(a - b) <= tolerance * std::max(std::abs(a), std::abs(b));
}

bool same_value(const Json& a, const Json& b, double tolerance) {
    if (a.is_number() && b.is_number()) return close(a.get<double>(), b.get<double>(), tolerance);
    return a == b;
}

bool same_list(Json a, Json b, double tolerance, bool as_set) {
    if (!a.is_array() || !b.is_array() || a.size() != b.size()) return false;
    if (as_set) {
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!same_value(a[i], b[i], tolerance)) return false;
    }
    return true;
}

std::optional<std::string> path_value(const ParamSpec& spec, const Json& value) {
    auto v = coerce_value(spec, value);
    if (!v || !v->is_string()) return std::nullopt;
    return v->get<std::string>();
}

} // namespace

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

std::size_t common_prefix_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    const auto [ia, ib] = std::mismatch(a.begin(), a.end(), b.begin(), b.end());
    return static_cast<std::size_t>(ia - a.begin());
}

TaoScore tao(const std::vector<std::string>& pred, const std::vector<std::string>& gold) {
    require_gold(gold.size());
    const std::set<std::string> p(pred.begin(), pred.end());
    const std::set<std::string> g(gold.begin(), gold.end());
    std::vector<std::string> both;
    std::set_intersection(p.begin(), p.end(), g.begin(), g.end(), std::back_inserter(both));
    TaoScore s;
    const double hit = static_cast<double>(both.size());
    s.precision = p.empty() ? 0.0 : hit / static_cast<double>(p.size());
    s.recall = hit / static_cast<double>(g.size());
    s.f1 = s.precision + s.recall > 0 ? 2 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
    return s;
}

double tio(const std::vector<std::string>& pred, const std::vector<std::string>& gold) {
    require_gold(gold.size());
    return static_cast<double>(lcs_length(pred, gold)) / static_cast<double>(gold.size());
}

double tem(const std::vector<std::string>& pred, const std::vector<std::string>& gold) {
    require_gold(gold.size());
    return static_cast<double>(common_prefix_length(pred, gold)) / static_cast<double>(gold.size());
}

TaoScore tao(const Trajectory& trajectory, const GoldToolchain& gold) {
    return tao(trajectory.tool_sequence(), gold.tool_sequence());
}

double tio(const Trajectory& trajectory, const GoldToolchain& gold) {
    return tio(trajectory.tool_sequence(), gold.tool_sequence());
}

double tem(const Trajectory& trajectory, const GoldToolchain& gold) {
    return tem(trajectory.tool_sequence(), gold.tool_sequence());
}

bool equivalent_param(const ParamSpec& spec, const Json& gold, const Json& pred,
                      const std::map<std::string, std::string>& mapping) {
    auto g = coerce_value(spec, gold);
    auto p = coerce_value(spec, pred);
    if (!g || !p) return false;
    if (spec.role == ParamRole::input_path || spec.role == ParamRole::output_path) {
        auto name = g->get<std::string>();
        if (auto it = mapping.find(name); it != mapping.end()) name = it->second;
        return name == p->get<std::string>();
    }
    switch (spec.kind) {
    case ParamKind::integer:
    case ParamKind::real:
        return close(g->get<double>(), p->get<double>(), spec.tolerance());
    case ParamKind::list:
        return same_list(*g, *p, spec.tolerance(), spec.set_semantics);
    default:
        return *g == *p;
    }
}

PeaResult pea(const Trajectory& trajectory, const GoldToolchain& gold, const ToolRegistry& registry,
              const fs::path& workspace) {
    require_gold(gold.size());
    for (const auto& step : gold.steps) (void)registry.lookup(step.tool);

    const auto n = gold.size();
    std::vector<const ToolCallRecord*> matched(n, nullptr);

    // Backward pass: each gold step takes the last same-tool record strictly
    // before the nearest later match.
    std::optional<int> bound;
    for (std::size_t k = n; k-- > 0;) {
        const auto& tool = gold.steps[k].tool;
        for (auto it = trajectory.records.rbegin(); it != trajectory.records.rend(); ++it) {
            if (bound && it->step >= *bound) continue;
            if (it->tool != tool) continue;
            matched[k] = &*it;
            bound = it->step;
            break;
        }
    }

    PeaResult result;
    auto& al = result.alignment;
    std::size_t passed = 0;
    for (std::size_t k = 0; k < n; ++k) {
        const auto& g = gold.steps[k];
        const auto* rec = matched[k];
        al.pairs.push_back({g.index, rec ? std::optional<int>(rec->step) : std::nullopt});
        if (!rec) {
            al.per_step_pass.push_back(false);
            al.notes.push_back(fmt::format("step {}: no {} call", g.index, g.tool));
            continue;
        }
        const auto& schema = registry.lookup(g.tool);

        // Outputs first so later steps see the mapping even if this one fails.
        for (const auto& [name, value] : g.args) {
            const auto* spec = schema.find(name);
            if (!spec || spec->role != ParamRole::output_path) continue;
            auto it = rec->args.find(name);
            if (it == rec->args.end()) continue;
            auto gp = path_value(*spec, value);
            auto pp = path_value(*spec, it->second);
            if (gp && pp && *gp != *pp) al.mapping[*gp] = *pp;
        }

        std::string why;
        for (const auto& [name, value] : g.args) {
            const auto* spec = schema.find(name);
            if (spec && spec->role == ParamRole::stylistic) continue;
            auto it = rec->args.find(name);
            if (it == rec->args.end()) {
                why = fmt::format("missing parameter '{}'", name);
                break;
            }
            if (spec && spec->role == ParamRole::output_path) continue;
            const bool same = spec ? equivalent_param(*spec, value, it->second, al.mapping)
                                   : same_value(value, it->second, kDefaultNumericTolerance);
            if (!same) {
                why = fmt::format("parameter '{}' differs", name);
                break;
            }
        }
        if (why.empty()) {
            for (const auto& out : schema.output_params()) {
                auto it = rec->args.find(out);
                if (it == rec->args.end()) continue;
                auto path = path_value(*schema.find(out), it->second);
                std::error_code ec;
                if (!path || !fs::exists(workspace / *path, ec)) {
                    why = fmt::format("output '{}' does not exist", it->second.dump());
                    break;
                }
            }
        }
        al.per_step_pass.push_back(why.empty());
        if (why.empty()) {
            ++passed;
        } else {
            al.notes.push_back(fmt::format("step {}: {}", g.index, why));
        }
    }
    result.score = static_cast<double>(passed) / static_cast<double>(n);
    return result;
}

double step_efficiency(EffSample s) {
    if (s.n_gt < 1) throw std::invalid_argument("n_gt must be at least 1");
    return static_cast<double>(s.n_gt) / static_cast<double>(std::max(s.n_gt, s.n_pred));
}

std::optional<Efficiency> efficiency(std::span<const EffSample> successful) {
    if (successful.empty()) return std::nullopt;
    double sum = 0;
    long long gt = 0, denom = 0;
    for (const auto& s : successful) {
        sum += step_efficiency(s);
        gt += s.n_gt;
        denom += std::max(s.n_gt, s.n_pred);
    }
    return Efficiency{sum / static_cast<double>(successful.size()),
                      static_cast<double>(gt) / static_cast<double>(denom)};
}

std::string mapped_result_path(const TaskSpec& task, const PeaAlignment& alignment) {
    const auto name = normalize_relative_path(task.result_filename);
    auto it = alignment.mapping.find(name);
    return it == alignment.mapping.end() ? name : it->second;
}

MetricReport score_trajectory(const Trajectory& trajectory, const TaskSpec& task,
                              const ToolRegistry& registry, const fs::path& workspace) {
    const auto& gold = task.gold_toolchain;
    MetricReport r;
    r.tao = tao(trajectory, gold);
    r.tio = tio(trajectory, gold);
    r.tem = tem(trajectory, gold);
    const auto p = pea(trajectory, gold, registry, workspace);
    r.pea = p.score;
    r.n_gt = static_cast<int>(gold.size());
    r.n_pred = static_cast<int>(trajectory.records.size());
    r.eff_task = step_efficiency({r.n_gt, r.n_pred});
    std::error_code ec;
    r.success = trajectory.terminal == Terminal::completed &&
                fs::exists(workspace / mapped_result_path(task, p.alignment), ec);
    return r;
}

} // namespace geobench
