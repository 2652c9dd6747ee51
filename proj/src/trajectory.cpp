#include "geobench/trajectory.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/core.h>

#include "geobench/errors.hpp"

namespace geobench {

namespace {

constexpr std::array<std::pair<ErrorCategory, std::string_view>, 7> kCategoryNames{{
    {ErrorCategory::crs_mismatch, "crs_mismatch"},
    {ErrorCategory::topology_error, "topology_error"},
    {ErrorCategory::file_locked, "file_locked"},
    {ErrorCategory::missing_file, "missing_file"},
    {ErrorCategory::bad_parameter, "bad_parameter"},
    {ErrorCategory::timeout, "timeout"},
    {ErrorCategory::internal, "internal"},
}};

constexpr std::array<std::pair<CallStatus, std::string_view>, 4> kStatusNames{{
    {CallStatus::success, "success"},
    {CallStatus::error, "error"},
    {CallStatus::timeout, "timeout"},
    {CallStatus::rejected, "rejected"},
}};

constexpr std::array<std::pair<Terminal, std::string_view>, 3> kTerminalNames{{
    {Terminal::completed, "completed"},
    {Terminal::step_cap_exceeded, "step_cap_exceeded"},
    {Terminal::aborted, "aborted"},
}};

template <typename E, std::size_t N>
std::string_view name_of(const std::array<std::pair<E, std::string_view>, N>& table, E value) {
    for (const auto& [e, name] : table) {
        if (e == value) return name;
    }
    return "unknown";
}

template <typename E, std::size_t N>
std::optional<E> value_of(const std::array<std::pair<E, std::string_view>, N>& table,
                          std::string_view text) {
    for (const auto& [e, name] : table) {
        if (name == text) return e;
    }
    return std::nullopt;
}

std::string dump_line(const Json& j) {
    return j.dump(-1, ' ', false, Json::error_handler_t::replace);
}

Json parse_json(std::string_view text, std::string_view what) {
    try {
        return Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw MalformedDocument(fmt::format("{}: {}", what, e.what()));
    }
}

template <typename T>
T required(const Json& obj, const char* key, std::string_view where) {
    auto it = obj.find(key);
    if (it == obj.end()) {
        throw SchemaViolation(fmt::format("{}: missing field '{}'", where, key));
    }
    try {
        return it->get<T>();
    } catch (const Json::exception&) {
        throw SchemaViolation(fmt::format("{}: field '{}' has the wrong type", where, key));
    }
}

ArgMap args_from_json(const Json& j, std::string_view where) {
    if (!j.is_object()) {
        throw SchemaViolation(fmt::format("{}: 'args' must be an object", where));
    }
    ArgMap args;
    for (const auto& [key, value] : j.items()) {
        if (!is_flat_arg_value(value)) {
            throw SchemaViolation(
                fmt::format("{}: argument '{}' must be a scalar or a flat list", where, key));
        }
        args.emplace(key, value);
    }
    return args;
}

Json args_to_json(const ArgMap& args) {
    Json j = Json::object();
    for (const auto& [key, value] : args) j[key] = value;
    return j;
}

std::string domain_key(std::string_view text) {
    std::string key;
    for (char c : text) {
        if (c == '_' || c == '-' || c == ' ') {
            if (!key.empty() && key.back() != ' ') key.push_back(' ');
        } else {
            key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        }
    }
    while (!key.empty() && key.back() == ' ') key.pop_back();
    return key;
}

} // namespace

std::string_view to_string(ErrorCategory category) { return name_of(kCategoryNames, category); }
std::optional<ErrorCategory> parse_error_category(std::string_view text) {
    return value_of(kCategoryNames, text);
}
std::string_view to_string(CallStatus status) { return name_of(kStatusNames, status); }
std::optional<CallStatus> parse_call_status(std::string_view text) {
    return value_of(kStatusNames, text);
}
std::string_view to_string(Terminal terminal) { return name_of(kTerminalNames, terminal); }
std::optional<Terminal> parse_terminal(std::string_view text) {
    return value_of(kTerminalNames, text);
}

std::vector<std::string> GoldToolchain::tool_sequence() const {
    std::vector<std::string> out;
    out.reserve(steps.size());
    for (const auto& s : steps) out.push_back(s.tool);
    return out;
}

std::vector<std::string> Trajectory::tool_sequence() const {
    std::vector<std::string> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(r.tool);
    return out;
}

const std::vector<std::string>& known_domains() {
    static const std::vector<std::string> domains{
        "Spatial Data Management",   "Vector Spatial Analysis", "Raster Spatial Analysis",
        "3D Modeling and Analysis",  "Geostatistical Analysis", "Hydrological Analysis",
    };
    return domains;
}

std::optional<std::string> canonical_domain(std::string_view text) {
    const auto key = domain_key(text);
    for (const auto& d : known_domains()) {
        if (domain_key(d) == key) return d;
    }
    return std::nullopt;
}

bool is_contained_relative(std::string_view path) {
    if (path.empty()) return false;
    const std::filesystem::path p{std::string(path)};
    if (p.is_absolute() || p.has_root_name() || p.has_root_directory()) return false;
    const auto normal = p.lexically_normal();
    if (normal.empty() || normal == ".") return false;
    return *normal.begin() != "..";
}

std::string normalize_relative_path(std::string_view path) {
    auto normal = std::filesystem::path{std::string(path)}.lexically_normal().generic_string();
    while (normal.size() > 1 && normal.back() == '/') normal.pop_back();
    return normal;
}

bool is_flat_arg_value(const Json& value) {
    if (value.is_primitive()) return !value.is_null();
    if (!value.is_array()) return false;
    return std::all_of(value.begin(), value.end(),
                       [](const Json& v) { return v.is_primitive() && !v.is_null(); });
}

void check_task_invariants(const TaskSpec& task) {
    const auto where = fmt::format("task '{}'", task.id);
    if (task.id.empty()) throw SchemaViolation("task: 'id' must be non-empty");
    if (!canonical_domain(task.domain)) {
        throw SchemaViolation(fmt::format("{}: unknown domain '{}'", where, task.domain));
    }
    if (task.toolchain_length <= 0) {
        throw SchemaViolation(fmt::format("{}: toolchain_length must be positive", where));
    }
    if (static_cast<std::size_t>(task.toolchain_length) != task.gold_toolchain.size()) {
        throw SchemaViolation(fmt::format("{}: toolchain_length is {} but toolchain has {} steps",
                                          where, task.toolchain_length,
                                          task.gold_toolchain.size()));
    }
    for (std::size_t i = 0; i < task.gold_toolchain.steps.size(); ++i) {
        const auto& step = task.gold_toolchain.steps[i];
        if (step.index != static_cast<int>(i) + 1) {
            throw SchemaViolation(
                fmt::format("{}: toolchain indices must be contiguous from 1", where));
        }
        if (step.tool.empty()) {
            throw SchemaViolation(fmt::format("{}: step {} has no tool", where, step.index));
        }
    }
    for (const auto& input : task.data_description) {
        if (!is_contained_relative(input.path)) {
            throw SchemaViolation(
                fmt::format("{}: data path '{}' must be relative", where, input.path));
        }
    }
    if (!is_contained_relative(task.result_filename)) {
        throw SchemaViolation(fmt::format("{}: result must be a relative filename", where));
    }
    // The output-path role is confirmed against the registry when a run is configured.
    const auto result = normalize_relative_path(task.result_filename);
    const bool produced = std::any_of(
        task.gold_toolchain.steps.begin(), task.gold_toolchain.steps.end(),
        [&](const GoldStep& s) {
            return std::any_of(s.args.begin(), s.args.end(), [&](const auto& kv) {
                return kv.second.is_string() &&
                       normalize_relative_path(kv.second.template get<std::string>()) == result;
            });
        });
    if (!produced) {
        throw SchemaViolation(
            fmt::format("{}: result '{}' is not produced by any gold step", where, result));
    }
}

TaskSpec parse_task_spec(std::string_view document) {
    const Json doc = parse_json(document, "task document");
    if (!doc.is_object()) throw MalformedDocument("task document must be an object");

    static const std::set<std::string> kFields{
        "id",   "domain", "task_description", "data_description", "drawing_style",
        "toolchain_length", "toolchain", "result", "layers",
    };
    for (const auto& [key, _] : doc.items()) {
        if (!kFields.contains(key)) {
            throw SchemaViolation(fmt::format("task document: unknown field '{}'", key));
        }
    }

    TaskSpec task;
    task.id = required<std::string>(doc, "id", "task");
    const auto where = fmt::format("task '{}'", task.id);
    const auto domain = required<std::string>(doc, "domain", where);
    task.domain = canonical_domain(domain).value_or(domain);
    task.task_description = required<std::string>(doc, "task_description", where);
    task.drawing_style = required<std::string>(doc, "drawing_style", where);
    task.toolchain_length = required<int>(doc, "toolchain_length", where);
    task.result_filename = required<std::string>(doc, "result", where);
    task.layers = required<std::vector<std::string>>(doc, "layers", where);

    const auto data = required<Json>(doc, "data_description", where);
    if (!data.is_array()) throw SchemaViolation(where + ": 'data_description' must be a list");
    for (const auto& item : data) {
        DataInput input;
        if (item.is_string()) {
            input.path = item.get<std::string>();
        } else if (item.is_object()) {
            input.path = required<std::string>(item, "path", where);
            input.metadata = item.value("metadata", std::string{});
        } else {
            throw SchemaViolation(where + ": data_description entries must be objects");
        }
        task.data_description.push_back(std::move(input));
    }

    const auto chain = required<Json>(doc, "toolchain", where);
    if (!chain.is_array()) throw SchemaViolation(where + ": 'toolchain' must be a list");
    int position = 0;
    for (const auto& item : chain) {
        ++position;
        if (!item.is_object()) throw SchemaViolation(where + ": toolchain entries must be objects");
        GoldStep step;
        step.index = item.contains("index") ? required<int>(item, "index", where) : position;
        step.tool = required<std::string>(item, "tool", where);
        step.args = args_from_json(item.value("args", Json::object()),
                                   fmt::format("{} step {}", where, step.index));
        task.gold_toolchain.steps.push_back(std::move(step));
    }

    check_task_invariants(task);
    return task;
}

std::string serialize_task_spec(const TaskSpec& task) {
    Json doc;
    doc["id"] = task.id;
    doc["domain"] = task.domain;
    doc["task_description"] = task.task_description;
    Json data = Json::array();
    for (const auto& d : task.data_description) {
        data.push_back({{"path", d.path}, {"metadata", d.metadata}});
    }
    doc["data_description"] = std::move(data);
    doc["drawing_style"] = task.drawing_style;
    doc["toolchain_length"] = task.toolchain_length;
    Json chain = Json::array();
    for (const auto& s : task.gold_toolchain.steps) {
        chain.push_back({{"index", s.index}, {"tool", s.tool}, {"args", args_to_json(s.args)}});
    }
    doc["toolchain"] = std::move(chain);
    doc["result"] = task.result_filename;
    doc["layers"] = task.layers;
    return doc.dump(2) + "\n";
}

namespace {

std::string read_file(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw MalformedDocument(fmt::format("cannot read '{}'", file.string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TaskSpec load_task_spec(const std::filesystem::path& file) {
    return parse_task_spec(read_file(file));
}

Json to_json(const ToolCallRecord& r) {
    Json j;
    j["step"] = r.step;
    j["tool"] = r.tool;
    j["args"] = args_to_json(r.args);
    j["status"] = to_string(r.status);
    if (r.error_message) j["error_message"] = *r.error_message;
    if (r.error_category) j["error_category"] = to_string(*r.error_category);
    j["duration"] = r.duration;
    j["outputs_declared"] = r.outputs_declared;
    if (r.observation) j["observation"] = *r.observation;
    if (r.plan_step) j["plan_step"] = *r.plan_step;
    return j;
}

ToolCallRecord record_from_json(const Json& j) {
    if (!j.is_object()) throw MalformedDocument("trajectory record must be an object");
    ToolCallRecord r;
    try {
        r.step = j.at("step").get<int>();
        r.tool = j.at("tool").get<std::string>();
        r.args = args_from_json(j.value("args", Json::object()), "trajectory record");
        const auto status = parse_call_status(j.at("status").get<std::string>());
        if (!status) throw MalformedDocument("trajectory record: unknown status");
        r.status = *status;
        if (j.contains("error_message")) r.error_message = j["error_message"].get<std::string>();
        if (j.contains("error_category")) {
            r.error_category = parse_error_category(j["error_category"].get<std::string>());
            if (!r.error_category) throw MalformedDocument("trajectory record: unknown category");
        }
        r.duration = j.at("duration").get<double>();
        r.outputs_declared = j.value("outputs_declared", std::vector<std::string>{});
        if (j.contains("observation")) r.observation = j["observation"].get<std::string>();
        if (j.contains("plan_step")) r.plan_step = j["plan_step"].get<int>();
    } catch (const Json::exception& e) {
        throw MalformedDocument(fmt::format("trajectory record: {}", e.what()));
    } catch (const SchemaViolation& e) {
        throw MalformedDocument(e.what());
    }
    if ((r.status == CallStatus::success) == r.error_message.has_value()) {
        throw MalformedDocument(fmt::format(
            "trajectory record {}: error_message must be present exactly when status != success",
            r.step));
    }
    if (r.duration < 0.0) {
        throw MalformedDocument(fmt::format("trajectory record {}: negative duration", r.step));
    }
    return r;
}

std::string serialize_trajectory(const Trajectory& t) {
    Json header;
    header["task_id"] = t.task_id;
    header["terminal"] = to_string(t.terminal);
    if (t.final_answer) header["final_answer"] = *t.final_answer;
    header["records"] = t.records.size();

    std::string out = dump_line(header);
    out.push_back('\n');
    for (const auto& r : t.records) {
        out += dump_line(to_json(r));
        out.push_back('\n');
    }
    return out;
}

Trajectory parse_trajectory(std::string_view document) {
    std::vector<std::string_view> lines;
    std::size_t pos = 0;
    while (pos < document.size()) {
        auto end = document.find('\n', pos);
        if (end == std::string_view::npos) end = document.size();
        auto line = document.substr(pos, end - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (!line.empty()) lines.push_back(line);
        pos = end + 1;
    }
    if (lines.empty()) throw MalformedDocument("trajectory log is empty");

    const Json header = parse_json(lines.front(), "trajectory header");
    Trajectory t;
    try {
        t.task_id = header.at("task_id").get<std::string>();
        const auto terminal = parse_terminal(header.at("terminal").get<std::string>());
        if (!terminal) throw MalformedDocument("trajectory header: unknown terminal status");
        t.terminal = *terminal;
        if (header.contains("final_answer")) {
            t.final_answer = header["final_answer"].get<std::string>();
        }
    } catch (const Json::exception& e) {
        throw MalformedDocument(fmt::format("trajectory header: {}", e.what()));
    }

    for (std::size_t i = 1; i < lines.size(); ++i) {
        auto record = record_from_json(parse_json(lines[i], "trajectory record"));
        if (record.step != static_cast<int>(i)) {
            throw NonMonotoneSteps(fmt::format("record on line {} has step {}, expected {}",
                                               i + 1, record.step, i));
        }
        t.records.push_back(std::move(record));
    }
    if (header.contains("records") &&
        header["records"].get<std::size_t>() != t.records.size()) {
        throw MalformedDocument(fmt::format("trajectory header announces {} records, found {}",
                                            header["records"].get<std::size_t>(),
                                            t.records.size()));
    }
    return t;
}

Trajectory load_trajectory(const std::filesystem::path& file) {
    return parse_trajectory(read_file(file));
}

void save_trajectory(const Trajectory& trajectory, const std::filesystem::path& file) {
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", file.string()));
    out << serialize_trajectory(trajectory);
}

} // namespace geobench
