#include "geobench/registry.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/core.h>

#include "geobench/errors.hpp"

namespace geobench {

namespace {

constexpr std::array<std::pair<ParamKind, std::string_view>, 7> kKindNames{{
    {ParamKind::integer, "integer"},
    {ParamKind::real, "real"},
    {ParamKind::string, "string"},
    {ParamKind::boolean, "boolean"},
    {ParamKind::enumeration, "enum"},
    {ParamKind::path, "path"},
    {ParamKind::list, "list"},
}};

constexpr std::array<std::pair<ParamRole, std::string_view>, 4> kRoleNames{{
    {ParamRole::input_path, "input_path"},
    {ParamRole::output_path, "output_path"},
    {ParamRole::stylistic, "stylistic"},
    {ParamRole::plain, "plain"},
}};

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::optional<long long> parse_integer(std::string_view text) {
    const auto t = trim(text);
    long long v = 0;
    const auto* first = t.data();
    const auto* last = t.data() + t.size();
    if (!t.empty() && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last || first == last) return std::nullopt;
    return v;
}

std::optional<double> parse_real(std::string_view text) {
    const auto t = trim(text);
    if (t.empty()) return std::nullopt;
    // strtod accepts the formats a caller is likely to send ("1e3", "+2.5");
    // the whole string must be consumed.
    char* end = nullptr;
    const double v = std::strtod(t.c_str(), &end);
    if (end != t.c_str() + t.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

std::string describe(const Json& value) {
    return value.dump(-1, ' ', false, Json::error_handler_t::replace);
}

void set_note(std::string* note, std::string text) {
    if (note) *note = std::move(text);
}

} // namespace

std::string_view to_string(ParamKind kind) {
    for (const auto& [k, n] : kKindNames) {
        if (k == kind) return n;
    }
    return "unknown";
}

std::string_view to_string(ParamRole role) {
    for (const auto& [r, n] : kRoleNames) {
        if (r == role) return n;
    }
    return "unknown";
}

std::optional<ParamKind> parse_param_kind(std::string_view text) {
    for (const auto& [k, n] : kKindNames) {
        if (n == text) return k;
    }
    return std::nullopt;
}

std::optional<ParamRole> parse_param_role(std::string_view text) {
    for (const auto& [r, n] : kRoleNames) {
        if (n == text) return r;
    }
    return std::nullopt;
}

const ParamSpec* ToolSchema::find(std::string_view param) const {
    auto it = std::find_if(params.begin(), params.end(),
                           [&](const ParamSpec& p) { return p.name == param; });
    return it == params.end() ? nullptr : &*it;
}

bool ToolSchema::has_outputs() const {
    return std::any_of(params.begin(), params.end(),
                       [](const ParamSpec& p) { return p.role == ParamRole::output_path; });
}

std::vector<std::string> ToolSchema::output_params() const {
    std::vector<std::string> out;
    for (const auto& p : params) {
        if (p.role == ParamRole::output_path) out.push_back(p.name);
    }
    return out;
}

void check_schema(const ToolSchema& schema) {
    if (schema.name.empty()) throw SchemaViolation("tool schema: empty name");
    std::set<std::string> seen;
    int map_products = 0;
    for (const auto& p : schema.params) {
        const auto where = fmt::format("tool '{}' param '{}'", schema.name, p.name);
        if (p.name.empty()) throw SchemaViolation(fmt::format("tool '{}': unnamed param", schema.name));
        if (p.name == kOverwriteParam) {
            throw SchemaViolation(where + ": name is reserved");
        }
        if (!seen.insert(p.name).second) throw SchemaViolation(where + ": duplicate name");
        if (p.kind == ParamKind::enumeration && (!p.enum_values || p.enum_values->empty())) {
            throw SchemaViolation(where + ": enum kind needs enum_values");
        }
        if ((p.role == ParamRole::input_path || p.role == ParamRole::output_path) &&
            p.kind != ParamKind::path) {
            throw SchemaViolation(where + ": path roles require kind path");
        }
        if (p.numeric_tolerance && *p.numeric_tolerance < 0.0) {
            throw SchemaViolation(where + ": negative numeric_tolerance");
        }
        if (p.map_product) {
            if (!schema.produces_map || p.role != ParamRole::output_path) {
                throw SchemaViolation(where + ": map_product needs an output path on a map tool");
            }
            ++map_products;
        }
    }
    if (map_products > 1) {
        throw SchemaViolation(fmt::format("tool '{}': more than one map product", schema.name));
    }
}

std::optional<Json> coerce_value(const ParamSpec& spec, const Json& value, std::string* note) {
    switch (spec.kind) {
    case ParamKind::integer:
        if (value.is_number_integer()) return Json(value.get<long long>());
        if (value.is_number_float()) {
            const double d = value.get<double>();
            if (std::isfinite(d) && std::trunc(d) == d && std::abs(d) < 9.0e15) {
                set_note(note, fmt::format("{}: real {} coerced to integer", spec.name, describe(value)));
                return Json(static_cast<long long>(d));
            }
            return std::nullopt;
        }
        if (value.is_string()) {
            if (auto v = parse_integer(value.get<std::string>())) {
                set_note(note, fmt::format("{}: string {} coerced to integer {}", spec.name,
                                           describe(value), *v));
                return Json(*v);
            }
        }
        return std::nullopt;

    case ParamKind::real:
        if (value.is_number()) return Json(value.get<double>());
        if (value.is_string()) {
            if (auto v = parse_real(value.get<std::string>())) {
                set_note(note, fmt::format("{}: string {} coerced to real {}", spec.name,
                                           describe(value), describe(Json(*v))));
                return Json(*v);
            }
        }
        return std::nullopt;

    case ParamKind::string:
        if (value.is_string()) return Json(value);
        return std::nullopt;

    case ParamKind::boolean:
        if (value.is_boolean()) return Json(value);
        if (value.is_string()) {
            const auto t = lower(trim(value.get<std::string>()));
            if (t == "true" || t == "false") {
                set_note(note, fmt::format("{}: string {} coerced to boolean", spec.name,
                                           describe(value)));
                return Json(t == "true");
            }
        }
        if (value.is_number_integer()) {
            const auto v = value.get<long long>();
            if (v == 0 || v == 1) {
                set_note(note, fmt::format("{}: integer {} coerced to boolean", spec.name, v));
                return Json(v == 1);
            }
        }
        return std::nullopt;

    case ParamKind::enumeration: {
        if (!value.is_string() || !spec.enum_values) return std::nullopt;
        const auto& s = value.get_ref<const std::string&>();
        const auto& allowed = *spec.enum_values;
        if (std::find(allowed.begin(), allowed.end(), s) != allowed.end()) return Json(value);
        for (const auto& candidate : allowed) {
            if (lower(candidate) == lower(trim(s))) {
                set_note(note, fmt::format("{}: {} matched enum value '{}'", spec.name,
                                           describe(value), candidate));
                return Json(candidate);
            }
        }
        return std::nullopt;
    }

    case ParamKind::path: {
        if (!value.is_string()) return std::nullopt;
        const auto& s = value.get_ref<const std::string&>();
        if (!is_contained_relative(s)) return std::nullopt;
        return Json(normalize_relative_path(s));
    }

    case ParamKind::list:
        if (value.is_array()) {
            if (!is_flat_arg_value(value)) return std::nullopt;
            return Json(value);
        }
        if (value.is_primitive() && !value.is_null()) {
            set_note(note, fmt::format("{}: scalar {} wrapped into a list", spec.name, describe(value)));
            return Json::array({value});
        }
        return std::nullopt;
    }
    return std::nullopt;
}

void ToolRegistry::register_tool(ToolSchema schema, std::shared_ptr<ToolExecutor> executor) {
    check_schema(schema);
    if (tools_.contains(schema.name)) {
        throw DuplicateTool(fmt::format("tool '{}' is already registered", schema.name));
    }
    auto name = schema.name;
    tools_.emplace(std::move(name), Entry{std::move(schema), std::move(executor)});
}

const ToolSchema* ToolRegistry::find(std::string_view name) const {
    auto it = tools_.find(name);
    return it == tools_.end() ? nullptr : &it->second.schema;
}

const ToolSchema& ToolRegistry::lookup(std::string_view name) const {
    if (const auto* s = find(name)) return *s;
    throw UnknownTool(fmt::format("unknown tool '{}'", name));
}

ToolExecutor& ToolRegistry::executor(std::string_view name) const {
    auto it = tools_.find(name);
    if (it == tools_.end() || !it->second.executor) {
        throw UnknownTool(fmt::format("no executor for tool '{}'", name));
    }
    return *it->second.executor;
}

std::vector<std::string> ToolRegistry::names() const {
    std::vector<std::string> out;
    out.reserve(tools_.size());
    for (const auto& [name, _] : tools_) out.push_back(name);
    return out;
}

ValidatedArgs ToolRegistry::validate_args(std::string_view tool, const ArgMap& args) const {
    const auto& schema = lookup(tool);
    ValidatedArgs result;

    for (const auto& [name, value] : args) {
        if (name == kOverwriteParam && schema.has_outputs()) continue;
        if (!schema.find(name)) {
            throw UnknownParam(fmt::format("{}: unknown parameter '{}'", schema.name, name));
        }
    }

    for (const auto& spec : schema.params) {
        auto it = args.find(spec.name);
        if (it == args.end()) {
            if (spec.required) {
                throw MissingParam(
                    fmt::format("{}: missing required parameter '{}'", schema.name, spec.name));
            }
            continue;
        }
        std::string note;
        auto coerced = coerce_value(spec, it->second, &note);
        if (!coerced) {
            std::string expected{to_string(spec.kind)};
            if (spec.kind == ParamKind::path) expected = "workspace-relative path";
            if (spec.kind == ParamKind::enumeration) {
                expected = "one of ";
                for (std::size_t i = 0; i < spec.enum_values->size(); ++i) {
                    if (i) expected += "|";
                    expected += (*spec.enum_values)[i];
                }
            }
            throw TypeMismatch(fmt::format("{}: parameter '{}' expects {}, got {}", schema.name,
                                           spec.name, expected, describe(it->second)));
        }
        if (!note.empty()) result.coercions.push_back(std::move(note));
        result.args.emplace(spec.name, std::move(*coerced));
    }

    if (auto it = args.find(std::string(kOverwriteParam));
        it != args.end() && schema.has_outputs()) {
        ParamSpec flag{.name = std::string(kOverwriteParam), .kind = ParamKind::boolean};
        std::string note;
        auto coerced = coerce_value(flag, it->second, &note);
        if (!coerced) {
            throw TypeMismatch(fmt::format("{}: parameter 'overwrite' expects boolean, got {}",
                                           schema.name, describe(it->second)));
        }
        if (!note.empty()) result.coercions.push_back(std::move(note));
        result.args.emplace(std::string(kOverwriteParam), std::move(*coerced));
    }
    return result;
}

std::string ToolRegistry::render_manifest() const {
    if (tools_.empty()) throw EmptyRegistry("cannot render a manifest for an empty registry");
    std::string out;
    for (const auto& [name, entry] : tools_) {
        const auto& s = entry.schema;
        out += fmt::format("{}: {}{}\n", name, s.description, s.produces_map ? " [map]" : "");
        for (const auto& p : s.params) {
            std::string kind{to_string(p.kind)};
            if (p.enum_values && !p.enum_values->empty()) {
                kind += " {";
                for (std::size_t i = 0; i < p.enum_values->size(); ++i) {
                    if (i) kind += "|";
                    kind += (*p.enum_values)[i];
                }
                kind += "}";
            }
            std::string role;
            if (p.role != ParamRole::plain) role = fmt::format(", {}", to_string(p.role));
            out += fmt::format("  - {}: {}, {}{}{}\n", p.name, kind,
                               p.required ? "required" : "optional", role,
                               p.description.empty() ? "" : " - " + p.description);
        }
    }
    return out;
}

Json schema_to_json(const ToolSchema& schema) {
    Json params = Json::array();
    for (const auto& p : schema.params) {
        Json jp{{"name", p.name},
                {"kind", to_string(p.kind)},
                {"role", to_string(p.role)},
                {"required", p.required}};
        if (!p.description.empty()) jp["description"] = p.description;
        if (p.enum_values) jp["enum_values"] = *p.enum_values;
        if (p.numeric_tolerance) jp["numeric_tolerance"] = *p.numeric_tolerance;
        if (p.set_semantics) jp["set_semantics"] = true;
        if (p.map_product) jp["map_product"] = true;
        params.push_back(std::move(jp));
    }
    return Json{{"name", schema.name},
                {"description", schema.description},
                {"params", std::move(params)},
                {"produces_map", schema.produces_map}};
}

ToolSchema schema_from_json(const Json& j) {
    try {
        ToolSchema s;
        s.name = j.at("name").get<std::string>();
        s.description = j.value("description", std::string{});
        s.produces_map = j.value("produces_map", false);
        for (const auto& jp : j.value("params", Json::array())) {
            ParamSpec p;
            p.name = jp.at("name").get<std::string>();
            const auto kind = parse_param_kind(jp.at("kind").get<std::string>());
            if (!kind) throw RegistryLoadError(fmt::format("{}.{}: unknown kind", s.name, p.name));
            p.kind = *kind;
            const auto role = parse_param_role(jp.value("role", std::string{"plain"}));
            if (!role) throw RegistryLoadError(fmt::format("{}.{}: unknown role", s.name, p.name));
            p.role = *role;
            p.required = jp.value("required", true);
            p.description = jp.value("description", std::string{});
            if (jp.contains("enum_values")) {
                p.enum_values = jp["enum_values"].get<std::vector<std::string>>();
            }
            if (jp.contains("numeric_tolerance")) {
                p.numeric_tolerance = jp["numeric_tolerance"].get<double>();
            }
            p.set_semantics = jp.value("set_semantics", false);
            p.map_product = jp.value("map_product", false);
            s.params.push_back(std::move(p));
        }
        check_schema(s);
        return s;
    } catch (const Json::exception& e) {
        throw RegistryLoadError(fmt::format("tool schema: {}", e.what()));
    } catch (const SchemaViolation& e) {
        throw RegistryLoadError(e.what());
    }
}

ToolManifest parse_tool_manifest(std::string_view document) {
    Json doc;
    try {
        doc = Json::parse(document);
    } catch (const Json::parse_error& e) {
        throw RegistryLoadError(fmt::format("tool manifest: {}", e.what()));
    }
    if (!doc.is_object() || !doc.contains("tools") || !doc["tools"].is_array()) {
        throw RegistryLoadError("tool manifest: expected an object with a 'tools' list");
    }
    ToolManifest manifest;
    for (const auto& t : doc["tools"]) manifest.tools.push_back(schema_from_json(t));
    if (doc.contains("worker")) {
        try {
            manifest.worker_command = doc["worker"].get<std::vector<std::string>>();
        } catch (const Json::exception&) {
            throw RegistryLoadError("tool manifest: 'worker' must be a list of strings");
        }
    }
    return manifest;
}

ToolManifest load_tool_manifest(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw RegistryLoadError(fmt::format("cannot read tool manifest '{}'", file.string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_tool_manifest(ss.str());
}

} // namespace geobench
