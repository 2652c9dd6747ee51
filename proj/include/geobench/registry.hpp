#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "geobench/trajectory.hpp"

namespace geobench {

enum class ParamKind { integer, real, string, boolean, enumeration, path, list };
enum class ParamRole { input_path, output_path, stylistic, plain };

std::string_view to_string(ParamKind kind);
std::string_view to_string(ParamRole role);
std::optional<ParamKind> parse_param_kind(std::string_view text);
std::optional<ParamRole> parse_param_role(std::string_view text);

// Every tool that declares an output path implicitly accepts this boolean.
// Passing overwrite=true grants a second write to an already-written path.
inline constexpr std::string_view kOverwriteParam = "overwrite";

// Relative tolerance used for numeric parameter equivalence unless a ParamSpec overrides it.
inline constexpr double kDefaultNumericTolerance = 1e-9;

struct ParamSpec {
    std::string name;
    ParamKind kind = ParamKind::string;
    ParamRole role = ParamRole::plain;
    bool required = true;
    std::string description;
    std::optional<std::vector<std::string>> enum_values;
    std::optional<double> numeric_tolerance;  // relative
    bool set_semantics = false;               // list equality ignores order
    bool map_product = false;                 // the rendered map of a produces_map tool

    double tolerance() const { return numeric_tolerance.value_or(kDefaultNumericTolerance); }
};

struct ToolSchema {
    std::string name;
    std::string description;
    std::vector<ParamSpec> params;
    bool produces_map = false;

    const ParamSpec* find(std::string_view param) const;
    bool has_outputs() const;
    // Names of parameters with role output_path, in declaration order.
    std::vector<std::string> output_params() const;
};

// Throws SchemaViolation when the schema breaks a ParamSpec/ToolSchema invariant.
void check_schema(const ToolSchema& schema);

class CallContext;

// Result of running a tool body. Failures carry the raw text the tool produced
// (possibly a whole traceback); the sandbox denoises it before the agent sees it.
struct ToolOutcome {
    bool ok = true;
    std::string text;  // observation on success, raw failure text otherwise
    std::optional<ErrorCategory> category_hint;

    static ToolOutcome success(std::string text = {}) { return {true, std::move(text), {}}; }
    static ToolOutcome failure(std::string raw, std::optional<ErrorCategory> hint = {}) {
        return {false, std::move(raw), hint};
    }
};

class ToolExecutor {
public:
    virtual ~ToolExecutor() = default;
    // `args` are already validated and normalized.
    virtual ToolOutcome run(CallContext& ctx, const ArgMap& args) = 0;
};

struct ValidatedArgs {
    ArgMap args;
    std::vector<std::string> coercions;  // one note per coerced value
};

// Coerces a single value to the kind declared by `spec`. Returns nullopt when
// the value cannot represent that kind. `note` receives a description of any
// coercion applied.
std::optional<Json> coerce_value(const ParamSpec& spec, const Json& value,
                                 std::string* note = nullptr);

class ToolRegistry {
public:
    void register_tool(ToolSchema schema, std::shared_ptr<ToolExecutor> executor);

    const ToolSchema& lookup(std::string_view name) const;  // UnknownTool
    const ToolSchema* find(std::string_view name) const;
    ToolExecutor& executor(std::string_view name) const;  // UnknownTool
    bool contains(std::string_view name) const { return find(name) != nullptr; }

    std::size_t size() const { return tools_.size(); }
    bool empty() const { return tools_.empty(); }
    std::vector<std::string> names() const;  // sorted

    ValidatedArgs validate_args(std::string_view tool, const ArgMap& args) const;

    // One header line per tool (sorted by name) followed by one line per parameter.
    std::string render_manifest() const;

private:
    struct Entry {
        ToolSchema schema;
        std::shared_ptr<ToolExecutor> executor;
    };
    std::map<std::string, Entry, std::less<>> tools_;
};

Json schema_to_json(const ToolSchema& schema);
ToolSchema schema_from_json(const Json& j);

struct ToolManifest {
    std::vector<ToolSchema> tools;
    std::vector<std::string> worker_command;  // argv of the worker serving these tools
};

// Structured-text manifest: {"worker": [...argv], "tools": [schema, ...]}.
ToolManifest parse_tool_manifest(std::string_view document);  // RegistryLoadError
ToolManifest load_tool_manifest(const std::filesystem::path& file);

} // namespace geobench
