#include <gtest/gtest.h>

#include "geobench/errors.hpp"
#include "geobench/registry.hpp"
#include "geobench/synthetic_tools.hpp"
#include "support/pea_cases.hpp"

using namespace geobench;

namespace {

ToolSchema buffer_schema() {
    return {"buffer",
            "grow features",
            {{.name = "input", .kind = ParamKind::path, .role = ParamRole::input_path},
             {.name = "distance", .kind = ParamKind::real, .description = "metres"},
             {.name = "segments", .kind = ParamKind::integer, .required = false},
             {.name = "dissolve", .kind = ParamKind::boolean, .required = false},
             {.name = "cap",
              .kind = ParamKind::enumeration,
              .required = false,
              .enum_values = std::vector<std::string>{"round", "flat"}},
             {.name = "fields", .kind = ParamKind::list, .required = false},
             {.name = "output", .kind = ParamKind::path, .role = ParamRole::output_path}}};
}

ToolRegistry registry() {
    ToolRegistry reg;
    reg.register_tool(buffer_schema(), std::make_shared<test_support::NullExecutor>());
    return reg;
}

ArgMap good_args() { return {{"input", "a.json"}, {"distance", 100}, {"output", "b.json"}}; }

} // namespace

TEST(Registry, DuplicateTool) {
    auto reg = registry();
    EXPECT_THROW(reg.register_tool(buffer_schema(), std::make_shared<test_support::NullExecutor>()),
                 DuplicateTool);
}

TEST(Registry, UnknownTool) {
    auto reg = registry();
    EXPECT_THROW(reg.lookup("nope"), UnknownTool);
    EXPECT_THROW(reg.executor("nope"), UnknownTool);
    EXPECT_FALSE(reg.contains("nope"));
}

TEST(Registry, ReservedOverwriteName) {
    auto s = buffer_schema();
    s.params.push_back({.name = "overwrite", .kind = ParamKind::boolean});
    EXPECT_THROW(check_schema(s), SchemaViolation);
}

TEST(Registry, PathRoleNeedsPathKind) {
    auto s = buffer_schema();
    s.params[0].kind = ParamKind::string;
    EXPECT_THROW(check_schema(s), SchemaViolation);
}

TEST(Validate, AcceptsAndCoerces) {
    auto reg = registry();
    auto args = good_args();
    args["distance"] = "100";
    args["segments"] = 8.0;
    args["dissolve"] = "TRUE";
    args["cap"] = "Round";
    args["fields"] = "name";
    args["input"] = "./a.json";
    auto v = reg.validate_args("buffer", args);
    EXPECT_EQ(v.args.at("distance"), Json(100.0));
    EXPECT_EQ(v.args.at("segments"), Json(8));
    EXPECT_EQ(v.args.at("dissolve"), Json(true));
    EXPECT_EQ(v.args.at("cap"), Json("round"));
    EXPECT_EQ(v.args.at("fields"), Json::array({"name"}));
    EXPECT_EQ(v.args.at("input"), Json("a.json"));
    EXPECT_EQ(v.coercions.size(), 5u);
}

TEST(Validate, ErrorOrder) {
    auto reg = registry();
    ArgMap args{{"bogus", 1}, {"distance", "far"}};
    EXPECT_THROW(reg.validate_args("buffer", args), UnknownParam);
    args.erase("bogus");
    EXPECT_THROW(reg.validate_args("buffer", args), MissingParam);
    args["input"] = "a.json";
    args["output"] = "b.json";
    EXPECT_THROW(reg.validate_args("buffer", args), TypeMismatch);
}

TEST(Validate, Rejections) {
    auto reg = registry();
    auto bad = [&](const char* name, Json value) {
        auto args = good_args();
        args[name] = std::move(value);
        return reg.validate_args("buffer", args);
    };
    EXPECT_THROW(bad("distance", "100m"), TypeMismatch);
    EXPECT_THROW(bad("segments", 2.5), TypeMismatch);
    EXPECT_THROW(bad("cap", "square"), TypeMismatch);
    EXPECT_THROW(bad("output", "../escape.json"), TypeMismatch);
    EXPECT_THROW(bad("output", "/tmp/x.json"), TypeMismatch);
    EXPECT_THROW(bad("fields", Json::array({Json::array({1})})), TypeMismatch);
    EXPECT_THROW(bad("dissolve", 2), TypeMismatch);
}

TEST(Validate, OverwriteOnlyForOutputTools) {
    ToolRegistry reg;
    reg.register_tool({"look", "", {{.name = "input", .kind = ParamKind::path, .role = ParamRole::input_path}}},
                      std::make_shared<test_support::NullExecutor>());
    reg.register_tool(buffer_schema(), std::make_shared<test_support::NullExecutor>());
    EXPECT_THROW(reg.validate_args("look", {{"input", "a"}, {"overwrite", true}}), UnknownParam);
    auto args = good_args();
    args["overwrite"] = "true";
    EXPECT_EQ(reg.validate_args("buffer", args).args.at("overwrite"), Json(true));
    args["overwrite"] = "maybe";
    EXPECT_THROW(reg.validate_args("buffer", args), TypeMismatch);
}

TEST(Manifest, RenderIsSortedAndDeterministic) {
    ToolRegistry reg;
    register_synthetic_tools(reg);
    EXPECT_EQ(reg.size(), 13u);
    const auto text = reg.render_manifest();
    EXPECT_EQ(text, reg.render_manifest());
    EXPECT_LT(text.find("buffer_features:"), text.find("clip_layer:"));
    EXPECT_NE(text.find("create_map: "), std::string::npos);
    EXPECT_NE(text.find("color_ramp: enum {OrRd|Blues|Greens|Greys}, optional, stylistic"), std::string::npos);
}

TEST(Manifest, EmptyRegistry) {
    EXPECT_THROW(ToolRegistry{}.render_manifest(), EmptyRegistry);
}

TEST(Manifest, SchemaJsonRoundTrip) {
    for (const auto& s : synthetic_tool_schemas()) {
        auto back = schema_from_json(schema_to_json(s));
        EXPECT_EQ(schema_to_json(back), schema_to_json(s));
    }
}

TEST(Manifest, ParseToolManifest) {
    auto m = parse_tool_manifest(R"({"worker": ["python3", "-m", "geotools"],
      "tools": [{"name": "reproject", "description": "d", "produces_map": false,
                 "params": [{"name": "input", "kind": "path", "role": "input_path"},
                            {"name": "crs", "kind": "string"}]}]})");
    EXPECT_EQ(m.worker_command.size(), 3u);
    ASSERT_EQ(m.tools.size(), 1u);
    EXPECT_EQ(m.tools[0].params[0].role, ParamRole::input_path);
    EXPECT_TRUE(m.tools[0].params[1].required);
    EXPECT_THROW(parse_tool_manifest(R"({"tools": [{"name": "x", "params": [{"name": "p", "kind": "blob"}]}]})"),
                 RegistryLoadError);
    EXPECT_THROW(parse_tool_manifest("[]"), RegistryLoadError);
}
