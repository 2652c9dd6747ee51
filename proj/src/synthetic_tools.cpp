#include "geobench/synthetic_tools.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <regex>
#include <sstream>

#include <fmt/core.h>

#include "geobench/image.hpp"
#include "geobench/layer.hpp"
#include "geobench/sandbox.hpp"

namespace fs = std::filesystem;

namespace geobench {

Layer read_layer(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) {
        throw std::runtime_error(fmt::format(
            "FileNotFoundError: [Errno 2] No such file or directory: '{}'", file.filename().string()));
    }
    try {
        const auto j = Json::parse(in);
        Layer layer;
        layer.crs = j.at("crs").get<std::string>();
        for (const auto& f : j.at("features")) {
            Feature feature;
            feature.id = f.at("id").get<int>();
            const auto box = f.at("bbox").get<std::vector<double>>();
            if (box.size() != 4) throw std::runtime_error("bbox needs 4 numbers");
            feature.x0 = box[0];
            feature.y0 = box[1];
            feature.x1 = box[2];
            feature.y1 = box[3];
            feature.value = f.value("value", 0.0);
            feature.valid = f.value("valid", true);
            layer.features.push_back(feature);
        }
        return layer;
    } catch (const std::exception& e) {
        throw std::runtime_error(fmt::format("DriverError: '{}' is not a readable layer: {}",
                                             file.filename().string(), e.what()));
    }
}

void write_layer(const Layer& layer, const fs::path& file) {
    Json features = Json::array();
    for (const auto& f : layer.features) {
        features.push_back({{"id", f.id},
                            {"bbox", {f.x0, f.y0, f.x1, f.y1}},
                            {"value", f.value},
                            {"valid", f.valid}});
    }
    if (file.has_parent_path()) fs::create_directories(file.parent_path());
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error(fmt::format("PermissionError: cannot write '{}'", file.string()));
    out << Json{{"crs", layer.crs}, {"features", std::move(features)}}.dump() << "\n";
}

namespace {

using ToolFn = std::function<ToolOutcome(CallContext&, const ArgMap&)>;

class FunctionExecutor final : public ToolExecutor {
public:
    explicit FunctionExecutor(ToolFn fn) : fn_(std::move(fn)) {}
    ToolOutcome run(CallContext& ctx, const ArgMap& args) override { return fn_(ctx, args); }

private:
    ToolFn fn_;
};

// Tracebacks shaped like the ones a Python geospatial stack prints; the
// sandbox has to distill them before an agent sees them.
std::string python_traceback(std::string_view function, std::string_view exception_line) {
    return fmt::format(
        "Traceback (most recent call last):\n"
        "  File \"/opt/geotools/runtime/dispatch.py\", line 57, in invoke\n"
        "    return handler(**kwargs)\n"
        "  File \"/opt/geotools/ops/{0}.py\", line 112, in {0}\n"
        "    result = engine.apply(frame, **options)\n"
        "  File \"/opt/geotools/engine/core.py\", line 940, in apply\n"
        "    raise err\n"
        "{1}\n",
        function, exception_line);
}

const std::map<std::string, double>& crs_scale() {
    // Units per degree; a stand-in projection that keeps reprojection exact.
    static const std::map<std::string, double> table{
        {"EPSG:4326", 1.0},
        {"EPSG:3857", 111320.0},
        {"EPSG:32633", 100000.0},
    };
    return table;
}

std::string arg_string(const ArgMap& args, const std::string& name) {
    return args.at(name).get<std::string>();
}

Layer load(CallContext& ctx, const ArgMap& args, const std::string& name) {
    return read_layer(ctx.resolve(arg_string(args, name)));
}

void store(CallContext& ctx, const ArgMap& args, const Layer& layer, const std::string& name = "output") {
    write_layer(layer, ctx.resolve(arg_string(args, name)));
}

std::optional<ToolOutcome> crs_guard(std::string_view tool, const Layer& a, const Layer& b) {
    if (a.crs == b.crs) return std::nullopt;
    return ToolOutcome::failure(
        python_traceback(tool, fmt::format("ValueError: CRS mismatch: {} vs {}", a.crs, b.crs)));
}

std::optional<ToolOutcome> topology_guard(std::string_view tool, const Layer& layer) {
    for (const auto& f : layer.features) {
        if (!f.valid) {
            return ToolOutcome::failure(python_traceback(
                tool, fmt::format("shapely.errors.TopologicalError: Input geometry {} is invalid: "
                                  "Self-intersection at or near point ({:.3f} {:.3f})",
                                  f.id, f.x0, f.y0)));
        }
    }
    return std::nullopt;
}

bool intersects(const Feature& a, const Feature& b) {
    return a.x0 < b.x1 && b.x0 < a.x1 && a.y0 < b.y1 && b.y0 < a.y1;
}

ToolOutcome written(const Layer& layer, const ArgMap& args) {
    return ToolOutcome::success(fmt::format("wrote {} ({} features, {})",
                                            args.at("output").get<std::string>(),
                                            layer.features.size(), layer.crs));
}

ParamSpec input(std::string name, std::string description = "input layer", bool required = true) {
    return ParamSpec{.name = std::move(name),
                     .kind = ParamKind::path,
                     .role = ParamRole::input_path,
                     .required = required,
                     .description = std::move(description)};
}

ParamSpec output(std::string description = "output layer") {
    return ParamSpec{.name = "output",
                     .kind = ParamKind::path,
                     .role = ParamRole::output_path,
                     .description = std::move(description)};
}

struct Tool {
    ToolSchema schema;
    ToolFn fn;
};

Rgb lerp(Rgb a, Rgb b, double t) {
    t = std::clamp(t, 0.0, 1.0);
    auto mix = [t](std::uint8_t x, std::uint8_t y) {
        return static_cast<std::uint8_t>(std::lround(x + (y - x) * t));
    };
    return {mix(a.r, b.r), mix(a.g, b.g), mix(a.b, b.b)};
}

std::pair<Rgb, Rgb> ramp(const std::string& name) {
    static const std::map<std::string, std::pair<Rgb, Rgb>> ramps{
        {"OrRd", {{254, 232, 200}, {179, 0, 0}}},
        {"Blues", {{222, 235, 247}, {8, 81, 156}}},
        {"Greens", {{229, 245, 224}, {0, 109, 44}}},
        {"Greys", {{240, 240, 240}, {37, 37, 37}}},
    };
    return ramps.at(name);
}

ToolOutcome render_map(CallContext& ctx, const ArgMap& args) {
    const auto base = load(ctx, args, "base_layer");
    std::optional<Layer> overlay;
    if (args.contains("overlay_layer")) {
        overlay = load(ctx, args, "overlay_layer");
        if (auto err = crs_guard("create_map", base, *overlay)) return *err;
    }
    const auto ramp_name = args.contains("color_ramp") ? arg_string(args, "color_ramp") : "OrRd";
    const double alpha = args.contains("alpha") ? args.at("alpha").get<double>() : 0.6;
    if (alpha < 0.0 || alpha > 1.0) {
        return ToolOutcome::failure("ValueError: alpha must be between 0 and 1");
    }

    double minx = std::numeric_limits<double>::max(), miny = minx;
    double maxx = std::numeric_limits<double>::lowest(), maxy = maxx;
    auto extend = [&](const Layer& l) {
        for (const auto& f : l.features) {
            minx = std::min(minx, f.x0);
            miny = std::min(miny, f.y0);
            maxx = std::max(maxx, f.x1);
            maxy = std::max(maxy, f.y1);
        }
    };
    extend(base);
    if (overlay) extend(*overlay);
    if (!(maxx > minx) || !(maxy > miny)) {
        return ToolOutcome::failure("ValueError: cannot render an empty extent");
    }
    const double padx = (maxx - minx) * 0.05;
    const double pady = (maxy - miny) * 0.05;
    minx -= padx;
    maxx += padx;
    miny -= pady;
    maxy += pady;

    constexpr int kSize = 256;
    Image canvas(kSize, kSize);
    auto px = [&](double x) { return static_cast<int>(std::floor((x - minx) / (maxx - minx) * kSize)); };
    auto py = [&](double y) { return static_cast<int>(std::floor((maxy - y) / (maxy - miny) * kSize)); };

    const auto [light, dark] = ramp(ramp_name);
    double vmin = std::numeric_limits<double>::max();
    double vmax = std::numeric_limits<double>::lowest();
    for (const auto& f : base.features) {
        vmin = std::min(vmin, f.value);
        vmax = std::max(vmax, f.value);
    }
    for (const auto& f : base.features) {
        ctx.checkpoint();
        const double t = vmax > vmin ? (f.value - vmin) / (vmax - vmin) : 0.5;
        canvas.fill_rect(px(f.x0), py(f.y1), px(f.x1), py(f.y0), lerp(light, dark, t));
    }
    if (overlay) {
        for (const auto& f : overlay->features) {
            ctx.checkpoint();
            canvas.fill_rect(px(f.x0), py(f.y1), px(f.x1), py(f.y0), {20, 20, 20}, alpha);
        }
    }
    if (args.contains("title")) draw_text(canvas, 4, 4, arg_string(args, "title"), {0, 0, 0});

    write_png(canvas, ctx.resolve(arg_string(args, "output")));
    return ToolOutcome::success(fmt::format("rendered {}", arg_string(args, "output")));
}

std::vector<Tool> build_tools() {
    std::vector<Tool> tools;

    tools.push_back({{"copy_layer", "Copy a layer to a new file.", {input("input"), output()}},
                     [](CallContext& ctx, const ArgMap& args) {
                         auto layer = load(ctx, args, "input");
                         store(ctx, args, layer);
                         return written(layer, args);
                     }});

    tools.push_back(
        {{"inspect_layer", "Report the CRS, feature count, invalid geometries and extent of a layer.",
          {input("input")}},
         [](CallContext& ctx, const ArgMap& args) {
             const auto layer = load(ctx, args, "input");
             const auto invalid = std::count_if(layer.features.begin(), layer.features.end(),
                                                [](const Feature& f) { return !f.valid; });
             return ToolOutcome::success(fmt::format("crs={} features={} invalid={}", layer.crs,
                                                     layer.features.size(), invalid));
         }});

    tools.push_back(
        {{"reproject_layer",
          "Reproject a layer to another coordinate reference system (EPSG:4326, EPSG:3857, EPSG:32633).",
          {input("input"),
           ParamSpec{.name = "target_crs", .kind = ParamKind::string, .description = "EPSG code"},
           output()}},
         [](CallContext& ctx, const ArgMap& args) {
             auto layer = load(ctx, args, "input");
             const auto target = arg_string(args, "target_crs");
             const auto& scales = crs_scale();
             if (!scales.contains(target)) {
                 return ToolOutcome::failure(python_traceback(
                     "reproject_layer",
                     fmt::format("pyproj.exceptions.CRSError: Invalid projection: unknown EPSG code "
                                 "'{}'",
                                 target)));
             }
             const double factor = scales.at(target) / scales.at(layer.crs);
             for (auto& f : layer.features) {
                 f.x0 *= factor;
                 f.y0 *= factor;
                 f.x1 *= factor;
                 f.y1 *= factor;
             }
             layer.crs = target;
             store(ctx, args, layer);
             return written(layer, args);
         }});

    tools.push_back(
        {{"buffer_features", "Grow every feature by a distance in layer units.",
          {input("input"),
           ParamSpec{.name = "distance", .kind = ParamKind::real, .description = "buffer distance"},
           output()}},
         [](CallContext& ctx, const ArgMap& args) {
             auto layer = load(ctx, args, "input");
             const double d = args.at("distance").get<double>();
             if (d <= 0) return ToolOutcome::failure("ValueError: distance must be positive");
             if (auto err = topology_guard("buffer_features", layer)) return *err;
             for (auto& f : layer.features) {
                 ctx.checkpoint();
                 f.x0 -= d;
                 f.y0 -= d;
                 f.x1 += d;
                 f.y1 += d;
             }
             store(ctx, args, layer);
             return written(layer, args);
         }});

    tools.push_back({{"repair_geometry", "Fix invalid (self-intersecting) geometries.",
                      {input("input"), output()}},
                     [](CallContext& ctx, const ArgMap& args) {
                         auto layer = load(ctx, args, "input");
                         for (auto& f : layer.features) f.valid = true;
                         store(ctx, args, layer);
                         return written(layer, args);
                     }});

    tools.push_back(
        {{"clip_layer", "Clip a layer to the extent of a mask layer; both must share a CRS.",
          {input("input"), input("mask", "mask layer"), output()}},
         [](CallContext& ctx, const ArgMap& args) {
             auto layer = load(ctx, args, "input");
             const auto mask = load(ctx, args, "mask");
             if (auto err = crs_guard("clip_layer", layer, mask)) return *err;
             if (auto err = topology_guard("clip_layer", layer)) return *err;
             Layer out{layer.crs, {}};
             for (const auto& f : layer.features) {
                 for (const auto& m : mask.features) {
                     if (!intersects(f, m)) continue;
                     out.features.push_back({f.id, std::max(f.x0, m.x0), std::max(f.y0, m.y0),
                                             std::min(f.x1, m.x1), std::min(f.y1, m.y1), f.value,
                                             true});
                     break;
                 }
             }
             store(ctx, args, out);
             return written(out, args);
         }});

    tools.push_back(
        {{"filter_features", "Keep features matching an expression such as 'value > 10'.",
          {input("input"),
           ParamSpec{.name = "expression",
                     .kind = ParamKind::string,
                     .description = "<value|id> <op> <number>"},
           output()}},
         [](CallContext& ctx, const ArgMap& args) {
             auto layer = load(ctx, args, "input");
             static const std::regex re(R"(^\s*(value|id)\s*(>=|<=|==|!=|>|<)\s*(-?\d+(?:\.\d+)?)\s*$)");
             std::smatch m;
             const auto expr = arg_string(args, "expression");
             if (!std::regex_match(expr, m, re)) {
                 return ToolOutcome::failure(
                     python_traceback("filter_features",
                                      fmt::format("ValueError: invalid expression '{}'", expr)));
             }
             const auto field = m[1].str();
             const auto op = m[2].str();
             const double rhs = std::stod(m[3].str());
             Layer out{layer.crs, {}};
             for (const auto& f : layer.features) {
                 const double lhs = field == "id" ? f.id : f.value;
                 const bool keep = op == ">"    ? lhs > rhs
                                   : op == ">=" ? lhs >= rhs
                                   : op == "<"  ? lhs < rhs
                                   : op == "<=" ? lhs <= rhs
                                   : op == "==" ? lhs == rhs
                                                : lhs != rhs;
                 if (keep) out.features.push_back(f);
             }
             store(ctx, args, out);
             return written(out, args);
         }});

    tools.push_back({{"merge_layers", "Concatenate the features of two layers with the same CRS.",
                      {input("first"), input("second"), output()}},
                     [](CallContext& ctx, const ArgMap& args) {
                         auto a = load(ctx, args, "first");
                         const auto b = load(ctx, args, "second");
                         if (auto err = crs_guard("merge_layers", a, b)) return *err;
                         a.features.insert(a.features.end(), b.features.begin(), b.features.end());
                         store(ctx, args, a);
                         return written(a, args);
                     }});

    tools.push_back(
        {{"zonal_statistics", "Aggregate the values of a layer over each zone of another layer.",
          {input("zones", "zone layer"), input("values", "value layer"),
           ParamSpec{.name = "statistic",
                     .kind = ParamKind::enumeration,
                     .enum_values = std::vector<std::string>{"mean", "sum", "max", "count"}},
           output()}},
         [](CallContext& ctx, const ArgMap& args) {
             auto zones = load(ctx, args, "zones");
             const auto values = load(ctx, args, "values");
             if (auto err = crs_guard("zonal_statistics", zones, values)) return *err;
             if (auto err = topology_guard("zonal_statistics", zones)) return *err;
             const auto stat = arg_string(args, "statistic");
             for (auto& z : zones.features) {
                 ctx.checkpoint();
                 double sum = 0, max = 0;
                 int n = 0;
                 for (const auto& v : values.features) {
                     if (!intersects(z, v)) continue;
                     max = n == 0 ? v.value : std::max(max, v.value);
                     sum += v.value;
                     ++n;
                 }
                 z.value = stat == "sum" ? sum
                           : stat == "max" ? max
                           : stat == "count" ? n
                                             : (n ? sum / n : 0.0);
             }
             store(ctx, args, zones);
             return written(zones, args);
         }});

    tools.push_back(
        {{"field_calculator", "Multiply the value attribute of every feature by a factor.",
          {input("input"), ParamSpec{.name = "factor", .kind = ParamKind::real}, output()}},
         [](CallContext& ctx, const ArgMap& args) {
             auto layer = load(ctx, args, "input");
             const double k = args.at("factor").get<double>();
             for (auto& f : layer.features) f.value *= k;
             store(ctx, args, layer);
             return written(layer, args);
         }});

    tools.push_back(
        {{"create_map",
          "Render a base layer and an optional highlight overlay to a PNG map.",
          {input("base_layer", "bottom layer"), input("overlay_layer", "top layer", false),
           ParamSpec{.name = "color_ramp",
                     .kind = ParamKind::enumeration,
                     .role = ParamRole::stylistic,
                     .required = false,
                     .enum_values = std::vector<std::string>{"OrRd", "Blues", "Greens", "Greys"}},
           ParamSpec{.name = "alpha",
                     .kind = ParamKind::real,
                     .role = ParamRole::stylistic,
                     .required = false,
                     .description = "overlay opacity in [0,1]"},
           ParamSpec{.name = "title",
                     .kind = ParamKind::string,
                     .role = ParamRole::stylistic,
                     .required = false},
           ParamSpec{.name = "output",
                     .kind = ParamKind::path,
                     .role = ParamRole::output_path,
                     .description = "PNG file",
                     .map_product = true}},
          true},
         render_map});

    tools.push_back({{"sleep_tool", "Wait for a number of seconds (diagnostics).",
                      {ParamSpec{.name = "seconds", .kind = ParamKind::real}}},
                     [](CallContext& ctx, const ArgMap& args) {
                         const double s = args.at("seconds").get<double>();
                         ctx.sleep_for(Seconds{s});
                         return ToolOutcome::success(fmt::format("slept {} s", s));
                     }});

    tools.push_back({{"unstable_export", "Export a layer through an unstable driver.",
                      {input("input"), output()}},
                     [](CallContext& ctx, const ArgMap& args) {
                         (void)load(ctx, args, "input");
                         return ToolOutcome::failure(
                             "Fatal Python error: Segmentation fault\n\n"
                             "Current thread 0x00007f3a2c1f7740 (most recent call first):\n"
                             "  File \"/opt/geotools/drivers/export.py\", line 31 in flush\n"
                             "  File \"/opt/geotools/ops/unstable_export.py\", line 12 in "
                             "unstable_export\n");
                     }});

    return tools;
}

} // namespace

std::vector<ToolSchema> synthetic_tool_schemas() {
    std::vector<ToolSchema> out;
    for (auto& t : build_tools()) out.push_back(std::move(t.schema));
    return out;
}

void register_synthetic_tools(ToolRegistry& registry) {
    for (auto& t : build_tools()) {
        registry.register_tool(std::move(t.schema), std::make_shared<FunctionExecutor>(std::move(t.fn)));
    }
}

} // namespace geobench
