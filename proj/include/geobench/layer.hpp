#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace geobench {

// Feature of the synthetic vector format: an axis-aligned box with one
// attribute. `valid == false` marks a geometry with a topology defect.
struct Feature {
    int id = 0;
    double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
    double value = 0;
    bool valid = true;

    bool operator==(const Feature&) const = default;
};

struct Layer {
    std::string crs = "EPSG:4326";
    std::vector<Feature> features;

    bool operator==(const Layer&) const = default;
};

// Throws std::runtime_error with a Python-style message on missing or malformed files.
Layer read_layer(const std::filesystem::path& file);
void write_layer(const Layer& layer, const std::filesystem::path& file);

} // namespace geobench
