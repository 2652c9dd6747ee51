#pragma once

#include <vector>

#include "geobench/registry.hpp"

namespace geobench {

// Schemas of the built-in synthetic geoprocessing tools. Their failure modes
// (CRS mismatch, invalid topology, locked outputs, crashes, long runs) mirror
// the runtime anomalies agents meet in real GIS stacks.
std::vector<ToolSchema> synthetic_tool_schemas();

// Registers every synthetic tool with its in-process executor.
void register_synthetic_tools(ToolRegistry& registry);

} // namespace geobench
