#pragma once
// Snapshot file format: {"nodes": [...], "edges": [...], "revision": n}.

#include "graphtalk/graph.hpp"

#include <json.hpp>

#include <string>
#include <string_view>

namespace graphtalk {

nlohmann::json to_json(const GraphView& graph);
GraphData graph_data_from_json(const nlohmann::json& document);

/// Canonical text form; identical graphs produce byte-identical output.
std::string serialize_snapshot(const GraphView& graph);
GraphData parse_snapshot(std::string_view text);

GraphData load_snapshot_file(const std::string& path);

}  // namespace graphtalk
