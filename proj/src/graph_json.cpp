#include "graphtalk/graph_json.hpp"

#include <fstream>
#include <sstream>

namespace graphtalk {

using nlohmann::json;

json to_json(const GraphView& graph) {
  json nodes = json::array();
  for (const auto& [id, node] : graph.nodes()) {
    nodes.push_back({{"id", node.id},
                     {"node_type", to_string(node.type)},
                     {"content", node.content},
                     {"speaker", to_string(node.speaker)},
                     {"probability", node.probability},
                     {"graph_time", node.graph_time},
                     {"source_time", node.source_time}});
  }
  json edges = json::array();
  for (const Edge& edge : graph.edges()) {
    edges.push_back({{"from", edge.from},
                     {"to", edge.to},
                     {"label", to_string(edge.label)},
                     {"probability", edge.probability}});
  }
  return {{"nodes", std::move(nodes)}, {"edges", std::move(edges)}, {"revision", graph.revision()}};
}

GraphData graph_data_from_json(const json& document) {
  try {
    GraphData data;
    for (const json& item : document.at("nodes")) {
      Node node;
      node.id = item.at("id").get<NodeId>();
      node.type = parse_node_type(item.at("node_type").get<std::string>());
      node.content = item.at("content").get<std::string>();
      node.speaker = parse_speaker(item.value("speaker", std::string("none")));
      node.probability = item.at("probability").get<double>();
      node.graph_time = item.at("graph_time").get<Timestamp>();
      node.source_time = item.at("source_time").get<Timestamp>();
      check_probability(node.probability, "node");
      if (!data.nodes.emplace(node.id, node).second) {
        throw GraphError("duplicate node id " + std::to_string(node.id));
      }
    }
    for (const json& item : document.at("edges")) {
      Edge edge;
      edge.from = item.at("from").get<NodeId>();
      edge.to = item.at("to").get<NodeId>();
      edge.label = parse_edge_label(item.at("label").get<std::string>());
      edge.probability = item.value("probability", 1.0);
      check_probability(edge.probability, "edge");
      data.edges.push_back(edge);
    }
    data.revision = document.at("revision").get<std::uint64_t>();
    // Rebuild adjacency and reject dangling edges.
    DialogueStateGraph check(data, [] { return Timestamp{0}; });
    return check.snapshot().data();
  } catch (const json::exception& e) {
    throw GraphError(std::string("malformed snapshot: ") + e.what());
  }
}

std::string serialize_snapshot(const GraphView& graph) { return to_json(graph).dump(2) + "\n"; }

GraphData parse_snapshot(std::string_view text) {
  json document;
  try {
    document = json::parse(text);
  } catch (const json::exception& e) {
    throw GraphError(std::string("malformed snapshot: ") + e.what());
  }
  return graph_data_from_json(document);
}

GraphData load_snapshot_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw GraphError("cannot open snapshot file " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_snapshot(buffer.str());
}

}  // namespace graphtalk
