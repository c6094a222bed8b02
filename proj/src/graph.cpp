#include "graphtalk/graph.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace graphtalk {

namespace {

constexpr std::string_view kNodeTypeNames[] = {"utterance", "image",    "position",
                                               "entity",    "location", "movement"};
constexpr std::string_view kSpeakerNames[] = {"none", "user", "agent"};
constexpr std::string_view kEdgeLabelNames[] = {"in",          "in_location", "at",
                                                "responds_to", "part_of",     "next"};

template <typename Enum, std::size_t N>
Enum parse_enum(std::string_view text, const std::string_view (&names)[N], const char* what) {
  for (std::size_t i = 0; i < N; ++i) {
    if (names[i] == text) return static_cast<Enum>(i);
  }
  throw GraphError(std::string("unknown ") + what + " '" + std::string(text) + "'");
}

}  // namespace

std::string_view to_string(NodeType type) { return kNodeTypeNames[static_cast<int>(type)]; }
std::string_view to_string(Speaker speaker) { return kSpeakerNames[static_cast<int>(speaker)]; }
std::string_view to_string(EdgeLabel label) { return kEdgeLabelNames[static_cast<int>(label)]; }

NodeType parse_node_type(std::string_view text) {
  return parse_enum<NodeType>(text, kNodeTypeNames, "node type");
}

Speaker parse_speaker(std::string_view text) {
  return parse_enum<Speaker>(text, kSpeakerNames, "speaker");
}

EdgeLabel parse_edge_label(std::string_view text) {
  if (text == "follows") return EdgeLabel::responds_to;
  return parse_enum<EdgeLabel>(text, kEdgeLabelNames, "edge label");
}

void check_probability(double probability, std::string_view what) {
  if (!(probability >= 0.0 && probability <= 1.0)) {
    throw GraphError(std::string(what) + " probability " + std::to_string(probability) +
                     " outside [0, 1]");
  }
}

Timestamp system_now() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

bool AppliedDelta::adds_node(NodeType type) const {
  return std::any_of(delta.added_nodes.begin(), delta.added_nodes.end(),
                     [type](const NodeSpec& spec) { return spec.type == type; });
}

// ---------------------------------------------------------------------------
// GraphView

const Node& GraphView::node(NodeId id) const {
  auto it = data_->nodes.find(id);
  if (it == data_->nodes.end()) throw GraphError("unknown node " + std::to_string(id));
  return it->second;
}

std::vector<Neighbor> GraphView::neighbors(NodeId id, Direction direction,
                                           std::optional<EdgeLabel> label) const {
  if (!contains(id)) throw GraphError("unknown node " + std::to_string(id));

  std::vector<std::pair<NodeId, std::size_t>> hits;  // (neighbour, edge index)
  auto collect = [&](const std::map<NodeId, std::vector<std::size_t>>& index, bool outgoing) {
    auto it = index.find(id);
    if (it == index.end()) return;
    for (std::size_t edge_index : it->second) {
      const Edge& edge = data_->edges[edge_index];
      if (label && edge.label != *label) continue;
      hits.emplace_back(outgoing ? edge.to : edge.from, edge_index);
    }
  };
  if (direction != Direction::incoming) collect(data_->outgoing, true);
  if (direction != Direction::outgoing) collect(data_->incoming, false);
  std::sort(hits.begin(), hits.end());
  // A self-loop shows up in both indexes for Direction::both.
  hits.erase(std::unique(hits.begin(), hits.end()), hits.end());

  std::vector<Neighbor> result;
  result.reserve(hits.size());
  for (const auto& [neighbour, edge_index] : hits) {
    result.push_back({data_->edges[edge_index], &data_->nodes.at(neighbour)});
  }
  return result;
}

std::vector<const Node*> GraphView::nodes_chronological(std::optional<NodeType> type) const {
  std::vector<const Node*> result;
  for (const auto& [id, node] : data_->nodes) {
    if (!type || node.type == *type) result.push_back(&node);
  }
  // nodes are already in id order, so a stable sort keeps the id tie-break
  std::stable_sort(result.begin(), result.end(), [](const Node* a, const Node* b) {
    return a->source_time < b->source_time;
  });
  return result;
}

// ---------------------------------------------------------------------------
// DialogueStateGraph

DialogueStateGraph::DialogueStateGraph() : DialogueStateGraph(Clock(system_now)) {}

DialogueStateGraph::DialogueStateGraph(Clock clock) : clock_(std::move(clock)) {}

DialogueStateGraph::DialogueStateGraph(GraphData data, Clock clock)
    : data_(std::move(data)), clock_(std::move(clock)) {
  data_.outgoing.clear();
  data_.incoming.clear();
  for (std::size_t i = 0; i < data_.edges.size(); ++i) {
    const Edge& edge = data_.edges[i];
    if (!data_.nodes.count(edge.from) || !data_.nodes.count(edge.to)) {
      throw GraphError("dangling edge " + std::to_string(edge.from) + " -> " +
                       std::to_string(edge.to));
    }
    data_.outgoing[edge.from].push_back(i);
    data_.incoming[edge.to].push_back(i);
  }
  for (const auto& [id, node] : data_.nodes) {
    data_.next_id = std::max(data_.next_id, id + 1);
  }
}

NodeId DialogueStateGraph::insert_node(const NodeSpec& spec, Timestamp now) {
  Node node;
  node.id = data_.next_id++;
  node.type = spec.type;
  node.content = spec.content;
  node.speaker = spec.speaker;
  node.probability = spec.probability;
  node.graph_time = now;
  node.source_time = spec.source_time;
  data_.nodes.emplace(node.id, std::move(node));
  return data_.next_id - 1;
}

void DialogueStateGraph::insert_edge(const Edge& edge) {
  data_.edges.push_back(edge);
  data_.outgoing[edge.from].push_back(data_.edges.size() - 1);
  data_.incoming[edge.to].push_back(data_.edges.size() - 1);
}

NodeId DialogueStateGraph::add_node(NodeType type, std::string content, Speaker speaker,
                                    double probability, Timestamp source_time) {
  GraphDelta delta;
  delta.origin = "add_node";
  delta.add_node({type, std::move(content), speaker, probability, source_time});
  return apply(delta).node_ids.front();
}

void DialogueStateGraph::add_edge(NodeId from, NodeId to, EdgeLabel label, double probability) {
  GraphDelta delta;
  delta.origin = "add_edge";
  delta.add_edge(NodeRef::existing(from), NodeRef::existing(to), label, probability);
  apply(delta);
}

void DialogueStateGraph::validate(const GraphDelta& delta) const {
  if (delta.empty()) throw GraphError("empty delta from '" + delta.origin + "'");
  for (const NodeSpec& spec : delta.added_nodes) {
    check_probability(spec.probability, "node");
    if (spec.speaker != Speaker::none && spec.type != NodeType::utterance) {
      throw GraphError("speaker set on non-utterance node '" + spec.content + "'");
    }
  }
  auto check_ref = [&](const NodeRef& ref) {
    if (ref.kind == NodeRef::Kind::added) {
      if (ref.value >= delta.added_nodes.size()) {
        throw GraphError("edge references added node #" + std::to_string(ref.value) +
                         " but delta adds only " + std::to_string(delta.added_nodes.size()));
      }
    } else if (!data_.nodes.count(ref.value)) {
      throw GraphError("dangling edge endpoint: node " + std::to_string(ref.value) +
                       " does not exist");
    }
  };
  for (const EdgeSpec& edge : delta.added_edges) {
    check_probability(edge.probability, "edge");
    check_ref(edge.from);
    check_ref(edge.to);
  }
}

AppliedDelta DialogueStateGraph::apply_locked(const GraphDelta& delta) {
  validate(delta);
  const Timestamp now = clock_();

  AppliedDelta applied;
  applied.delta = delta;
  applied.node_ids.reserve(delta.added_nodes.size());
  for (const NodeSpec& spec : delta.added_nodes) {
    applied.node_ids.push_back(insert_node(spec, now));
  }
  for (const EdgeSpec& spec : delta.added_edges) {
    insert_edge({applied.resolve(spec.from), applied.resolve(spec.to), spec.label,
                 spec.probability});
  }
  ++data_.revision;
  std::lock_guard snapshot_lock(snapshot_mutex_);
  cached_snapshot_.reset();
  applied.revision = data_.revision;
  return applied;
}

AppliedDelta DialogueStateGraph::apply(const GraphDelta& delta) {
  std::lock_guard lock(write_mutex_);
  return apply_locked(delta);
}

void DialogueStateGraph::cascade_locked(const AppliedDelta& applied,
                                        const std::vector<TriggerRule>& rules, int max_depth,
                                        CascadeReport& report) {
  if (!applied.delta.triggers) return;
  for (const TriggerRule& rule : rules) {
    if (report.aborted) return;
    if (!rule.match(view(), applied)) continue;
    publish_snapshot_locked();  // actions may be slow; readers should not wait on them
    std::optional<GraphDelta> produced = rule.action(view(), applied);
    if (!produced || produced->empty()) continue;
    if (applied.depth + 1 > max_depth) {
      report.aborted = true;
      report.abort_reason = "rule '" + rule.name + "' would exceed max depth " +
                            std::to_string(max_depth);
      return;
    }
    if (produced->origin.empty()) produced->origin = rule.name;
    AppliedDelta next = apply_locked(*produced);
    next.depth = applied.depth + 1;
    report.depth_reached = std::max(report.depth_reached, next.depth);
    report.applied.push_back(next);
    cascade_locked(next, rules, max_depth, report);
  }
}

CascadeReport DialogueStateGraph::apply_with_cascade(const GraphDelta& delta,
                                                     const std::vector<TriggerRule>& rules,
                                                     int max_depth) {
  if (max_depth < 1) throw GraphError("max_depth must be at least 1");
  std::lock_guard lock(write_mutex_);
  CascadeReport report;
  AppliedDelta first = apply_locked(delta);
  first.depth = 1;
  report.depth_reached = 1;
  report.applied.push_back(first);
  cascade_locked(first, rules, max_depth, report);
  return report;
}

void DialogueStateGraph::publish_snapshot_locked() const {
  std::lock_guard snapshot_lock(snapshot_mutex_);
  if (!cached_snapshot_) cached_snapshot_ = std::make_shared<const GraphData>(data_);
}

GraphSnapshot DialogueStateGraph::snapshot() const {
  {
    std::lock_guard snapshot_lock(snapshot_mutex_);
    if (cached_snapshot_) return GraphSnapshot(cached_snapshot_);
  }
  std::lock_guard lock(write_mutex_);
  publish_snapshot_locked();
  std::lock_guard snapshot_lock(snapshot_mutex_);
  return GraphSnapshot(cached_snapshot_);
}

}  // namespace graphtalk
