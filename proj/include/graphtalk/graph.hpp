#pragma once
// Dialogue state graph: typed, probabilistic, timestamped nodes and labelled
// edges. All writes go through DialogueStateGraph, which serializes them and
// hands out immutable snapshots to readers.

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace graphtalk {

using NodeId = std::uint64_t;
/// Milliseconds since the Unix epoch.
using Timestamp = std::int64_t;

enum class NodeType { utterance, image, position, entity, location, movement };
enum class Speaker { none, user, agent };
enum class EdgeLabel { in, in_location, at, responds_to, part_of, next };
enum class Direction { incoming, outgoing, both };

std::string_view to_string(NodeType type);
std::string_view to_string(Speaker speaker);
std::string_view to_string(EdgeLabel label);
NodeType parse_node_type(std::string_view text);
Speaker parse_speaker(std::string_view text);
/// Accepts "follows" as an alias of responds_to.
EdgeLabel parse_edge_label(std::string_view text);

class GraphError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Node {
  NodeId id = 0;
  NodeType type = NodeType::entity;
  std::string content;
  Speaker speaker = Speaker::none;
  double probability = 1.0;
  Timestamp graph_time = 0;
  Timestamp source_time = 0;

  /// Time between the observation and its arrival in the graph.
  Timestamp latency_ms() const { return graph_time - source_time; }

  bool operator==(const Node&) const = default;
};

struct Edge {
  NodeId from = 0;
  NodeId to = 0;
  EdgeLabel label = EdgeLabel::in;
  double probability = 1.0;

  bool operator==(const Edge&) const = default;
};

/// Everything needed to create a node except the fields the graph assigns.
struct NodeSpec {
  NodeType type = NodeType::entity;
  std::string content;
  Speaker speaker = Speaker::none;
  double probability = 1.0;
  Timestamp source_time = 0;
};

/// Edge endpoint inside a delta: a node already in the graph or one added by
/// the same delta (index into GraphDelta::added_nodes).
struct NodeRef {
  enum class Kind { existing, added };
  Kind kind = Kind::existing;
  std::uint64_t value = 0;

  static NodeRef existing(NodeId id) { return {Kind::existing, id}; }
  static NodeRef added(std::size_t index) { return {Kind::added, index}; }
  bool operator==(const NodeRef&) const = default;
};

struct EdgeSpec {
  NodeRef from;
  NodeRef to;
  EdgeLabel label = EdgeLabel::in;
  double probability = 1.0;
};

struct GraphDelta {
  std::vector<NodeSpec> added_nodes;
  std::vector<EdgeSpec> added_edges;
  std::string origin;
  /// Deltas with triggers=false are applied but never matched against rules.
  bool triggers = true;

  NodeRef add_node(NodeSpec spec) {
    added_nodes.push_back(std::move(spec));
    return NodeRef::added(added_nodes.size() - 1);
  }
  void add_edge(NodeRef from, NodeRef to, EdgeLabel label, double probability = 1.0) {
    added_edges.push_back({from, to, label, probability});
  }
  bool empty() const { return added_nodes.empty() && added_edges.empty(); }
};

/// A delta after application, with the ids the graph assigned to its nodes.
struct AppliedDelta {
  GraphDelta delta;
  std::vector<NodeId> node_ids;
  std::uint64_t revision = 0;
  int depth = 1;

  NodeId resolve(const NodeRef& ref) const {
    return ref.kind == NodeRef::Kind::added ? node_ids.at(ref.value) : ref.value;
  }
  bool adds_node(NodeType type) const;
};

/// Graph contents at one revision. Copied wholesale for snapshots.
struct GraphData {
  std::map<NodeId, Node> nodes;
  std::vector<Edge> edges;
  std::map<NodeId, std::vector<std::size_t>> outgoing;
  std::map<NodeId, std::vector<std::size_t>> incoming;
  std::uint64_t revision = 0;
  NodeId next_id = 0;

  bool operator==(const GraphData& other) const {
    return revision == other.revision && next_id == other.next_id && nodes == other.nodes &&
           edges == other.edges;
  }
};

struct Neighbor {
  Edge edge;
  const Node* node = nullptr;
};

/// Read-only query surface over graph data. Does not own the data.
class GraphView {
 public:
  explicit GraphView(const GraphData& data) : data_(&data) {}

  std::uint64_t revision() const { return data_->revision; }
  std::size_t node_count() const { return data_->nodes.size(); }
  std::size_t edge_count() const { return data_->edges.size(); }
  bool contains(NodeId id) const { return data_->nodes.count(id) != 0; }
  const Node& node(NodeId id) const;
  const std::map<NodeId, Node>& nodes() const { return data_->nodes; }
  const std::vector<Edge>& edges() const { return data_->edges; }
  const GraphData& data() const { return *data_; }

  /// Sorted by neighbour id, then by edge insertion order.
  std::vector<Neighbor> neighbors(NodeId id, Direction direction,
                                  std::optional<EdgeLabel> label = std::nullopt) const;
  /// Ascending source_time, ties broken by id.
  std::vector<const Node*> nodes_chronological(
      std::optional<NodeType> type = std::nullopt) const;

 private:
  const GraphData* data_;
};

/// Immutable, shareable view of the graph at one revision.
class GraphSnapshot {
 public:
  GraphSnapshot() : data_(std::make_shared<const GraphData>()) {}
  explicit GraphSnapshot(std::shared_ptr<const GraphData> data) : data_(std::move(data)) {}

  GraphView view() const { return GraphView(*data_); }
  operator GraphView() const { return view(); }
  std::uint64_t revision() const { return data_->revision; }
  std::size_t node_count() const { return data_->nodes.size(); }
  std::size_t edge_count() const { return data_->edges.size(); }
  const GraphData& data() const { return *data_; }

  bool operator==(const GraphSnapshot& other) const {
    return data_ == other.data_ || *data_ == *other.data_;
  }

 private:
  std::shared_ptr<const GraphData> data_;
};

struct TriggerRule {
  std::string name;
  std::function<bool(const GraphView&, const AppliedDelta&)> match;
  std::function<std::optional<GraphDelta>(const GraphView&, const AppliedDelta&)> action;
};

struct CascadeReport {
  std::vector<AppliedDelta> applied;
  int depth_reached = 0;
  bool aborted = false;
  std::string abort_reason;
};

using Clock = std::function<Timestamp()>;
Timestamp system_now();

class DialogueStateGraph {
 public:
  DialogueStateGraph();
  explicit DialogueStateGraph(Clock clock);
  /// Restores a graph from snapshot data; the revision counter continues from it.
  explicit DialogueStateGraph(GraphData data, Clock clock = system_now);

  DialogueStateGraph(const DialogueStateGraph&) = delete;
  DialogueStateGraph& operator=(const DialogueStateGraph&) = delete;

  NodeId add_node(NodeType type, std::string content, Speaker speaker, double probability,
                  Timestamp source_time);
  void add_edge(NodeId from, NodeId to, EdgeLabel label, double probability = 1.0);

  /// Applies a delta atomically as one revision. Throws GraphError if the delta
  /// is empty or inconsistent; the graph is then left untouched.
  AppliedDelta apply(const GraphDelta& delta);

  /// Applies the delta, then runs every matching rule (in registration order)
  /// on it and recursively on the deltas they produce. Depth 1 is the input
  /// delta; a delta that would land deeper than max_depth aborts the cascade.
  CascadeReport apply_with_cascade(const GraphDelta& delta, const std::vector<TriggerRule>& rules,
                                   int max_depth = 8);

  /// Latest state; does not block while a trigger action is running.
  GraphSnapshot snapshot() const;
  /// Live view for code running on the writer thread (trigger actions, ingest).
  GraphView view() const { return GraphView(data_); }
  std::uint64_t revision() const { return data_.revision; }

  void set_clock(Clock clock) { clock_ = std::move(clock); }
  const Clock& clock() const { return clock_; }

 private:
  void validate(const GraphDelta& delta) const;
  AppliedDelta apply_locked(const GraphDelta& delta);
  void cascade_locked(const AppliedDelta& applied, const std::vector<TriggerRule>& rules,
                      int max_depth, CascadeReport& report);
  NodeId insert_node(const NodeSpec& spec, Timestamp now);
  void insert_edge(const Edge& edge);

  GraphData data_;
  Clock clock_;
  void publish_snapshot_locked() const;

  mutable std::recursive_mutex write_mutex_;
  /// Guards cached_snapshot_ only; never held while waiting for write_mutex_.
  mutable std::mutex snapshot_mutex_;
  mutable std::shared_ptr<const GraphData> cached_snapshot_;
};

void check_probability(double probability, std::string_view what);

}  // namespace graphtalk
