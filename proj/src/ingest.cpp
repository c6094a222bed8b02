#include "graphtalk/ingest.hpp"

#include "graphtalk/content.hpp"

#include <chrono>
#include <thread>

namespace graphtalk {

namespace {

// Location ref for an observation, creating "starting area" when no label has been seen.
NodeRef location_ref(const IngestState& state, GraphDelta& delta, Timestamp t) {
  if (state.current_location) return NodeRef::existing(*state.current_location);
  return delta.add_node({NodeType::location, kStartingArea, Speaker::none, 1.0, t});
}

}  // namespace

std::optional<GraphDelta> delta_for_event(const GraphView& graph, const IngestState& state,
                                          const SensorEvent& event) {
  GraphDelta delta;
  delta.origin = "ingest";
  const Timestamp t = event.t;

  if (const auto* label = std::get_if<LocationLabel>(&event.payload)) {
    if (find_location(graph, label->name)) return std::nullopt;
    delta.add_node({NodeType::location, label->name, Speaker::none, 1.0, t});
  } else if (const auto* position = std::get_if<PositionReading>(&event.payload)) {
    NodeRef location = location_ref(state, delta, t);
    NodeRef node = delta.add_node(
        {NodeType::position, position_content(position->x, position->y), Speaker::none, 1.0, t});
    delta.add_edge(node, location, EdgeLabel::at);
  } else if (const auto* image = std::get_if<ImageCapture>(&event.payload)) {
    NodeRef location = location_ref(state, delta, t);
    NodeRef node = delta.add_node({NodeType::image, image->image_ref, Speaker::none, 1.0, t});
    delta.add_edge(node, location, EdgeLabel::in_location);
  } else if (const auto* detection = std::get_if<Detection>(&event.payload)) {
    auto image = state.image_index.find(detection->image_ref);
    if (image == state.image_index.end() || !graph.contains(image->second)) {
      throw IngestError("detection for unknown image_ref '" + detection->image_ref + "'");
    }
    for (const DetectedObject& object : detection->objects) {
      check_probability(object.probability, "detection");
      if (object.probability < kDetectionNoiseFloor) continue;
      NodeRef node =
          delta.add_node({NodeType::entity, object.name, Speaker::none, object.probability, t});
      delta.add_edge(node, NodeRef::existing(image->second), EdgeLabel::in);
    }
    if (delta.empty()) return std::nullopt;
  } else if (const auto* utterance = std::get_if<UserUtterance>(&event.payload)) {
    delta.add_node({NodeType::utterance, utterance->text, Speaker::user, 1.0, t});
  }
  return delta;
}

std::optional<NodeId> find_location(const GraphView& graph, std::string_view name) {
  for (const auto& [id, node] : graph.nodes()) {
    if (node.type == NodeType::location && node.content == name) return id;
  }
  return std::nullopt;
}

void commit_event(IngestState& state, const GraphView& graph, const SensorEvent& event,
                  const AppliedDelta* applied) {
  if (!applied) {
    if (const auto* label = std::get_if<LocationLabel>(&event.payload)) {
      state.current_location = find_location(graph, label->name);
    }
    return;
  }
  for (std::size_t i = 0; i < applied->delta.added_nodes.size(); ++i) {
    const NodeSpec& spec = applied->delta.added_nodes[i];
    if (spec.type == NodeType::location) {
      state.current_location = applied->node_ids[i];
    } else if (spec.type == NodeType::image) {
      state.image_index[std::get<ImageCapture>(event.payload).image_ref] = applied->node_ids[i];
    }
  }
}

AppliedDelta ingest_event(DialogueStateGraph& graph, IngestState& state, const SensorEvent& event,
                          const std::vector<TriggerRule>& rules, int max_depth) {
  auto delta = delta_for_event(graph.view(), state, event);
  if (!delta) {
    commit_event(state, graph.view(), event, nullptr);
    return {};
  }
  CascadeReport report = graph.apply_with_cascade(*delta, rules, max_depth);
  commit_event(state, graph.view(), event, &report.applied.front());
  return report.applied.front();
}

ReplayError::ReplayError(std::size_t event_index, const std::string& message)
    : std::runtime_error("replay failed at event " + std::to_string(event_index) + ": " + message),
      event_index_(event_index) {}

ReplayReport replay(DialogueStateGraph& graph, const TourLog& log,
                    const std::vector<TriggerRule>& rules, const ReplayOptions& options) {
  using Clock = std::chrono::steady_clock;
  const auto started = Clock::now();

  ReplayReport report;
  Timestamp event_time = log.events.empty() ? 0 : log.events.front().t;
  graphtalk::Clock saved_clock = graph.clock();
  if (options.event_clock) graph.set_clock([&event_time] { return event_time; });

  try {
    for (std::size_t i = 0; i < log.events.size(); ++i) {
      const SensorEvent& event = log.events[i];
      if (options.speed > 0.0 && i > 0) {
        const double gap_ms = static_cast<double>(event.t - log.events[i - 1].t) / options.speed;
        if (gap_ms > 0) std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(gap_ms));
      }
      event_time = event.t;
      try {
        auto delta = delta_for_event(graph.view(), report.state, event);
        if (delta) {
          CascadeReport cascade = graph.apply_with_cascade(*delta, rules, options.max_depth);
          commit_event(report.state, graph.view(), event, &cascade.applied.front());
          report.deltas_applied += cascade.applied.size();
        } else {
          commit_event(report.state, graph.view(), event, nullptr);
        }
      } catch (const std::exception& e) {
        throw ReplayError(i, e.what());
      }
      ++report.events_applied;
    }
  } catch (...) {
    if (options.event_clock) graph.set_clock(saved_clock);
    throw;
  }
  if (options.event_clock) graph.set_clock(saved_clock);

  report.wall_time_ms =
      std::chrono::duration<double, std::milli>(Clock::now() - started).count();
  return report;
}

}  // namespace graphtalk
