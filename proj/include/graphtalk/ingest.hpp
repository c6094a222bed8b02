#pragma once
// Turns sensor events into graph deltas and replays whole tour logs.

#include "graphtalk/graph.hpp"
#include "graphtalk/tour_log.hpp"

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace graphtalk {

inline constexpr const char* kStartingArea = "starting area";
/// Detections below this probability are discarded as noise.
inline constexpr double kDetectionNoiseFloor = 0.05;

struct IngestState {
  std::optional<NodeId> current_location;
  std::map<std::string, NodeId> image_index;
};

class IngestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Delta for one event, or nullopt when the event adds nothing: a detection
/// whose objects all fall under the noise floor, or a label naming a location
/// that is already in the graph (a revisit).
std::optional<GraphDelta> delta_for_event(const GraphView& graph, const IngestState& state,
                                          const SensorEvent& event);

/// Records ids assigned by the graph for a delta built by delta_for_event.
/// applied is null when delta_for_event produced nothing.
void commit_event(IngestState& state, const GraphView& graph, const SensorEvent& event,
                  const AppliedDelta* applied);

std::optional<NodeId> find_location(const GraphView& graph, std::string_view name);

/// Builds, applies (through the cascade) and commits one event. Returns the
/// applied delta of the event itself; empty node_ids when nothing was added.
AppliedDelta ingest_event(DialogueStateGraph& graph, IngestState& state, const SensorEvent& event,
                          const std::vector<TriggerRule>& rules = {}, int max_depth = 8);

struct ReplayOptions {
  /// 0 replays as fast as possible; otherwise event gaps are slept, divided by speed.
  double speed = 0.0;
  /// Stamp graph_time with the event's own time so replays are reproducible.
  /// When false the graph's clock is left alone.
  bool event_clock = true;
  int max_depth = 8;
};

struct ReplayReport {
  std::size_t events_applied = 0;
  std::size_t deltas_applied = 0;
  double wall_time_ms = 0.0;
  IngestState state;
};

class ReplayError : public std::runtime_error {
 public:
  ReplayError(std::size_t event_index, const std::string& message);
  std::size_t event_index() const { return event_index_; }

 private:
  std::size_t event_index_;
};

ReplayReport replay(DialogueStateGraph& graph, const TourLog& log,
                    const std::vector<TriggerRule>& rules = {}, const ReplayOptions& options = {});

}  // namespace graphtalk
