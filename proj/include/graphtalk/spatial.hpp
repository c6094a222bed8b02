#pragma once
// Path simplification and movement extraction from position nodes.

#include "graphtalk/content.hpp"
#include "graphtalk/graph.hpp"

#include <optional>
#include <span>
#include <vector>

namespace graphtalk {

struct Point2D {
  double x = 0.0;
  double y = 0.0;
  Timestamp t = 0;

  bool operator==(const Point2D&) const = default;
};

struct SpatialConfig {
  double epsilon_m = 0.25;
  double min_rotation_deg = 5.0;
};

struct MovementSegment {
  MovementKind kind = MovementKind::forward;
  double distance_m = 0.0;  // forward only
  double angle_deg = 0.0;   // rotate only, (-180, 180], CCW positive
  std::optional<NodeId> location;
  Timestamp t = 0;

  MovementDescription description() const {
    return {kind, kind == MovementKind::forward ? distance_m : angle_deg};
  }
};

struct LocationStats {
  NodeId location = 0;
  Timestamp entry_time = 0;
  double duration_s = 0.0;
  double distance_m = 0.0;
  int visit_order = 0;
};

/// A maximal run of consecutive positions attached to the same location.
struct Visit {
  NodeId location = 0;
  std::vector<Point2D> points;
};

/// Distance from p to the segment [a, b] (to a itself when a == b).
double point_segment_distance(const Point2D& p, const Point2D& a, const Point2D& b);

/// Ramer-Douglas-Peucker on the polyline, measuring deviation against segments
/// so every input point ends up within epsilon_m of the result.
std::vector<Point2D> rdp_simplify(std::span<const Point2D> points, double epsilon_m);

/// Signed angle normalized to (-180, 180].
double normalize_angle_deg(double angle);

/// Forward/rotate list for a polyline starting at the given heading (degrees,
/// CCW from +x). Turns smaller than min_rotation_deg are not emitted; they
/// accumulate until the believed heading drifts past the threshold.
std::vector<MovementSegment> segment_movements(std::span<const Point2D> polyline,
                                               double initial_heading_deg,
                                               double min_rotation_deg = 5.0);

std::vector<Visit> location_visits(const GraphView& graph);

/// One row per visit plus a zero row for every location without positions.
/// Rows are ordered by entry time.
std::vector<LocationStats> location_stats(const GraphView& graph);

/// Movement nodes for every visit not yet covered by the graph's existing
/// movement chain: part_of edges to the visit's location and next edges in
/// travel order. Empty when the graph is already up to date.
GraphDelta attach_movements(const GraphView& graph, const SpatialConfig& config = {});

/// Movements the graph's positions imply, in travel order.
std::vector<MovementSegment> planned_movements(const GraphView& graph, const SpatialConfig& config);

/// Attaches movements for finished visits whenever a new location appears.
TriggerRule movement_rule(SpatialConfig config = {});

}  // namespace graphtalk
