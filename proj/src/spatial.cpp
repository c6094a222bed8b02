#include "graphtalk/spatial.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>

namespace graphtalk {

namespace {

constexpr double kRadToDeg = 180.0 / std::numbers::pi;

double heading_deg(const Point2D& from, const Point2D& to) {
  return std::atan2(to.y - from.y, to.x - from.x) * kRadToDeg;
}

double length(const Point2D& a, const Point2D& b) { return std::hypot(b.x - a.x, b.y - a.y); }

}  // namespace

double point_segment_distance(const Point2D& p, const Point2D& a, const Point2D& b) {
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  if (len2 == 0.0) return std::hypot(p.x - a.x, p.y - a.y);
  const double u = std::clamp(((p.x - a.x) * dx + (p.y - a.y) * dy) / len2, 0.0, 1.0);
  return std::hypot(p.x - (a.x + u * dx), p.y - (a.y + u * dy));
}

std::vector<Point2D> rdp_simplify(std::span<const Point2D> points, double epsilon_m) {
  if (points.size() < 2) throw std::invalid_argument("rdp_simplify needs at least 2 points");
  if (!(epsilon_m > 0.0)) throw std::invalid_argument("rdp_simplify epsilon must be positive");

  std::vector<char> keep(points.size(), 0);
  keep.front() = keep.back() = 1;
  std::vector<std::pair<std::size_t, std::size_t>> stack{{0, points.size() - 1}};
  while (!stack.empty()) {
    auto [first, last] = stack.back();
    stack.pop_back();
    double worst = -1.0;
    std::size_t worst_index = first;
    for (std::size_t i = first + 1; i < last; ++i) {
      const double d = point_segment_distance(points[i], points[first], points[last]);
      if (d > worst) {
        worst = d;
        worst_index = i;
      }
    }
    if (worst > epsilon_m) {
      keep[worst_index] = 1;
      stack.emplace_back(worst_index, last);
      stack.emplace_back(first, worst_index);
    }
  }

  std::vector<Point2D> result;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (keep[i]) result.push_back(points[i]);
  }
  return result;
}

double normalize_angle_deg(double angle) {
  double a = std::fmod(angle, 360.0);
  if (a <= -180.0) a += 360.0;
  if (a > 180.0) a -= 360.0;
  return a;
}

std::vector<MovementSegment> segment_movements(std::span<const Point2D> polyline,
                                               double initial_heading_deg,
                                               double min_rotation_deg) {
  std::vector<MovementSegment> result;
  double heading = initial_heading_deg;
  for (std::size_t i = 0; i + 1 < polyline.size(); ++i) {
    const Point2D& a = polyline[i];
    const Point2D& b = polyline[i + 1];
    const double distance = length(a, b);
    if (distance == 0.0) continue;

    const double turn = normalize_angle_deg(heading_deg(a, b) - heading);
    if (std::abs(turn) >= min_rotation_deg) {
      MovementSegment rotate;
      rotate.kind = MovementKind::rotate;
      rotate.angle_deg = turn;
      rotate.t = a.t;
      result.push_back(rotate);
      heading += turn;
    }
    if (!result.empty() && result.back().kind == MovementKind::forward) {
      result.back().distance_m += distance;
    } else {
      MovementSegment forward;
      forward.kind = MovementKind::forward;
      forward.distance_m = distance;
      forward.t = a.t;
      result.push_back(forward);
    }
  }
  return result;
}

std::vector<Visit> location_visits(const GraphView& graph) {
  std::vector<Visit> visits;
  for (const Node* node : graph.nodes_chronological(NodeType::position)) {
    auto at = graph.neighbors(node->id, Direction::outgoing, EdgeLabel::at);
    auto coordinates = parse_position_content(node->content);
    if (at.empty() || !coordinates) continue;
    const NodeId location = at.front().node->id;
    if (visits.empty() || visits.back().location != location) visits.push_back({location, {}});
    visits.back().points.push_back({coordinates->first, coordinates->second, node->source_time});
  }
  return visits;
}

std::vector<LocationStats> location_stats(const GraphView& graph) {
  std::vector<LocationStats> rows;
  std::map<NodeId, Timestamp> first_entry;
  for (const Visit& visit : location_visits(graph)) {
    LocationStats row;
    row.location = visit.location;
    row.entry_time = visit.points.front().t;
    row.duration_s = static_cast<double>(visit.points.back().t - visit.points.front().t) / 1000.0;
    for (std::size_t i = 1; i < visit.points.size(); ++i) {
      row.distance_m += length(visit.points[i - 1], visit.points[i]);
    }
    first_entry.emplace(visit.location, row.entry_time);
    rows.push_back(row);
  }
  for (const Node* location : graph.nodes_chronological(NodeType::location)) {
    if (first_entry.count(location->id)) continue;
    first_entry.emplace(location->id, location->source_time);
    rows.push_back({location->id, location->source_time, 0.0, 0.0, 0});
  }

  std::vector<std::pair<Timestamp, NodeId>> order;
  for (const auto& [location, time] : first_entry) order.emplace_back(time, location);
  std::sort(order.begin(), order.end());
  std::map<NodeId, int> visit_order;
  for (std::size_t i = 0; i < order.size(); ++i) {
    visit_order[order[i].second] = static_cast<int>(i) + 1;
  }
  for (LocationStats& row : rows) row.visit_order = visit_order[row.location];
  std::stable_sort(rows.begin(), rows.end(), [](const LocationStats& a, const LocationStats& b) {
    return a.entry_time < b.entry_time;
  });
  return rows;
}

std::vector<MovementSegment> planned_movements(const GraphView& graph,
                                               const SpatialConfig& config) {
  std::vector<MovementSegment> planned;
  double heading = 0.0;
  for (const Visit& visit : location_visits(graph)) {
    if (visit.points.size() < 2) continue;
    auto polyline = rdp_simplify(visit.points, config.epsilon_m);
    for (MovementSegment& segment :
         segment_movements(polyline, heading, config.min_rotation_deg)) {
      if (segment.kind == MovementKind::rotate) heading += segment.angle_deg;
      segment.location = visit.location;
      planned.push_back(segment);
    }
  }
  return planned;
}

GraphDelta attach_movements(const GraphView& graph, const SpatialConfig& config) {
  GraphDelta delta;
  delta.origin = "spatial";
  const auto planned = planned_movements(graph, config);
  const auto existing = graph.nodes_chronological(NodeType::movement);

  // The graph has no deletion, so already-attached movements are kept and
  // only the part of the plan past the matching prefix is added.
  std::size_t matched = 0;
  while (matched < existing.size() && matched < planned.size()) {
    const Node& node = *existing[matched];
    const MovementSegment& want = planned[matched];
    auto part_of = graph.neighbors(node.id, Direction::outgoing, EdgeLabel::part_of);
    const bool same = node.content == movement_content(want.description()) &&
                      node.source_time == want.t && !part_of.empty() &&
                      part_of.front().node->id == want.location;
    if (!same) break;
    ++matched;
  }

  std::optional<NodeRef> previous;
  if (matched > 0) previous = NodeRef::existing(existing[matched - 1]->id);
  for (std::size_t i = matched; i < planned.size(); ++i) {
    const MovementSegment& segment = planned[i];
    NodeRef node = delta.add_node({NodeType::movement, movement_content(segment.description()),
                                   Speaker::none, 1.0, segment.t});
    delta.add_edge(node, NodeRef::existing(*segment.location), EdgeLabel::part_of);
    if (previous) delta.add_edge(*previous, node, EdgeLabel::next);
    previous = node;
  }
  return delta;
}

TriggerRule movement_rule(SpatialConfig config) {
  TriggerRule rule;
  rule.name = "attach-movements";
  rule.match = [](const GraphView&, const AppliedDelta& applied) {
    return applied.adds_node(NodeType::location);
  };
  rule.action = [config](const GraphView& graph,
                         const AppliedDelta&) -> std::optional<GraphDelta> {
    GraphDelta delta = attach_movements(graph, config);
    if (delta.empty()) return std::nullopt;
    return delta;
  };
  return rule;
}

}  // namespace graphtalk
