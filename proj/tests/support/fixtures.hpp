#pragma once
// Shared graphs and logs for the test suites.

#include "graphtalk/graph.hpp"
#include "graphtalk/tour_log.hpp"

#include <cstdint>
#include <memory>
#include <string>

namespace graphtalk::testing {

/// 2023-10-12T08:49:00Z
inline constexpr Timestamp kTourStart = 1697100540000;

std::string fixture_path(const std::string& name);
std::string read_file(const std::string& path);

/// Graph whose clock returns a fixed time, for reproducible graph_time values.
std::unique_ptr<DialogueStateGraph> fixed_clock_graph(Timestamp now = kTourStart);

struct Figure2 {
  std::unique_ptr<DialogueStateGraph> graph;
  NodeId office = 0;
  NodeId image = 0;
  NodeId laptop = 0;
};

/// laptop -in-> image -in_location-> office, laptop at p = 0.9.
Figure2 figure2_graph();

TourLog three_room_log();

/// Two rooms with movements, three sightings (laptop 0.9, coffee mug 0.55,
/// painting 0.3) and one answered question. Clock fixed at kTourStart + 80 s.
std::unique_ptr<DialogueStateGraph> two_room_dialogue_graph();

/// Tour with random rooms plus an answered question, built from the seed.
std::unique_ptr<DialogueStateGraph> random_graph(std::uint64_t seed);

}  // namespace graphtalk::testing
