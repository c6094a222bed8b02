#pragma once
// Synthetic office tours for demos, tests and benchmarks.

#include "graphtalk/tour_log.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace graphtalk {

struct TourGeneratorConfig {
  int rooms = 3;
  /// Names used in order; generic names are made up when there are too few.
  std::vector<std::string> room_names = {"office",      "hallway",   "kitchen", "meeting room",
                                         "break room",  "lab",       "reception", "library"};
  Timestamp cadence_ms = 1500;
  /// Standard deviation of the Gaussian noise added to each recorded coordinate.
  double odometry_noise_m = 0.02;
  double speed_m_per_s = 0.5;
  int min_legs = 2;
  int max_legs = 4;
  double min_leg_m = 1.5;
  double max_leg_m = 5.0;
  int max_objects_per_image = 2;
  /// Chance that a given frame produces a detection event at all.
  double detection_rate = 0.5;
  Timestamp start_time = 1697100540000;  // 2023-10-12T08:49:00Z
  std::uint64_t seed = 1;
};

TourLog generate_tour(const TourGeneratorConfig& config);

}  // namespace graphtalk
