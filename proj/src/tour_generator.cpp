#include "graphtalk/tour_generator.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace graphtalk {

TourLog generate_tour(const TourGeneratorConfig& config) {
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, config.odometry_noise_m);
  const auto& vocabulary = object_vocabulary();

  TourLog log;
  log.meta["generator"] = "graphtalk";
  log.meta["seed"] = std::to_string(config.seed);

  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;  // radians
  Timestamp t = config.start_time;
  int frame = 0;
  const double step = config.speed_m_per_s * static_cast<double>(config.cadence_ms) / 1000.0;

  auto record_frame = [&] {
    const double nx = config.odometry_noise_m > 0 ? x + noise(rng) : x;
    const double ny = config.odometry_noise_m > 0 ? y + noise(rng) : y;
    log.events.push_back({t, PositionReading{nx, ny}});
    char ref[32];
    std::snprintf(ref, sizeof(ref), "img_%04d.jpg", frame++);
    log.events.push_back({t, ImageCapture{ref}});
    if (unit(rng) < config.detection_rate) {
      Detection detection{ref, {}};
      const int count = 1 + static_cast<int>(unit(rng) * config.max_objects_per_image);
      for (int i = 0; i < count; ++i) {
        const auto& name = vocabulary[static_cast<std::size_t>(unit(rng) * vocabulary.size())];
        detection.objects.push_back({name, std::round(unit(rng) * 100.0) / 100.0});
      }
      log.events.push_back({t + 200, std::move(detection)});
    }
    t += config.cadence_ms;
  };

  for (int room = 0; room < config.rooms; ++room) {
    const std::string name = room < static_cast<int>(config.room_names.size())
                                 ? config.room_names[room]
                                 : "room " + std::to_string(room + 1);
    log.events.push_back({t, LocationLabel{name}});
    t += 500;

    const int legs = config.min_legs +
                     static_cast<int>(unit(rng) * (config.max_legs - config.min_legs + 1));
    for (int leg = 0; leg < legs; ++leg) {
      if (leg > 0 || room > 0) {
        // mostly right-angle turns, as in corridors
        const double choices[] = {90.0, -90.0, 45.0, -45.0, 180.0};
        heading += choices[static_cast<std::size_t>(unit(rng) * 5)] * std::numbers::pi / 180.0;
      }
      const double leg_length =
          config.min_leg_m + unit(rng) * (config.max_leg_m - config.min_leg_m);
      const int steps = std::max(1, static_cast<int>(leg_length / step));
      for (int s = 0; s < steps; ++s) {
        record_frame();
        x += step * std::cos(heading);
        y += step * std::sin(heading);
      }
    }
    record_frame();
  }
  return log;
}

}  // namespace graphtalk
