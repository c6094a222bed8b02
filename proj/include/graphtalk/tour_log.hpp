#pragma once
// Tour logs: JSON Lines streams of simulated robot sensor events.

#include "graphtalk/graph.hpp"

#include <json.hpp>

#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace graphtalk {

struct PositionReading {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const PositionReading&) const = default;
};

struct ImageCapture {
  std::string image_ref;
  bool operator==(const ImageCapture&) const = default;
};

struct DetectedObject {
  std::string name;
  double probability = 0.0;
  bool operator==(const DetectedObject&) const = default;
};

struct Detection {
  std::string image_ref;
  std::vector<DetectedObject> objects;
  bool operator==(const Detection&) const = default;
};

struct LocationLabel {
  std::string name;
  bool operator==(const LocationLabel&) const = default;
};

struct UserUtterance {
  std::string text;
  bool operator==(const UserUtterance&) const = default;
};

using EventPayload =
    std::variant<PositionReading, ImageCapture, Detection, LocationLabel, UserUtterance>;

struct SensorEvent {
  Timestamp t = 0;
  EventPayload payload;

  std::string_view kind() const;
  bool operator==(const SensorEvent&) const = default;
};

struct TourLog {
  std::vector<SensorEvent> events;
  std::map<std::string, std::string> meta;

  bool operator==(const TourLog&) const = default;
};

/// Parse failure; line is 1-based (0 when not tied to a line).
class TourLogError : public std::runtime_error {
 public:
  TourLogError(std::size_t line, const std::string& message);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Parses JSON Lines. Blank lines are skipped. A line whose object has
/// "kind": "meta" carries free-form string metadata instead of an event.
TourLog parse_tour_log(std::string_view text);
TourLog load_tour_log_file(const std::string& path);

nlohmann::json to_json(const SensorEvent& event);
SensorEvent event_from_json(const nlohmann::json& object);
std::string serialize_tour_log(const TourLog& log);

/// Object names the detector is prompted with; the tour generator samples from these.
const std::vector<std::string>& object_vocabulary();

}  // namespace graphtalk
