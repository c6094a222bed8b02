#pragma once
// Text encodings for node content that carries numbers.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace graphtalk {

/// "HH:MM" (24-hour, UTC) for a millisecond timestamp.
std::string format_clock(std::int64_t timestamp_ms);
/// "YYYY-MM-DDTHH:MM:SSZ".
std::string format_iso8601(std::int64_t timestamp_ms);

/// Shortest round-trip decimal form of a double.
std::string format_number(double value);

/// "x,y" in metres.
std::string position_content(double x, double y);
std::optional<std::pair<double, double>> parse_position_content(std::string_view content);

enum class MovementKind { forward, rotate };

struct MovementDescription {
  MovementKind kind = MovementKind::forward;
  /// Metres for forward movements, signed degrees (CCW positive) for rotations.
  double amount = 0.0;
};

/// "forward <metres>" or "rotate <degrees>".
std::string movement_content(const MovementDescription& movement);
std::optional<MovementDescription> parse_movement_content(std::string_view content);

}  // namespace graphtalk
