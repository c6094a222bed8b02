#include "graphtalk/content.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <ctime>

namespace graphtalk {

namespace {

std::optional<double> parse_double(std::string_view text) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(value)) {
    return std::nullopt;
  }
  return value;
}

std::tm utc_time(std::int64_t timestamp_ms) {
  // floor division so pre-epoch times still land in the right second
  std::int64_t seconds = timestamp_ms / 1000;
  if (timestamp_ms % 1000 < 0) --seconds;
  const std::time_t t = static_cast<std::time_t>(seconds);
  std::tm tm{};
  gmtime_r(&t, &tm);
  return tm;
}

}  // namespace

std::string format_clock(std::int64_t timestamp_ms) {
  const std::tm tm = utc_time(timestamp_ms);
  char buffer[16];
  std::snprintf(buffer, sizeof(buffer), "%02d:%02d", tm.tm_hour, tm.tm_min);
  return buffer;
}

std::string format_iso8601(std::int64_t timestamp_ms) {
  const std::tm tm = utc_time(timestamp_ms);
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%04d-%02d-%02dT%02d:%02d:%02dZ", tm.tm_year + 1900,
                tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec);
  return buffer;
}

std::string format_number(double value) {
  char buffer[64];
  auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, ptr);
}

std::string position_content(double x, double y) {
  return format_number(x) + "," + format_number(y);
}

std::optional<std::pair<double, double>> parse_position_content(std::string_view content) {
  const auto comma = content.find(',');
  if (comma == std::string_view::npos) return std::nullopt;
  auto x = parse_double(content.substr(0, comma));
  auto y = parse_double(content.substr(comma + 1));
  if (!x || !y) return std::nullopt;
  return std::make_pair(*x, *y);
}

std::string movement_content(const MovementDescription& movement) {
  return (movement.kind == MovementKind::forward ? "forward " : "rotate ") +
         format_number(movement.amount);
}

std::optional<MovementDescription> parse_movement_content(std::string_view content) {
  MovementDescription movement;
  std::string_view rest;
  if (content.starts_with("forward ")) {
    movement.kind = MovementKind::forward;
    rest = content.substr(8);
  } else if (content.starts_with("rotate ")) {
    movement.kind = MovementKind::rotate;
    rest = content.substr(7);
  } else {
    return std::nullopt;
  }
  auto amount = parse_double(rest);
  if (!amount) return std::nullopt;
  movement.amount = *amount;
  return movement;
}

}  // namespace graphtalk
