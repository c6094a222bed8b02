#include "graphtalk/tour_log.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace graphtalk {

using nlohmann::json;

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

template <typename T>
T required(const json& object, const char* field) {
  auto it = object.find(field);
  if (it == object.end()) throw std::invalid_argument(std::string("missing field '") + field + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw std::invalid_argument(std::string("field '") + field + "' has the wrong type");
  }
}

}  // namespace

TourLogError::TourLogError(std::size_t line, const std::string& message)
    : std::runtime_error(line ? "tour log line " + std::to_string(line) + ": " + message
                              : "tour log: " + message),
      line_(line) {}

std::string_view SensorEvent::kind() const {
  return std::visit(overloaded{
                        [](const PositionReading&) { return std::string_view("position"); },
                        [](const ImageCapture&) { return std::string_view("image"); },
                        [](const Detection&) { return std::string_view("detection"); },
                        [](const LocationLabel&) { return std::string_view("location_label"); },
                        [](const UserUtterance&) { return std::string_view("user_utterance"); },
                    },
                    payload);
}

json to_json(const SensorEvent& event) {
  json object = {{"t", event.t}, {"kind", event.kind()}};
  std::visit(overloaded{
                 [&](const PositionReading& p) {
                   object["x"] = p.x;
                   object["y"] = p.y;
                 },
                 [&](const ImageCapture& p) { object["image_ref"] = p.image_ref; },
                 [&](const Detection& p) {
                   object["image_ref"] = p.image_ref;
                   json objects = json::array();
                   for (const DetectedObject& o : p.objects) {
                     objects.push_back({{"name", o.name}, {"p", o.probability}});
                   }
                   object["objects"] = std::move(objects);
                 },
                 [&](const LocationLabel& p) { object["name"] = p.name; },
                 [&](const UserUtterance& p) { object["text"] = p.text; },
             },
             event.payload);
  return object;
}

SensorEvent event_from_json(const json& object) {
  if (!object.is_object()) throw std::invalid_argument("event is not a JSON object");
  SensorEvent event;
  event.t = required<Timestamp>(object, "t");
  const auto kind = required<std::string>(object, "kind");
  if (kind == "position") {
    event.payload = PositionReading{required<double>(object, "x"), required<double>(object, "y")};
  } else if (kind == "image") {
    event.payload = ImageCapture{required<std::string>(object, "image_ref")};
  } else if (kind == "detection") {
    Detection detection{required<std::string>(object, "image_ref"), {}};
    const json objects = required<json>(object, "objects");
    if (!objects.is_array()) throw std::invalid_argument("field 'objects' must be an array");
    for (const json& item : objects) {
      DetectedObject detected{required<std::string>(item, "name"), required<double>(item, "p")};
      if (!(detected.probability >= 0.0 && detected.probability <= 1.0)) {
        throw std::invalid_argument("object '" + detected.name + "' probability outside [0, 1]");
      }
      detection.objects.push_back(std::move(detected));
    }
    event.payload = std::move(detection);
  } else if (kind == "location_label") {
    event.payload = LocationLabel{required<std::string>(object, "name")};
  } else if (kind == "user_utterance") {
    event.payload = UserUtterance{required<std::string>(object, "text")};
  } else {
    throw std::invalid_argument("unknown kind '" + kind + "'");
  }
  return event;
}

TourLog parse_tour_log(std::string_view text) {
  TourLog log;
  std::set<std::string> seen_images;
  std::size_t line_number = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_number;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) {
      if (end == text.size()) break;
      continue;
    }

    json object;
    try {
      object = json::parse(line);
    } catch (const json::exception& e) {
      throw TourLogError(line_number, std::string("malformed JSON: ") + e.what());
    }
    if (object.is_object() && object.value("kind", "") == "meta") {
      for (const auto& [key, value] : object.items()) {
        if (key == "kind") continue;
        log.meta[key] = value.is_string() ? value.get<std::string>() : value.dump();
      }
      continue;
    }

    SensorEvent event;
    try {
      event = event_from_json(object);
    } catch (const std::invalid_argument& e) {
      throw TourLogError(line_number, e.what());
    }
    if (!log.events.empty() && event.t < log.events.back().t) {
      throw TourLogError(line_number, "timestamp " + std::to_string(event.t) +
                                          " precedes previous event at " +
                                          std::to_string(log.events.back().t));
    }
    if (const auto* image = std::get_if<ImageCapture>(&event.payload)) {
      seen_images.insert(image->image_ref);
    } else if (const auto* detection = std::get_if<Detection>(&event.payload)) {
      if (!seen_images.count(detection->image_ref)) {
        throw TourLogError(line_number,
                           "detection references unknown image_ref '" + detection->image_ref + "'");
      }
    }
    log.events.push_back(std::move(event));
    if (end == text.size()) break;
  }
  return log;
}

TourLog load_tour_log_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw TourLogError(0, "cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_tour_log(buffer.str());
}

std::string serialize_tour_log(const TourLog& log) {
  std::string out;
  if (!log.meta.empty()) {
    json meta = {{"kind", "meta"}};
    for (const auto& [key, value] : log.meta) meta[key] = value;
    out += meta.dump() + "\n";
  }
  for (const SensorEvent& event : log.events) out += to_json(event).dump() + "\n";
  return out;
}

const std::vector<std::string>& object_vocabulary() {
  static const std::vector<std::string> vocabulary = {
      "a person",       "a woman",         "a man",          "a computer",
      "a desk",         "a table",         "a coffee mug",   "a chair",
      "a whiteboard",   "a garbage can",   "a door",         "a window",
      "a plant",        "a fire extinguisher", "a pillar",   "fruit",
      "apples",         "bananas",         "flowers",        "magazines",
      "books",          "a computer mouse", "a couch",       "a TV",
      "a wastebin",     "a pen",           "a pencil",       "scissors",
      "folders",        "a light switch",  "cables",         "notebooks",
      "paper",          "a printer",       "a bookshelf",    "bookshelves",
      "a painting",     "a camera",        "food",           "cake",
      "a light",        "a lamp",          "a stapler",      "a red folder",
      "a blue folder",  "a yellow folder", "a green folder", "a broom",
      "a blue curtain", "a wooden pallet", "a marker",       "a copy machine",
      "cardboard boxes"};
  return vocabulary;
}

}  // namespace graphtalk
