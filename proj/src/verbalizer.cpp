#include "graphtalk/verbalizer.hpp"

#include "graphtalk/content.hpp"
#include "graphtalk/spatial.hpp"
#include "graphtalk/builtin_data.hpp"
#include "graphtalk/tour_log.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace graphtalk {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Parameters

namespace {

constexpr std::string_view kSelfReferenceNames[] = {"Pepper", "the robot", "I"};
constexpr std::string_view kDistanceStyleNames[] = {"precise", "rounding", "none"};

int bool_index(bool value) { return value ? 0 : 1; }

}  // namespace

std::string_view to_string(SelfReference value) {
  return kSelfReferenceNames[static_cast<int>(value)];
}
std::string_view to_string(DistanceStyle value) {
  return kDistanceStyleNames[static_cast<int>(value)];
}

std::array<int, 7> VerbalizationParams::indices() const {
  return {static_cast<int>(self_reference), bool_index(discourse_markers),
          static_cast<int>(distance_style), bool_index(include_rotation),
          bool_index(include_low_probability), bool_index(include_time),
          bool_index(mention_turn_count)};
}

VerbalizationParams VerbalizationParams::from_indices(const std::array<int, 7>& indices) {
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] < 0 || indices[i] >= kParameterCardinalities[i]) {
      throw std::out_of_range(std::string("value index out of range for ") + kParameterNames[i]);
    }
  }
  VerbalizationParams params;
  params.self_reference = static_cast<SelfReference>(indices[0]);
  params.discourse_markers = indices[1] == 0;
  params.distance_style = static_cast<DistanceStyle>(indices[2]);
  params.include_rotation = indices[3] == 0;
  params.include_low_probability = indices[4] == 0;
  params.include_time = indices[5] == 0;
  params.mention_turn_count = indices[6] == 0;
  return params;
}

std::vector<VerbalizationParams> parameter_space() {
  std::vector<VerbalizationParams> space;
  std::array<int, 7> indices{};
  while (true) {
    space.push_back(VerbalizationParams::from_indices(indices));
    int position = static_cast<int>(indices.size()) - 1;
    while (position >= 0 && ++indices[position] == kParameterCardinalities[position]) {
      indices[position] = 0;
      --position;
    }
    if (position < 0) break;
  }
  return space;
}

json to_json(const VerbalizationParams& params) {
  return {{"self_reference", to_string(params.self_reference)},
          {"discourse_markers", params.discourse_markers},
          {"distance_style", to_string(params.distance_style)},
          {"include_rotation", params.include_rotation},
          {"include_low_probability", params.include_low_probability},
          {"include_time", params.include_time},
          {"mention_turn_count", params.mention_turn_count}};
}

VerbalizationParams params_from_json(const json& object, const VerbalizationParams& base) {
  if (!object.is_object()) throw std::invalid_argument("parameters must be a JSON object");
  VerbalizationParams params = base;
  auto get_bool = [](const json& value, const std::string& key) {
    if (!value.is_boolean()) throw std::invalid_argument("parameter '" + key + "' must be boolean");
    return value.get<bool>();
  };
  auto get_enum = [](const json& value, const std::string& key, const auto& names) {
    if (value.is_string()) {
      const auto text = value.get<std::string>();
      for (std::size_t i = 0; i < std::size(names); ++i) {
        if (names[i] == text) return static_cast<int>(i);
      }
    }
    throw std::invalid_argument("invalid value " + value.dump() + " for parameter '" + key + "'");
  };
  for (const auto& [key, value] : object.items()) {
    if (key == "self_reference") {
      params.self_reference = static_cast<SelfReference>(get_enum(value, key, kSelfReferenceNames));
    } else if (key == "discourse_markers") {
      params.discourse_markers = get_bool(value, key);
    } else if (key == "distance_style") {
      params.distance_style = static_cast<DistanceStyle>(get_enum(value, key, kDistanceStyleNames));
    } else if (key == "include_rotation") {
      params.include_rotation = get_bool(value, key);
    } else if (key == "include_low_probability") {
      params.include_low_probability = get_bool(value, key);
    } else if (key == "include_time") {
      params.include_time = get_bool(value, key);
    } else if (key == "mention_turn_count") {
      params.mention_turn_count = get_bool(value, key);
    } else {
      throw std::invalid_argument("unknown parameter '" + key + "'");
    }
  }
  return params;
}

VerbalizationParams load_params_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open parameter file " + path);
  try {
    return params_from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw std::invalid_argument("malformed parameter file " + path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Hedging

const std::vector<HedgeBand>& hedge_bands() {
  static const std::vector<HedgeBand> bands = {
      {0.8, 1.0, ""}, {0.5, 0.8, "probably saw"}, {0.2, 0.5, "may have seen"}, {0.0, 0.2, ""}};
  return bands;
}

Hedge hedge(double probability) {
  if (!(probability >= 0.0 && probability <= 1.0)) {
    throw std::out_of_range("hedge: probability " + std::to_string(probability) +
                            " outside [0, 1]");
  }
  const auto& bands = hedge_bands();
  for (std::size_t i = 0; i < bands.size(); ++i) {
    if (probability >= bands[i].lower) {
      return {static_cast<HedgeLevel>(i), bands[i].phrase};
    }
  }
  return {HedgeLevel::suppressed, ""};
}

// ---------------------------------------------------------------------------
// Traversal

std::string_view to_string(PatternKind kind) {
  constexpr std::string_view names[] = {"visit", "presence", "path", "sighting", "dialogue"};
  return names[static_cast<int>(kind)];
}

TraversalResult traverse(const GraphView& graph) {
  TraversalResult result;
  auto make_match = [&](PatternKind kind, std::vector<NodeId> nodes) {
    PathMatch match{kind, std::move(nodes), 0, 1.0};
    match.anchor_time = graph.node(match.nodes.front()).source_time;
    for (NodeId id : match.nodes) {
      const Node& node = graph.node(id);
      match.anchor_time = std::min(match.anchor_time, node.source_time);
      match.probability = std::min(match.probability, node.probability);
    }
    result.matches.push_back(std::move(match));
  };

  for (const Node* node : graph.nodes_chronological()) {
    const std::size_t before = result.matches.size();
    switch (node->type) {
      case NodeType::location:
        make_match(PatternKind::visit, {node->id});
        break;
      case NodeType::position:
        for (const Neighbor& at : graph.neighbors(node->id, Direction::outgoing, EdgeLabel::at)) {
          if (at.node->type == NodeType::location) make_match(PatternKind::presence, {node->id, at.node->id});
        }
        break;
      case NodeType::movement:
        for (const Neighbor& part_of :
             graph.neighbors(node->id, Direction::outgoing, EdgeLabel::part_of)) {
          if (part_of.node->type != NodeType::location) continue;
          std::vector<NodeId> nodes{node->id, part_of.node->id};
          for (const Neighbor& next :
               graph.neighbors(node->id, Direction::outgoing, EdgeLabel::next)) {
            if (next.node->type == NodeType::movement) nodes.push_back(next.node->id);
          }
          make_match(PatternKind::path, std::move(nodes));
        }
        break;
      case NodeType::entity:
        for (const Neighbor& image : graph.neighbors(node->id, Direction::outgoing, EdgeLabel::in)) {
          if (image.node->type != NodeType::image) continue;
          for (const Neighbor& location :
               graph.neighbors(image.node->id, Direction::outgoing, EdgeLabel::in_location)) {
            if (location.node->type == NodeType::location) {
              make_match(PatternKind::sighting, {node->id, image.node->id, location.node->id});
            }
          }
        }
        break;
      case NodeType::utterance:
        if (node->speaker != Speaker::agent) break;
        for (const Neighbor& asked :
             graph.neighbors(node->id, Direction::outgoing, EdgeLabel::responds_to)) {
          if (asked.node->type == NodeType::utterance && asked.node->speaker == Speaker::user) {
            make_match(PatternKind::dialogue, {node->id, asked.node->id});
          }
        }
        break;
      case NodeType::image:
        break;
    }
    if (result.matches.size() == before) ++result.unmatched;
  }

  std::stable_sort(result.matches.begin(), result.matches.end(),
                   [](const PathMatch& a, const PathMatch& b) {
                     if (a.anchor_time != b.anchor_time) return a.anchor_time < b.anchor_time;
                     if (a.pattern != b.pattern) return a.pattern < b.pattern;
                     return a.nodes.front() < b.nodes.front();
                   });
  return result;
}

// ---------------------------------------------------------------------------
// Templates

const TemplateSet& TemplateSet::builtin() {
  static const TemplateSet templates = from_json(json::parse(kBuiltinTemplatesJson));
  return templates;
}

TemplateSet TemplateSet::from_json(const json& object) {
  if (!object.is_object()) throw std::invalid_argument("template file must be a JSON object");
  TemplateSet set;
  for (const auto& [key, value] : object.items()) {
    if (!value.is_string()) throw std::invalid_argument("template '" + key + "' is not a string");
    set.entries_[key] = value.get<std::string>();
  }
  return set;
}

TemplateSet TemplateSet::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open template file " + path);
  return from_json(json::parse(in));
}

const std::string& TemplateSet::get(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw std::out_of_range("missing template '" + key + "'");
  return it->second;
}

std::string TemplateSet::render(const std::string& key,
                                const std::map<std::string, std::string>& slots) const {
  const std::string& text = get(key);
  std::string out;
  out.reserve(text.size() + 32);
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '{') {
      const std::size_t close = text.find('}', i);
      if (close != std::string::npos) {
        auto slot = slots.find(text.substr(i + 1, close - i - 1));
        if (slot != slots.end()) {
          out += slot->second;
          i = close;
          continue;
        }
      }
    }
    out += text[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Verbalization

std::string_view to_string(SentenceKind kind) {
  constexpr std::string_view names[] = {"visit",    "duration", "distance", "forward",
                                        "rotation", "sighting", "dialogue", "turns"};
  return names[static_cast<int>(kind)];
}

std::string entity_phrase(std::string_view name) {
  static const std::set<std::string, std::less<>> vocabulary(object_vocabulary().begin(),
                                                             object_vocabulary().end());
  if (name.empty()) return "something";
  for (std::string_view article : {"a ", "an ", "the ", "some ", "A ", "An ", "The "}) {
    if (name.starts_with(article)) return std::string(name);
  }
  if (vocabulary.count(name)) return std::string(name);
  const char first = static_cast<char>(std::tolower(static_cast<unsigned char>(name.front())));
  const bool vowel = std::string_view("aeiou").find(first) != std::string_view::npos;
  return (vowel ? "an " : "a ") + std::string(name);
}

std::string location_phrase(std::string_view name) {
  if (name.empty()) return "an unnamed area";
  if (std::isupper(static_cast<unsigned char>(name.front())) || name.starts_with("the ") ||
      name.find("'s") != std::string_view::npos) {
    return std::string(name);
  }
  return "the " + std::string(name);
}

namespace {

struct LocationSummary {
  double duration_s = 0.0;
  double distance_m = 0.0;
};

struct SightingGroup {
  std::size_t first_match = 0;
  double probability = 0.0;
  Timestamp first_seen = 0;
};

std::string format_distance(double meters, DistanceStyle style, const TemplateSet& templates) {
  char buffer[64];
  if (style == DistanceStyle::precise) {
    std::snprintf(buffer, sizeof(buffer), "%.2f ", meters);
    return buffer + templates.get("unit.meters");
  }
  const long long rounded = std::llround(meters);
  return std::to_string(rounded) + " " +
         templates.get(rounded == 1 ? "unit.meter" : "unit.meters");
}

std::string capitalize(std::string text) {
  if (!text.empty()) text.front() = static_cast<char>(std::toupper(static_cast<unsigned char>(text.front())));
  return text;
}

}  // namespace

std::vector<Sentence> verbalize_sentences(const GraphView& graph, const VerbalizationParams& params,
                                          const TemplateSet& templates) {
  const TraversalResult traversal = traverse(graph);
  const auto& matches = traversal.matches;

  std::map<NodeId, LocationSummary> summaries;
  for (const LocationStats& row : location_stats(graph)) {
    summaries[row.location].duration_s += row.duration_s;
    summaries[row.location].distance_m += row.distance_m;
  }

  // Same entity name in the same location collapses into one sighting.
  std::map<std::pair<std::string, NodeId>, SightingGroup> sightings;
  for (std::size_t i = 0; i < matches.size(); ++i) {
    if (matches[i].pattern != PatternKind::sighting) continue;
    const Node& entity = graph.node(matches[i].nodes[0]);
    auto [it, inserted] =
        sightings.try_emplace({entity.content, matches[i].nodes[2]},
                              SightingGroup{i, entity.probability, entity.source_time});
    if (!inserted) {
      it->second.probability = std::max(it->second.probability, entity.probability);
      it->second.first_seen = std::min(it->second.first_seen, entity.source_time);
    }
  }

  const std::string self_key = params.self_reference == SelfReference::pepper      ? "self.pepper"
                               : params.self_reference == SelfReference::the_robot ? "self.the_robot"
                                                                                   : "self.i";
  const std::string self = templates.get(self_key);

  struct Draft {
    SentenceKind kind;
    std::string body;
    Timestamp anchor;
    std::size_t slot;  // position in the marker rotation
  };
  std::vector<Draft> drafts;

  for (std::size_t i = 0; i < matches.size(); ++i) {
    const PathMatch& match = matches[i];
    const std::size_t slot = i * 3;
    switch (match.pattern) {
      case PatternKind::visit: {
        const Node& location = graph.node(match.nodes[0]);
        std::map<std::string, std::string> slots{{"self", self},
                                                 {"location", location_phrase(location.content)},
                                                 {"clock", format_clock(location.source_time)}};
        drafts.push_back({SentenceKind::visit,
                          templates.render(params.include_time ? "visit.time" : "visit", slots),
                          match.anchor_time, slot});
        const LocationSummary summary = summaries[location.id];
        if (params.include_time && summary.duration_s > 0.0) {
          slots["duration"] = std::to_string(std::llround(summary.duration_s));
          drafts.push_back({SentenceKind::duration, templates.render("summary.duration", slots),
                            match.anchor_time, slot + 1});
        }
        if (params.distance_style != DistanceStyle::none && summary.distance_m > 0.0) {
          slots["distance"] = format_distance(summary.distance_m, params.distance_style, templates);
          drafts.push_back({SentenceKind::distance, templates.render("summary.distance", slots),
                            match.anchor_time, slot + 2});
        }
        break;
      }
      case PatternKind::presence:
        // Folded into the per-location summary.
        break;
      case PatternKind::path: {
        auto movement = parse_movement_content(graph.node(match.nodes[0]).content);
        if (!movement) break;
        if (movement->kind == MovementKind::forward) {
          if (params.distance_style == DistanceStyle::none) break;
          drafts.push_back(
              {SentenceKind::forward,
               templates.render("forward", {{"self", self},
                                            {"distance", format_distance(movement->amount,
                                                                         params.distance_style,
                                                                         templates)}}),
               match.anchor_time, slot});
        } else {
          if (!params.include_rotation) break;
          drafts.push_back(
              {SentenceKind::rotation,
               templates.render(movement->amount > 0 ? "rotate.left" : "rotate.right",
                                {{"self", self},
                                 {"angle", std::to_string(std::llround(std::abs(movement->amount)))}}),
               match.anchor_time, slot});
        }
        break;
      }
      case PatternKind::sighting: {
        const Node& entity = graph.node(match.nodes[0]);
        const Node& location = graph.node(match.nodes[2]);
        const SightingGroup& group = sightings.at({entity.content, location.id});
        if (group.first_match != i) break;
        const Hedge h = hedge(group.probability);
        if (h.level == HedgeLevel::suppressed) break;
        if (!params.include_low_probability && group.probability < 0.5) break;
        const std::string verb = h.level == HedgeLevel::certain ? templates.get("verb.certain")
                                 : h.level == HedgeLevel::likely ? templates.get("verb.likely")
                                                                 : templates.get("verb.possible");
        drafts.push_back(
            {SentenceKind::sighting,
             templates.render(params.include_time ? "sighting.time" : "sighting",
                              {{"self", self},
                               {"verb", verb},
                               {"entity", entity_phrase(entity.content)},
                               {"location", location_phrase(location.content)},
                               {"clock", format_clock(group.first_seen)}}),
             match.anchor_time, slot});
        break;
      }
      case PatternKind::dialogue: {
        drafts.push_back({SentenceKind::dialogue,
                          templates.render("dialogue", {{"self", self},
                                                        {"agent", graph.node(match.nodes[0]).content},
                                                        {"user", graph.node(match.nodes[1]).content}}),
                          match.anchor_time, slot});
        break;
      }
    }
  }

  if (params.mention_turn_count) {
    std::size_t turns = 0;
    for (const auto& [id, node] : graph.nodes()) turns += node.type == NodeType::utterance;
    const std::string noun = templates.get(turns == 1 ? "turns.noun.one" : "turns.noun.many");
    drafts.push_back({SentenceKind::turns,
                      templates.render(params.self_reference == SelfReference::i ? "turns.first"
                                                                                 : "turns.third",
                                       {{"self", self}, {"turns", std::to_string(turns) + " " + noun}}),
                      drafts.empty() ? 0 : drafts.back().anchor, matches.size() * 3});
  }

  // The marker depends on the sentence's slot rather than its output position,
  // so dropping one sentence never rewrites the others.
  std::vector<Sentence> sentences;
  sentences.reserve(drafts.size());
  for (std::size_t i = 0; i < drafts.size(); ++i) {
    std::string text;
    if (params.discourse_markers && i > 0) {
      text = templates.get("marker." + std::to_string(drafts[i].slot % 4)) + " " + drafts[i].body;
    } else {
      text = capitalize(drafts[i].body);
    }
    sentences.push_back({drafts[i].kind, std::move(text), drafts[i].anchor});
  }
  return sentences;
}

std::string verbalize(const GraphView& graph, const VerbalizationParams& params,
                      const TemplateSet& templates) {
  std::string document;
  for (const Sentence& sentence : verbalize_sentences(graph, params, templates)) {
    if (!document.empty()) document += '\n';
    document += sentence.text;
  }
  return document;
}

// ---------------------------------------------------------------------------
// Triples

std::vector<std::string> triple_lines(const GraphView& graph) {
  std::map<NodeId, std::size_t> rank;
  for (const Node* node : graph.nodes_chronological()) rank.emplace(node->id, rank.size());

  const auto& edges = graph.edges();
  std::vector<std::size_t> order(edges.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return rank.at(edges[a].from) < rank.at(edges[b].from);
  });

  std::vector<std::string> lines;
  lines.reserve(edges.size());
  for (std::size_t index : order) {
    const Edge& edge = edges[index];
    const Node& from = graph.node(edge.from);
    const Node& to = graph.node(edge.to);
    std::string line = "('" + from.content + "' | '" + std::string(to_string(edge.label)) +
                       "' | '" + to.content + "')";
    if (from.probability < 1.0) {
      char buffer[32];
      std::snprintf(buffer, sizeof(buffer), " [p=%.2f]", from.probability);
      line += buffer;
    }
    const bool sighting = from.type == NodeType::entity && edge.label == EdgeLabel::in &&
                          to.type == NodeType::image;
    const bool position = from.type == NodeType::position && edge.label == EdgeLabel::at;
    if (sighting || position) line += " [t=" + format_iso8601(from.source_time) + "]";
    lines.push_back(std::move(line));
  }
  return lines;
}

std::string serialize_triples(const GraphView& graph) {
  std::string document;
  for (const std::string& line : triple_lines(graph)) {
    if (!document.empty()) document += '\n';
    document += line;
  }
  return document;
}

}  // namespace graphtalk
