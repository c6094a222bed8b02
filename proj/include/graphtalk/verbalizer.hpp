#pragma once
// Graph-to-text: typed path traversal over the dialogue state graph rendered
// through sentence templates, plus the semantic-triples baseline.

#include "graphtalk/graph.hpp"

#include <json.hpp>

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace graphtalk {

enum class SelfReference { pepper, the_robot, i };
enum class DistanceStyle { precise, rounding, none };

/// The seven categorical verbalization parameters.
struct VerbalizationParams {
  SelfReference self_reference = SelfReference::pepper;
  bool discourse_markers = false;
  DistanceStyle distance_style = DistanceStyle::precise;
  bool include_rotation = true;
  bool include_low_probability = true;
  bool include_time = true;
  bool mention_turn_count = false;

  bool operator==(const VerbalizationParams&) const = default;

  /// Value index per parameter, in declaration order. Value order follows the
  /// listing order of each parameter (for booleans: true before false).
  std::array<int, 7> indices() const;
  static VerbalizationParams from_indices(const std::array<int, 7>& indices);
  bool operator<(const VerbalizationParams& other) const { return indices() < other.indices(); }
};

/// Number of values each parameter can take.
inline constexpr std::array<int, 7> kParameterCardinalities = {3, 2, 3, 2, 2, 2, 2};
inline constexpr std::array<const char*, 7> kParameterNames = {
    "self_reference",  "discourse_markers",       "distance_style", "include_rotation",
    "include_low_probability", "include_time", "mention_turn_count"};

/// All 288 combinations in lexicographic order.
std::vector<VerbalizationParams> parameter_space();

std::string_view to_string(SelfReference value);
std::string_view to_string(DistanceStyle value);

nlohmann::json to_json(const VerbalizationParams& params);
/// Missing keys keep the values of `base`; unknown keys or values throw.
VerbalizationParams params_from_json(const nlohmann::json& object,
                                     const VerbalizationParams& base = {});
VerbalizationParams load_params_file(const std::string& path);

// ---------------------------------------------------------------------------

struct HedgeBand {
  double lower = 0.0;
  double upper = 1.0;
  /// Replaces the plain verb; empty for plain assertions and suppressed sightings.
  std::string phrase;
};

enum class HedgeLevel { certain, likely, possible, suppressed };

struct Hedge {
  HedgeLevel level = HedgeLevel::certain;
  /// "" for a plain assertion and for suppressed sightings.
  std::string phrase;
};

/// Bands partitioning [0, 1]; each is lower-inclusive, the top band also
/// includes 1.
const std::vector<HedgeBand>& hedge_bands();
Hedge hedge(double probability);

// ---------------------------------------------------------------------------

enum class PatternKind { visit, presence, path, sighting, dialogue };
std::string_view to_string(PatternKind kind);

struct PathMatch {
  PatternKind pattern = PatternKind::visit;
  std::vector<NodeId> nodes;
  Timestamp anchor_time = 0;
  double probability = 1.0;
};

struct TraversalResult {
  std::vector<PathMatch> matches;
  /// Nodes that did not start any pattern (images, user turns, orphans).
  std::size_t unmatched = 0;
};

/// Patterns, by node type:
///   location                                      visit
///   position  -at-> location                      presence
///   movement  -part_of-> location [-next-> ...]   path
///   entity    -in-> image -in_location-> location sighting
///   utterance -responds_to-> utterance            dialogue
/// Ordered by anchor time, then pattern kind, then first node id.
TraversalResult traverse(const GraphView& graph);

// ---------------------------------------------------------------------------

/// Key -> template text. Slots are written {name}.
class TemplateSet {
 public:
  /// Templates compiled in from data/templates.json.
  static const TemplateSet& builtin();
  static TemplateSet from_json(const nlohmann::json& object);
  static TemplateSet load_file(const std::string& path);

  const std::string& get(const std::string& key) const;
  std::string render(const std::string& key,
                     const std::map<std::string, std::string>& slots) const;
  const std::map<std::string, std::string>& entries() const { return entries_; }

 private:
  std::map<std::string, std::string> entries_;
};

enum class SentenceKind { visit, duration, distance, forward, rotation, sighting, dialogue, turns };
std::string_view to_string(SentenceKind kind);

struct Sentence {
  SentenceKind kind = SentenceKind::visit;
  std::string text;
  Timestamp anchor_time = 0;
};

/// Sentences in document order, discourse markers already applied.
std::vector<Sentence> verbalize_sentences(const GraphView& graph, const VerbalizationParams& params,
                                          const TemplateSet& templates = TemplateSet::builtin());

/// One sentence per line; empty for a graph with nothing to say.
std::string verbalize(const GraphView& graph, const VerbalizationParams& params,
                      const TemplateSet& templates = TemplateSet::builtin());

/// "('subject' | 'label' | 'object')" per edge, ordered by the source node's
/// chronological position, then edge insertion order.
std::vector<std::string> triple_lines(const GraphView& graph);
std::string serialize_triples(const GraphView& graph);

/// "a laptop", "apples", "a painting".
std::string entity_phrase(std::string_view name);
/// "the office", "Lisa's office", "the hallway".
std::string location_phrase(std::string_view name);

}  // namespace graphtalk
