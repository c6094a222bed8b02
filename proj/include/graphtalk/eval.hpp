#pragma once
// Transcript analysis: lexicon counts over agent turns and the Wilcoxon
// signed-rank test for paired ratings.

#include "graphtalk/graph.hpp"

#include <json.hpp>

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace graphtalk {

struct TranscriptTurn {
  Speaker speaker = Speaker::user;
  std::string text;
};

/// Accepts {"turns": [...]} as written by the chat command and the service, or
/// a bare array of {speaker, text} objects.
std::vector<TranscriptTurn> transcript_from_json(const nlohmann::json& document);
std::vector<TranscriptTurn> load_transcript_file(const std::string& path);

struct LexiconCount {
  /// Every lexicon word is present, possibly with 0.
  std::map<std::string, std::size_t> counts;
  std::size_t total = 0;
};

const std::vector<std::string>& negation_lexicon();
const std::vector<std::string>& uncertainty_lexicon();
/// "negation" or "uncertainty".
const std::vector<std::string>& lexicon_by_name(std::string_view name);

/// Lower-cased tokens; apostrophes inside a word stay part of it ("can't").
std::vector<std::string> tokenize_words(std::string_view text);

/// Whole-token, case-insensitive counts over agent turns only.
LexiconCount count_lexicon(const std::vector<TranscriptTurn>& transcript,
                           const std::vector<std::string>& lexicon);
nlohmann::json to_json(const LexiconCount& count);

struct WilcoxonResult {
  /// False when every difference is zero; the other fields are then meaningless.
  bool defined = false;
  std::size_t n = 0;  // pairs left after dropping zero differences
  double w_plus = 0.0;
  double w_minus = 0.0;
  double statistic = 0.0;  // min(w_plus, w_minus)
  double p_value = 1.0;    // two-sided
  bool exact = false;
  double z = 0.0;  // normal approximation only
};

/// Exact distribution for n <= kWilcoxonExactLimit, otherwise the normal
/// approximation with tie correction (no continuity correction).
inline constexpr std::size_t kWilcoxonExactLimit = 12;
WilcoxonResult wilcoxon_signed_rank(const std::vector<std::pair<double, double>>& pairs);
nlohmann::json to_json(const WilcoxonResult& result);

/// Two numeric columns per line; a non-numeric first line is taken as a header.
std::vector<std::pair<double, double>> parse_pairs_csv(std::string_view text);

}  // namespace graphtalk
