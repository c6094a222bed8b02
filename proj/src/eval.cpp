#include "graphtalk/eval.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace graphtalk {

using nlohmann::json;

std::vector<TranscriptTurn> transcript_from_json(const json& document) {
  const json* turns = &document;
  if (document.is_object()) {
    if (!document.contains("turns")) throw std::invalid_argument("transcript object needs a 'turns' array");
    turns = &document.at("turns");
  }
  if (!turns->is_array()) throw std::invalid_argument("transcript turns must be an array");
  std::vector<TranscriptTurn> out;
  for (const json& turn : *turns) {
    if (!turn.is_object() || !turn.contains("speaker") || !turn.contains("text") ||
        !turn["speaker"].is_string() || !turn["text"].is_string()) {
      throw std::invalid_argument("each turn needs string fields 'speaker' and 'text'");
    }
    out.push_back({parse_speaker(turn["speaker"].get<std::string>()), turn["text"].get<std::string>()});
  }
  return out;
}

std::vector<TranscriptTurn> load_transcript_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open transcript " + path);
  try {
    return transcript_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("malformed transcript " + path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Lexicon counts

const std::vector<std::string>& negation_lexicon() {
  static const std::vector<std::string> words = {"no", "not", "can't", "don't", "unable", "cannot"};
  return words;
}

const std::vector<std::string>& uncertainty_lexicon() {
  static const std::vector<std::string> words = {"may", "might", "possibly", "possible"};
  return words;
}

const std::vector<std::string>& lexicon_by_name(std::string_view name) {
  if (name == "negation") return negation_lexicon();
  if (name == "uncertainty") return uncertainty_lexicon();
  throw std::invalid_argument("unknown lexicon '" + std::string(name) + "' (expected negation or uncertainty)");
}

std::vector<std::string> tokenize_words(std::string_view text) {
  // Typographic apostrophes (U+2019) are folded to ASCII first.
  std::string folded;
  folded.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text.compare(i, 3, "\xE2\x80\x99") == 0) {
      folded += '\'';
      i += 2;
    } else {
      folded += text[i];
    }
  }

  auto is_word = [](unsigned char c) { return std::isalnum(c) || c >= 0x80; };
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    while (!current.empty() && current.back() == '\'') current.pop_back();
    if (!current.empty()) tokens.push_back(current);
    current.clear();
  };
  for (std::size_t i = 0; i < folded.size(); ++i) {
    const auto c = static_cast<unsigned char>(folded[i]);
    if (is_word(c)) {
      current += static_cast<char>(std::tolower(c));
    } else if (c == '\'' && !current.empty() && i + 1 < folded.size() &&
               is_word(static_cast<unsigned char>(folded[i + 1]))) {
      current += '\'';
    } else {
      flush();
    }
  }
  flush();
  return tokens;
}

LexiconCount count_lexicon(const std::vector<TranscriptTurn>& transcript,
                           const std::vector<std::string>& lexicon) {
  LexiconCount result;
  for (const auto& word : lexicon) result.counts[word] = 0;
  for (const TranscriptTurn& turn : transcript) {
    if (turn.speaker != Speaker::agent) continue;
    for (const std::string& token : tokenize_words(turn.text)) {
      auto it = result.counts.find(token);
      if (it == result.counts.end()) continue;
      ++it->second;
      ++result.total;
    }
  }
  return result;
}

json to_json(const LexiconCount& count) {
  json counts = json::object();
  for (const auto& [word, n] : count.counts) counts[word] = n;
  return {{"counts", counts}, {"total", count.total}};
}

// ---------------------------------------------------------------------------
// Wilcoxon signed-rank

WilcoxonResult wilcoxon_signed_rank(const std::vector<std::pair<double, double>>& pairs) {
  if (pairs.empty()) throw std::invalid_argument("wilcoxon needs at least one pair");
  std::vector<double> diffs;
  for (const auto& [a, b] : pairs) {
    if (!std::isfinite(a) || !std::isfinite(b)) throw std::invalid_argument("wilcoxon scores must be finite");
    if (b - a != 0.0) diffs.push_back(b - a);
  }
  WilcoxonResult result;
  result.n = diffs.size();
  if (diffs.empty()) return result;  // undefined
  result.defined = true;

  const std::size_t n = diffs.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t l, std::size_t r) { return std::abs(diffs[l]) < std::abs(diffs[r]); });

  // Ranks are stored doubled so average ranks of ties stay integral.
  std::vector<std::int64_t> rank2(n);
  double tie_term = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && std::abs(diffs[order[j + 1]]) == std::abs(diffs[order[i]])) ++j;
    const auto shared = static_cast<std::int64_t>(i + 1 + j + 1);  // 2 * mean of ranks i+1..j+1
    for (std::size_t k = i; k <= j; ++k) rank2[order[k]] = shared;
    const double t = static_cast<double>(j - i + 1);
    tie_term += t * t * t - t;
    i = j + 1;
  }

  std::int64_t plus2 = 0;
  std::int64_t total2 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    total2 += rank2[i];
    if (diffs[i] > 0) plus2 += rank2[i];
  }
  const std::int64_t stat2 = std::min(plus2, total2 - plus2);
  result.w_plus = plus2 / 2.0;
  result.w_minus = (total2 - plus2) / 2.0;
  result.statistic = stat2 / 2.0;

  if (n <= kWilcoxonExactLimit) {
    // ways[s]: sign patterns whose positive ranks sum to s (doubled units)
    std::vector<std::uint64_t> ways(static_cast<std::size_t>(total2) + 1, 0);
    ways[0] = 1;
    std::int64_t reach = 0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::int64_t s = reach; s >= 0; --s) ways[s + rank2[i]] += ways[s];
      reach += rank2[i];
    }
    std::uint64_t extreme = 0;
    for (std::int64_t s = 0; s <= total2; ++s) {
      if (std::min(s, total2 - s) <= stat2) extreme += ways[s];
    }
    result.exact = true;
    result.p_value = static_cast<double>(extreme) / static_cast<double>(std::uint64_t{1} << n);
    return result;
  }

  const double nd = static_cast<double>(n);
  const double mean = nd * (nd + 1) / 4.0;
  const double variance = nd * (nd + 1) * (2 * nd + 1) / 24.0 - tie_term / 48.0;
  result.z = (result.statistic - mean) / std::sqrt(variance);
  result.p_value = std::min(1.0, std::erfc(std::abs(result.z) / std::sqrt(2.0)));
  return result;
}

json to_json(const WilcoxonResult& result) {
  if (!result.defined) {
    return {{"defined", false}, {"n", result.n}, {"reason", "all differences are zero"}};
  }
  json out = {{"defined", true},     {"n", result.n},
              {"w_plus", result.w_plus}, {"w_minus", result.w_minus},
              {"statistic", result.statistic}, {"p_value", result.p_value},
              {"method", result.exact ? "exact" : "normal"}};
  if (!result.exact) out["z"] = result.z;
  return out;
}

namespace {

bool parse_number(std::string_view field, double& out) {
  while (!field.empty() && std::isspace(static_cast<unsigned char>(field.front()))) field.remove_prefix(1);
  while (!field.empty() && std::isspace(static_cast<unsigned char>(field.back()))) field.remove_suffix(1);
  if (field.empty()) return false;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), out);
  return ec == std::errc() && ptr == field.data() + field.size();
}

}  // namespace

std::vector<std::pair<double, double>> parse_pairs_csv(std::string_view text) {
  std::vector<std::pair<double, double>> pairs;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto comma = line.find(',');
    double a = 0;
    double b = 0;
    const bool ok = comma != std::string::npos && line.find(',', comma + 1) == std::string::npos &&
                    parse_number(std::string_view(line).substr(0, comma), a) &&
                    parse_number(std::string_view(line).substr(comma + 1), b);
    if (!ok) {
      if (pairs.empty() && line_no == 1) continue;  // header
      throw std::invalid_argument("pairs line " + std::to_string(line_no) + ": expected two numbers");
    }
    pairs.emplace_back(a, b);
  }
  return pairs;
}

}  // namespace graphtalk
