#pragma once
// Choosing verbalization parameters that make recorded wizard replies most
// likely under a scorer: exhaustive enumeration and a categorical TPE.

#include "graphtalk/graph.hpp"
#include "graphtalk/tour_log.hpp"
#include "graphtalk/verbalizer.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace graphtalk {

/// One recorded wizard reply and the state it was given in.
struct WozExample {
  GraphSnapshot graph;
  std::string context_utterance;
  std::string response;
};

struct WozDataset {
  std::vector<WozExample> examples;
  std::size_t size() const { return examples.size(); }
};

/// Builds the state graph for an example: replay, movements, then the user
/// turn as a final utterance node. The clock is pinned to the log so the
/// result is reproducible.
GraphSnapshot materialize_example_graph(const TourLog& log, const std::string& user_utterance);

/// JSON array of {"tour_log", "user", "wizard"}. A tour_log string holding a
/// newline or starting with '{' is inline JSON Lines; anything else is a path
/// resolved against `base_dir`.
WozDataset woz_dataset_from_json(const nlohmann::json& array,
                                 const std::filesystem::path& base_dir = {});
WozDataset load_woz_dataset(const std::string& path);

// ---------------------------------------------------------------------------

/// log P(response | context). Implementations must be safe to call from
/// several threads at once.
class LikelihoodScorer {
 public:
  virtual ~LikelihoodScorer() = default;
  virtual double log_likelihood(const std::string& response, const std::string& context) const = 0;
};

/// Lowercase alphanumeric runs.
std::vector<std::string> mock_tokens(std::string_view text);

/// Add-one smoothed unigram model of the context:
/// sum over response tokens of log((count in context + 1) / (context tokens + V)),
/// V the distinct tokens of context and response together.
double mock_log_likelihood(const std::string& response, const std::string& context);

class MockScorer final : public LikelihoodScorer {
 public:
  double log_likelihood(const std::string& response, const std::string& context) const override {
    return mock_log_likelihood(response, context);
  }
};

struct RemoteScorerConfig {
  std::string base_url = "https://api.openai.com";
  std::string path = "/v1/completions";
  std::string model = "davinci-002";
  std::string api_key;  // empty: read LLM_API_KEY
  int timeout_s = 30;
};

/// Sums the echoed token log-probabilities of the response from a
/// completions endpoint. Not deterministic across model versions.
class RemoteScorer final : public LikelihoodScorer {
 public:
  explicit RemoteScorer(RemoteScorerConfig config);
  double log_likelihood(const std::string& response, const std::string& context) const override;

 private:
  RemoteScorerConfig config_;
};

// ---------------------------------------------------------------------------

/// A scorer call failed; the loss for that parameter setting is undefined.
class LossError : public std::runtime_error {
 public:
  LossError(std::size_t example_index, const std::string& message);
  std::size_t example_index() const { return example_index_; }

 private:
  std::size_t example_index_;
};

/// -(1/N) sum_i log P(r_i | V_P(G_i)).
double cross_entropy_loss(const WozDataset& dataset, const LikelihoodScorer& scorer,
                          const VerbalizationParams& params);

struct Trial {
  VerbalizationParams params;
  double loss = 0.0;
};

struct SearchResult {
  VerbalizationParams best_params;
  double best_loss = 0.0;
  std::vector<Trial> trials;
};

nlohmann::json to_json(const SearchResult& result);

/// Memoizes losses per parameter vector so repeated settings never reach
/// the scorer twice.
class LossCache {
 public:
  LossCache(const WozDataset& dataset, const LikelihoodScorer& scorer, bool parallel = true)
      : dataset_(dataset), scorer_(scorer), parallel_(parallel) {}

  double loss(const VerbalizationParams& params);
  /// Evaluates the missing entries in one batch; returns losses in input order.
  std::vector<double> losses(std::span<const VerbalizationParams> params);
  bool contains(const VerbalizationParams& params) const;
  std::size_t size() const;

 private:
  const WozDataset& dataset_;
  const LikelihoodScorer& scorer_;
  bool parallel_;
  mutable std::mutex mutex_;
  std::map<std::array<int, 7>, double> cache_;
};

struct SearchOptions {
  /// Evaluate with the OpenMP kernel; otherwise the serial one.
  bool parallel = true;
};

/// All 288 settings; ties go to the lexicographically first.
SearchResult exhaustive_search(const WozDataset& dataset, const LikelihoodScorer& scorer,
                               const SearchOptions& options = {});

struct TpeOptions {
  double gamma = 0.25;
  /// Random trials before modelling starts; 0 means max(10, n_trials / 4).
  int startup_trials = 0;
  /// Draws per trial before giving up on finding an unseen setting.
  int max_resample = 64;
  bool parallel = true;
};

/// Sequential categorical TPE. Trials are distinct settings while unseen
/// ones remain; deterministic for a given seed.
SearchResult tpe_search(const WozDataset& dataset, const LikelihoodScorer& scorer, int n_trials,
                        std::uint64_t seed, const TpeOptions& options = {});

}  // namespace graphtalk
