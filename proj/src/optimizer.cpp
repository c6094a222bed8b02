#include "graphtalk/optimizer.hpp"

#include "graphtalk/ingest.hpp"
#include "graphtalk/kernels.hpp"
#include "graphtalk/spatial.hpp"

#include <httplib.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <random>
#include <set>
#include <unordered_map>

namespace graphtalk {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Dataset

GraphSnapshot materialize_example_graph(const TourLog& log, const std::string& user_utterance) {
  const Timestamp end = log.events.empty() ? 0 : log.events.back().t;
  DialogueStateGraph graph([end] { return end; });
  replay(graph, log);
  GraphDelta movements = attach_movements(graph.view());
  if (!movements.empty()) graph.apply(movements);
  if (!user_utterance.empty()) {
    graph.add_node(NodeType::utterance, user_utterance, Speaker::user, 1.0, end + 1000);
  }
  return graph.snapshot();
}

WozDataset woz_dataset_from_json(const json& array, const std::filesystem::path& base_dir) {
  if (!array.is_array()) throw std::invalid_argument("WoZ dataset must be a JSON array");
  WozDataset dataset;
  for (std::size_t i = 0; i < array.size(); ++i) {
    const json& item = array[i];
    const std::string where = "WoZ example " + std::to_string(i);
    if (!item.is_object()) throw std::invalid_argument(where + ": not an object");
    for (const char* key : {"tour_log", "user", "wizard"}) {
      if (!item.contains(key) || !item[key].is_string()) {
        throw std::invalid_argument(where + ": missing string field '" + key + "'");
      }
    }
    const std::string log_field = item["tour_log"].get<std::string>();
    const std::string response = item["wizard"].get<std::string>();
    if (response.empty()) throw std::invalid_argument(where + ": empty wizard response");

    TourLog log;
    try {
      const bool inline_log =
          log_field.find('\n') != std::string::npos || log_field.starts_with("{");
      log = inline_log ? parse_tour_log(log_field)
                       : load_tour_log_file((base_dir / log_field).string());
    } catch (const std::exception& e) {
      throw std::invalid_argument(where + ": " + e.what());
    }
    const std::string user = item["user"].get<std::string>();
    dataset.examples.push_back({materialize_example_graph(log, user), user, response});
  }
  if (dataset.examples.empty()) throw std::invalid_argument("WoZ dataset is empty");
  return dataset;
}

WozDataset load_woz_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open WoZ dataset " + path);
  json array;
  try {
    array = json::parse(in);
  } catch (const json::exception& e) {
    throw std::invalid_argument("malformed WoZ dataset " + path + ": " + e.what());
  }
  return woz_dataset_from_json(array, std::filesystem::path(path).parent_path());
}

// ---------------------------------------------------------------------------
// Scorers

std::vector<std::string> mock_tokens(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char c : text) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isalnum(u)) {
      current += static_cast<char>(std::tolower(u));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

double mock_log_likelihood(const std::string& response, const std::string& context) {
  const auto response_tokens = mock_tokens(response);
  if (response_tokens.empty()) return 0.0;
  const auto context_tokens = mock_tokens(context);

  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& t : context_tokens) ++counts[t];
  std::set<std::string_view> vocabulary;
  for (const auto& t : context_tokens) vocabulary.insert(t);
  for (const auto& t : response_tokens) vocabulary.insert(t);

  const double denominator = static_cast<double>(context_tokens.size() + vocabulary.size());
  double score = 0.0;
  for (const auto& t : response_tokens) {
    auto it = counts.find(t);
    const double count = it == counts.end() ? 0.0 : static_cast<double>(it->second);
    score += std::log((count + 1.0) / denominator);
  }
  return score;
}

RemoteScorer::RemoteScorer(RemoteScorerConfig config) : config_(std::move(config)) {
  if (config_.api_key.empty()) {
    if (const char* key = std::getenv("LLM_API_KEY")) config_.api_key = key;
  }
  if (config_.api_key.empty()) throw std::invalid_argument("remote scorer needs LLM_API_KEY");
}

double RemoteScorer::log_likelihood(const std::string& response, const std::string& context) const {
  const std::string prefix = context + "\n\n";
  const json body = {{"model", config_.model}, {"prompt", prefix + response},
                     {"max_tokens", 0},        {"echo", true},
                     {"logprobs", 0}};
  httplib::Client client(config_.base_url);
  client.set_connection_timeout(config_.timeout_s);
  client.set_read_timeout(config_.timeout_s);
  client.set_bearer_token_auth(config_.api_key);
  auto result = client.Post(config_.path, body.dump(), "application/json");
  if (!result) throw std::runtime_error("scorer request failed: " + httplib::to_string(result.error()));
  if (result->status != 200) {
    throw std::runtime_error("scorer returned HTTP " + std::to_string(result->status));
  }
  const json reply = json::parse(result->body);
  const json& logprobs = reply.at("choices").at(0).at("logprobs");
  const json& offsets = logprobs.at("text_offset");
  const json& values = logprobs.at("token_logprobs");
  double sum = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (offsets.at(i).get<std::size_t>() >= prefix.size() && !values[i].is_null()) {
      sum += values[i].get<double>();
    }
  }
  return sum;
}

// ---------------------------------------------------------------------------
// Loss

LossError::LossError(std::size_t example_index, const std::string& message)
    : std::runtime_error("example " + std::to_string(example_index) + ": " + message),
      example_index_(example_index) {}

double cross_entropy_loss(const WozDataset& dataset, const LikelihoodScorer& scorer,
                          const VerbalizationParams& params) {
  return kernels::evaluate_losses_serial(dataset, scorer, std::span(&params, 1)).front();
}

json to_json(const SearchResult& result) {
  json trials = json::array();
  for (const Trial& t : result.trials) trials.push_back({{"params", to_json(t.params)}, {"loss", t.loss}});
  return {{"best_params", to_json(result.best_params)},
          {"best_loss", result.best_loss},
          {"trials", std::move(trials)}};
}

double LossCache::loss(const VerbalizationParams& params) {
  return losses(std::span(&params, 1)).front();
}

std::vector<double> LossCache::losses(std::span<const VerbalizationParams> params) {
  std::lock_guard lock(mutex_);
  std::vector<VerbalizationParams> missing;
  std::set<std::array<int, 7>> queued;
  for (const auto& p : params) {
    if (!cache_.count(p.indices()) && queued.insert(p.indices()).second) missing.push_back(p);
  }
  if (!missing.empty()) {
    const auto computed = parallel_ ? kernels::evaluate_losses_parallel(dataset_, scorer_, missing)
                                    : kernels::evaluate_losses_serial(dataset_, scorer_, missing);
    for (std::size_t i = 0; i < missing.size(); ++i) cache_[missing[i].indices()] = computed[i];
  }
  std::vector<double> out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back(cache_.at(p.indices()));
  return out;
}

bool LossCache::contains(const VerbalizationParams& params) const {
  std::lock_guard lock(mutex_);
  return cache_.count(params.indices()) > 0;
}

std::size_t LossCache::size() const {
  std::lock_guard lock(mutex_);
  return cache_.size();
}

// ---------------------------------------------------------------------------
// Search

namespace {

void finish(SearchResult& result) {
  // Lowest loss; among equals the lexicographically first setting.
  auto best = std::min_element(result.trials.begin(), result.trials.end(),
                               [](const Trial& a, const Trial& b) {
                                 if (a.loss != b.loss) return a.loss < b.loss;
                                 return a.params < b.params;
                               });
  result.best_params = best->params;
  result.best_loss = best->loss;
}

constexpr std::size_t kSpaceSize = 288;

using Indices = std::array<int, 7>;

// Per-parameter log(l/g) from the current trials.
std::array<std::vector<double>, 7> tpe_log_ratios(const std::vector<Trial>& trials, double gamma) {
  std::vector<const Trial*> sorted;
  for (const Trial& t : trials) sorted.push_back(&t);
  std::sort(sorted.begin(), sorted.end(), [](const Trial* a, const Trial* b) {
    if (a->loss != b->loss) return a->loss < b->loss;
    return a->params < b->params;
  });
  const std::size_t n_good = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(gamma * static_cast<double>(sorted.size()))));
  const std::size_t n_bad = sorted.size() - n_good;

  std::array<std::vector<double>, 7> ratios;
  for (std::size_t k = 0; k < 7; ++k) {
    const int values = kParameterCardinalities[k];
    std::vector<double> good(values, 1.0), bad(values, 1.0);  // Laplace smoothing
    for (std::size_t i = 0; i < sorted.size(); ++i) {
      const int v = sorted[i]->params.indices()[k];
      (i < n_good ? good : bad)[v] += 1.0;
    }
    ratios[k].resize(values);
    for (int v = 0; v < values; ++v) {
      const double l = good[v] / static_cast<double>(n_good + values);
      const double g = bad[v] / static_cast<double>(n_bad + values);
      ratios[k][v] = std::log(l / g);
    }
  }
  return ratios;
}

}  // namespace

SearchResult exhaustive_search(const WozDataset& dataset, const LikelihoodScorer& scorer,
                               const SearchOptions& options) {
  const auto space = parameter_space();
  LossCache cache(dataset, scorer, options.parallel);
  const auto losses = cache.losses(space);
  SearchResult result;
  result.trials.reserve(space.size());
  for (std::size_t i = 0; i < space.size(); ++i) result.trials.push_back({space[i], losses[i]});
  finish(result);
  return result;
}

SearchResult tpe_search(const WozDataset& dataset, const LikelihoodScorer& scorer, int n_trials,
                        std::uint64_t seed, const TpeOptions& options) {
  if (n_trials < 1) throw std::invalid_argument("tpe_search needs at least one trial");
  if (!(options.gamma > 0.0 && options.gamma < 1.0)) throw std::invalid_argument("gamma must be in (0, 1)");
  const int startup = std::min(
      n_trials, options.startup_trials > 0 ? options.startup_trials : std::max(10, n_trials / 4));

  LossCache cache(dataset, scorer, options.parallel);
  std::mt19937_64 rng(seed);
  std::set<Indices> seen;
  SearchResult result;

  auto draw_uniform = [&] {
    Indices indices{};
    for (std::size_t k = 0; k < 7; ++k) {
      indices[k] = std::uniform_int_distribution<int>(0, kParameterCardinalities[k] - 1)(rng);
    }
    return indices;
  };

  for (int trial = 0; trial < n_trials; ++trial) {
    const bool modelled = trial >= startup;
    std::array<std::vector<double>, 7> ratios;
    std::array<std::discrete_distribution<int>, 7> samplers;
    if (modelled) {
      ratios = tpe_log_ratios(result.trials, options.gamma);
      for (std::size_t k = 0; k < 7; ++k) {
        std::vector<double> weights;
        for (double r : ratios[k]) weights.push_back(std::exp(r));
        samplers[k] = std::discrete_distribution<int>(weights.begin(), weights.end());
      }
    }
    auto draw = [&] {
      if (!modelled) return draw_uniform();
      Indices indices{};
      for (std::size_t k = 0; k < 7; ++k) indices[k] = samplers[k](rng);
      return indices;
    };

    Indices choice = draw();
    if (seen.size() < kSpaceSize) {
      for (int attempt = 0; seen.count(choice) && attempt < options.max_resample; ++attempt) {
        choice = draw();
      }
      if (seen.count(choice)) {
        // Fall back to the unseen setting the model likes best (first in
        // order while still random).
        double best_score = -std::numeric_limits<double>::infinity();
        for (const auto& candidate : parameter_space()) {
          const Indices idx = candidate.indices();
          if (seen.count(idx)) continue;
          double score = 0.0;
          if (modelled) {
            for (std::size_t k = 0; k < 7; ++k) score += ratios[k][idx[k]];
          }
          if (score > best_score) {
            best_score = score;
            choice = idx;
          }
        }
      }
    }
    seen.insert(choice);
    const auto params = VerbalizationParams::from_indices(choice);
    result.trials.push_back({params, cache.loss(params)});
  }
  finish(result);
  return result;
}

}  // namespace graphtalk
