#include "graphtalk/kernels.hpp"
#include "graphtalk/optimizer.hpp"

#include "support/fixtures.hpp"

#include <doctest.h>
#include <httplib.h>

#include <atomic>
#include <cmath>
#include <random>
#include <set>
#include <thread>

using namespace graphtalk;
using namespace graphtalk::testing;
using nlohmann::json;

namespace {

class ConstantScorer final : public LikelihoodScorer {
 public:
  explicit ConstantScorer(double value) : value_(value) {}
  double log_likelihood(const std::string&, const std::string&) const override {
    ++calls;
    return value_;
  }
  mutable std::atomic<int> calls{0};

 private:
  double value_;
};

class CountingScorer final : public LikelihoodScorer {
 public:
  double log_likelihood(const std::string& r, const std::string& c) const override {
    ++calls;
    return mock_log_likelihood(r, c);
  }
  mutable std::atomic<int> calls{0};
};

class FailingScorer final : public LikelihoodScorer {
 public:
  explicit FailingScorer(std::string bad_response) : bad_(std::move(bad_response)) {}
  double log_likelihood(const std::string& r, const std::string& c) const override {
    if (r == bad_) throw std::runtime_error("scorer unavailable");
    return mock_log_likelihood(r, c);
  }

 private:
  std::string bad_;
};

const char* kOfficeLog =
    "{\"t\": 1697100540000, \"kind\": \"location_label\", \"name\": \"office\"}\n"
    "{\"t\": 1697100541500, \"kind\": \"image\", \"image_ref\": \"a.jpg\"}\n"
    "{\"t\": 1697100541700, \"kind\": \"detection\", \"image_ref\": \"a.jpg\", "
    "\"objects\": [{\"name\": \"laptop\", \"p\": 0.9}]}\n";
const char* kHallwayLog =
    "{\"t\": 1697100600000, \"kind\": \"location_label\", \"name\": \"hallway\"}\n"
    "{\"t\": 1697100601500, \"kind\": \"image\", \"image_ref\": \"b.jpg\"}\n"
    "{\"t\": 1697100601700, \"kind\": \"detection\", \"image_ref\": \"b.jpg\", "
    "\"objects\": [{\"name\": \"a painting\", \"p\": 0.3}]}\n";
const char* kKitchenLog = "{\"t\": 1697100660000, \"kind\": \"location_label\", \"name\": \"kitchen\"}";

WozDataset three_examples() {
  return woz_dataset_from_json(json::array({
      {{"tour_log", kOfficeLog}, {"user", "Where is the laptop?"}, {"wizard", "a laptop in the office"}},
      {{"tour_log", kHallwayLog}, {"user", "Any art?"}, {"wizard", "I may have seen a painting."}},
      {{"tour_log", kKitchenLog}, {"user", "Anything in the kitchen?"},
       {"wizard", "Nothing in the kitchen, sorry."}},
  }));
}

WozDataset crafted() { return load_woz_dataset(fixture_path("woz_crafted.json")); }

}  // namespace

TEST_CASE("mock scorer: tokens and worked examples") {
  CHECK(mock_tokens("Pepper saw a LAPTOP at 08:49.") ==
        std::vector<std::string>{"pepper", "saw", "a", "laptop", "at", "08", "49"});
  CHECK(mock_tokens("").empty());
  CHECK(mock_log_likelihood("", "the hallway") == 0.0);
  CHECK(mock_log_likelihood("...", "the hallway") == 0.0);
  CHECK(mock_log_likelihood("hallway", "the hallway") == doctest::Approx(std::log(2.0 / 4.0)).epsilon(1e-15));
  CHECK(mock_log_likelihood("hallway", "the hallway") == doctest::Approx(-0.6931471805599453));
  // unseen token: count 0, context length 2, V = 3
  CHECK(mock_log_likelihood("kitchen", "the hallway") == doctest::Approx(std::log(1.0 / 5.0)));
  CHECK(mock_log_likelihood("kitchen", "") == doctest::Approx(std::log(1.0)));
}

TEST_CASE("mock scorer: appending copies of the response never lowers the score (property)") {
  std::mt19937_64 rng(3);
  const std::vector<std::string> words{"pepper", "saw", "a", "laptop", "in", "the", "office",
                                       "hallway", "may", "have", "seen", "08", "49", "kitchen"};
  auto pick = [&](int n) {
    std::string out;
    for (int i = 0; i < n; ++i) out += words[rng() % words.size()] + " ";
    return out;
  };
  for (int trial = 0; trial < 500; ++trial) {
    const std::string response = pick(1 + static_cast<int>(rng() % 6));
    const std::string context = pick(static_cast<int>(rng() % 20));
    std::string richer = context;
    const int copies = 1 + static_cast<int>(rng() % 4);
    for (int c = 0; c < copies; ++c) richer += " " + response;
    const double before = mock_log_likelihood(response, context);
    const double after = mock_log_likelihood(response, richer);
    CHECK(before <= 0.0);
    CHECK(after >= before - 1e-12);
  }
}

TEST_CASE("cross_entropy_loss: trivial scorers") {
  const auto dataset = three_examples();
  CHECK(cross_entropy_loss(dataset, ConstantScorer(0.0), {}) == 0.0);
  WozDataset one;
  one.examples.push_back(dataset.examples[0]);
  CHECK(cross_entropy_loss(one, ConstantScorer(-2.0), {}) == 2.0);
  CHECK_THROWS_AS(cross_entropy_loss(WozDataset{}, ConstantScorer(0.0), {}), std::invalid_argument);
}

TEST_CASE("cross_entropy_loss: three-example fixture against hand arithmetic") {
  const auto dataset = three_examples();
  // Contexts under the default parameters:
  //  1 "Pepper entered the office at 08:49. / Pepper saw a laptop in the office at 08:49."
  //    17 tokens, 11 distinct; response a, laptop, in, the, office -> V = 11
  //  2 "Pepper entered the hallway at 08:50. / Pepper may have seen a painting in the hallway at 08:50."
  //    19 tokens, 13 distinct; response adds "i" -> V = 14
  //  3 "Pepper entered the kitchen at 08:51."
  //    7 tokens, 7 distinct; response adds nothing, in, sorry -> V = 10
  const double s1 = 3 * std::log(2.0 / 28) + 2 * std::log(3.0 / 28);
  const double s2 = std::log(1.0 / 33) + 5 * std::log(2.0 / 33);
  const double s3 = 3 * std::log(1.0 / 17) + 2 * std::log(2.0 / 17);
  const double expected = -(s1 + s2 + s3) / 3.0;
  CHECK(std::abs(cross_entropy_loss(dataset, MockScorer{}, {}) - expected) < 1e-9);
  CHECK(verbalize(dataset.examples[2].graph.view(), {}) == "Pepper entered the kitchen at 08:51.");
}

TEST_CASE("cross_entropy_loss: scorer failures carry the example index") {
  const auto dataset = three_examples();
  try {
    cross_entropy_loss(dataset, FailingScorer("I may have seen a painting."), {});
    FAIL("expected LossError");
  } catch (const LossError& e) {
    CHECK(e.example_index() == 1);
  }
  const auto space = parameter_space();
  CHECK_THROWS_AS(kernels::evaluate_losses_parallel(dataset, FailingScorer("Nothing in the kitchen, sorry."), space),
                  LossError);
}

TEST_CASE("loss is non-negative and zero only for a perfect scorer") {
  const auto dataset = crafted();
  for (const auto& params : parameter_space()) {
    CHECK(cross_entropy_loss(dataset, MockScorer{}, params) > 0.0);
  }
}

TEST_CASE("kernels: parallel matches serial bit for bit") {
  const auto dataset = crafted();
  const auto space = parameter_space();
  const auto serial = kernels::evaluate_losses_serial(dataset, MockScorer{}, space);
  const auto parallel = kernels::evaluate_losses_parallel(dataset, MockScorer{}, space);
  REQUIRE(serial.size() == 288);
  CHECK(serial == parallel);
}

TEST_CASE("loss cache: each setting reaches the scorer once") {
  const auto dataset = crafted();
  CountingScorer scorer;
  LossCache cache(dataset, scorer);
  const VerbalizationParams params;
  const double first = cache.loss(params);
  CHECK(scorer.calls == static_cast<int>(dataset.size()));
  CHECK(cache.loss(params) == first);
  CHECK(scorer.calls == static_cast<int>(dataset.size()));
  std::vector<VerbalizationParams> batch{params, VerbalizationParams::from_indices({1, 1, 1, 1, 1, 1, 1}), params};
  cache.losses(batch);
  CHECK(scorer.calls == static_cast<int>(2 * dataset.size()));
  CHECK(cache.size() == 2);
}

TEST_CASE("exhaustive search") {
  SUBCASE("enumerates the whole space") {
    const auto result = exhaustive_search(crafted(), MockScorer{});
    CHECK(result.trials.size() == 288);
    std::set<VerbalizationParams> distinct;
    double lowest = result.trials.front().loss;
    for (const auto& t : result.trials) {
      distinct.insert(t.params);
      lowest = std::min(lowest, t.loss);
    }
    CHECK(distinct.size() == 288);
    CHECK(result.best_loss == lowest);
    CHECK(result.best_params.self_reference == SelfReference::pepper);
    CHECK(result.best_params.include_time);
  }
  SUBCASE("constant scorer returns the first setting") {
    const auto result = exhaustive_search(three_examples(), ConstantScorer(-1.0));
    CHECK(result.best_params == VerbalizationParams::from_indices({0, 0, 0, 0, 0, 0, 0}));
    CHECK(result.best_loss == 1.0);
  }
  SUBCASE("serial and parallel agree") {
    const auto a = exhaustive_search(crafted(), MockScorer{}, {.parallel = false});
    const auto b = exhaustive_search(crafted(), MockScorer{}, {.parallel = true});
    CHECK(a.best_params == b.best_params);
    CHECK(a.best_loss == b.best_loss);
  }
}

TEST_CASE("tpe: reproducible under a fixed seed") {
  const auto dataset = crafted();
  const auto a = tpe_search(dataset, MockScorer{}, 40, 7);
  const auto b = tpe_search(dataset, MockScorer{}, 40, 7);
  REQUIRE(a.trials.size() == 40);
  for (std::size_t i = 0; i < a.trials.size(); ++i) {
    CHECK(a.trials[i].params == b.trials[i].params);
    CHECK(a.trials[i].loss == b.trials[i].loss);
  }
  const auto c = tpe_search(dataset, MockScorer{}, 40, 8);
  bool differs = false;
  for (std::size_t i = 0; i < a.trials.size(); ++i) differs |= !(a.trials[i].params == c.trials[i].params);
  CHECK(differs);
}

TEST_CASE("tpe: full budget covers the space and matches exhaustive") {
  const auto dataset = crafted();
  CountingScorer scorer;
  const auto tpe = tpe_search(dataset, scorer, 288, 1);
  std::set<VerbalizationParams> distinct;
  for (const auto& t : tpe.trials) distinct.insert(t.params);
  CHECK(distinct.size() == 288);
  CHECK(scorer.calls == static_cast<int>(288 * dataset.size()));
  CHECK(tpe.best_loss == exhaustive_search(dataset, MockScorer{}).best_loss);

  // beyond the space size the cache answers
  CountingScorer again;
  tpe_search(dataset, again, 300, 1);
  CHECK(again.calls == static_cast<int>(288 * dataset.size()));
}

TEST_CASE("tpe: 60 trials reach the exhaustive optimum on most seeds") {
  const auto dataset = crafted();
  const double optimum = exhaustive_search(dataset, MockScorer{}).best_loss;
  int hits = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto result = tpe_search(dataset, MockScorer{}, 60, seed);
    CHECK(result.best_loss >= optimum);
    hits += result.best_loss == optimum;
  }
  CHECK(hits >= 18);
}

TEST_CASE("tpe: argument checks and small budgets") {
  const auto dataset = three_examples();
  CHECK_THROWS_AS(tpe_search(dataset, MockScorer{}, 0, 1), std::invalid_argument);
  CHECK_THROWS_AS(tpe_search(dataset, MockScorer{}, 5, 1, {.gamma = 1.0}), std::invalid_argument);
  const auto one = tpe_search(dataset, MockScorer{}, 1, 1);
  CHECK(one.trials.size() == 1);
  CHECK(one.best_loss == one.trials[0].loss);
}

TEST_CASE("search result JSON") {
  const auto result = tpe_search(three_examples(), MockScorer{}, 12, 2);
  const json j = to_json(result);
  CHECK(j["trials"].size() == 12);
  CHECK(j["best_loss"].get<double>() == result.best_loss);
  CHECK(params_from_json(j["best_params"]) == result.best_params);
}

TEST_CASE("WoZ dataset loading") {
  const auto dataset = crafted();
  CHECK(dataset.size() == 5);
  CHECK(dataset.examples[0].context_utterance == "Where did you see the laptop?");
  // the user turn is the last utterance in the example graph
  const auto utterances = dataset.examples[0].graph.view().nodes_chronological(NodeType::utterance);
  REQUIRE(utterances.size() == 1);
  CHECK(utterances[0]->speaker == Speaker::user);
  // movements are attached for the file-backed two-room log
  CHECK(!dataset.examples[2].graph.view().nodes_chronological(NodeType::movement).empty());
  // reproducible graphs
  CHECK(crafted().examples[2].graph == dataset.examples[2].graph);

  CHECK_THROWS_AS(woz_dataset_from_json(json::array()), std::invalid_argument);
  CHECK_THROWS_AS(woz_dataset_from_json(json::object()), std::invalid_argument);
  CHECK_THROWS_AS(woz_dataset_from_json(json::array({{{"tour_log", kKitchenLog}, {"user", "hi"}}})),
                  std::invalid_argument);
  CHECK_THROWS_AS(woz_dataset_from_json(json::array({{{"tour_log", kKitchenLog}, {"user", "hi"}, {"wizard", ""}}})),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      woz_dataset_from_json(json::array({{{"tour_log", "missing.jsonl"}, {"user", "hi"}, {"wizard", "x"}}})),
      std::invalid_argument);
  CHECK_THROWS_AS(load_woz_dataset("/nonexistent/woz.json"), std::runtime_error);
}

TEST_CASE("remote scorer against a local completions endpoint") {
  httplib::Server server;
  std::string last_body;
  std::atomic<bool> fail{false};
  server.Post("/v1/completions", [&](const httplib::Request& req, httplib::Response& res) {
    last_body = req.body;
    if (fail) {
      res.status = 500;
      return;
    }
    // echoed prompt "ctx\n\nyes" split as "ctx", "\n\n", "yes"
    const json reply = {{"choices",
                         {{{"logprobs",
                            {{"text_offset", {0, 3, 5}},
                             {"token_logprobs", {nullptr, -0.5, -1.25}}}}}}}};
    res.set_content(reply.dump(), "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  RemoteScorer scorer({"http://127.0.0.1:" + std::to_string(port), "/v1/completions", "test-model", "key", 5});
  CHECK(scorer.log_likelihood("yes", "ctx") == -1.25);
  const json sent = json::parse(last_body);
  CHECK(sent["prompt"] == "ctx\n\nyes");
  CHECK(sent["echo"] == true);
  CHECK(sent["max_tokens"] == 0);

  fail = true;
  CHECK_THROWS_AS(scorer.log_likelihood("yes", "ctx"), std::runtime_error);
  WozDataset one;
  one.examples.push_back(three_examples().examples[0]);
  CHECK_THROWS_AS(cross_entropy_loss(one, scorer, {}), LossError);

  server.stop();
  thread.join();
}
