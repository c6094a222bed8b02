#include "graphtalk/service.hpp"

#include "graphtalk/graph_json.hpp"
#include "support/fixtures.hpp"
#include "support/schema.hpp"

#include <doctest.h>
#include <httplib.h>

#include <cstdlib>
#include <future>
#include <regex>
#include <thread>

using namespace graphtalk;
using namespace graphtalk::testing;
using nlohmann::json;

namespace {

Clock stepping_clock(Timestamp start) {
  auto now = std::make_shared<std::atomic<Timestamp>>(start);
  return [now] { return now->fetch_add(1000); };
}

struct Running {
  Service service;
  int port = 0;
  httplib::Client client;

  explicit Running(ServiceConfig config = {})
      : service(with_any_port(std::move(config)), stepping_clock(kTourStart + 3600000)),
        port(service.start()),
        client("127.0.0.1", port) {
    client.set_read_timeout(10, 0);
  }

  static ServiceConfig with_any_port(ServiceConfig config) {
    config.port = 0;
    return config;
  }

  json create(const json& body, int expected = 201) {
    auto res = client.Post("/sessions", body.dump(), "application/json");
    REQUIRE(res);
    REQUIRE(res->status == expected);
    return json::parse(res->body);
  }
};

void require_schema(const std::string& body, const std::string& schema) {
  const auto errors = published_schemas().validate(json::parse(body), schema);
  for (const auto& e : errors) MESSAGE(e);
  CHECK(errors.empty());
}

std::string three_rooms_text() { return read_file(fixture_path("three_rooms.jsonl")); }

json canned_config(std::vector<std::string> script) {
  return {{"backend", {{"kind", "canned"}, {"script", std::move(script)}}}};
}

std::size_t count_type(const json& graph, const std::string& type) {
  std::size_t n = 0;
  for (const auto& node : graph["nodes"]) n += node["node_type"] == type;
  return n;
}

// Chat-completions stand-in that holds each request until released.
struct HeldChatServer {
  httplib::Server server;
  std::thread thread;
  int port = 0;
  std::promise<void> arrived;
  std::promise<void> release;
  std::shared_future<void> released = release.get_future().share();

  HeldChatServer() {
    server.Post("/v1/chat/completions", [this](const httplib::Request&, httplib::Response& res) {
      arrived.set_value();
      released.wait();
      res.set_content(json{{"choices", {{{"message", {{"role", "assistant"}, {"content", "Held reply."}}}}}}}.dump(),
                      "application/json");
    });
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~HeldChatServer() {
    server.stop();
    thread.join();
  }
};

}  // namespace

TEST_CASE("healthz") {
  Running api;
  auto res = api.client.Get("/healthz");
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(json::parse(res->body) == "ok");
  require_schema(res->body, "health.schema.json");
  CHECK(res->get_header_value("Content-Type") == "application/json");
}

TEST_CASE("create a session from the fixture log") {
  Running api;
  const TourLog log = parse_tour_log(three_rooms_text());
  const json view = api.create({{"tour_log", three_rooms_text()}});
  require_schema(view.dump(), "session.schema.json");
  CHECK(view["id"] == "s1");
  CHECK(view["locations"].size() == 3);
  CHECK(view["replay"]["events_applied"] == log.events.size());
  CHECK(view["turn_count"] == 0);

  auto res = api.client.Get("/sessions/s1/graph");
  REQUIRE(res);
  CHECK(res->status == 200);
  require_schema(res->body, "graph.schema.json");
  const json graph = json::parse(res->body);
  CHECK(graph["nodes"].size() == view["node_count"]);
  CHECK(graph["edges"].size() == view["edge_count"]);

  // node counts follow the log: one position node per reading, one location per label
  std::size_t positions = 0;
  std::size_t labels = 0;
  std::size_t images = 0;
  for (const auto& event : log.events) {
    positions += std::holds_alternative<PositionReading>(event.payload);
    labels += std::holds_alternative<LocationLabel>(event.payload);
    images += std::holds_alternative<ImageCapture>(event.payload);
  }
  CHECK(count_type(graph, "position") == positions);
  CHECK(count_type(graph, "location") == labels);
  CHECK(count_type(graph, "image") == images);

  // same bytes as building the session directly
  CHECK(res->body == tour_snapshot(log, SessionConfig{}));

  // the event-array form of the log gives the same graph
  json events = json::array();
  for (const auto& event : log.events) events.push_back(to_json(event));
  const json second = api.create({{"tour_log", events}});
  auto res2 = api.client.Get("/sessions/" + second["id"].get<std::string>() + "/graph");
  REQUIRE(res2);
  CHECK(res2->body == res->body);

  auto list = api.client.Get("/sessions");
  REQUIRE(list);
  require_schema(list->body, "session_list.schema.json");
  CHECK(json::parse(list->body)["sessions"] == json{"s1", "s2"});
}

TEST_CASE("unknown sessions are 404") {
  Running api;
  for (const std::string path : {"/sessions/nope", "/sessions/nope/graph", "/sessions/nope/verbalization",
                                 "/sessions/nope/path", "/sessions/nope/transcript"}) {
    auto res = api.client.Get(path);
    REQUIRE(res);
    CHECK(res->status == 404);
    require_schema(res->body, "error.schema.json");
  }
  auto post = api.client.Post("/sessions/nope/utterance", R"({"text":"hi"})", "application/json");
  REQUIRE(post);
  CHECK(post->status == 404);
  auto del = api.client.Delete("/sessions/nope");
  REQUIRE(del);
  CHECK(del->status == 404);
  auto missing = api.client.Get("/no/such/route");
  REQUIRE(missing);
  CHECK(missing->status == 404);
  require_schema(missing->body, "error.schema.json");
}

TEST_CASE("malformed bodies are 422") {
  Running api;
  const std::vector<std::string> bodies = {
      "",
      "{not json",
      "[1, 2]",
      R"({"config": {}})",
      R"({"tour_log": 5})",
      R"({"tour_log": "{\"t\": 1, \"kind\": \"teleport\"}"})",
      R"({"tour_log": "", "config": {"colour": "red"}})",
      R"({"tour_log": "", "config": {"params": {"self_reference": "Robbie"}}})",
      R"({"tour_log": "", "extra": 1})",
  };
  for (const auto& body : bodies) {
    CAPTURE(body);
    auto res = api.client.Post("/sessions", body, "application/json");
    REQUIRE(res);
    CHECK(res->status == 422);
    require_schema(res->body, "error.schema.json");
  }

  api.create({{"tour_log", ""}, {"config", canned_config({"a"})}});
  for (const std::string body : {R"({})", R"({"text": 3})", R"({"text": "   "})", R"({"text": "hi", "x": 1})"}) {
    CAPTURE(body);
    auto res = api.client.Post("/sessions/s1/utterance", body, "application/json");
    REQUIRE(res);
    CHECK(res->status == 422);
    require_schema(res->body, "error.schema.json");
  }
  for (const std::string query : {"?mode=prose", "?include_time=maybe", "?colour=red", "?distance_style=far"}) {
    CAPTURE(query);
    auto res = api.client.Get("/sessions/s1/verbalization" + std::string(query));
    REQUIRE(res);
    CHECK(res->status == 422);
  }
}

TEST_CASE("utterances, transcript and backend failure") {
  Running api;
  api.create({{"tour_log", three_rooms_text()}, {"config", canned_config({"I saw a laptop."})}});
  const std::size_t nodes_before = json::parse(api.client.Get("/sessions/s1/graph")->body)["nodes"].size();

  auto res = api.client.Post("/sessions/s1/utterance", R"({"text":"what did you see"})", "application/json");
  REQUIRE(res);
  REQUIRE(res->status == 200);
  require_schema(res->body, "utterance_reply.schema.json");
  CHECK(json::parse(res->body)["reply"] == "I saw a laptop.");
  CHECK(json::parse(res->body)["turn_count"] == 2);

  // the script has one line: the next turn is a backend failure
  auto failed = api.client.Post("/sessions/s1/utterance", R"({"text":"anything else"})", "application/json");
  REQUIRE(failed);
  CHECK(failed->status == 502);
  require_schema(failed->body, "error.schema.json");
  CHECK(json::parse(failed->body)["error"]["kind"] == "script_exhausted");

  auto transcript = api.client.Get("/sessions/s1/transcript");
  REQUIRE(transcript);
  require_schema(transcript->body, "transcript.schema.json");
  const json turns = json::parse(transcript->body)["turns"];
  REQUIRE(turns.size() == 3);
  CHECK(turns[0]["speaker"] == "user");
  CHECK(turns[1]["text"] == "I saw a laptop.");
  CHECK(turns[2]["text"] == "anything else");

  const json graph = json::parse(api.client.Get("/sessions/s1/graph")->body);
  CHECK(graph["nodes"].size() == nodes_before + 3);
  CHECK(count_type(graph, "utterance") == 3);

  const json view = json::parse(api.client.Get("/sessions/s1")->body);
  require_schema(view.dump(), "session.schema.json");
  CHECK(view["turn_count"] == 3);
  CHECK_FALSE(view["busy"]);
}

TEST_CASE("second utterance while one is in flight is 409") {
  HeldChatServer chat;
  ::setenv("LLM_API_KEY", "test-key", 1);
  Running api;
  const std::string endpoint = "http://127.0.0.1:" + std::to_string(chat.port) + "/v1/chat/completions";
  api.create({{"tour_log", three_rooms_text()},
              {"config", {{"backend", {{"kind", "remote"}, {"endpoint", endpoint}, {"timeout_s", 10}}}}}});

  auto arrived = chat.arrived.get_future();
  std::future<httplib::Result> first = std::async(std::launch::async, [&] {
    httplib::Client c("127.0.0.1", api.port);
    c.set_read_timeout(10, 0);
    return c.Post("/sessions/s1/utterance", R"({"text":"first"})", "application/json");
  });
  arrived.wait();

  auto second = api.client.Post("/sessions/s1/utterance", R"({"text":"second"})", "application/json");
  REQUIRE(second);
  CHECK(second->status == 409);
  require_schema(second->body, "error.schema.json");

  // reads still work while the reply is pending
  auto view = api.client.Get("/sessions/s1");
  REQUIRE(view);
  CHECK(json::parse(view->body)["busy"] == true);
  auto graph = api.client.Get("/sessions/s1/graph");
  REQUIRE(graph);
  CHECK(graph->status == 200);

  chat.release.set_value();
  auto result = first.get();
  REQUIRE(result);
  CHECK(result->status == 200);
  CHECK(json::parse(result->body)["reply"] == "Held reply.");
  CHECK(json::parse(api.client.Get("/sessions/s1/transcript")->body)["turns"].size() == 2);
  ::unsetenv("LLM_API_KEY");
}

TEST_CASE("verbalization preview with overrides") {
  Running api;
  api.create({{"tour_log", three_rooms_text()}});

  auto plain = api.client.Get("/sessions/s1/verbalization");
  REQUIRE(plain);
  REQUIRE(plain->status == 200);
  require_schema(plain->body, "verbalization.schema.json");
  const json verbal = json::parse(plain->body);
  CHECK(verbal["mode"] == "verbal");
  CHECK(std::regex_search(verbal["text"].get<std::string>(), std::regex(R"( at \d\d:\d\d)")));

  auto no_time = api.client.Get("/sessions/s1/verbalization?include_time=false");
  REQUIRE(no_time);
  const json untimed = json::parse(no_time->body);
  CHECK(untimed["params"]["include_time"] == false);
  CHECK_FALSE(std::regex_search(untimed["text"].get<std::string>(), std::regex(R"(\d\d:\d\d)")));

  auto robot = api.client.Get("/sessions/s1/verbalization?self_reference=the%20robot&discourse_markers=1");
  REQUIRE(robot);
  REQUIRE(robot->status == 200);
  CHECK(json::parse(robot->body)["params"]["self_reference"] == "the robot");
  CHECK(json::parse(robot->body)["text"].get<std::string>().find("Pepper") == std::string::npos);

  auto triples = api.client.Get("/sessions/s1/verbalization?mode=triples");
  REQUIRE(triples);
  require_schema(triples->body, "verbalization.schema.json");
  const json t = json::parse(triples->body);
  const json graph = json::parse(api.client.Get("/sessions/s1/graph")->body);
  CHECK(t["mode"] == "triples");
  CHECK(t["lines"].size() == graph["edges"].size());
  for (const auto& line : t["lines"]) CHECK(line.get<std::string>().front() == '(');

  // overrides do not change the session itself
  const json view = json::parse(api.client.Get("/sessions/s1")->body);
  CHECK(view["params"]["include_time"] == true);
}

TEST_CASE("path geometry") {
  Running api;
  api.create({{"tour_log", three_rooms_text()}});
  auto res = api.client.Get("/sessions/s1/path");
  REQUIRE(res);
  REQUIRE(res->status == 200);
  require_schema(res->body, "path.schema.json");
  const json path = json::parse(res->body);
  const json graph = json::parse(api.client.Get("/sessions/s1/graph")->body);
  CHECK(path["raw"].size() == count_type(graph, "position"));
  CHECK(path["movements"].size() == count_type(graph, "movement"));
  CHECK(path["visits"].size() >= 3);
  for (const auto& visit : path["visits"]) {
    CHECK(visit["simplified"].size() <= visit["raw"].size());
    if (!visit["raw"].empty()) {
      CHECK(visit["simplified"].front() == visit["raw"].front());
      CHECK(visit["simplified"].back() == visit["raw"].back());
    }
  }
  for (const auto& m : path["movements"]) CHECK(m["location"].is_number_integer());
}

TEST_CASE("delete") {
  Running api;
  api.create({{"tour_log", ""}});
  auto res = api.client.Delete("/sessions/s1");
  REQUIRE(res);
  CHECK(res->status == 200);
  require_schema(res->body, "deleted.schema.json");
  CHECK(api.client.Get("/sessions/s1")->status == 404);
}

TEST_CASE("sessions answer concurrently") {
  Running api;
  for (int i = 0; i < 4; ++i) api.create({{"tour_log", three_rooms_text()}, {"config", {{"backend", {{"kind", "mock"}}}}}});
  std::vector<std::thread> threads;
  std::atomic<int> ok{0};
  for (int i = 1; i <= 4; ++i) {
    threads.emplace_back([&, i] {
      httplib::Client c("127.0.0.1", api.port);
      for (int turn = 0; turn < 3; ++turn) {
        auto r = c.Post("/sessions/s" + std::to_string(i) + "/utterance", R"({"text":"did you see a laptop"})",
                        "application/json");
        if (r && r->status == 200) ++ok;
      }
    });
  }
  for (auto& t : threads) t.join();
  CHECK(ok == 12);
  for (int i = 1; i <= 4; ++i) {
    const json t = json::parse(api.client.Get("/sessions/s" + std::to_string(i) + "/transcript")->body);
    CHECK(t["turns"].size() == 6);
  }
}

TEST_CASE("service config and PORT") {
  const ServiceConfig config = service_config_from_json(
      {{"host", "0.0.0.0"}, {"port", 9000}, {"session_defaults", {{"mode", "triples"}}}});
  CHECK(config.host == "0.0.0.0");
  CHECK(config.port == 9000);
  CHECK(config.session_defaults.mode == PromptMode::triples);
  CHECK_THROWS_AS(service_config_from_json({{"port", 70000}}), std::invalid_argument);
  CHECK_THROWS_AS(service_config_from_json({{"portt", 1}}), std::invalid_argument);

  ServiceConfig env = config;
  ::setenv("PORT", "8123", 1);
  apply_port_env(env);
  CHECK(env.port == 8123);
  ::setenv("PORT", "eighty", 1);
  CHECK_THROWS_AS(apply_port_env(env), std::invalid_argument);
  ::unsetenv("PORT");
  apply_port_env(env);
  CHECK(env.port == 8123);

  // session defaults flow into new sessions
  ServiceConfig triples;
  triples.session_defaults.mode = PromptMode::triples;
  Running api(triples);
  const json view = api.create({{"tour_log", ""}});
  CHECK(view["mode"] == "triples");
}

TEST_CASE("schema checker rejects bad documents") {
  const auto& schemas = published_schemas();
  CHECK_FALSE(schemas.validate(json{{"reply", 3}}, "utterance_reply.schema.json").empty());
  CHECK_FALSE(schemas.validate(json{{"nodes", json::array()}, {"edges", json::array()}}, "graph.schema.json").empty());
  CHECK_FALSE(schemas.validate("fine", "health.schema.json").empty());
  CHECK(schemas.validate(json{{"deleted", "s1"}}, "deleted.schema.json").empty());
}
