#include "graphtalk/service.hpp"

#include "graphtalk/graph_json.hpp"
#include "graphtalk/ingest.hpp"

#include <httplib.h>

#include <cstdlib>
#include <fstream>
#include <set>

namespace graphtalk {

using nlohmann::json;

ServiceConfig service_config_from_json(const json& object, const ServiceConfig& base) {
  if (!object.is_object()) throw std::invalid_argument("service config must be a JSON object");
  ServiceConfig config = base;
  for (const auto& [key, value] : object.items()) {
    if (key == "host") {
      if (!value.is_string() || value.get<std::string>().empty()) throw std::invalid_argument("host must be a string");
      config.host = value.get<std::string>();
    } else if (key == "port") {
      if (!value.is_number_integer() || value.get<int>() < 0 || value.get<int>() > 65535) {
        throw std::invalid_argument("port must be an integer in [0, 65535]");
      }
      config.port = value.get<int>();
    } else if (key == "session_defaults") {
      config.session_defaults = session_config_from_json(value, config.session_defaults);
    } else if (key == "max_body_bytes") {
      if (!value.is_number_integer() || value.get<long long>() <= 0) {
        throw std::invalid_argument("max_body_bytes must be a positive integer");
      }
      config.max_body_bytes = value.get<std::size_t>();
    } else if (key == "allow_cors") {
      if (!value.is_boolean()) throw std::invalid_argument("allow_cors must be a boolean");
      config.allow_cors = value.get<bool>();
    } else {
      throw std::invalid_argument("unknown service field '" + key + "'");
    }
  }
  return config;
}

ServiceConfig load_service_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open service config " + path);
  try {
    return service_config_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("malformed service config " + path + ": " + e.what());
  }
}

void apply_port_env(ServiceConfig& config) {
  const char* value = std::getenv("PORT");
  if (value == nullptr || *value == '\0') return;
  char* end = nullptr;
  const long port = std::strtol(value, &end, 10);
  if (*end != '\0' || port < 0 || port > 65535) {
    throw std::invalid_argument(std::string("PORT is not a valid port: ") + value);
  }
  config.port = static_cast<int>(port);
}

// ---------------------------------------------------------------------------
// Projections

json session_view(const Session& session) {
  const GraphSnapshot snap = session.snapshot();
  std::size_t turns = 0;
  for (const auto& [id, node] : snap.data().nodes) turns += node.type == NodeType::utterance;
  const ReplayReport& replay = session.replay_report();
  return {{"id", session.id()},
          {"mode", to_string(session.config().mode)},
          {"params", to_json(session.config().params)},
          {"backend", to_string(session.config().backend.kind)},
          {"turn_count", turns},
          {"locations", session.location_names()},
          {"revision", snap.revision()},
          {"node_count", snap.node_count()},
          {"edge_count", snap.edge_count()},
          {"busy", session.busy()},
          {"replay", {{"events_applied", replay.events_applied}, {"deltas_applied", replay.deltas_applied}}}};
}

namespace {

json point_json(const Point2D& p) { return {{"x", p.x}, {"y", p.y}, {"t", p.t}}; }

json points_json(const std::vector<Point2D>& points) {
  json out = json::array();
  for (const Point2D& p : points) out.push_back(point_json(p));
  return out;
}

}  // namespace

json path_json(const GraphView& graph, const SpatialConfig& spatial) {
  json raw = json::array();
  for (const Node* node : graph.nodes_chronological(NodeType::position)) {
    const auto xy = parse_position_content(node->content);
    if (!xy) continue;
    raw.push_back({{"x", xy->first}, {"y", xy->second}, {"t", node->source_time}, {"node", node->id}});
  }

  json visits = json::array();
  for (const Visit& visit : location_visits(graph)) {
    const std::vector<Point2D> simplified =
        visit.points.size() < 2 ? visit.points : rdp_simplify(visit.points, spatial.epsilon_m);
    visits.push_back({{"location", visit.location},
                      {"name", graph.node(visit.location).content},
                      {"raw", points_json(visit.points)},
                      {"simplified", points_json(simplified)}});
  }

  json movements = json::array();
  for (const Node* node : graph.nodes_chronological(NodeType::movement)) {
    const auto movement = parse_movement_content(node->content);
    if (!movement) continue;
    json item = {{"node", node->id},
                 {"kind", movement->kind == MovementKind::forward ? "forward" : "rotate"},
                 {"amount", movement->amount},
                 {"t", node->source_time},
                 {"location", nullptr}};
    for (const Neighbor& n : graph.neighbors(node->id, Direction::outgoing, EdgeLabel::part_of)) {
      item["location"] = n.node->id;
    }
    movements.push_back(std::move(item));
  }
  return {{"revision", graph.revision()},
          {"epsilon_m", spatial.epsilon_m},
          {"raw", std::move(raw)},
          {"visits", std::move(visits)},
          {"movements", std::move(movements)}};
}

VerbalizationParams params_from_query(const std::multimap<std::string, std::string>& query,
                                      const VerbalizationParams& base) {
  static const std::set<std::string> bool_params = {"discourse_markers", "include_rotation",
                                                    "include_low_probability", "include_time",
                                                    "mention_turn_count"};
  json overrides = json::object();
  for (const auto& [key, value] : query) {
    if (key == "mode") continue;
    if (overrides.contains(key)) throw std::invalid_argument("parameter '" + key + "' given twice");
    if (bool_params.count(key)) {
      if (value == "true" || value == "1") overrides[key] = true;
      else if (value == "false" || value == "0") overrides[key] = false;
      else throw std::invalid_argument("parameter '" + key + "' expects true or false, got '" + value + "'");
    } else {
      overrides[key] = value;
    }
  }
  return params_from_json(overrides, base);
}

std::string tour_snapshot(const TourLog& log, const SessionConfig& config) {
  Session session("snapshot", log, config, std::make_unique<MockBackend>());
  return serialize_snapshot(session.snapshot());
}

// ---------------------------------------------------------------------------
// Server

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message,
                json extra = json::object()) {
  json error = {{"code", code}, {"message", message}};
  for (auto& [k, v] : extra.items()) error[k] = v;
  send_json(res, status, {{"error", std::move(error)}});
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) throw std::invalid_argument("request body is empty");
  try {
    json body = json::parse(req.body);
    if (!body.is_object()) throw std::invalid_argument("request body must be a JSON object");
    return body;
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("request body is not JSON: ") + e.what());
  }
}

TourLog tour_log_from_body(const json& value) {
  if (value.is_string()) return parse_tour_log(value.get<std::string>());
  if (value.is_array()) {
    std::string text;
    for (const json& event : value) text += event.dump() + "\n";
    return parse_tour_log(text);
  }
  throw std::invalid_argument("tour_log must be JSONL text or an array of events");
}

}  // namespace

Service::Service(ServiceConfig config, Clock clock)
    : config_(std::move(config)), sessions_(std::move(clock)), server_(std::make_unique<httplib::Server>()) {
  install_routes();
}

Service::~Service() { stop(); }

void Service::install_routes() {
  httplib::Server& server = *server_;
  server.set_payload_max_length(config_.max_body_bytes);

  if (config_.allow_cors) {
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                {"Access-Control-Allow-Headers", "Content-Type"},
                                {"Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS"}});
    server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  }

  // Maps exceptions from any handler onto the error contract.
  server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const GenerationInFlight& e) {
      send_error(res, 409, "generation_in_flight", e.what());
    } catch (const BackendError& e) {
      send_error(res, 502, "backend_error", e.what(),
                 {{"kind", to_string(e.kind())}, {"retry_allowed", e.retry_allowed()}});
    } catch (const TourLogError& e) {
      send_error(res, 422, "invalid_tour_log", e.what());
    } catch (const ReplayError& e) {
      send_error(res, 422, "replay_failed", e.what(), {{"event_index", e.event_index()}});
    } catch (const PromptBudgetError& e) {
      send_error(res, 422, "prompt_budget", e.what());
    } catch (const std::invalid_argument& e) {
      send_error(res, 422, "invalid_request", e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, "internal", e.what());
    } catch (...) {
      send_error(res, 500, "internal", "unknown error");
    }
  });

  server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (!res.body.empty()) return;
    if (res.status == 404) send_error(res, 404, "not_found", "no such endpoint");
    else if (res.status == 413) send_error(res, 413, "payload_too_large", "request body too large");
    else if (res.status >= 400) send_error(res, res.status, "http_error", "request failed");
  });

  auto with_session = [this](auto handler) {
    return [this, handler](const httplib::Request& req, httplib::Response& res) {
      const std::string id = req.path_params.at("id");
      std::shared_ptr<Session> session = sessions_.find(id);
      if (!session) {
        send_error(res, 404, "unknown_session", "no session '" + id + "'");
        return;
      }
      handler(*session, req, res);
    };
  };

  server.Get("/healthz", [](const httplib::Request&, httplib::Response& res) { send_json(res, 200, "ok"); });

  server.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
    const json body = parse_body(req);
    for (const auto& [key, value] : body.items()) {
      if (key != "tour_log" && key != "config") throw std::invalid_argument("unknown field '" + key + "'");
    }
    if (!body.contains("tour_log")) throw std::invalid_argument("missing field 'tour_log'");
    const TourLog log = tour_log_from_body(body["tour_log"]);
    SessionConfig config = config_.session_defaults;
    if (body.contains("config")) config = session_config_from_json(body["config"], config);
    std::shared_ptr<Session> session;
    try {
      session = sessions_.create(log, config);
    } catch (const BackendError& e) {
      // misconfigured backend, e.g. a remote backend without a key
      throw std::invalid_argument(e.what());
    }
    res.set_header("Location", "/sessions/" + session->id());
    send_json(res, 201, session_view(*session));
  });

  server.Get("/sessions", [this](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, {{"sessions", sessions_.ids()}});
  });

  server.Get("/sessions/:id", with_session([](Session& s, const httplib::Request&, httplib::Response& res) {
               send_json(res, 200, session_view(s));
             }));

  server.Delete("/sessions/:id", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.path_params.at("id");
    if (!sessions_.remove(id)) {
      send_error(res, 404, "unknown_session", "no session '" + id + "'");
      return;
    }
    send_json(res, 200, {{"deleted", id}});
  });

  server.Post("/sessions/:id/utterance",
              with_session([](Session& s, const httplib::Request& req, httplib::Response& res) {
                const json body = parse_body(req);
                for (const auto& [key, value] : body.items()) {
                  if (key != "text") throw std::invalid_argument("unknown field '" + key + "'");
                }
                if (!body.contains("text") || !body["text"].is_string()) {
                  throw std::invalid_argument("field 'text' must be a string");
                }
                const std::string reply = s.handle_user_utterance(body["text"].get<std::string>());
                const GraphSnapshot snap = s.snapshot();
                send_json(res, 200,
                          {{"reply", reply}, {"turn_count", s.transcript().size()}, {"revision", snap.revision()}});
              }));

  server.Get("/sessions/:id/graph", with_session([](Session& s, const httplib::Request&, httplib::Response& res) {
               res.status = 200;
               res.set_content(serialize_snapshot(s.snapshot()), "application/json");
             }));

  server.Get("/sessions/:id/verbalization",
             with_session([](Session& s, const httplib::Request& req, httplib::Response& res) {
               PromptMode mode = s.config().mode;
               if (req.has_param("mode")) mode = parse_prompt_mode(req.get_param_value("mode"));
               const VerbalizationParams params = params_from_query(req.params, s.config().params);
               const GraphSnapshot snap = s.snapshot();
               const std::string text = mode == PromptMode::verbal ? verbalize(snap.view(), params)
                                                                   : serialize_triples(snap.view());
               json lines = json::array();
               std::size_t start = 0;
               while (start < text.size()) {
                 std::size_t end = text.find('\n', start);
                 if (end == std::string::npos) end = text.size();
                 lines.push_back(text.substr(start, end - start));
                 start = end + 1;
               }
               send_json(res, 200,
                         {{"mode", to_string(mode)},
                          {"params", to_json(params)},
                          {"revision", snap.revision()},
                          {"text", text},
                          {"lines", std::move(lines)}});
             }));

  server.Get("/sessions/:id/path", with_session([](Session& s, const httplib::Request&, httplib::Response& res) {
               send_json(res, 200, path_json(s.snapshot().view(), s.config().spatial));
             }));

  server.Get("/sessions/:id/transcript",
             with_session([](Session& s, const httplib::Request&, httplib::Response& res) {
               send_json(res, 200, s.transcript_json());
             }));
}

int Service::bind() {
  if (config_.port == 0) {
    const int port = server_->bind_to_any_port(config_.host);
    if (port < 0) throw std::runtime_error("cannot bind " + config_.host);
    return port;
  }
  if (!server_->bind_to_port(config_.host, config_.port)) {
    throw std::runtime_error("cannot bind " + config_.host + ":" + std::to_string(config_.port));
  }
  return config_.port;
}

void Service::run() { server_->listen_after_bind(); }

int Service::start() {
  const int port = bind();
  thread_ = std::thread([this] { run(); });
  server_->wait_until_ready();
  return port;
}

void Service::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace graphtalk
