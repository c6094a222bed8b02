#pragma once
// HTTP API over dialogue sessions.
//
//   GET    /healthz
//   POST   /sessions                      {"tour_log", "config"?} -> 201 session view
//   GET    /sessions/{id}                 session view
//   DELETE /sessions/{id}
//   POST   /sessions/{id}/utterance       {"text"} -> {"reply", ...}
//   GET    /sessions/{id}/graph           snapshot, same bytes as `graphtalk snapshot`
//   GET    /sessions/{id}/verbalization   ?mode=verbal|triples plus parameter overrides
//   GET    /sessions/{id}/path            raw points, simplified polylines, movements
//   GET    /sessions/{id}/transcript
//
// Errors are {"error": {"code", "message"}} with 404, 409, 422 or 502.

#include "graphtalk/session.hpp"

#include <json.hpp>

#include <map>
#include <memory>
#include <string>
#include <thread>

namespace httplib {
class Server;
}

namespace graphtalk {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  /// Base for every session; the POST body's "config" is layered on top.
  SessionConfig session_defaults;
  std::size_t max_body_bytes = 32 * 1024 * 1024;
  /// Browser clients served from another origin.
  bool allow_cors = true;
};

/// Keys: host, port, session_defaults, max_body_bytes, allow_cors.
ServiceConfig service_config_from_json(const nlohmann::json& object, const ServiceConfig& base = {});
ServiceConfig load_service_config(const std::string& path);
/// Applies the PORT environment variable when it is set.
void apply_port_env(ServiceConfig& config);

/// Session view returned by POST /sessions and GET /sessions/{id}.
nlohmann::json session_view(const Session& session);
/// Body of GET /sessions/{id}/path.
nlohmann::json path_json(const GraphView& graph, const SpatialConfig& spatial);
/// Parameter overrides from query fields; booleans accept true/false/1/0.
VerbalizationParams params_from_query(const std::multimap<std::string, std::string>& query,
                                      const VerbalizationParams& base);

/// Builds a session the way POST /sessions does and serializes its graph.
std::string tour_snapshot(const TourLog& log, const SessionConfig& config);

class Service {
 public:
  explicit Service(ServiceConfig config, Clock clock = system_now);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds config.host:config.port (0 picks a free port) and returns the port.
  int bind();
  /// Serves on the bound socket until stop(); blocks.
  void run();
  /// bind() plus run() on a background thread.
  int start();
  void stop();

  SessionManager& sessions() { return sessions_; }
  const ServiceConfig& config() const { return config_; }

 private:
  void install_routes();

  ServiceConfig config_;
  SessionManager sessions_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
};

}  // namespace graphtalk
