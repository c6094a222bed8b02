#pragma once
// Dialogue sessions: a replayed tour graph, a chat backend, and the trigger
// rule that answers each user utterance.

#include "graphtalk/graph.hpp"
#include "graphtalk/ingest.hpp"
#include "graphtalk/llm.hpp"
#include "graphtalk/spatial.hpp"
#include "graphtalk/tour_log.hpp"
#include "graphtalk/verbalizer.hpp"

#include <json.hpp>

#include <atomic>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

namespace graphtalk {

struct SessionConfig {
  VerbalizationParams params;
  PromptMode mode = PromptMode::verbal;
  BackendConfig backend;
  SpatialConfig spatial;
  PromptBudget budget;
  std::string instruction = std::string(kDefaultInstruction);
  std::vector<ExamplePair> examples = default_examples();
  int max_depth = 8;
};

/// Keys: params, mode, backend, spatial {epsilon_m, min_rotation_deg},
/// budget {max_tokens, chars_per_token}, instruction, examples, max_depth.
SessionConfig session_config_from_json(const nlohmann::json& object, const SessionConfig& base = {});

struct TranscriptEntry {
  Speaker speaker = Speaker::user;
  std::string text;
  Timestamp t = 0;
  NodeId node = 0;
};

/// Another utterance of the same session is still being answered.
class GenerationInFlight : public std::runtime_error {
 public:
  GenerationInFlight() : std::runtime_error("a reply is already being generated for this session") {}
};

/// Answers deltas that add a user utterance. The reply delta (agent node plus
/// responds_to edge) is marked non-triggering.
TriggerRule response_rule(ChatBackend& backend, std::function<PromptRequest()> request_base,
                          Clock clock = system_now);

class Session {
 public:
  /// Replays `log` with movement attachment, then switches to `clock`.
  Session(std::string id, const TourLog& log, SessionConfig config,
          std::unique_ptr<ChatBackend> backend, Clock clock = system_now);
  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  const std::string& id() const { return id_; }
  const SessionConfig& config() const { return config_; }
  const ReplayReport& replay_report() const { return replay_report_; }

  /// Adds the user node, runs the cascade (which calls the backend) and
  /// returns the reply. On backend failure the user node stays, no agent node
  /// is written and the BackendError propagates.
  std::string handle_user_utterance(const std::string& text);

  bool busy() const { return busy_.load(); }
  std::size_t backend_calls() const { return backend_calls_.load(); }
  std::optional<CascadeReport> last_cascade() const;

  GraphSnapshot snapshot() const { return graph_.snapshot(); }
  /// Utterance nodes in time order; always consistent with the graph.
  std::vector<TranscriptEntry> transcript() const;
  nlohmann::json transcript_json() const;

  std::string preview(PromptMode mode, const VerbalizationParams& params) const;
  std::vector<std::string> location_names() const;

 private:
  std::string id_;
  SessionConfig config_;
  std::unique_ptr<ChatBackend> backend_;
  std::unique_ptr<ChatBackend> counting_backend_;
  DialogueStateGraph graph_;
  ReplayReport replay_report_;
  std::vector<TriggerRule> rules_;
  std::atomic<bool> busy_{false};
  std::atomic<std::size_t> backend_calls_{0};
  mutable std::mutex report_mutex_;
  std::optional<CascadeReport> last_cascade_;
};

class SessionManager {
 public:
  explicit SessionManager(Clock clock = system_now) : clock_(std::move(clock)) {}

  std::shared_ptr<Session> create(const TourLog& log, const SessionConfig& config);
  /// nullptr when unknown.
  std::shared_ptr<Session> find(const std::string& id) const;
  bool remove(const std::string& id);
  std::vector<std::string> ids() const;

 private:
  Clock clock_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t next_ = 1;
};

}  // namespace graphtalk
