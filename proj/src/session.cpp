#include "graphtalk/session.hpp"

#include <stdexcept>

namespace graphtalk {

using nlohmann::json;

SessionConfig session_config_from_json(const json& object, const SessionConfig& base) {
  if (!object.is_object()) throw std::invalid_argument("session config must be a JSON object");
  SessionConfig config = base;
  for (const auto& [key, value] : object.items()) {
    if (key == "params") {
      config.params = params_from_json(value, config.params);
    } else if (key == "mode") {
      if (!value.is_string()) throw std::invalid_argument("mode must be a string");
      config.mode = parse_prompt_mode(value.get<std::string>());
    } else if (key == "backend") {
      config.backend = backend_config_from_json(value);
    } else if (key == "spatial") {
      if (!value.is_object()) throw std::invalid_argument("spatial must be an object");
      for (const auto& [k, v] : value.items()) {
        if (!v.is_number() || v.get<double>() <= 0.0) {
          throw std::invalid_argument("spatial." + k + " must be a positive number");
        }
        if (k == "epsilon_m") config.spatial.epsilon_m = v.get<double>();
        else if (k == "min_rotation_deg") config.spatial.min_rotation_deg = v.get<double>();
        else throw std::invalid_argument("unknown field spatial." + k);
      }
    } else if (key == "budget") {
      if (!value.is_object()) throw std::invalid_argument("budget must be an object");
      for (const auto& [k, v] : value.items()) {
        if (k == "max_tokens" && v.is_number_integer() && v.get<long long>() > 0) config.budget.max_tokens = v.get<std::size_t>();
        else if (k == "chars_per_token" && v.is_number() && v.get<double>() > 0) config.budget.chars_per_token = v.get<double>();
        else throw std::invalid_argument("invalid field budget." + k);
      }
    } else if (key == "instruction") {
      if (!value.is_string() || value.get<std::string>().empty()) {
        throw std::invalid_argument("instruction must be a non-empty string");
      }
      config.instruction = value.get<std::string>();
    } else if (key == "examples") {
      config.examples = examples_from_json(value);
    } else if (key == "max_depth") {
      if (!value.is_number_integer() || value.get<int>() < 2) {
        throw std::invalid_argument("max_depth must be an integer >= 2");
      }
      config.max_depth = value.get<int>();
    } else {
      throw std::invalid_argument("unknown session field '" + key + "'");
    }
  }
  return config;
}

TriggerRule response_rule(ChatBackend& backend, std::function<PromptRequest()> request_base,
                          Clock clock) {
  auto user_node = [](const GraphView& graph, const AppliedDelta& applied) -> const Node* {
    const Node* found = nullptr;
    for (NodeId id : applied.node_ids) {
      const Node& node = graph.node(id);
      if (node.type == NodeType::utterance && node.speaker == Speaker::user) found = &node;
    }
    return found;
  };
  TriggerRule rule;
  rule.name = "respond";
  rule.match = [user_node](const GraphView& graph, const AppliedDelta& applied) {
    return user_node(graph, applied) != nullptr;
  };
  rule.action = [&backend, request_base = std::move(request_base), clock = std::move(clock),
                 user_node](const GraphView& graph, const AppliedDelta& applied) -> std::optional<GraphDelta> {
    const Node* question = user_node(graph, applied);
    PromptRequest request = request_base();
    request.current_utterance = question->content;
    const std::string reply = backend.generate(assemble_prompt(graph, request));
    GraphDelta delta;
    delta.origin = "respond";
    delta.triggers = false;
    NodeRef answer = delta.add_node({NodeType::utterance, reply, Speaker::agent, 1.0,
                                     std::max(clock(), question->source_time)});
    delta.add_edge(answer, NodeRef::existing(question->id), EdgeLabel::responds_to);
    return delta;
  };
  return rule;
}

namespace {

class CountingBackend final : public ChatBackend {
 public:
  CountingBackend(ChatBackend& inner, std::atomic<std::size_t>& calls) : inner_(inner), calls_(calls) {}
  std::string generate(const PromptBundle& bundle) override {
    ++calls_;
    return inner_.generate(bundle);
  }
  std::string name() const override { return inner_.name(); }

 private:
  ChatBackend& inner_;
  std::atomic<std::size_t>& calls_;
};

// Clears the busy flag on every exit path.
struct BusyGuard {
  std::atomic<bool>& flag;
  explicit BusyGuard(std::atomic<bool>& f) : flag(f) {
    bool expected = false;
    if (!flag.compare_exchange_strong(expected, true)) throw GenerationInFlight();
  }
  ~BusyGuard() { flag.store(false); }
};

}  // namespace

Session::Session(std::string id, const TourLog& log, SessionConfig config,
                 std::unique_ptr<ChatBackend> backend, Clock clock)
    : id_(std::move(id)), config_(std::move(config)), backend_(std::move(backend)), graph_(clock) {
  if (!backend_) throw std::invalid_argument("session needs a backend");
  replay_report_ = replay(graph_, log, {movement_rule(config_.spatial)}, {.max_depth = config_.max_depth});
  GraphDelta rest = attach_movements(graph_.view(), config_.spatial);
  if (!rest.empty()) {
    const Timestamp end = log.events.empty() ? clock() : log.events.back().t;
    graph_.set_clock([end] { return end; });
    graph_.apply(rest);
    graph_.set_clock(clock);
  }

  counting_backend_ = std::make_unique<CountingBackend>(*backend_, backend_calls_);
  TriggerRule respond = response_rule(
      *counting_backend_,
      [this] {
        PromptRequest request;
        request.params = config_.params;
        request.mode = config_.mode;
        request.instruction = config_.instruction;
        request.examples = config_.examples;
        request.budget = config_.budget;
        return request;
      },
      clock);
  rules_ = {movement_rule(config_.spatial), std::move(respond)};
}

std::string Session::handle_user_utterance(const std::string& text) {
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw std::invalid_argument("utterance text must not be empty");
  }
  BusyGuard guard(busy_);
  GraphDelta delta;
  delta.origin = "user";
  delta.add_node({NodeType::utterance, text, Speaker::user, 1.0, graph_.clock()()});
  CascadeReport report = graph_.apply_with_cascade(delta, rules_, config_.max_depth);
  {
    std::lock_guard lock(report_mutex_);
    last_cascade_ = report;
  }
  for (const AppliedDelta& applied : report.applied) {
    if (applied.delta.origin != "respond") continue;
    return applied.delta.added_nodes.front().content;
  }
  throw std::runtime_error(report.aborted ? "cascade aborted: " + report.abort_reason
                                          : "no reply was generated");
}

std::optional<CascadeReport> Session::last_cascade() const {
  std::lock_guard lock(report_mutex_);
  return last_cascade_;
}

std::vector<TranscriptEntry> Session::transcript() const {
  const GraphSnapshot snap = snapshot();
  std::vector<TranscriptEntry> out;
  for (const Node* node : snap.view().nodes_chronological(NodeType::utterance)) {
    out.push_back({node->speaker == Speaker::agent ? Speaker::agent : Speaker::user, node->content,
                   node->source_time, node->id});
  }
  return out;
}

json Session::transcript_json() const {
  json turns = json::array();
  for (const auto& entry : transcript()) {
    turns.push_back({{"speaker", to_string(entry.speaker)},
                     {"text", entry.text},
                     {"t", entry.t},
                     {"node", entry.node}});
  }
  return {{"session", id_}, {"turns", std::move(turns)}};
}

std::string Session::preview(PromptMode mode, const VerbalizationParams& params) const {
  const GraphSnapshot snap = snapshot();
  return mode == PromptMode::verbal ? verbalize(snap.view(), params) : serialize_triples(snap.view());
}

std::vector<std::string> Session::location_names() const {
  const GraphSnapshot snap = snapshot();
  std::vector<std::string> names;
  for (const Node* node : snap.view().nodes_chronological(NodeType::location)) names.push_back(node->content);
  return names;
}

// ---------------------------------------------------------------------------

std::shared_ptr<Session> SessionManager::create(const TourLog& log, const SessionConfig& config) {
  std::string id;
  {
    std::unique_lock lock(mutex_);
    id = "s" + std::to_string(next_++);
  }
  auto session = std::make_shared<Session>(id, log, config, make_backend(config.backend), clock_);
  std::unique_lock lock(mutex_);
  sessions_[id] = session;
  return session;
}

std::shared_ptr<Session> SessionManager::find(const std::string& id) const {
  std::shared_lock lock(mutex_);
  auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

bool SessionManager::remove(const std::string& id) {
  std::unique_lock lock(mutex_);
  return sessions_.erase(id) > 0;
}

std::vector<std::string> SessionManager::ids() const {
  std::shared_lock lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [id, session] : sessions_) out.push_back(id);
  return out;
}

}  // namespace graphtalk
