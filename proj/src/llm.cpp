#include "graphtalk/llm.hpp"

#include "graphtalk/builtin_data.hpp"

#include <httplib.h>

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <deque>
#include <regex>
#include <set>
#include <sstream>

namespace graphtalk {

using nlohmann::json;

std::string_view to_string(PromptMode mode) { return mode == PromptMode::verbal ? "verbal" : "triples"; }

PromptMode parse_prompt_mode(std::string_view text) {
  if (text == "verbal") return PromptMode::verbal;
  if (text == "triples") return PromptMode::triples;
  throw std::invalid_argument("unknown mode '" + std::string(text) + "' (verbal|triples)");
}

std::vector<ExamplePair> examples_from_json(const json& array) {
  if (!array.is_array()) throw std::invalid_argument("examples must be a JSON array");
  std::vector<ExamplePair> out;
  for (const json& item : array) {
    if (!item.is_object() || !item.contains("user") || !item.contains("agent") ||
        !item["user"].is_string() || !item["agent"].is_string()) {
      throw std::invalid_argument("example needs string fields 'user' and 'agent'");
    }
    out.push_back({item["user"].get<std::string>(), item["agent"].get<std::string>()});
  }
  return out;
}

const std::vector<ExamplePair>& default_examples() {
  static const std::vector<ExamplePair> examples =
      examples_from_json(json::parse(kBuiltinPromptExamplesJson));
  return examples;
}

// ---------------------------------------------------------------------------
// Prompt

namespace {

std::string speaker_label(Speaker speaker) { return speaker == Speaker::agent ? "Pepper" : "User"; }

}  // namespace

std::string PromptBundle::render() const {
  std::string out = instruction;
  if (!examples.empty()) {
    out += "\n\nExamples:";
    for (const auto& e : examples) out += "\nUser: " + e.user + "\nPepper: " + e.agent;
  }
  if (!state_description.empty()) out += "\n\nObservations:\n" + state_description;
  if (!dialogue_history.empty()) {
    out += "\n\nConversation so far:";
    for (const auto& turn : dialogue_history) out += "\n" + speaker_label(turn.speaker) + ": " + turn.text;
  }
  out += "\n\nUser: " + current_utterance + "\nPepper:";
  return out;
}

std::vector<ChatMessage> PromptBundle::messages() const {
  std::vector<ChatMessage> out;
  std::string system = instruction;
  if (!state_description.empty()) system += "\n\nObservations:\n" + state_description;
  out.push_back({"system", std::move(system)});
  for (const auto& e : examples) {
    out.push_back({"user", e.user});
    out.push_back({"assistant", e.agent});
  }
  for (const auto& turn : dialogue_history) {
    out.push_back({turn.speaker == Speaker::agent ? "assistant" : "user", turn.text});
  }
  out.push_back({"user", current_utterance});
  return out;
}

PromptBundle assemble_prompt(const GraphView& graph, const PromptRequest& request) {
  if (request.instruction.empty()) throw std::invalid_argument("instruction must not be empty");

  struct Line {
    std::string text;
    bool drop_first;
  };
  std::deque<Line> state;
  if (request.mode == PromptMode::verbal) {
    for (auto& s : verbalize_sentences(graph, request.params)) {
      state.push_back({std::move(s.text), s.kind == SentenceKind::sighting});
    }
  } else {
    for (auto& line : triple_lines(graph)) state.push_back({std::move(line), true});
  }
  if (state.empty()) state.push_back({TemplateSet::builtin().get("empty"), false});

  std::deque<HistoryTurn> history;
  for (const Node* node : graph.nodes_chronological(NodeType::utterance)) {
    history.push_back({node->speaker == Speaker::agent ? Speaker::agent : Speaker::user, node->content});
  }
  if (!history.empty() && history.back().speaker == Speaker::user &&
      history.back().text == request.current_utterance) {
    history.pop_back();
  }
  std::deque<ExamplePair> examples(request.examples.begin(), request.examples.end());

  const std::size_t limit = request.budget.max_chars();
  PromptBundle minimal{request.instruction, {}, "", {}, request.current_utterance};
  if (minimal.render().size() > limit) {
    throw PromptBudgetError("prompt budget of " + std::to_string(limit) +
                            " characters cannot hold the instruction and the current utterance");
  }

  auto build = [&] {
    PromptBundle bundle;
    bundle.instruction = request.instruction;
    bundle.examples.assign(examples.begin(), examples.end());
    for (const Line& line : state) {
      if (!bundle.state_description.empty()) bundle.state_description += '\n';
      bundle.state_description += line.text;
    }
    bundle.dialogue_history.assign(history.begin(), history.end());
    bundle.current_utterance = request.current_utterance;
    return bundle;
  };

  // Index of the most recent user turn in history; never dropped.
  auto protected_turn = [&]() -> std::ptrdiff_t {
    for (std::ptrdiff_t i = static_cast<std::ptrdiff_t>(history.size()) - 1; i >= 0; --i) {
      if (history[i].speaker == Speaker::user) return i;
    }
    return -1;
  };

  PromptBundle bundle = build();
  while (bundle.render().size() > limit) {
    auto sighting = std::find_if(state.begin(), state.end(), [](const Line& l) { return l.drop_first; });
    if (sighting != state.end()) {
      state.erase(sighting);
    } else if (history.size() > (protected_turn() >= 0 ? 1u : 0u)) {
      history.erase(history.begin() + (protected_turn() == 0 ? 1 : 0));
    } else if (!examples.empty()) {
      examples.pop_front();
    } else if (!state.empty()) {
      state.pop_front();
    } else {
      throw PromptBudgetError("prompt budget of " + std::to_string(limit) +
                              " characters cannot hold the most recent user turn");
    }
    bundle = build();
  }
  return bundle;
}

// ---------------------------------------------------------------------------
// Backends

std::string_view to_string(BackendErrorKind kind) {
  constexpr std::string_view names[] = {"timeout",     "transport",        "status",
                                        "empty_reply", "script_exhausted", "config"};
  return names[static_cast<int>(kind)];
}

std::string CannedBackend::generate(const PromptBundle&) {
  std::lock_guard lock(mutex_);
  if (next_ >= script_.size()) {
    throw BackendError(BackendErrorKind::script_exhausted, false,
                       "canned script exhausted: turn " + std::to_string(next_ + 1) + " of " +
                           std::to_string(script_.size()));
  }
  std::string reply = script_[next_++];
  if (reply.empty()) throw BackendError(BackendErrorKind::empty_reply, false, "canned reply is empty");
  return reply;
}

std::size_t CannedBackend::calls() const {
  std::lock_guard lock(mutex_);
  return next_;
}

namespace {

std::set<std::string> content_words(std::string_view text) {
  std::set<std::string> words;
  std::string current;
  auto flush = [&] {
    if (current.size() >= 3) words.insert(current);
    current.clear();
  };
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      current += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else {
      flush();
    }
  }
  flush();
  for (const char* stop : {"the", "and", "you", "did", "any", "was", "were", "what", "where", "how"}) {
    words.erase(stop);
  }
  return words;
}

}  // namespace

std::string MockBackend::generate(const PromptBundle& bundle) {
  const auto question = content_words(bundle.current_utterance);
  std::istringstream lines(bundle.state_description);
  std::string best;
  std::size_t best_overlap = 0;
  for (std::string line; std::getline(lines, line);) {
    std::size_t overlap = 0;
    for (const auto& w : content_words(line)) overlap += question.count(w);
    if (overlap > best_overlap) {
      best_overlap = overlap;
      best = line;
    }
  }
  if (best.empty()) return "My observations do not mention that.";
  return "Based on my observations: " + best;
}

std::string_view to_string(BackendKind kind) {
  constexpr std::string_view names[] = {"remote", "canned", "mock"};
  return names[static_cast<int>(kind)];
}

BackendKind parse_backend_kind(std::string_view text) {
  if (text == "remote" || text == "remote_chat") return BackendKind::remote_chat;
  if (text == "canned") return BackendKind::canned;
  if (text == "mock") return BackendKind::mock;
  throw std::invalid_argument("unknown backend '" + std::string(text) + "' (mock|canned|remote)");
}

BackendConfig backend_config_from_json(const json& object) {
  if (!object.is_object()) throw std::invalid_argument("backend config must be a JSON object");
  BackendConfig config;
  for (const auto& [key, value] : object.items()) {
    auto need = [&](bool ok, const char* what) {
      if (!ok) throw std::invalid_argument("backend field '" + key + "' must be " + what);
    };
    if (key == "kind") {
      need(value.is_string(), "a string");
      config.kind = parse_backend_kind(value.get<std::string>());
    } else if (key == "endpoint") {
      need(value.is_string(), "a string");
      config.endpoint = value.get<std::string>();
    } else if (key == "model") {
      need(value.is_string(), "a string");
      config.model_name = value.get<std::string>();
    } else if (key == "timeout_s") {
      need(value.is_number_integer() && value.get<int>() > 0, "a positive integer");
      config.timeout_s = value.get<int>();
    } else if (key == "max_reply_tokens") {
      need(value.is_number_integer() && value.get<int>() > 0, "a positive integer");
      config.max_reply_tokens = value.get<int>();
    } else if (key == "script") {
      need(value.is_array(), "an array of strings");
      config.script.clear();
      for (const json& line : value) {
        need(line.is_string(), "an array of strings");
        config.script.push_back(line.get<std::string>());
      }
    } else {
      throw std::invalid_argument("unknown backend field '" + key + "'");
    }
  }
  return config;
}

json to_json(const BackendConfig& config) {
  json out = {{"kind", to_string(config.kind)},
              {"model", config.model_name},
              {"endpoint", config.endpoint},
              {"timeout_s", config.timeout_s},
              {"max_reply_tokens", config.max_reply_tokens}};
  if (config.kind == BackendKind::canned) out["script"] = config.script;
  return out;
}

RemoteChatBackend::RemoteChatBackend(BackendConfig config) : config_(std::move(config)) {
  static const std::regex url(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(config_.endpoint, m, url)) {
    throw BackendError(BackendErrorKind::config, false, "invalid endpoint URL '" + config_.endpoint + "'");
  }
  origin_ = m[1];
  path_ = m[2].matched ? std::string(m[2]) : "/";
  if (config_.api_key.empty()) {
    if (const char* key = std::getenv("LLM_API_KEY")) config_.api_key = key;
  }
  if (config_.api_key.empty()) {
    throw BackendError(BackendErrorKind::config, false, "remote backend needs LLM_API_KEY");
  }
}

std::string RemoteChatBackend::generate(const PromptBundle& bundle) {
  json messages = json::array();
  for (const auto& m : bundle.messages()) messages.push_back({{"role", m.role}, {"content", m.content}});
  const json body = {{"model", config_.model_name},
                     {"messages", std::move(messages)},
                     {"max_tokens", config_.max_reply_tokens}};

  httplib::Client client(origin_);
  client.set_connection_timeout(config_.timeout_s);
  client.set_read_timeout(config_.timeout_s);
  client.set_write_timeout(config_.timeout_s);
  client.set_bearer_token_auth(config_.api_key);
  auto result = client.Post(path_, body.dump(), "application/json");
  if (!result) {
    const auto error = result.error();
    const bool timed_out = error == httplib::Error::Read || error == httplib::Error::ConnectionTimeout;
    throw BackendError(timed_out ? BackendErrorKind::timeout : BackendErrorKind::transport, true,
                       "chat request failed: " + httplib::to_string(error));
  }
  if (result->status < 200 || result->status >= 300) {
    const bool retry = result->status == 429 || result->status >= 500;
    throw BackendError(BackendErrorKind::status, retry,
                       "chat endpoint returned HTTP " + std::to_string(result->status));
  }
  std::string reply;
  try {
    const json parsed = json::parse(result->body);
    const json& content = parsed.at("choices").at(0).at("message").at("content");
    if (content.is_string()) reply = content.get<std::string>();
  } catch (const json::exception& e) {
    throw BackendError(BackendErrorKind::transport, true, std::string("malformed chat reply: ") + e.what());
  }
  if (reply.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw BackendError(BackendErrorKind::empty_reply, true, "chat endpoint returned an empty reply");
  }
  return reply;
}

std::unique_ptr<ChatBackend> make_backend(const BackendConfig& config) {
  switch (config.kind) {
    case BackendKind::canned:
      return std::make_unique<CannedBackend>(config.script);
    case BackendKind::mock:
      return std::make_unique<MockBackend>();
    case BackendKind::remote_chat:
      return std::make_unique<RemoteChatBackend>(config);
  }
  throw std::logic_error("unhandled backend kind");
}

}  // namespace graphtalk
