#pragma once
// Prompt assembly and chat backends for grounded replies.

#include "graphtalk/graph.hpp"
#include "graphtalk/verbalizer.hpp"

#include <json.hpp>

#include <cstddef>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace graphtalk {

enum class PromptMode { verbal, triples };
std::string_view to_string(PromptMode mode);
PromptMode parse_prompt_mode(std::string_view text);

struct ExamplePair {
  std::string user;
  std::string agent;
  bool operator==(const ExamplePair&) const = default;
};

struct HistoryTurn {
  Speaker speaker = Speaker::user;
  std::string text;
  bool operator==(const HistoryTurn&) const = default;
};

struct ChatMessage {
  std::string role;  // system, user, assistant
  std::string content;
};

inline constexpr std::string_view kDefaultInstruction =
    "You are Pepper, a robot that explored an office floor. Answer the user's questions using "
    "only the observations below. If the observations do not contain the answer, say so.";

/// Three wizard-style question/answer pairs compiled in from data/prompt_examples.json.
const std::vector<ExamplePair>& default_examples();
std::vector<ExamplePair> examples_from_json(const nlohmann::json& array);

struct PromptBundle {
  std::string instruction;
  std::vector<ExamplePair> examples;
  /// One observation per line.
  std::string state_description;
  std::vector<HistoryTurn> dialogue_history;
  std::string current_utterance;

  /// Plain-text prompt; its length is what the budget limits.
  std::string render() const;
  /// The same content as chat messages: system (instruction + observations),
  /// example pairs, history, then the current user turn.
  std::vector<ChatMessage> messages() const;
};

struct PromptBudget {
  std::size_t max_tokens = 3000;
  double chars_per_token = 4.0;
  std::size_t max_chars() const { return static_cast<std::size_t>(max_tokens * chars_per_token); }
};

class PromptBudgetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PromptRequest {
  VerbalizationParams params;
  PromptMode mode = PromptMode::verbal;
  std::string instruction = std::string(kDefaultInstruction);
  std::vector<ExamplePair> examples = default_examples();
  std::string current_utterance;
  PromptBudget budget;
};

/// Observations come from the verbalizer or the triples serializer; history
/// from utterance nodes in time order (a trailing user node equal to the
/// current utterance is left out). Over budget, drops in this order, oldest
/// first: sighting sentences or triple lines, history turns except the last
/// user turn, examples, remaining observation lines.
PromptBundle assemble_prompt(const GraphView& graph, const PromptRequest& request);

// ---------------------------------------------------------------------------

enum class BackendErrorKind { timeout, transport, status, empty_reply, script_exhausted, config };
std::string_view to_string(BackendErrorKind kind);

class BackendError : public std::runtime_error {
 public:
  BackendError(BackendErrorKind kind, bool retry_allowed, const std::string& message)
      : std::runtime_error(message), kind_(kind), retry_allowed_(retry_allowed) {}
  BackendErrorKind kind() const { return kind_; }
  bool retry_allowed() const { return retry_allowed_; }

 private:
  BackendErrorKind kind_;
  bool retry_allowed_;
};

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual std::string generate(const PromptBundle& bundle) = 0;
  virtual std::string name() const = 0;
};

/// Replies from a fixed script, one per call.
class CannedBackend final : public ChatBackend {
 public:
  explicit CannedBackend(std::vector<std::string> script) : script_(std::move(script)) {}
  std::string generate(const PromptBundle& bundle) override;
  std::string name() const override { return "canned"; }
  std::size_t calls() const;

 private:
  std::vector<std::string> script_;
  mutable std::mutex mutex_;
  std::size_t next_ = 0;
};

/// Deterministic offline stand-in: echoes the observation line that shares
/// the most words with the question.
class MockBackend final : public ChatBackend {
 public:
  std::string generate(const PromptBundle& bundle) override;
  std::string name() const override { return "mock"; }
};

enum class BackendKind { remote_chat, canned, mock };
std::string_view to_string(BackendKind kind);
BackendKind parse_backend_kind(std::string_view text);

struct BackendConfig {
  BackendKind kind = BackendKind::mock;
  std::string endpoint = "https://api.openai.com/v1/chat/completions";
  std::string model_name = "gpt-4";
  int timeout_s = 60;
  int max_reply_tokens = 256;
  std::vector<std::string> script;
  /// Empty: read LLM_API_KEY when the remote backend is built.
  std::string api_key;
};

/// Keys: kind, endpoint, model, timeout_s, max_reply_tokens, script.
BackendConfig backend_config_from_json(const nlohmann::json& object);
nlohmann::json to_json(const BackendConfig& config);

/// POSTs {model, messages, max_tokens} to a chat-completions endpoint.
class RemoteChatBackend final : public ChatBackend {
 public:
  explicit RemoteChatBackend(BackendConfig config);
  std::string generate(const PromptBundle& bundle) override;
  std::string name() const override { return "remote"; }

 private:
  BackendConfig config_;
  std::string origin_;
  std::string path_;
};

std::unique_ptr<ChatBackend> make_backend(const BackendConfig& config);

}  // namespace graphtalk
