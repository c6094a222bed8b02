// Command-line front end: verbalize, snapshot, optimize, chat, eval,
// generate-tour and serve.

#include "graphtalk/eval.hpp"
#include "graphtalk/graph_json.hpp"
#include "graphtalk/ingest.hpp"
#include "graphtalk/llm.hpp"
#include "graphtalk/optimizer.hpp"
#include "graphtalk/service.hpp"
#include "graphtalk/session.hpp"
#include "graphtalk/tour_generator.hpp"
#include "graphtalk/tour_log.hpp"
#include "graphtalk/verbalizer.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include <pthread.h>
#include <unistd.h>

using namespace graphtalk;
using nlohmann::json;

namespace {

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("malformed JSON in " + path + ": " + e.what());
  }
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

bool is_tour_log_path(const std::string& path) {
  return path.size() >= 6 && path.compare(path.size() - 6, 6, ".jsonl") == 0;
}

SessionConfig load_session_config(const std::string& path) {
  return path.empty() ? SessionConfig{} : session_config_from_json(read_json_file(path));
}

// A snapshot file, or a tour log replayed the way sessions do it.
GraphSnapshot load_graph(const std::string& path, const SessionConfig& config) {
  if (is_tour_log_path(path)) {
    Session session("cli", load_tour_log_file(path), config, std::make_unique<MockBackend>());
    return session.snapshot();
  }
  DialogueStateGraph graph(load_snapshot_file(path));
  return graph.snapshot();
}

struct Options {
  std::string config;

  std::string graph;
  std::string params;
  bool triples = false;
  std::string out;

  std::string tour;

  std::string woz;
  std::string scorer = "mock";
  int trials = 60;
  std::uint64_t seed = 1;
  bool exhaustive = false;
  bool serial = false;
  std::string scorer_url = "https://api.openai.com";
  std::string scorer_model = "davinci-002";

  std::string mode;
  std::string backend;
  std::string script;
  std::string endpoint;
  std::string model;
  std::string transcript_out;

  std::string transcript;
  std::string lexicon = "negation";
  std::string pairs;

  TourGeneratorConfig tour_config;

  int port = -1;
  std::string host;
};

int run_verbalize(const Options& o) {
  const SessionConfig config = load_session_config(o.config);
  const GraphSnapshot graph = load_graph(o.graph, config);
  const VerbalizationParams params = o.params.empty() ? config.params : load_params_file(o.params);
  write_output(o.out, o.triples ? serialize_triples(graph.view()) : verbalize(graph.view(), params));
  return 0;
}

int run_snapshot(const Options& o) {
  const SessionConfig config = load_session_config(o.config);
  write_output(o.out, tour_snapshot(load_tour_log_file(o.tour), config));
  return 0;
}

int run_optimize(const Options& o) {
  const WozDataset dataset = load_woz_dataset(o.woz);
  std::unique_ptr<LikelihoodScorer> scorer;
  if (o.scorer == "mock") {
    scorer = std::make_unique<MockScorer>();
  } else if (o.scorer == "remote") {
    RemoteScorerConfig config;
    config.base_url = o.scorer_url;
    config.model = o.scorer_model;
    scorer = std::make_unique<RemoteScorer>(config);
  } else {
    throw std::invalid_argument("unknown scorer '" + o.scorer + "'");
  }
  SearchResult result;
  if (o.exhaustive) {
    result = exhaustive_search(dataset, *scorer, {.parallel = !o.serial});
  } else {
    TpeOptions options;
    options.parallel = !o.serial;
    result = tpe_search(dataset, *scorer, o.trials, o.seed, options);
  }
  write_output(o.out, to_json(result).dump(2) + "\n");
  return 0;
}

int run_chat(const Options& o) {
  SessionConfig config = load_session_config(o.config);
  if (!o.params.empty()) config.params = load_params_file(o.params);
  if (!o.mode.empty()) config.mode = parse_prompt_mode(o.mode);
  if (!o.backend.empty()) config.backend.kind = parse_backend_kind(o.backend);
  if (!o.endpoint.empty()) config.backend.endpoint = o.endpoint;
  if (!o.model.empty()) config.backend.model_name = o.model;
  if (!o.script.empty()) {
    const json script = read_json_file(o.script);
    if (!script.is_array()) throw std::invalid_argument("canned script must be a JSON array of strings");
    config.backend.script = script.get<std::vector<std::string>>();
  }

  const TourLog log = o.tour.empty() ? TourLog{} : load_tour_log_file(o.tour);
  Session session("chat", log, config, make_backend(config.backend));
  const bool interactive = ::isatty(0);
  if (interactive) {
    std::cerr << "Tour loaded: " << session.location_names().size() << " locations. Type /quit to leave.\n";
  }
  std::string line;
  while (true) {
    if (interactive) std::cerr << "You: " << std::flush;
    if (!std::getline(std::cin, line) || line == "/quit") break;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      std::cout << "Pepper: " << session.handle_user_utterance(line) << "\n" << std::flush;
    } catch (const BackendError& e) {
      std::cerr << "backend error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    }
  }
  if (!o.transcript_out.empty()) write_output(o.transcript_out, session.transcript_json().dump(2) + "\n");
  return 0;
}

int run_lexicon(const Options& o) {
  const auto count = count_lexicon(load_transcript_file(o.transcript), lexicon_by_name(o.lexicon));
  json out = to_json(count);
  out["set"] = o.lexicon;
  std::cout << out.dump(2) << "\n";
  return 0;
}

int run_wilcoxon(const Options& o) {
  const WilcoxonResult result = wilcoxon_signed_rank(parse_pairs_csv(read_text_file(o.pairs)));
  std::cout << to_json(result).dump(2) << "\n";
  return result.defined ? 0 : 3;
}

int run_generate(const Options& o) {
  write_output(o.out, serialize_tour_log(generate_tour(o.tour_config)));
  return 0;
}

int run_serve(const Options& o) {
  ServiceConfig config = o.config.empty() ? ServiceConfig{} : load_service_config(o.config);
  apply_port_env(config);
  if (o.port >= 0) config.port = o.port;
  if (!o.host.empty()) config.host = o.host;

  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);  // inherited by the server threads

  Service service(config);
  const int port = service.start();
  std::cerr << "listening on http://" << config.host << ":" << port << "\n";
  int received = 0;
  sigwait(&signals, &received);
  std::cerr << "shutting down\n";
  service.stop();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dialogue-state knowledge graphs for a touring robot"};
  app.require_subcommand(1);
  Options o;

  auto* verbalize_cmd = app.add_subcommand("verbalize", "Render a graph as text");
  verbalize_cmd->add_option("--graph", o.graph, "Snapshot JSON, or a .jsonl tour log")->required()->check(CLI::ExistingFile);
  verbalize_cmd->add_option("--params", o.params, "Verbalization parameter file")->check(CLI::ExistingFile);
  verbalize_cmd->add_flag("--triples", o.triples, "Print triples instead of sentences");
  verbalize_cmd->add_option("--config", o.config, "Session config (spatial settings for tour logs)");
  verbalize_cmd->add_option("-o,--out", o.out, "Output file (default stdout)");

  auto* snapshot_cmd = app.add_subcommand("snapshot", "Replay a tour log and print the graph snapshot");
  snapshot_cmd->add_option("--tour", o.tour, "Tour log (JSON Lines)")->required()->check(CLI::ExistingFile);
  snapshot_cmd->add_option("--config", o.config, "Session config JSON");
  snapshot_cmd->add_option("-o,--out", o.out, "Output file (default stdout)");

  auto* optimize_cmd = app.add_subcommand("optimize", "Search verbalization parameters against WoZ data");
  optimize_cmd->add_option("--woz", o.woz, "WoZ dataset JSON")->required()->check(CLI::ExistingFile);
  optimize_cmd->add_option("--scorer", o.scorer, "mock or remote")->check(CLI::IsMember({"mock", "remote"}));
  optimize_cmd->add_option("--trials", o.trials, "TPE trial budget")->check(CLI::Range(1, 10000));
  optimize_cmd->add_option("--seed", o.seed, "TPE seed");
  optimize_cmd->add_flag("--exhaustive", o.exhaustive, "Evaluate all 288 settings instead of TPE");
  optimize_cmd->add_flag("--serial", o.serial, "Use the serial loss kernel");
  optimize_cmd->add_option("--scorer-url", o.scorer_url, "Completions API base URL (remote scorer)");
  optimize_cmd->add_option("--scorer-model", o.scorer_model, "Completions model (remote scorer)");
  optimize_cmd->add_option("-o,--out", o.out, "Output file (default stdout)");

  auto* chat_cmd = app.add_subcommand("chat", "Talk to the robot about a tour on the terminal");
  chat_cmd->add_option("--tour", o.tour, "Tour log (JSON Lines)")->check(CLI::ExistingFile);
  chat_cmd->add_option("--params", o.params, "Verbalization parameter file")->check(CLI::ExistingFile);
  chat_cmd->add_option("--mode", o.mode, "verbal or triples")->check(CLI::IsMember({"verbal", "triples"}));
  chat_cmd->add_option("--backend", o.backend, "mock, canned or remote")->check(CLI::IsMember({"mock", "canned", "remote"}));
  chat_cmd->add_option("--script", o.script, "Canned replies (JSON array)")->check(CLI::ExistingFile);
  chat_cmd->add_option("--endpoint", o.endpoint, "Chat-completions URL (remote backend)");
  chat_cmd->add_option("--model", o.model, "Model name (remote backend)");
  chat_cmd->add_option("--config", o.config, "Session config JSON");
  chat_cmd->add_option("--transcript", o.transcript_out, "Write the transcript JSON here on exit");

  auto* eval_cmd = app.add_subcommand("eval", "Transcript and rating analyses");
  eval_cmd->require_subcommand(1);
  auto* lexicon_cmd = eval_cmd->add_subcommand("lexicon", "Count negation or uncertainty words in agent turns");
  lexicon_cmd->add_option("--transcript", o.transcript, "Transcript JSON")->required()->check(CLI::ExistingFile);
  lexicon_cmd->add_option("--set", o.lexicon, "negation or uncertainty")->check(CLI::IsMember({"negation", "uncertainty"}));
  auto* wilcoxon_cmd = eval_cmd->add_subcommand("wilcoxon", "Wilcoxon signed-rank test on paired scores");
  wilcoxon_cmd->add_option("--pairs", o.pairs, "CSV with two score columns")->required()->check(CLI::ExistingFile);

  auto* generate_cmd = app.add_subcommand("generate-tour", "Write a synthetic office tour log");
  generate_cmd->add_option("--rooms", o.tour_config.rooms, "Number of rooms")->check(CLI::Range(1, 64));
  generate_cmd->add_option("--seed", o.tour_config.seed, "Random seed");
  generate_cmd->add_option("--cadence-ms", o.tour_config.cadence_ms, "Milliseconds between frames")->check(CLI::PositiveNumber);
  generate_cmd->add_option("--noise", o.tour_config.odometry_noise_m, "Odometry noise (m)")->check(CLI::NonNegativeNumber);
  generate_cmd->add_option("--detection-rate", o.tour_config.detection_rate, "Chance of a detection per frame")->check(CLI::Range(0.0, 1.0));
  generate_cmd->add_option("-o,--out", o.out, "Output file (default stdout)");

  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP API");
  serve_cmd->add_option("--config", o.config, "Service config JSON")->check(CLI::ExistingFile);
  serve_cmd->add_option("--port", o.port, "Port (overrides PORT and the config file)")->check(CLI::Range(0, 65535));
  serve_cmd->add_option("--host", o.host, "Interface to bind");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*verbalize_cmd) return run_verbalize(o);
    if (*snapshot_cmd) return run_snapshot(o);
    if (*optimize_cmd) return run_optimize(o);
    if (*chat_cmd) return run_chat(o);
    if (*lexicon_cmd) return run_lexicon(o);
    if (*wilcoxon_cmd) return run_wilcoxon(o);
    if (*generate_cmd) return run_generate(o);
    if (*serve_cmd) return run_serve(o);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
