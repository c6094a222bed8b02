#include "fixtures.hpp"

#include "graphtalk/ingest.hpp"
#include "graphtalk/spatial.hpp"
#include "graphtalk/tour_generator.hpp"

#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace graphtalk::testing {

std::string fixture_path(const std::string& name) {
  return std::string(GRAPHTALK_FIXTURE_DIR) + "/" + name;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::unique_ptr<DialogueStateGraph> fixed_clock_graph(Timestamp now) {
  return std::make_unique<DialogueStateGraph>([now] { return now; });
}

Figure2 figure2_graph() {
  Figure2 f;
  f.graph = fixed_clock_graph(kTourStart + 5000);
  f.office = f.graph->add_node(NodeType::location, "office", Speaker::none, 1.0, kTourStart);
  f.image = f.graph->add_node(NodeType::image, "img_0001.jpg", Speaker::none, 1.0, kTourStart + 1500);
  f.laptop = f.graph->add_node(NodeType::entity, "laptop", Speaker::none, 0.9, kTourStart + 1700);
  f.graph->add_edge(f.image, f.office, EdgeLabel::in_location);
  f.graph->add_edge(f.laptop, f.image, EdgeLabel::in);
  return f;
}

TourLog three_room_log() { return load_tour_log_file(fixture_path("three_rooms.jsonl")); }

std::unique_ptr<DialogueStateGraph> two_room_dialogue_graph() {
  const Timestamp t0 = kTourStart;
  TourLog log;
  log.events = {
      {t0, LocationLabel{"office"}},
      {t0, PositionReading{0, 0}},
      {t0 + 4000, PositionReading{2, 0}},
      {t0 + 4000, ImageCapture{"img_a.jpg"}},
      {t0 + 4200, Detection{"img_a.jpg", {{"laptop", 0.9}, {"a coffee mug", 0.55}}}},
      {t0 + 6000, PositionReading{2, 1}},
      {t0 + 60000, LocationLabel{"hallway"}},
      {t0 + 60000, PositionReading{2, 1}},
      {t0 + 63000, ImageCapture{"img_b.jpg"}},
      {t0 + 63200, Detection{"img_b.jpg", {{"a painting", 0.3}}}},
      {t0 + 66000, PositionReading{2, 4}},
      {t0 + 70000, UserUtterance{"What did you see?"}},
  };
  auto graph = fixed_clock_graph(t0 + 80000);
  replay(*graph, log);
  graph->apply(attach_movements(graph->view()));

  const auto question = graph->view().nodes_chronological(NodeType::utterance).front()->id;
  GraphDelta reply;
  NodeRef agent = reply.add_node({NodeType::utterance, "I saw a laptop in the office.",
                                  Speaker::agent, 1.0, t0 + 72000});
  reply.add_edge(agent, NodeRef::existing(question), EdgeLabel::responds_to);
  graph->apply(reply);
  return graph;
}

std::unique_ptr<DialogueStateGraph> random_graph(std::uint64_t seed) {
  TourGeneratorConfig config;
  config.seed = seed;
  config.rooms = 1 + static_cast<int>(seed % 4);
  config.min_legs = 1;
  config.max_legs = 2;
  config.max_leg_m = 3.0;
  auto graph = fixed_clock_graph(kTourStart);
  TourLog log = generate_tour(config);
  replay(*graph, log);
  GraphDelta movements = attach_movements(graph->view());
  if (!movements.empty()) graph->apply(movements);

  std::mt19937_64 rng(seed);
  const Timestamp after = log.events.empty() ? kTourStart : log.events.back().t;
  const int turns = static_cast<int>(rng() % 3);
  for (int i = 0; i < turns; ++i) {
    GraphDelta delta;
    NodeRef user = delta.add_node({NodeType::utterance, "question " + std::to_string(i),
                                   Speaker::user, 1.0, after + 10000 * (i + 1)});
    NodeRef agent = delta.add_node({NodeType::utterance, "answer " + std::to_string(i),
                                    Speaker::agent, 1.0, after + 10000 * (i + 1) + 2000});
    delta.add_edge(agent, user, EdgeLabel::responds_to);
    graph->apply(delta);
  }
  return graph;
}

}  // namespace graphtalk::testing
