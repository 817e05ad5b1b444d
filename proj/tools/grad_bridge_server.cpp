// Reference bridge server: serves a toy bigram model or a replay file over
// the JSON-lines protocol on stdin/stdout. The --fault options make it
// misbehave on purpose so clients can be tested against broken servers.

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include "CLI11.hpp"

#include "grad/bridge.hpp"
#include "grad/io.hpp"
#include "grad/replay_source.hpp"
#include "grad/toy_bigram.hpp"
#include "grad/vocab_io.hpp"

namespace {

struct ServerOptions {
  std::string vocab_path;
  std::string model_corpus_path;
  std::string replay_path;
  double smoothing = 1.0;
  std::optional<double> logit_offset;
  std::string fault;
  std::size_t fault_after = 0;
  std::size_t declare_vocab = 0;
};

// Rewrites the well-formed response `line` according to the fault mode.
std::string apply_fault(const ServerOptions& opt, std::size_t request_index, const std::string& line) {
  if (opt.fault.empty() || request_index < opt.fault_after) return line;
  if (opt.fault == "garbage") return "this is not json\n";
  if (opt.fault == "wrong-type") return "{\"type\":\"bogus\"}\n";
  if (opt.fault == "short") {
    auto msg = nlohmann::json::parse(line);
    for (const char* field : {"logits", "scores"}) {
      if (msg.contains(field) && !msg[field].empty()) msg[field].erase(msg[field].size() - 1);
    }
    return msg.dump() + "\n";
  }
  if (opt.fault == "inf") {
    auto msg = nlohmann::json::parse(line);
    for (const char* field : {"logits", "scores"}) {
      if (msg.contains(field) && !msg[field].empty()) msg[field][0] = 0.0;
    }
    std::string text = msg.dump();
    if (auto at = text.find("[0.0"); at != std::string::npos) text.replace(at + 1, 3, "1e999");
    return text + "\n";
  }
  if (opt.fault == "exit") std::exit(3);
  if (opt.fault == "hang") {
    std::this_thread::sleep_for(std::chrono::hours(1));
  }
  return line;
}

template <class Source>
int run(Source& source, const ServerOptions& opt) {
  std::string line;
  bool stop = false;
  std::size_t index = 0;
  while (!stop && std::getline(std::cin, line)) {
    if (line.empty()) continue;
    std::string response = grad::bridge::handle_request(source, line, stop);
    if (index == 0 && opt.declare_vocab > 0) {
      response = nlohmann::json{{"type", "hello"}, {"vocab_size", opt.declare_vocab}}.dump() + "\n";
    }
    std::cout << apply_fault(opt, index++, response) << std::flush;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GRAD reference bridge server (toy bigram or replay source)"};
  ServerOptions opt;
  app.add_option("--vocab", opt.vocab_path, "Vocab JSON used to tokenize the model corpus");
  app.add_option("--model-corpus", opt.model_corpus_path, "Corpus the toy bigram model is fit on");
  app.add_option("--replay", opt.replay_path, "Replay file with scripted logit vectors");
  app.add_option("--smoothing", opt.smoothing, "Add-k smoothing for the toy model")->capture_default_str();
  app.add_option("--logit-offset", opt.logit_offset, "Constant added to toy logits (default ln|V| + 1)");
  app.add_option("--fault", opt.fault, "Misbehave: garbage | wrong-type | short | inf | exit | hang")
      ->check(CLI::IsMember({"garbage", "wrong-type", "short", "inf", "exit", "hang"}));
  app.add_option("--fault-after", opt.fault_after, "Number of requests answered correctly before the fault");
  app.add_option("--declare-vocab", opt.declare_vocab, "Vocab size announced in hello instead of the real one");
  CLI11_PARSE(app, argc, argv);

  try {
    if (!opt.replay_path.empty()) {
      auto source = grad::load_replay(opt.replay_path);
      return run(source, opt);
    }
    if (opt.vocab_path.empty() || opt.model_corpus_path.empty()) {
      std::cerr << "grad_bridge_server: need --replay, or --vocab with --model-corpus\n";
      return 2;
    }
    auto vocab = grad::load_vocab(opt.vocab_path);
    std::vector<grad::TokenSequence> corpus;
    for (const auto& record : grad::io::load_corpus(opt.model_corpus_path)) {
      corpus.push_back(grad::tokenize(record, vocab));
    }
    const auto model = grad::fit_toy_model(corpus, vocab, opt.smoothing);
    grad::ShiftedSource source(model, opt.logit_offset.value_or(grad::raw_logit_offset(vocab.size())));
    return run(source, opt);
  } catch (const std::exception& e) {
    std::cerr << "grad_bridge_server: " << e.what() << '\n';
    return 1;
  }
}
