// grad: build token transition graphs, decode with graph-steered greedy
// search, and run the planted-fact evaluation sweeps.
//
// Data goes to stdout, diagnostics to stderr. GRAD_LOG={error|info|debug}
// sets log verbosity.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"

#include "grad/grad.hpp"

namespace {

// Where next-token logits come from. Exactly one of bridge / replay / toy.
struct SourceOptions {
  std::string bridge_cmd;
  int bridge_timeout_ms = 30000;
  std::string replay_path;
  std::string model_corpus_path;
  double smoothing = 1.0;
  std::optional<double> logit_offset;

  void add_to(CLI::App& cmd) {
    cmd.add_option("--bridge-cmd", bridge_cmd, "Command line of an external logit server (JSON-lines bridge)");
    cmd.add_option("--bridge-timeout-ms", bridge_timeout_ms, "Per-request bridge timeout")->capture_default_str();
    cmd.add_option("--replay", replay_path, "Replay file with scripted logit vectors");
    cmd.add_option("--model-corpus", model_corpus_path, "Corpus the built-in toy bigram model is fit on");
    cmd.add_option("--smoothing", smoothing, "Add-k smoothing of the toy model")->capture_default_str();
    cmd.add_option("--logit-offset", logit_offset, "Constant added to toy logits (default ln|V| + 1)");
  }

  int kinds() const {
    return int(!bridge_cmd.empty()) + int(!replay_path.empty()) + int(!model_corpus_path.empty());
  }

  grad::AnySource open(const grad::Vocab& vocab) const {
    if (kinds() > 1) throw grad::ParameterError("choose one of --bridge-cmd, --replay, --model-corpus");
    if (!bridge_cmd.empty()) {
      spdlog::info("starting bridge: {}", bridge_cmd);
      grad::bridge::ClientOptions opts;
      opts.timeout = std::chrono::milliseconds(bridge_timeout_ms);
      opts.expected_vocab_size = vocab.size();
      return grad::AnySource(grad::bridge::Client::spawn(bridge_cmd, opts));
    }
    if (!replay_path.empty()) {
      auto replay = grad::load_replay(replay_path);
      if (replay.vocab_size() != vocab.size()) {
        throw grad::IncompatibleArtifactsError("replay vocab size " + std::to_string(replay.vocab_size()) +
                                               " does not match vocab size " + std::to_string(vocab.size()));
      }
      return grad::AnySource(std::move(replay));
    }
    if (model_corpus_path.empty()) {
      throw grad::ParameterError("no logit source: pass --model-corpus, --replay, or --bridge-cmd");
    }
    std::vector<grad::TokenSequence> seqs;
    for (const auto& r : grad::io::load_corpus(model_corpus_path)) seqs.push_back(grad::tokenize(r, vocab));
    double offset = logit_offset.value_or(grad::raw_logit_offset(vocab.size()));
    spdlog::info("toy model: {} records, k={}, offset={}", seqs.size(), smoothing, offset);
    return grad::AnySource(OwnedShifted(grad::fit_toy_model(seqs, vocab, smoothing), offset));
  }

  // ShiftedSource that owns its toy model, so it can live inside AnySource.
  struct OwnedShifted {
    OwnedShifted(grad::ToyBigramModel m, double offset)
        : model(std::make_unique<grad::ToyBigramModel>(std::move(m))), shifted(*model, offset) {}
    std::size_t vocab_size() const { return shifted.vocab_size(); }
    grad::LogitVector next_logits(std::span<const grad::TokenId> p) { return shifted.next_logits(p); }
    grad::TransitionScores transition_scores(std::span<const grad::TokenId> s) {
      return shifted.transition_scores(s);
    }
    std::unique_ptr<grad::ToyBigramModel> model;
    grad::ShiftedSource<grad::ToyBigramModel> shifted;
  };
};

std::string stats_line(const grad::GraphStats& s) {
  return "nodes=" + std::to_string(s.nodes) + " edges=" + std::to_string(s.edges) +
         " ratio=" + grad::format_number(s.edge_node_ratio);
}

// Writes `text` to `path`, or to stdout when path is empty or "-".
void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text << std::flush;
  } else {
    grad::io::write_file(path, text);
    spdlog::info("wrote {}", path);
  }
}

struct BuildGraphCommand {
  std::string corpus_path, vocab_path, graph_path, input_vocab_path, json_path;
  bool exclude_boundaries = false;
  SourceOptions source;

  void add_to(CLI::App& app) {
    auto* cmd = app.add_subcommand("build-graph", "Build a token transition graph from a corpus");
    cmd->add_option("--corpus", corpus_path, "Corpus file, one record per line")->required();
    cmd->add_option("--vocab", vocab_path, "Output vocab JSON")->required();
    cmd->add_option("--graph", graph_path, "Output binary graph file")->required();
    cmd->add_option("--input-vocab", input_vocab_path, "Use this vocab instead of building one");
    cmd->add_option("--json", json_path, "Also write the graph in the JSON debug format");
    cmd->add_flag("--exclude-boundaries", exclude_boundaries, "Do not add edges touching <s> or </s>");
    source.add_to(*cmd);
    cmd->callback([this] { status = run(); });
  }

  int run() {
    auto corpus = grad::io::load_corpus(corpus_path);
    // The toy model defaults to the graph corpus itself.
    if (source.kinds() == 0) source.model_corpus_path = corpus_path;

    grad::Vocab vocab;
    if (!input_vocab_path.empty()) {
      vocab = grad::load_vocab(input_vocab_path);
    } else {
      std::vector<std::string> all = corpus;
      if (!source.model_corpus_path.empty() && source.model_corpus_path != corpus_path) {
        auto extra = grad::io::load_corpus(source.model_corpus_path);
        all.insert(all.end(), extra.begin(), extra.end());
      }
      vocab = grad::build_vocab(all);
    }
    auto model = source.open(vocab);
    grad::GraphBuildOptions options;
    options.include_boundaries = !exclude_boundaries;
    auto graph = grad::build_graph(corpus, vocab, model, options);

    grad::save_vocab(vocab, vocab_path);
    grad::save_graph(graph, graph_path);
    if (!json_path.empty()) grad::io::write_file(json_path, grad::graph_to_json(graph));
    std::cout << stats_line(grad::stats(graph, corpus.size())) << '\n';
    return 0;
  }

  int status = 0;
};

struct DecodeCommand {
  std::string vocab_path, graph_path, trace_path, prompt, norm_mode = "intent";
  double alpha = 1.0;
  std::size_t max_tokens = 64;
  std::size_t trace_topk = 5;
  SourceOptions source;

  void add_to(CLI::App& app) {
    auto* cmd = app.add_subcommand("decode", "Generate a continuation with graph-steered greedy decoding");
    cmd->add_option("prompt", prompt, "Prompt text")->required();
    cmd->add_option("--vocab", vocab_path, "Vocab JSON")->required();
    cmd->add_option("--graph", graph_path, "Binary graph file")->required();
    cmd->add_option("--alpha", alpha, "Fusion weight (0 = plain greedy)")->capture_default_str()
        ->check(CLI::NonNegativeNumber);
    cmd->add_option("--norm-mode", norm_mode, "Graph logit normalization")->capture_default_str()
        ->check(CLI::IsMember({"intent", "literal"}));
    cmd->add_option("--max-tokens", max_tokens, "Maximum continuation length")->capture_default_str()
        ->check(CLI::PositiveNumber);
    cmd->add_option("--trace", trace_path, "Write per-step trace as JSON lines");
    cmd->add_option("--trace-topk", trace_topk, "Top-k entries per vector in the trace")->capture_default_str();
    source.add_to(*cmd);
    cmd->callback([this] { status = run(); });
  }

  int run() {
    auto vocab = grad::load_vocab(vocab_path);
    auto graph = grad::load_graph(graph_path);
    if (graph.vocab_size() != vocab.size()) {
      throw grad::IncompatibleArtifactsError("graph " + graph_path + " has vocab size " +
                                             std::to_string(graph.vocab_size()) + " but vocab " + vocab_path +
                                             " has " + std::to_string(vocab.size()));
    }
    auto model = source.open(vocab);
    grad::DecoderConfig config;
    config.alpha = alpha;
    config.norm_mode = grad::parse_norm_mode(norm_mode);
    config.max_tokens = max_tokens;
    config.keep_vectors = !trace_path.empty() && trace_topk > 0;

    auto prompt_ids = grad::tokenize_prompt(prompt, vocab);
    auto gen = grad::generate(model, graph, prompt_ids, config);
    if (!trace_path.empty()) {
      std::ostringstream trace;
      grad::write_trace_jsonl(trace, gen.steps, trace_topk);
      grad::io::write_file(trace_path, trace.str());
    }
    std::cout << grad::detokenize(gen.continuation, vocab) << '\n';
    return 0;
  }

  int status = 0;
};

// Options shared by eval and sweep.
struct BenchmarkOptions {
  std::size_t num_facts = 200;
  double p = 0.5;
  std::uint64_t seed = 42;
  std::string norm_mode = "intent";
  double smoothing = 1.0;
  std::optional<double> logit_offset;
  bool timing = false;
  std::size_t jobs = 1;
  std::string out_path, json_path;

  void add_to(CLI::App& cmd) {
    cmd.add_option("--num-facts", num_facts, "Facts in the synthetic benchmark")->capture_default_str()
        ->check(CLI::PositiveNumber);
    cmd.add_option("--p", p, "Fraction of facts corrupted in the model corpus")->capture_default_str()
        ->check(CLI::Range(0.0, 1.0));
    cmd.add_option("--seed", seed, "Benchmark seed")->capture_default_str();
    cmd.add_option("--norm-mode", norm_mode, "Graph logit normalization")->capture_default_str()
        ->check(CLI::IsMember({"intent", "literal"}));
    cmd.add_option("--smoothing", smoothing, "Add-k smoothing of the toy model")->capture_default_str();
    cmd.add_option("--logit-offset", logit_offset, "Constant added to toy logits (default ln|V| + 1)");
    cmd.add_flag("--timing", timing, "Fill runtime_ms with wall-clock time (breaks byte reproducibility)");
    cmd.add_option("--jobs", jobs, "Rows evaluated concurrently")->capture_default_str()
        ->check(CLI::PositiveNumber);
    cmd.add_option("--out", out_path, "CSV report path (default stdout)");
    cmd.add_option("--json", json_path, "Also write the report as JSON");
  }

  grad::SyntheticBenchmark benchmark() const { return grad::generate_benchmark(num_facts, p, seed); }

  grad::EvalOptions eval_options() const {
    grad::EvalOptions o;
    o.smoothing = smoothing;
    o.norm_mode = grad::parse_norm_mode(norm_mode);
    o.logit_offset = logit_offset;
    o.measure_time = timing;
    o.jobs = jobs;
    return o;
  }

  void write(std::span<const grad::EvalReport> reports) const {
    std::ostringstream csv;
    grad::write_reports_csv(csv, reports);
    emit(out_path, csv.str());
    if (!json_path.empty()) grad::io::write_file(json_path, grad::reports_to_json(reports).dump(2) + "\n");
  }
};

struct EvalCommand {
  BenchmarkOptions bench;
  double alpha = 1.0;
  std::optional<std::size_t> corpus_size;

  void add_to(CLI::App& app) {
    auto* cmd = app.add_subcommand("eval", "Compare greedy and GRAD on the planted-fact benchmark");
    bench.add_to(*cmd);
    cmd->add_option("--alpha", alpha, "Fusion weight of the GRAD row")->capture_default_str()
        ->check(CLI::NonNegativeNumber);
    cmd->add_option("--corpus-size", corpus_size, "Truthful records used for the graph (default all)");
    cmd->callback([this] { status = run(); });
  }

  int run() {
    auto b = bench.benchmark();
    grad::EvalSession session(b, bench.eval_options());
    std::size_t size = corpus_size.value_or(session.truthful_size());
    auto graph = session.graph_for(size);
    std::vector<grad::EvalReport> reports{session.evaluate(0.0, graph, size)};
    if (alpha > 0.0) reports.push_back(session.evaluate(alpha, graph, size));
    bench.write(reports);
    return 0;
  }

  int status = 0;
};

struct SweepCommand {
  BenchmarkOptions bench;
  std::vector<double> alphas;
  std::vector<std::size_t> sizes;
  double alpha = 1.0;
  std::string stats_path;

  void add_to(CLI::App& app) {
    auto* cmd = app.add_subcommand("sweep", "Sweep alpha or graph corpus size on the planted-fact benchmark");
    bench.add_to(*cmd);
    auto* a = cmd->add_option("--alphas", alphas, "Alpha grid, e.g. 0,0.1,0.5,1,2")->delimiter(',');
    auto* s = cmd->add_option("--sizes", sizes, "Graph corpus sizes, e.g. 10,50,100,200")->delimiter(',');
    a->excludes(s);
    cmd->add_option("--alpha", alpha, "Fusion weight for the corpus-size sweep")->capture_default_str()
        ->check(CLI::NonNegativeNumber);
    cmd->add_option("--stats-out", stats_path, "Graph growth CSV for the corpus-size sweep");
    cmd->callback([this] { status = run(); });
  }

  int run() {
    if (alphas.empty() && sizes.empty()) throw grad::ParameterError("sweep needs --alphas or --sizes");
    auto b = bench.benchmark();
    if (!alphas.empty()) {
      bench.write(grad::sweep_alpha(b, alphas, bench.eval_options()));
      return 0;
    }
    auto result = grad::sweep_corpus(b, sizes, alpha, bench.eval_options());
    bench.write(result.reports);
    if (!stats_path.empty()) {
      std::ostringstream csv;
      grad::write_stats_csv(csv, result.stats);
      grad::io::write_file(stats_path, csv.str());
    }
    return 0;
  }

  int status = 0;
};

struct StatsCommand {
  std::string graph_path;
  std::size_t corpus_size = 0;
  bool json = false;

  void add_to(CLI::App& app) {
    auto* cmd = app.add_subcommand("stats", "Print node/edge statistics of a graph file");
    cmd->add_option("--graph", graph_path, "Binary graph file")->required();
    cmd->add_option("--corpus-size", corpus_size, "Corpus size to report alongside");
    cmd->add_flag("--json", json, "Print JSON instead of the key=value line");
    cmd->callback([this] { status = run(); });
  }

  int run() {
    auto s = grad::stats(grad::load_graph(graph_path), corpus_size);
    if (json) {
      nlohmann::json doc{{"corpus_size", s.corpus_size}, {"nodes", s.nodes}, {"edges", s.edges},
                         {"ratio", s.edge_node_ratio}};
      std::cout << doc.dump() << '\n';
    } else {
      std::cout << stats_line(s) << '\n';
    }
    return 0;
  }

  int status = 0;
};

void configure_logging() {
  auto logger = spdlog::stderr_logger_st("grad");
  logger->set_pattern("grad: [%l] %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::err);
  if (const char* level = std::getenv("GRAD_LOG")) {
    std::string v(level);
    if (v == "debug") spdlog::set_level(spdlog::level::debug);
    else if (v == "info") spdlog::set_level(spdlog::level::info);
    else if (v != "error") spdlog::warn("ignoring unknown GRAD_LOG value '{}'", v);
  }
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();
  CLI::App app{"Graph-retrieved adaptive decoding"};
  app.set_config("--config", "", "TOML config file; command-line flags take precedence");
  app.require_subcommand(1);

  BuildGraphCommand build;
  DecodeCommand decode;
  EvalCommand eval;
  SweepCommand sweep;
  StatsCommand stats;
  build.add_to(app);
  decode.add_to(app);
  eval.add_to(app);
  sweep.add_to(app);
  stats.add_to(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const grad::ParameterError& e) {
    std::cerr << "grad: " << e.what() << "\n\n" << app.help();
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "grad: error: " << e.what() << '\n';
    return 1;
  }
  return build.status | decode.status | eval.status | sweep.status | stats.status;
}
