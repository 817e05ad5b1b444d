#pragma once

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <future>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "grad/benchmark.hpp"
#include "grad/decoder.hpp"
#include "grad/logit_source.hpp"
#include "grad/toy_bigram.hpp"
#include "grad/transition_graph.hpp"
#include "grad/vocab.hpp"

namespace grad {

enum class Method { kGreedy, kGrad };

inline const char* to_string(Method m) { return m == Method::kGreedy ? "GREEDY" : "GRAD"; }

struct EvalReport {
  Method method = Method::kGreedy;
  double alpha = 0.0;
  std::size_t corpus_size = 0;
  double exact_match = 0.0;
  std::size_t matches = 0;
  std::size_t questions = 0;
  GraphStats graph_stats;
  std::int64_t runtime_ms = 0;
};

struct EvalOptions {
  double smoothing = 1.0;
  NormMode norm_mode = NormMode::kIntent;
  // Added to every toy-model logit; nullopt selects raw_logit_offset(|V|).
  std::optional<double> logit_offset;
  std::size_t max_tokens = 1;
  // Record wall-clock time in runtime_ms; otherwise it stays 0 so reports
  // are byte-reproducible.
  bool measure_time = false;
  // Rows evaluated concurrently by the sweeps.
  std::size_t jobs = 1;
};

// Vocab, corrupted toy model, and tokenized records for one benchmark,
// shared by every row of a sweep. Read-only after construction.
class EvalSession {
 public:
  EvalSession(const SyntheticBenchmark& bench, EvalOptions options)
      : options_(options) {
    if (bench.questions.empty()) throw ParameterError("benchmark has no questions");
    std::vector<std::string> all = bench.truthful_corpus;
    all.insert(all.end(), bench.corrupted_corpus.begin(), bench.corrupted_corpus.end());
    vocab_ = build_vocab(all);

    std::vector<TokenSequence> corrupted;
    for (const auto& r : bench.corrupted_corpus) corrupted.push_back(tokenize(r, vocab_));
    model_.emplace(fit_toy_model(corrupted, vocab_, options.smoothing));
    offset_ = options.logit_offset.value_or(raw_logit_offset(vocab_.size()));

    for (const auto& r : bench.truthful_corpus) truthful_.push_back(tokenize(r, vocab_));
    for (const auto& q : bench.questions) {
      prompts_.push_back(tokenize_prompt(q.prompt, vocab_));
      gold_.push_back(vocab_.id_or_unk(q.gold));
    }
  }

  const Vocab& vocab() const { return vocab_; }
  const ToyBigramModel& model() const { return *model_; }
  double logit_offset() const { return offset_; }
  const EvalOptions& options() const { return options_; }

  ShiftedSource<const ToyBigramModel> source() const { return {*model_, offset_}; }

  // Graph over the first `size` truthful records.
  TransitionGraph graph_for(std::size_t size) const {
    check_size(size);
    auto src = source();
    return build_graph_from_sequences(std::span(truthful_).first(size), vocab_.size(), src);
  }

  // Extends `graph` (built over the first `from` records) to the first `to`.
  void extend_graph(TransitionGraph& graph, std::size_t from, std::size_t to) const {
    check_size(to);
    if (from > to) throw ParameterError("corpus prefixes must be ascending");
    auto src = source();
    graph.merge(build_graph_from_sequences(std::span(truthful_).subspan(from, to - from), vocab_.size(), src));
  }

  EvalReport evaluate(double alpha, const TransitionGraph& graph, std::size_t corpus_size) const {
    auto start = std::chrono::steady_clock::now();
    DecoderConfig config;
    config.alpha = alpha;
    config.norm_mode = options_.norm_mode;
    config.max_tokens = options_.max_tokens;
    config.validate();

    EvalReport report;
    report.method = alpha == 0.0 ? Method::kGreedy : Method::kGrad;
    report.alpha = alpha;
    report.corpus_size = corpus_size;
    report.questions = prompts_.size();
    report.graph_stats = stats(graph, corpus_size);
    auto src = source();
    for (std::size_t i = 0; i < prompts_.size(); ++i) {
      Generation gen = generate(src, graph, prompts_[i], config);
      if (!gen.continuation.empty() && gen.continuation.front() == gold_[i]) ++report.matches;
    }
    report.exact_match = static_cast<double>(report.matches) / static_cast<double>(report.questions);
    if (options_.measure_time) {
      report.runtime_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                              std::chrono::steady_clock::now() - start)
                              .count();
    }
    return report;
  }

  std::size_t truthful_size() const { return truthful_.size(); }

 private:
  void check_size(std::size_t size) const {
    if (size > truthful_.size()) {
      throw ParameterError("graph corpus size " + std::to_string(size) + " exceeds the " +
                           std::to_string(truthful_.size()) + " truthful records");
    }
  }

  EvalOptions options_;
  Vocab vocab_;
  std::optional<ToyBigramModel> model_;
  double offset_ = 0.0;
  std::vector<TokenSequence> truthful_;
  std::vector<TokenSequence> prompts_;
  std::vector<TokenId> gold_;
};

namespace detail {

// Runs fn(i) for i in [0, n) on up to `jobs` threads; results keep index order.
template <class Fn>
auto parallel_rows(std::size_t n, std::size_t jobs, Fn fn) {
  using R = decltype(fn(std::size_t{0}));
  std::vector<R> out;
  out.reserve(n);
  if (jobs <= 1) {
    for (std::size_t i = 0; i < n; ++i) out.push_back(fn(i));
    return out;
  }
  for (std::size_t begin = 0; begin < n; begin += jobs) {
    std::vector<std::future<R>> batch;
    for (std::size_t i = begin; i < std::min(n, begin + jobs); ++i) {
      batch.push_back(std::async(std::launch::async, fn, i));
    }
    for (auto& f : batch) out.push_back(f.get());
  }
  return out;
}

}  // namespace detail

// Corrupted toy model as the base model, graph from the first
// `graph_corpus_size` truthful records, single-token exact match.
inline EvalReport run_eval(const SyntheticBenchmark& bench, double alpha, std::size_t graph_corpus_size,
                           const EvalOptions& options = {}) {
  EvalSession session(bench, options);
  return session.evaluate(alpha, session.graph_for(graph_corpus_size), graph_corpus_size);
}

inline const std::vector<double>& default_alpha_grid() {
  static const std::vector<double> grid{0.0, 0.1, 0.5, 1.0, 2.0};
  return grid;
}

inline const std::vector<std::size_t>& default_corpus_grid() {
  static const std::vector<std::size_t> grid{10, 50, 100, 200};
  return grid;
}

// One row per alpha over the full truthful graph.
inline std::vector<EvalReport> sweep_alpha(const SyntheticBenchmark& bench, std::span<const double> alphas,
                                           const EvalOptions& options = {}) {
  if (alphas.empty()) throw ParameterError("alpha grid must be non-empty");
  for (double a : alphas) {
    if (!(a >= 0.0) || !std::isfinite(a)) throw ParameterError("alpha values must be finite and >= 0");
  }
  EvalSession session(bench, options);
  const std::size_t size = session.truthful_size();
  const TransitionGraph graph = session.graph_for(size);
  return detail::parallel_rows(alphas.size(), options.jobs,
                               [&](std::size_t i) { return session.evaluate(alphas[i], graph, size); });
}

struct CorpusSweep {
  std::vector<EvalReport> reports;
  std::vector<GraphStats> stats;
};

// Graphs over nested prefixes of the truthful corpus, one row per size.
inline CorpusSweep sweep_corpus(const SyntheticBenchmark& bench, std::span<const std::size_t> sizes,
                                double alpha, const EvalOptions& options = {}) {
  if (sizes.empty()) throw ParameterError("corpus size grid must be non-empty");
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (sizes[i] > bench.truthful_corpus.size()) {
      throw ParameterError("corpus size " + std::to_string(sizes[i]) + " exceeds the " +
                           std::to_string(bench.truthful_corpus.size()) + " truthful records");
    }
    if (i > 0 && sizes[i] <= sizes[i - 1]) throw ParameterError("corpus sizes must be strictly ascending");
  }
  EvalSession session(bench, options);
  std::vector<TransitionGraph> graphs;
  TransitionGraph graph(session.vocab().size());
  std::size_t built = 0;
  for (std::size_t size : sizes) {
    session.extend_graph(graph, built, size);
    built = size;
    graphs.push_back(graph);
  }
  CorpusSweep out;
  out.reports = detail::parallel_rows(sizes.size(), options.jobs, [&](std::size_t i) {
    return session.evaluate(alpha, graphs[i], sizes[i]);
  });
  for (const auto& r : out.reports) out.stats.push_back(r.graph_stats);
  return out;
}

// Shortest text that parses back to the same double.
inline std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline constexpr const char* kReportCsvHeader = "method,alpha,corpus_size,exact_match,nodes,edges,ratio,runtime_ms";

inline void write_reports_csv(std::ostream& out, std::span<const EvalReport> reports) {
  out << kReportCsvHeader << '\n';
  for (const auto& r : reports) {
    out << to_string(r.method) << ',' << format_number(r.alpha) << ',' << r.corpus_size << ','
        << format_number(r.exact_match) << ',' << r.graph_stats.nodes << ',' << r.graph_stats.edges << ','
        << format_number(r.graph_stats.edge_node_ratio) << ',' << r.runtime_ms << '\n';
  }
}

// Graph growth table: corpus_size against nodes, edges, ratio.
inline void write_stats_csv(std::ostream& out, std::span<const GraphStats> rows) {
  out << "corpus_size,nodes,edges,ratio\n";
  for (const auto& s : rows) {
    out << s.corpus_size << ',' << s.nodes << ',' << s.edges << ',' << format_number(s.edge_node_ratio) << '\n';
  }
}

inline nlohmann::json reports_to_json(std::span<const EvalReport> reports) {
  auto arr = nlohmann::json::array();
  for (const auto& r : reports) {
    arr.push_back({{"method", to_string(r.method)},
                   {"alpha", r.alpha},
                   {"corpus_size", r.corpus_size},
                   {"exact_match", r.exact_match},
                   {"matches", r.matches},
                   {"questions", r.questions},
                   {"nodes", r.graph_stats.nodes},
                   {"edges", r.graph_stats.edges},
                   {"ratio", r.graph_stats.edge_node_ratio},
                   {"runtime_ms", r.runtime_ms}});
  }
  return arr;
}

}  // namespace grad
