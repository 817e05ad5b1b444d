#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <unordered_map>

#include "grad/logit_source.hpp"
#include "grad/types.hpp"
#include "grad/vocab.hpp"

namespace grad {

// Sparse weighted directed graph over token ids. Only observed transitions
// are stored; an absent (u, v) pair has implicit weight 0. Weights are raw
// accumulated logits and may be negative.
class TransitionGraph {
 public:
  using Row = std::map<TokenId, double>;

  explicit TransitionGraph(std::size_t vocab_size = Vocab::kReservedCount) : vocab_size_(vocab_size) {}

  std::size_t vocab_size() const { return vocab_size_; }
  std::size_t edge_count() const { return edge_count_; }
  std::size_t node_count() const { return degree_.size(); }

  // Adds `w` to the weight of (u, v), creating the edge at 0 first if absent.
  void add(TokenId u, TokenId v, double w) {
    check_token(u, vocab_size_);
    check_token(v, vocab_size_);
    if (!std::isfinite(w)) throw NonFiniteError("edge weight must be finite");
    auto [it, inserted] = rows_[u].try_emplace(v, 0.0);
    if (inserted) {
      ++edge_count_;
      ++degree_[u];
      ++degree_[v];
    }
    it->second += w;
  }

  // weight(seq[i], seq[i+1]) += scores[i] for every adjacent pair.
  void accumulate(std::span<const TokenId> seq, std::span<const double> scores) {
    std::size_t pairs = seq.empty() ? 0 : seq.size() - 1;
    if (scores.size() != pairs) {
      throw ScoreAlignmentError("expected " + std::to_string(pairs) + " scores for a " +
                                std::to_string(seq.size()) + "-token sequence, got " +
                                std::to_string(scores.size()));
    }
    check_tokens(seq, vocab_size_);
    if (!all_finite(scores)) throw NonFiniteError("transition scores must be finite");
    for (std::size_t i = 0; i < pairs; ++i) add(seq[i], seq[i + 1], scores[i]);
  }

  double weight(TokenId u, TokenId v) const {
    check_token(u, vocab_size_);
    check_token(v, vocab_size_);
    auto it = rows_.find(u);
    if (it == rows_.end()) return 0.0;
    auto jt = it->second.find(v);
    return jt == it->second.end() ? 0.0 : jt->second;
  }

  bool has_edge(TokenId u, TokenId v) const {
    auto it = rows_.find(u);
    return it != rows_.end() && it->second.contains(v);
  }

  // Stored out-neighbours of u in ascending id order; empty when u has none.
  const Row& out_edges(TokenId u) const {
    check_token(u, vocab_size_);
    static const Row kEmpty;
    auto it = rows_.find(u);
    return it == rows_.end() ? kEmpty : it->second;
  }

  // Calls fn(src, dst, weight) for every edge, sorted by (src, dst).
  template <class Fn>
  void for_each_edge(Fn&& fn) const {
    for (const auto& [u, row] : rows_) {
      for (const auto& [v, w] : row) fn(u, v, w);
    }
  }

  // In-place union with weights summed.
  void merge(const TransitionGraph& other) {
    if (other.vocab_size_ != vocab_size_) {
      throw IncompatibleArtifactsError("cannot merge graphs with vocab sizes " +
                                       std::to_string(vocab_size_) + " and " +
                                       std::to_string(other.vocab_size_));
    }
    other.for_each_edge([this](TokenId u, TokenId v, double w) { add(u, v, w); });
  }

  friend bool operator==(const TransitionGraph& a, const TransitionGraph& b) {
    return a.vocab_size_ == b.vocab_size_ && a.rows_ == b.rows_;
  }

 private:
  std::size_t vocab_size_;
  std::map<TokenId, Row> rows_;
  std::unordered_map<TokenId, std::uint32_t> degree_;
  std::size_t edge_count_ = 0;
};

inline TransitionGraph merge_graphs(const TransitionGraph& a, const TransitionGraph& b) {
  TransitionGraph out = a;
  out.merge(b);
  return out;
}

struct GraphStats {
  std::size_t corpus_size = 0;
  std::size_t nodes = 0;
  std::size_t edges = 0;
  double edge_node_ratio = 0.0;
};

inline GraphStats stats(const TransitionGraph& graph, std::size_t corpus_size = 0) {
  GraphStats s;
  s.corpus_size = corpus_size;
  s.nodes = graph.node_count();
  s.edges = graph.edge_count();
  s.edge_node_ratio = s.nodes > 0 ? static_cast<double>(s.edges) / static_cast<double>(s.nodes) : 0.0;
  return s;
}

struct GraphBuildOptions {
  // When false, pairs touching BOS or EOS are not accumulated. The source
  // still scores the full sequence.
  bool include_boundaries = true;
};

// One pass over pre-tokenized records: each record is scored once and its
// transition scores are added onto the edges it traverses.
template <LogitSource S>
TransitionGraph build_graph_from_sequences(std::span<const TokenSequence> sequences,
                                           std::size_t vocab_size, S& source,
                                           const GraphBuildOptions& options = {}) {
  if (source.vocab_size() != vocab_size) {
    throw IncompatibleArtifactsError("logit source vocab size " + std::to_string(source.vocab_size()) +
                                     " does not match vocab size " + std::to_string(vocab_size));
  }
  TransitionGraph graph(vocab_size);
  for (const auto& seq : sequences) {
    if (seq.size() < 2) continue;
    TransitionScores scores = transition_scores(source, seq);
    if (options.include_boundaries) {
      graph.accumulate(seq, scores);
      continue;
    }
    for (std::size_t i = 0; i + 1 < seq.size(); ++i) {
      if (Vocab::is_reserved(seq[i]) && seq[i] != Vocab::kUnk) continue;
      if (Vocab::is_reserved(seq[i + 1]) && seq[i + 1] != Vocab::kUnk) continue;
      graph.add(seq[i], seq[i + 1], scores[i]);
    }
  }
  return graph;
}

template <LogitSource S>
TransitionGraph build_graph(std::span<const std::string> corpus, const Vocab& vocab, S& source,
                            const GraphBuildOptions& options = {}) {
  std::vector<TokenSequence> sequences;
  sequences.reserve(corpus.size());
  for (const auto& record : corpus) sequences.push_back(tokenize(record, vocab));
  return build_graph_from_sequences(sequences, vocab.size(), source, options);
}

}  // namespace grad
