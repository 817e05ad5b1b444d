#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <unordered_map>

#include "grad/logit_source.hpp"
#include "grad/types.hpp"
#include "grad/vocab.hpp"

namespace grad {

// Add-k smoothed bigram model. Conditions only on the last token of a prefix:
//   logit(u, v) = ln((count(u, v) + k) / (rowsum(u) + k * |V|))
// so exp(logits) sums to 1 and an unseen row is uniform.
class ToyBigramModel {
 public:
  explicit ToyBigramModel(std::size_t vocab_size, double k = 1.0)
      : vocab_size_(vocab_size), k_(k) {
    if (!(k > 0.0) || !std::isfinite(k)) throw ParameterError("smoothing k must be positive and finite");
    if (vocab_size == 0) throw ParameterError("vocab size must be positive");
  }

  // Counts every adjacent pair of `seq`.
  void observe(std::span<const TokenId> seq) {
    check_tokens(seq, vocab_size_);
    for (std::size_t i = 0; i + 1 < seq.size(); ++i) {
      Row& row = rows_[seq[i]];
      ++row.counts[seq[i + 1]];
      ++row.total;
    }
  }

  std::uint64_t count(TokenId u, TokenId v) const {
    auto it = rows_.find(u);
    if (it == rows_.end()) return 0;
    auto jt = it->second.counts.find(v);
    return jt == it->second.counts.end() ? 0 : jt->second;
  }

  std::uint64_t rowsum(TokenId u) const {
    auto it = rows_.find(u);
    return it == rows_.end() ? 0 : it->second.total;
  }

  double logit(TokenId u, TokenId v) const {
    check_token(u, vocab_size_);
    check_token(v, vocab_size_);
    return smoothed(count(u, v), rowsum(u));
  }

  LogitVector next_logits(std::span<const TokenId> prefix) const {
    if (prefix.empty()) throw SequenceTooShortError("next_logits: prefix must be non-empty");
    TokenId u = prefix.back();
    check_token(u, vocab_size_);
    auto it = rows_.find(u);
    if (it == rows_.end()) return LogitVector(vocab_size_, smoothed(0, 0));
    const Row& row = it->second;
    LogitVector out(vocab_size_, smoothed(0, row.total));
    for (const auto& [v, c] : row.counts) out[v] = smoothed(c, row.total);
    return out;
  }

  TransitionScores transition_scores(std::span<const TokenId> seq) const {
    if (seq.size() < 2) throw SequenceTooShortError("transition_scores: sequence needs at least 2 tokens");
    TransitionScores out;
    out.reserve(seq.size() - 1);
    for (std::size_t i = 0; i + 1 < seq.size(); ++i) out.push_back(logit(seq[i], seq[i + 1]));
    return out;
  }

  std::size_t vocab_size() const { return vocab_size_; }
  double smoothing() const { return k_; }

 private:
  struct Row {
    std::unordered_map<TokenId, std::uint64_t> counts;
    std::uint64_t total = 0;
  };

  double smoothed(std::uint64_t c, std::uint64_t total) const {
    return std::log((static_cast<double>(c) + k_) /
                    (static_cast<double>(total) + k_ * static_cast<double>(vocab_size_)));
  }

  std::size_t vocab_size_;
  double k_;
  std::unordered_map<TokenId, Row> rows_;
};

inline ToyBigramModel fit_toy_model(std::span<const TokenSequence> corpus, const Vocab& vocab,
                                    double k = 1.0) {
  ToyBigramModel model(vocab.size(), k);
  for (const auto& seq : corpus) model.observe(seq);
  return model;
}

// Offset that maps the toy model's log-probabilities onto a raw-logit scale:
// ln(|V| * p) + 1, i.e. the uniform level sits at +1 and tokens the model
// favours get positive logits, as raw LM logits do.
inline double raw_logit_offset(std::size_t vocab_size) {
  return std::log(static_cast<double>(vocab_size)) + 1.0;
}

}  // namespace grad
