#pragma once

#include <concepts>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <type_traits>
#include <utility>

#include "grad/types.hpp"

namespace grad {

// Anything that can play the base model: dense next-token logits for a prefix.
template <class S>
concept LogitSource = requires(S& s, const S& cs, std::span<const TokenId> tokens) {
  { cs.vocab_size() } -> std::convertible_to<std::size_t>;
  { s.next_logits(tokens) } -> std::convertible_to<LogitVector>;
};

// Sources that can score a whole sequence in one pass instead of one
// next_logits call per position.
template <class S>
concept SequenceScoringSource = LogitSource<S> && requires(S& s, std::span<const TokenId> tokens) {
  { s.transition_scores(tokens) } -> std::convertible_to<TransitionScores>;
};

namespace detail {

inline void check_output(std::span<const double> values, std::size_t expected, const char* what) {
  if (values.size() != expected) {
    throw ShapeError(std::string(what) + ": expected " + std::to_string(expected) +
                     " values, got " + std::to_string(values.size()));
  }
  if (!all_finite(values)) throw NonFiniteError(std::string(what) + ": non-finite value");
}

}  // namespace detail

// Checked call: validates the prefix and that the result is |V| finite values.
template <LogitSource S>
LogitVector next_logits(S& source, std::span<const TokenId> prefix) {
  if (prefix.empty()) throw SequenceTooShortError("next_logits: prefix must be non-empty");
  check_tokens(prefix, source.vocab_size());
  LogitVector out = source.next_logits(prefix);
  detail::check_output(out, source.vocab_size(), "next_logits");
  return out;
}

// scores[i] == next_logits(seq[0..=i])[seq[i+1]].
template <LogitSource S>
TransitionScores transition_scores(S& source, std::span<const TokenId> seq) {
  if (seq.size() < 2) {
    throw SequenceTooShortError("transition_scores: sequence needs at least 2 tokens, got " +
                                std::to_string(seq.size()));
  }
  check_tokens(seq, source.vocab_size());
  TransitionScores scores;
  if constexpr (SequenceScoringSource<S>) {
    scores = source.transition_scores(seq);
  } else {
    scores.reserve(seq.size() - 1);
    for (std::size_t i = 0; i + 1 < seq.size(); ++i) {
      LogitVector row = source.next_logits(seq.first(i + 1));
      detail::check_output(row, source.vocab_size(), "next_logits");
      scores.push_back(row[seq[i + 1]]);
    }
  }
  detail::check_output(scores, seq.size() - 1, "transition_scores");
  return scores;
}

// Adds a constant to every logit. Softmax and argmax are unchanged, but the
// raw values GRAD accumulates and max-normalizes move with the offset.
template <LogitSource S>
class ShiftedSource {
 public:
  ShiftedSource(S& inner, double offset) : inner_(&inner), offset_(offset) {}

  std::size_t vocab_size() const { return inner_->vocab_size(); }
  double offset() const { return offset_; }

  LogitVector next_logits(std::span<const TokenId> prefix) {
    LogitVector out = grad::next_logits(*inner_, prefix);
    for (double& v : out) v += offset_;
    return out;
  }

  TransitionScores transition_scores(std::span<const TokenId> seq) {
    TransitionScores out = grad::transition_scores(*inner_, seq);
    for (double& v : out) v += offset_;
    return out;
  }

 private:
  S* inner_;
  double offset_;
};

// Type-erased source for choosing the model at runtime (toy, replay, bridge).
class AnySource {
 public:
  template <LogitSource S>
    requires(!std::same_as<std::remove_cvref_t<S>, AnySource>)
  explicit AnySource(S source) : impl_(std::make_unique<Model<S>>(std::move(source))) {}

  std::size_t vocab_size() const { return impl_->vocab_size(); }
  LogitVector next_logits(std::span<const TokenId> prefix) { return impl_->next_logits(prefix); }
  TransitionScores transition_scores(std::span<const TokenId> seq) {
    return impl_->transition_scores(seq);
  }

 private:
  struct Concept {
    virtual ~Concept() = default;
    virtual std::size_t vocab_size() const = 0;
    virtual LogitVector next_logits(std::span<const TokenId> prefix) = 0;
    virtual TransitionScores transition_scores(std::span<const TokenId> seq) = 0;
  };

  template <class S>
  struct Model final : Concept {
    explicit Model(S s) : source(std::move(s)) {}
    std::size_t vocab_size() const override { return source.vocab_size(); }
    LogitVector next_logits(std::span<const TokenId> prefix) override {
      return grad::next_logits(source, prefix);
    }
    TransitionScores transition_scores(std::span<const TokenId> seq) override {
      return grad::transition_scores(source, seq);
    }
    S source;
  };

  std::unique_ptr<Concept> impl_;
};

}  // namespace grad
