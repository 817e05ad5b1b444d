#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "grad/errors.hpp"

namespace grad {

using TokenId = std::uint32_t;
using TokenSequence = std::vector<TokenId>;

// Dense next-token scores over the whole vocabulary, in logit units.
using LogitVector = std::vector<double>;

// scores[i] is the logit the source assigned to seq[i + 1] after seq[0..i].
using TransitionScores = std::vector<double>;

inline void check_token(TokenId id, std::size_t vocab_size) {
  if (id >= vocab_size) {
    throw InvalidTokenError("token id " + std::to_string(id) +
                            " out of range for vocabulary of size " +
                            std::to_string(vocab_size));
  }
}

inline void check_tokens(std::span<const TokenId> ids, std::size_t vocab_size) {
  for (TokenId id : ids) check_token(id, vocab_size);
}

inline bool all_finite(std::span<const double> values) {
  for (double v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace grad
