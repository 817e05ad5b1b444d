#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "grad/io.hpp"
#include "grad/logit_source.hpp"
#include "grad/types.hpp"

namespace grad {

// Returns pre-scripted logit vectors, one per next_logits call, in order.
// The prefix is ignored apart from validation.
class ReplaySource {
 public:
  ReplaySource(std::size_t vocab_size, std::vector<LogitVector> steps)
      : vocab_size_(vocab_size), steps_(std::move(steps)) {
    for (std::size_t i = 0; i < steps_.size(); ++i) {
      detail::check_output(steps_[i], vocab_size_, ("replay step " + std::to_string(i)).c_str());
    }
  }

  std::size_t vocab_size() const { return vocab_size_; }

  LogitVector next_logits(std::span<const TokenId> prefix) {
    if (prefix.empty()) throw SequenceTooShortError("next_logits: prefix must be non-empty");
    check_tokens(prefix, vocab_size_);
    if (cursor_ >= steps_.size()) {
      throw ReplayUnderrunError("replay source exhausted after " + std::to_string(steps_.size()) +
                                " steps");
    }
    return steps_[cursor_++];
  }

  std::size_t remaining() const { return steps_.size() - cursor_; }
  void rewind() { cursor_ = 0; }

 private:
  std::size_t vocab_size_;
  std::vector<LogitVector> steps_;
  std::size_t cursor_ = 0;
};

// {"vocab_size": int, "steps": [[float, ...], ...]}
inline ReplaySource replay_from_json(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("replay: invalid JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("vocab_size") || !doc["vocab_size"].is_number_unsigned() ||
      !doc.contains("steps") || !doc["steps"].is_array()) {
    throw FormatError("replay: expected {\"vocab_size\": int, \"steps\": [[...], ...]}");
  }
  auto vocab_size = doc["vocab_size"].get<std::size_t>();
  std::vector<LogitVector> steps;
  for (const auto& row : doc["steps"]) {
    if (!row.is_array()) throw FormatError("replay: each step must be an array of numbers");
    LogitVector v;
    for (const auto& x : row) {
      if (!x.is_number()) throw FormatError("replay: each step must be an array of numbers");
      v.push_back(x.get<double>());
    }
    steps.push_back(std::move(v));
  }
  try {
    return ReplaySource(vocab_size, std::move(steps));
  } catch (const Error& e) {
    throw FormatError(std::string("replay: ") + e.what());
  }
}

inline ReplaySource load_replay(const std::filesystem::path& path) {
  try {
    return replay_from_json(io::read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace grad
