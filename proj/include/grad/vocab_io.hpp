#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "grad/io.hpp"
#include "grad/vocab.hpp"

namespace grad {

// {"tokens": [string, ...]}, position == TokenId, reserved tokens included.
inline std::string vocab_to_json(const Vocab& vocab) {
  nlohmann::json doc;
  doc["tokens"] = vocab.tokens();
  return doc.dump() + "\n";
}

inline Vocab vocab_from_json(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("vocab: invalid JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("tokens") || !doc["tokens"].is_array()) {
    throw FormatError("vocab: expected an object with a \"tokens\" array");
  }
  std::vector<std::string> tokens;
  for (const auto& t : doc["tokens"]) {
    if (!t.is_string()) throw FormatError("vocab: every token must be a string");
    tokens.push_back(t.get<std::string>());
  }
  return Vocab::from_tokens(tokens);
}

inline void save_vocab(const Vocab& vocab, const std::filesystem::path& path) {
  io::write_file(path, vocab_to_json(vocab));
}

inline Vocab load_vocab(const std::filesystem::path& path) {
  try {
    return vocab_from_json(io::read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace grad
