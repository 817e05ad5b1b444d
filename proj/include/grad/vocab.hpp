#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "grad/types.hpp"
#include "grad/utf8.hpp"

namespace grad {

// Bidirectional token-string <-> TokenId map. Ids are dense, and the three
// reserved tokens always sit at 0, 1, 2 so artifacts stay portable.
class Vocab {
 public:
  static constexpr TokenId kUnk = 0;
  static constexpr TokenId kBos = 1;
  static constexpr TokenId kEos = 2;
  static constexpr std::size_t kReservedCount = 3;

  static constexpr std::string_view kUnkText = "<unk>";
  static constexpr std::string_view kBosText = "<s>";
  static constexpr std::string_view kEosText = "</s>";

  Vocab() {
    add(std::string(kUnkText));
    add(std::string(kBosText));
    add(std::string(kEosText));
  }

  // Rebuilds a vocab from its ordered token list (position == TokenId).
  static Vocab from_tokens(std::span<const std::string> tokens) {
    if (tokens.size() < kReservedCount || tokens[kUnk] != kUnkText ||
        tokens[kBos] != kBosText || tokens[kEos] != kEosText) {
      throw FormatError("vocab must start with the reserved tokens <unk>, <s>, </s>");
    }
    Vocab vocab;
    for (std::size_t i = kReservedCount; i < tokens.size(); ++i) {
      if (vocab.find(tokens[i])) {
        throw FormatError("duplicate vocab token '" + tokens[i] + "' at position " +
                          std::to_string(i));
      }
      vocab.add(tokens[i]);
    }
    return vocab;
  }

  // Returns the id of `token`, inserting it at the end if new.
  TokenId add(const std::string& token) {
    if (auto it = index_.find(token); it != index_.end()) return it->second;
    auto id = static_cast<TokenId>(entries_.size());
    entries_.push_back(token);
    index_.emplace(token, id);
    return id;
  }

  std::optional<TokenId> find(std::string_view token) const {
    auto it = index_.find(std::string(token));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  TokenId id_or_unk(std::string_view token) const { return find(token).value_or(kUnk); }

  const std::string& token(TokenId id) const {
    check_token(id, entries_.size());
    return entries_[id];
  }

  std::size_t size() const { return entries_.size(); }
  const std::vector<std::string>& tokens() const { return entries_; }

  static bool is_reserved(TokenId id) { return id < kReservedCount; }

  friend bool operator==(const Vocab& a, const Vocab& b) { return a.entries_ == b.entries_; }

 private:
  std::vector<std::string> entries_;
  std::unordered_map<std::string, TokenId> index_;
};

// Splits text into surface tokens: Unicode whitespace separates words, then
// each leading and trailing ASCII punctuation character of a word becomes a
// token of its own. Words made only of punctuation split into single chars.
inline std::vector<std::string> split_surface(std::string_view text) {
  std::vector<std::string> out;
  for (std::string_view word : utf8::split_whitespace(text)) {
    std::size_t begin = 0;
    std::size_t end = word.size();
    while (begin < end && utf8::is_ascii_punct(word[begin])) ++begin;
    while (end > begin && utf8::is_ascii_punct(word[end - 1])) --end;
    for (std::size_t i = 0; i < begin; ++i) out.emplace_back(1, word[i]);
    if (begin < end) out.emplace_back(word.substr(begin, end - begin));
    for (std::size_t i = end; i < word.size(); ++i) out.emplace_back(1, word[i]);
  }
  return out;
}

// Reserved tokens plus every distinct surface token, ids assigned in order of
// first occurrence over the corpus.
inline Vocab build_vocab(std::span<const std::string> corpus) {
  Vocab vocab;
  for (const auto& record : corpus) {
    for (const auto& token : split_surface(record)) vocab.add(token);
  }
  return vocab;
}

// BOS + body + EOS. Unknown surface forms map to UNK.
inline TokenSequence tokenize(std::string_view text, const Vocab& vocab) {
  TokenSequence seq{Vocab::kBos};
  for (const auto& token : split_surface(text)) seq.push_back(vocab.id_or_unk(token));
  seq.push_back(Vocab::kEos);
  return seq;
}

// Like tokenize but without the trailing EOS, so the sequence can be continued.
inline TokenSequence tokenize_prompt(std::string_view text, const Vocab& vocab) {
  TokenSequence seq = tokenize(text, vocab);
  seq.pop_back();
  return seq;
}

inline std::string detokenize(std::span<const TokenId> seq, const Vocab& vocab) {
  std::string out;
  for (TokenId id : seq) {
    check_token(id, vocab.size());
    if (id == Vocab::kBos || id == Vocab::kEos) continue;
    if (!out.empty()) out.push_back(' ');
    out += vocab.token(id);
  }
  return out;
}

}  // namespace grad
