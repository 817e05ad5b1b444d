#pragma once

#include <chrono>
#include <cmath>
#include <istream>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <utility>

#include "json.hpp"

#include "grad/logit_source.hpp"
#include "grad/subprocess.hpp"
#include "grad/types.hpp"

// JSON-lines protocol between GRAD and an external logit server. Every
// request gets exactly one response line, in order:
//
//   {"type":"hello"}                               -> {"type":"hello","vocab_size":N}
//   {"type":"next_logits","tokens":[ids]}          -> {"type":"next_logits","logits":[N floats]}
//   {"type":"transition_scores","tokens":[ids]}    -> {"type":"transition_scores","scores":[n-1 floats]}
//   {"type":"shutdown"}                            -> {"type":"shutdown"}
//
// Any request may instead be answered with {"type":"error","message":"..."}.
namespace grad::bridge {

using nlohmann::json;

inline std::string request_line(std::string_view type) { return json{{"type", type}}.dump() + "\n"; }

inline std::string request_line(std::string_view type, std::span<const TokenId> tokens) {
  return json{{"type", type}, {"tokens", std::vector<TokenId>(tokens.begin(), tokens.end())}}.dump() + "\n";
}

inline std::string error_line(std::string_view message) {
  return json{{"type", "error"}, {"message", message}}.dump() + "\n";
}

namespace detail {

inline std::string quote_excerpt(std::string_view bytes) {
  constexpr std::size_t kMax = 120;
  std::string shown(bytes.substr(0, kMax));
  if (bytes.size() > kMax) shown += "...";
  // dump() escapes control characters and invalid bytes are replaced.
  return json(shown).dump(-1, ' ', false, json::error_handler_t::replace);
}

inline json parse_message(std::string_view line) {
  json msg = json::parse(line, nullptr, false);
  if (msg.is_discarded() || !msg.is_object()) {
    throw ProtocolError("bridge sent a line that is not a JSON object: " + quote_excerpt(line));
  }
  if (!msg.contains("type") || !msg["type"].is_string()) {
    throw ProtocolError("bridge message lacks a string \"type\": " + quote_excerpt(line));
  }
  return msg;
}

inline std::vector<double> number_array(const json& msg, const char* field, std::size_t expected,
                                        std::string_view what) {
  if (!msg.contains(field) || !msg[field].is_array()) {
    throw ProtocolError(std::string(what) + " response lacks a \"" + field + "\" array");
  }
  const json& arr = msg[field];
  if (arr.size() != expected) {
    throw ProtocolError(std::string(what) + " response has " + std::to_string(arr.size()) +
                        " values, expected " + std::to_string(expected));
  }
  std::vector<double> out;
  out.reserve(arr.size());
  for (const auto& x : arr) {
    if (!x.is_number()) throw ProtocolError(std::string(what) + " response contains a non-number");
    double v = x.get<double>();
    if (!std::isfinite(v)) throw ProtocolError(std::string(what) + " response contains NaN or Inf");
    out.push_back(v);
  }
  return out;
}

}  // namespace detail

struct ClientOptions {
  std::chrono::milliseconds timeout{30000};
  // When set, the handshake fails unless the server declares this size.
  std::optional<std::size_t> expected_vocab_size;
};

// Logit source backed by a child process speaking the protocol above.
// One request is outstanding at a time.
class Client {
 public:
  // Spawns `command` and completes the hello handshake.
  static Client spawn(const std::string& command, ClientOptions options = {}) {
    return Client(std::make_unique<Subprocess>(command), options);
  }

  Client(Client&&) noexcept = default;
  Client& operator=(Client&&) noexcept = default;
  ~Client() {
    try {
      shutdown();
    } catch (...) {
    }
  }

  std::size_t vocab_size() const { return vocab_size_; }

  LogitVector next_logits(std::span<const TokenId> prefix) {
    check_tokens(prefix, vocab_size_);
    json msg = round_trip(request_line("next_logits", prefix), "next_logits");
    return detail::number_array(msg, "logits", vocab_size_, "next_logits");
  }

  TransitionScores transition_scores(std::span<const TokenId> seq) {
    if (seq.size() < 2) throw SequenceTooShortError("transition_scores: sequence needs at least 2 tokens");
    check_tokens(seq, vocab_size_);
    json msg = round_trip(request_line("transition_scores", seq), "transition_scores");
    return detail::number_array(msg, "scores", seq.size() - 1, "transition_scores");
  }

  // Asks the server to exit and reaps it. Safe to call more than once.
  void shutdown() {
    if (!process_ || !process_->running()) return;
    try {
      process_->write_all(request_line("shutdown"));
      process_->read_line(std::chrono::milliseconds(2000));
    } catch (const BridgeError&) {
    }
    process_->terminate();
  }

 private:
  Client(std::unique_ptr<Subprocess> process, ClientOptions options)
      : process_(std::move(process)), options_(options) {
    json msg = round_trip(request_line("hello"), "hello");
    if (!msg.contains("vocab_size") || !msg["vocab_size"].is_number_unsigned() ||
        msg["vocab_size"].get<std::size_t>() == 0) {
      throw ProtocolError("hello response lacks a positive integer \"vocab_size\"");
    }
    vocab_size_ = msg["vocab_size"].get<std::size_t>();
    if (options_.expected_vocab_size && *options_.expected_vocab_size != vocab_size_) {
      throw IncompatibleArtifactsError("bridge declares vocab size " + std::to_string(vocab_size_) +
                                       " but local artifacts use " +
                                       std::to_string(*options_.expected_vocab_size));
    }
  }

  json round_trip(const std::string& request, std::string_view expected_type) {
    if (!process_ || !process_->running()) throw BridgeError("bridge is not running");
    json msg;
    try {
      process_->write_all(request);
      msg = detail::parse_message(process_->read_line(options_.timeout));
    } catch (const BridgeError&) {
      // The stream is out of step now; later responses cannot be trusted.
      process_->terminate(std::chrono::milliseconds(0));
      throw;
    }
    const auto& type = msg["type"].get_ref<const std::string&>();
    if (type == "error") {
      std::string message = msg.contains("message") && msg["message"].is_string()
                                ? msg["message"].get<std::string>()
                                : std::string("(no message)");
      throw BridgeError("bridge reported an error: " + message);
    }
    if (type != expected_type) {
      throw ProtocolError("expected a \"" + std::string(expected_type) + "\" response, got \"" + type + "\"");
    }
    return msg;
  }

  std::unique_ptr<Subprocess> process_;
  ClientOptions options_;
  std::size_t vocab_size_ = 0;
};

// Server side: answers one request line using `source`. Never throws for bad
// input; failures become error responses. Sets `stop` on shutdown.
template <LogitSource S>
std::string handle_request(S& source, std::string_view line, bool& stop) {
  json req = json::parse(line, nullptr, false);
  if (req.is_discarded() || !req.is_object() || !req.contains("type") || !req["type"].is_string()) {
    return error_line("malformed request: " + detail::quote_excerpt(line));
  }
  const auto& type = req["type"].get_ref<const std::string&>();
  try {
    if (type == "hello") return json{{"type", "hello"}, {"vocab_size", source.vocab_size()}}.dump() + "\n";
    if (type == "shutdown") {
      stop = true;
      return json{{"type", "shutdown"}}.dump() + "\n";
    }
    if (type == "next_logits" || type == "transition_scores") {
      if (!req.contains("tokens") || !req["tokens"].is_array()) return error_line("request lacks \"tokens\"");
      TokenSequence tokens;
      for (const auto& t : req["tokens"]) {
        if (!t.is_number_unsigned()) return error_line("token ids must be non-negative integers");
        auto id = t.get<std::uint64_t>();
        if (id >= source.vocab_size()) return error_line("token id " + std::to_string(id) + " out of range");
        tokens.push_back(static_cast<TokenId>(id));
      }
      if (type == "next_logits") {
        return json{{"type", "next_logits"}, {"logits", grad::next_logits(source, tokens)}}.dump() + "\n";
      }
      return json{{"type", "transition_scores"}, {"scores", grad::transition_scores(source, tokens)}}.dump() +
             "\n";
    }
  } catch (const std::exception& e) {
    return error_line(e.what());
  }
  return error_line("unknown request type \"" + type + "\"");
}

// Serves requests line by line until shutdown or end of input.
template <LogitSource S>
void serve(S& source, std::istream& in, std::ostream& out) {
  std::string line;
  bool stop = false;
  while (!stop && std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    out << handle_request(source, line, stop);
    out.flush();
  }
}

}  // namespace grad::bridge
