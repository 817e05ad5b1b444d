#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "grad/logit_source.hpp"
#include "grad/transition_graph.hpp"
#include "grad/types.hpp"
#include "grad/vocab.hpp"

namespace grad {

// How graph logits are rescaled before fusion.
//   kIntent:  graph * (max model / max graph), so the rescaled max equals the
//             model max.
//   kLiteral: graph * (max graph / max model).
enum class NormMode { kIntent, kLiteral };

struct DecoderConfig {
  double alpha = 1.0;
  NormMode norm_mode = NormMode::kIntent;
  std::size_t max_tokens = 64;
  std::vector<TokenId> stop_tokens{Vocab::kEos};
  // Keep the four per-step vectors in each StepTrace.
  bool keep_vectors = false;

  void validate() const {
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ParameterError("alpha must be finite and >= 0");
    if (max_tokens < 1) throw ParameterError("max_tokens must be >= 1");
  }
};

struct StepTrace {
  std::size_t position = 0;
  TokenId chosen = 0;
  double scale_factor = 0.0;
  bool fused_active = false;
  LogitVector model_logits;
  LogitVector graph_logits;
  LogitVector graph_norm;
  LogitVector final_logits;
};

struct Generation {
  TokenSequence continuation;
  std::vector<StepTrace> steps;
};

// Dense row of out-edge weights of `last`, zero for absent edges.
inline LogitVector retrieve_graph_logits(const TransitionGraph& graph, TokenId last,
                                         std::size_t vocab_size) {
  check_token(last, vocab_size);
  if (graph.vocab_size() != vocab_size) {
    throw IncompatibleArtifactsError("graph vocab size " + std::to_string(graph.vocab_size()) +
                                     " does not match " + std::to_string(vocab_size));
  }
  LogitVector out(vocab_size, 0.0);
  for (const auto& [v, w] : graph.out_edges(last)) out[v] = w;
  return out;
}

struct NormalizedGraphLogits {
  LogitVector values;
  double scale_factor = 0.0;
};

// Rescales graph logits against the model logits. When either maximum is
// non-positive (or the ratio overflows) the result is all zero with scale 0,
// which leaves the model logits untouched.
inline NormalizedGraphLogits max_normalize(std::span<const double> graph_logits,
                                           std::span<const double> model_logits, NormMode mode) {
  if (graph_logits.size() != model_logits.size()) {
    throw ShapeError("max_normalize: graph has " + std::to_string(graph_logits.size()) +
                     " logits, model has " + std::to_string(model_logits.size()));
  }
  NormalizedGraphLogits out{LogitVector(graph_logits.size(), 0.0), 0.0};
  if (graph_logits.empty()) return out;
  double gmax = *std::max_element(graph_logits.begin(), graph_logits.end());
  double mmax = *std::max_element(model_logits.begin(), model_logits.end());
  if (!(gmax > 0.0) || !(mmax > 0.0)) return out;

  double scale = mode == NormMode::kIntent ? mmax / gmax : gmax / mmax;
  if (!std::isfinite(scale) || !(scale > 0.0)) return out;
  for (std::size_t i = 0; i < graph_logits.size(); ++i) {
    double v = graph_logits[i] * scale;
    if (!std::isfinite(v)) return {LogitVector(graph_logits.size(), 0.0), 0.0};
    out.values[i] = v;
  }
  out.scale_factor = scale;
  return out;
}

// Index of the largest value; ties go to the lowest index.
inline TokenId argmax(std::span<const double> values) {
  if (values.empty()) throw ShapeError("argmax of an empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return static_cast<TokenId>(best);
}

struct Selection {
  TokenId token = 0;
  LogitVector final_logits;
};

// final = model + alpha * graph_norm, then greedy argmax.
inline Selection fuse_and_select(std::span<const double> model_logits,
                                 std::span<const double> graph_norm, double alpha) {
  if (model_logits.size() != graph_norm.size()) {
    throw ShapeError("fuse_and_select: model has " + std::to_string(model_logits.size()) +
                     " logits, graph has " + std::to_string(graph_norm.size()));
  }
  if (!(alpha >= 0.0)) throw ParameterError("alpha must be >= 0");
  Selection out;
  out.final_logits.resize(model_logits.size());
  for (std::size_t i = 0; i < model_logits.size(); ++i) {
    out.final_logits[i] = model_logits[i] + alpha * graph_norm[i];
  }
  out.token = argmax(out.final_logits);
  return out;
}

// Greedy generation steered by the graph. Each step conditions the graph on
// the last token only; the source sees the whole prefix. Stops after a stop
// token (which is kept) or after max_tokens tokens.
template <LogitSource S>
Generation generate(S& source, const TransitionGraph& graph, std::span<const TokenId> prompt,
                    const DecoderConfig& config) {
  config.validate();
  if (prompt.empty()) throw SequenceTooShortError("generate: prompt must be non-empty");
  const std::size_t vocab_size = source.vocab_size();
  if (graph.vocab_size() != vocab_size) {
    throw IncompatibleArtifactsError("graph vocab size " + std::to_string(graph.vocab_size()) +
                                     " does not match logit source vocab size " +
                                     std::to_string(vocab_size));
  }
  check_tokens(prompt, vocab_size);
  check_tokens(config.stop_tokens, vocab_size);

  TokenSequence context(prompt.begin(), prompt.end());
  Generation out;
  for (std::size_t step = 0; step < config.max_tokens; ++step) {
    LogitVector model = next_logits(source, context);
    LogitVector graph_logits = retrieve_graph_logits(graph, context.back(), vocab_size);
    NormalizedGraphLogits norm = max_normalize(graph_logits, model, config.norm_mode);
    Selection sel = fuse_and_select(model, norm.values, config.alpha);

    StepTrace trace;
    trace.position = context.size();
    trace.chosen = sel.token;
    trace.scale_factor = norm.scale_factor;
    trace.fused_active = norm.scale_factor > 0.0 && config.alpha > 0.0;
    if (config.keep_vectors) {
      trace.model_logits = std::move(model);
      trace.graph_logits = std::move(graph_logits);
      trace.graph_norm = std::move(norm.values);
      trace.final_logits = std::move(sel.final_logits);
    }
    out.steps.push_back(std::move(trace));

    context.push_back(sel.token);
    out.continuation.push_back(sel.token);
    if (std::find(config.stop_tokens.begin(), config.stop_tokens.end(), sel.token) !=
        config.stop_tokens.end()) {
      break;
    }
  }
  return out;
}

inline const char* to_string(NormMode mode) { return mode == NormMode::kIntent ? "intent" : "literal"; }

inline NormMode parse_norm_mode(std::string_view text) {
  if (text == "intent") return NormMode::kIntent;
  if (text == "literal") return NormMode::kLiteral;
  throw ParameterError("unknown normalization mode '" + std::string(text) + "' (expected intent|literal)");
}

}  // namespace grad
