#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "grad/decoder.hpp"
#include "grad/graph_io.hpp"
#include "grad/replay_source.hpp"
#include "grad/toy_bigram.hpp"
#include "grad/trace.hpp"
#include "grad/vocab_io.hpp"
#include "support/oracles.hpp"

#ifndef GRAD_FIXTURE_DIR
#error "GRAD_FIXTURE_DIR must be defined"
#endif

namespace grad {
namespace {

const std::string kFixtures = GRAD_FIXTURE_DIR;

TEST(RetrieveGraphLogits, NoOutEdgesGivesZeros) {
  TransitionGraph g(5);
  g.add(4, 3, 1.0);
  EXPECT_EQ(retrieve_graph_logits(g, 3, 5), LogitVector(5, 0.0));
}

TEST(RetrieveGraphLogits, PlacesEdgeWeights) {
  TransitionGraph g(5);
  g.add(3, 4, 2.0);
  g.add(3, 2, 0.5);
  const TransitionGraph before = g;
  EXPECT_EQ(retrieve_graph_logits(g, 3, 5), (LogitVector{0, 0, 0.5, 0, 2.0}));
  EXPECT_EQ(g, before);
  EXPECT_THROW(retrieve_graph_logits(g, 5, 5), InvalidTokenError);
}

TEST(MaxNormalize, IntentScalesToModelMax) {
  auto r = max_normalize(LogitVector{0, 2, 4}, LogitVector{8, 1, 0}, NormMode::kIntent);
  EXPECT_EQ(r.values, (LogitVector{0, 4, 8}));
  EXPECT_EQ(r.scale_factor, 2.0);
}

TEST(MaxNormalize, LiteralFollowsPrintedRatio) {
  auto r = max_normalize(LogitVector{0, 2, 4}, LogitVector{8, 1, 0}, NormMode::kLiteral);
  EXPECT_EQ(r.values, (LogitVector{0, 1, 2}));
  EXPECT_EQ(r.scale_factor, 0.5);
}

TEST(MaxNormalize, NonPositiveMaximaAreInert) {
  for (auto mode : {NormMode::kIntent, NormMode::kLiteral}) {
    auto zero = max_normalize(LogitVector{0, 0, 0}, LogitVector{1, 2, 3}, mode);
    EXPECT_EQ(zero.values, LogitVector(3, 0.0));
    EXPECT_EQ(zero.scale_factor, 0.0);
    auto negative_graph = max_normalize(LogitVector{-1, -2, 0}, LogitVector{1, 2, 3}, mode);
    EXPECT_EQ(negative_graph.scale_factor, 0.0);
    auto negative_model = max_normalize(LogitVector{0, 2, 4}, LogitVector{-1, -2, -3}, mode);
    EXPECT_EQ(negative_model.values, LogitVector(3, 0.0));
    EXPECT_EQ(negative_model.scale_factor, 0.0);
  }
}

TEST(MaxNormalize, OverflowingRatioIsInert) {
  auto r = max_normalize(LogitVector{0, 1e-320}, LogitVector{1e300, 0}, NormMode::kIntent);
  EXPECT_EQ(r.scale_factor, 0.0);
  EXPECT_EQ(r.values, LogitVector(2, 0.0));
}

TEST(MaxNormalize, ShapeMismatch) {
  EXPECT_THROW(max_normalize(LogitVector{1, 2}, LogitVector{1}, NormMode::kIntent), ShapeError);
}

TEST(MaxNormalize, IntentMaxMatchesModelMaxProperty) {
  std::mt19937_64 rng(41);
  for (int t = 0; t < 2000; ++t) {
    std::size_t n = 1 + rng() % 40;
    auto graph = testing::random_vector(rng, n, -10, 10);
    auto model = testing::random_vector(rng, n, -10, 30);
    auto r = max_normalize(graph, model, NormMode::kIntent);
    if (r.scale_factor > 0) {
      double got = *std::max_element(r.values.begin(), r.values.end());
      double want = *std::max_element(model.begin(), model.end());
      ASSERT_TRUE(testing::close_rel(got, want, 1e-9)) << got << " vs " << want;
    } else {
      ASSERT_EQ(r.values, LogitVector(n, 0.0));
    }
  }
}

TEST(FuseAndSelect, AlphaZeroIsModelArgmax) {
  auto sel = fuse_and_select(LogitVector{0.2, 0.9, 0.1}, LogitVector{100, 0, 0}, 0.0);
  EXPECT_EQ(sel.token, 1u);
}

TEST(FuseAndSelect, WeightedCombination) {
  auto sel = fuse_and_select(LogitVector{1.0, 0.9, 0.1}, LogitVector{0, 1.0, 0}, 1.0);
  ASSERT_EQ(sel.final_logits.size(), 3u);
  EXPECT_DOUBLE_EQ(sel.final_logits[0], 1.0);
  EXPECT_DOUBLE_EQ(sel.final_logits[1], 1.9);
  EXPECT_DOUBLE_EQ(sel.final_logits[2], 0.1);
  EXPECT_EQ(sel.token, 1u);
}

TEST(FuseAndSelect, TieGoesToLowestId) {
  EXPECT_EQ(fuse_and_select(LogitVector{0, 2, 1, 2}, LogitVector{0, 0, 1, 0}, 1.0).token, 1u);
  EXPECT_EQ(fuse_and_select(LogitVector{3, 3, 3}, LogitVector{0, 0, 0}, 1.0).token, 0u);
}

TEST(FuseAndSelect, ArgmaxDominance) {
  // graph_norm is zero except at v; if model[v] + alpha * g[v] beats the model max, v wins.
  std::mt19937_64 rng(43);
  for (int t = 0; t < 500; ++t) {
    std::size_t n = 2 + rng() % 20;
    auto model = testing::random_vector(rng, n, -5, 5);
    TokenId v = static_cast<TokenId>(rng() % n);
    double alpha = testing::uniform(rng, 0.1, 3.0);
    double mmax = *std::max_element(model.begin(), model.end());
    LogitVector g(n, 0.0);
    g[v] = (mmax - model[v]) / alpha + testing::uniform(rng, 0.01, 1.0);
    ASSERT_EQ(fuse_and_select(model, g, alpha).token, v);
  }
}

TEST(FuseAndSelect, ShapeMismatch) {
  EXPECT_THROW(fuse_and_select(LogitVector{1}, LogitVector{1, 2}, 1.0), ShapeError);
}

TEST(DecoderConfig, RejectsInvalidValues) {
  DecoderConfig c;
  c.alpha = -0.1;
  EXPECT_THROW(c.validate(), ParameterError);
  c.alpha = 1;
  c.max_tokens = 0;
  EXPECT_THROW(c.validate(), ParameterError);
}

// Hand-traced fixture: vocab <unk> <s> </s> x y z, graph x->z 2.0, z->y 3.0,
// prompt <s> x, three scripted model rows.
//   step 1: model max 2.0 at y; graph row of x = {z: 2}; INTENT scale 1;
//           final z = 1.5 + 2 = 3.5 > y 2.0        -> z
//   step 2: model {</s>: 1, x: .5, y: 1}; graph row of z = {y: 3}; scale 1/3;
//           final y = 1 + 1 = 2 > </s> 1           -> y
//   step 3: graph row of y empty; model max at </s> -> </s>, stop
// Greedy instead picks y at step 1, then ties </s>/y at step 2 -> </s>.
TEST(Generate, HandTracedReplayFixture) {
  Vocab vocab = load_vocab(kFixtures + "/trace_vocab.json");
  TransitionGraph graph = load_graph(kFixtures + "/trace_graph.gttg");
  TokenSequence prompt = tokenize_prompt("x", vocab);
  ASSERT_EQ(prompt, (TokenSequence{1, 3}));

  for (auto mode : {NormMode::kIntent, NormMode::kLiteral}) {
    ReplaySource replay = load_replay(kFixtures + "/trace_replay.json");
    DecoderConfig config;
    config.norm_mode = mode;
    config.keep_vectors = true;
    Generation gen = generate(replay, graph, prompt, config);
    EXPECT_EQ(gen.continuation, (TokenSequence{5, 4, 2}));
    EXPECT_EQ(detokenize(gen.continuation, vocab), "z y");
    ASSERT_EQ(gen.steps.size(), 3u);
    if (mode == NormMode::kIntent) {
      EXPECT_EQ(gen.steps[0].scale_factor, 1.0);
      EXPECT_DOUBLE_EQ(gen.steps[1].scale_factor, 1.0 / 3.0);
      EXPECT_EQ(gen.steps[0].final_logits, (LogitVector{0, 0, 0.5, 1.0, 2.0, 3.5}));
    } else {
      EXPECT_EQ(gen.steps[1].scale_factor, 3.0);
    }
    EXPECT_FALSE(gen.steps[2].fused_active);
    EXPECT_EQ(gen.steps[0].position, 2u);
  }

  ReplaySource replay = load_replay(kFixtures + "/trace_replay.json");
  DecoderConfig greedy;
  greedy.alpha = 0;
  EXPECT_EQ(generate(replay, graph, prompt, greedy).continuation, (TokenSequence{4, 2}));
}

TEST(Generate, ImmediateStop) {
  ReplaySource replay(4, {{0, 0, 5, 1}});
  DecoderConfig config;
  config.max_tokens = 100;
  auto gen = generate(replay, TransitionGraph(4), TokenSequence{1}, config);
  EXPECT_EQ(gen.continuation, (TokenSequence{Vocab::kEos}));
}

TEST(Generate, MaxTokensCap) {
  ToyBigramModel m(5);
  m.observe(TokenSequence{3, 4, 3, 4, 3});
  DecoderConfig config;
  config.max_tokens = 7;
  auto gen = generate(m, TransitionGraph(5), TokenSequence{1, 3}, config);
  EXPECT_EQ(gen.continuation, (TokenSequence{4, 3, 4, 3, 4, 3, 4}));
}

TEST(Generate, RejectsBadInputs) {
  ToyBigramModel m(5);
  DecoderConfig config;
  EXPECT_THROW(generate(m, TransitionGraph(5), TokenSequence{}, config), SequenceTooShortError);
  EXPECT_THROW(generate(m, TransitionGraph(6), TokenSequence{1}, config), IncompatibleArtifactsError);
  EXPECT_THROW(generate(m, TransitionGraph(5), TokenSequence{9}, config), InvalidTokenError);
  config.alpha = -1;
  EXPECT_THROW(generate(m, TransitionGraph(5), TokenSequence{1}, config), ParameterError);
}

TEST(Generate, PropagatesSourceErrors) {
  ReplaySource replay(4, {{0, 0, 0, 1}});
  DecoderConfig config;
  config.max_tokens = 3;
  EXPECT_THROW(generate(replay, TransitionGraph(4), TokenSequence{1}, config), ReplayUnderrunError);
}

struct RandomSetup {
  Vocab vocab;
  ToyBigramModel model;
  TransitionGraph graph;
  TokenSequence prompt;
  double offset;
};

RandomSetup random_setup(std::mt19937_64& rng) {
  auto model_corpus = testing::random_corpus(rng, 5 + rng() % 20, 3 + rng() % 10, 8);
  auto graph_corpus = testing::random_corpus(rng, 5 + rng() % 20, 3 + rng() % 10, 8);
  auto all = model_corpus;
  all.insert(all.end(), graph_corpus.begin(), graph_corpus.end());
  Vocab vocab = build_vocab(all);
  ToyBigramModel model = fit_toy_model(testing::tokenize_all(model_corpus, vocab), vocab,
                                       testing::uniform(rng, 0.2, 2.0));
  double offset = testing::uniform(rng, -1.0, 8.0);
  ShiftedSource src(model, offset);
  TransitionGraph graph = build_graph(graph_corpus, vocab, src);
  TokenSequence prompt = tokenize_prompt(testing::random_corpus(rng, 1, 12, 4)[0], vocab);
  return {vocab, model, graph, prompt, offset};
}

TEST(Generate, GreedyEquivalenceProperty) {
  std::mt19937_64 rng(47);
  for (int t = 0; t < 100; ++t) {
    RandomSetup s = random_setup(rng);
    ShiftedSource src(s.model, s.offset);
    DecoderConfig config;
    config.max_tokens = 12;
    config.alpha = 0;
    auto expected = testing::greedy_oracle(src, s.prompt, config.max_tokens);
    ASSERT_EQ(generate(src, s.graph, s.prompt, config).continuation, expected);
    config.alpha = testing::uniform(rng, 0.0, 5.0);
    ASSERT_EQ(generate(src, TransitionGraph(s.vocab.size()), s.prompt, config).continuation, expected);
  }
}

TEST(Generate, TraceConsistencyAndDeterminism) {
  std::mt19937_64 rng(53);
  for (int t = 0; t < 50; ++t) {
    RandomSetup s = random_setup(rng);
    ShiftedSource src(s.model, s.offset);
    DecoderConfig config;
    config.max_tokens = 10;
    config.alpha = testing::uniform(rng, 0.0, 3.0);
    config.norm_mode = rng() % 2 ? NormMode::kIntent : NormMode::kLiteral;
    config.keep_vectors = true;
    auto a = generate(src, s.graph, s.prompt, config);
    auto b = generate(src, s.graph, s.prompt, config);
    ASSERT_EQ(a.continuation, b.continuation);
    ASSERT_EQ(a.steps.size(), b.steps.size());
    for (std::size_t i = 0; i < a.steps.size(); ++i) {
      const auto& step = a.steps[i];
      ASSERT_EQ(step.chosen, argmax(step.final_logits));
      ASSERT_EQ(step.chosen, a.continuation[i]);
      ASSERT_EQ(step.final_logits, b.steps[i].final_logits);
      ASSERT_EQ(step.scale_factor, b.steps[i].scale_factor);
      if (config.norm_mode == NormMode::kIntent && step.scale_factor > 0) {
        double got = *std::max_element(step.graph_norm.begin(), step.graph_norm.end());
        double want = *std::max_element(step.model_logits.begin(), step.model_logits.end());
        ASSERT_TRUE(testing::close_rel(got, want, 1e-9));
      }
    }
  }
}

TEST(Trace, JsonLinesWithTopK) {
  Vocab vocab = load_vocab(kFixtures + "/trace_vocab.json");
  TransitionGraph graph = load_graph(kFixtures + "/trace_graph.gttg");
  ReplaySource replay = load_replay(kFixtures + "/trace_replay.json");
  DecoderConfig config;
  config.keep_vectors = true;
  auto gen = generate(replay, graph, TokenSequence{1, 3}, config);
  std::ostringstream out;
  write_trace_jsonl(out, gen.steps, 2);
  std::istringstream in(out.str());
  std::string first;
  std::getline(in, first);
  auto line = nlohmann::json::parse(first);
  EXPECT_EQ(line["position"], 2);
  EXPECT_EQ(line["chosen"], 5);
  EXPECT_EQ(line["scale_factor"], 1.0);
  EXPECT_EQ(line["fused_active"], true);
  EXPECT_EQ(line["top_final"], nlohmann::json::parse("[[5,3.5],[4,2.0]]"));
  EXPECT_EQ(line["top_graph"], nlohmann::json::parse("[[5,2.0],[0,0.0]]"));
  const std::string text = out.str();
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 3);
}

}  // namespace
}  // namespace grad
