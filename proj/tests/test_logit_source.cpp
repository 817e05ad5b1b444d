#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "grad/logit_source.hpp"
#include "grad/replay_source.hpp"
#include "grad/toy_bigram.hpp"
#include "support/oracles.hpp"

namespace grad {
namespace {

// vocab: <unk> <s> </s> a b
Vocab ab_vocab() { return build_vocab(std::vector<std::string>{"a b"}); }

TEST(ToyModel, EmptyCorpusHasZeroCounts) {
  Vocab v = ab_vocab();
  ToyBigramModel m = fit_toy_model(std::vector<TokenSequence>{}, v, 1.0);
  for (TokenId u = 0; u < v.size(); ++u) {
    EXPECT_EQ(m.rowsum(u), 0u);
    for (TokenId w = 0; w < v.size(); ++w) EXPECT_EQ(m.count(u, w), 0u);
  }
}

TEST(ToyModel, CountsAdjacentPairs) {
  Vocab v = ab_vocab();
  std::vector<TokenSequence> corpus{{1, 3, 4, 2}, {1, 3, 4, 2}};
  ToyBigramModel m = fit_toy_model(corpus, v, 1.0);
  EXPECT_EQ(m.count(3, 4), 2u);
  EXPECT_EQ(m.count(1, 3), 2u);
  EXPECT_EQ(m.count(4, 2), 2u);
  EXPECT_EQ(m.count(4, 3), 0u);
  EXPECT_EQ(m.rowsum(3), 2u);
}

TEST(ToyModel, FitIsOrderIndependent) {
  std::mt19937_64 rng(3);
  auto texts = testing::random_corpus(rng, 40, 8, 6);
  Vocab v = build_vocab(texts);
  auto corpus = testing::tokenize_all(texts, v);
  ToyBigramModel a = fit_toy_model(corpus, v);
  std::reverse(corpus.begin(), corpus.end());
  std::shuffle(corpus.begin(), corpus.end(), rng);
  ToyBigramModel b = fit_toy_model(corpus, v);
  for (TokenId u = 0; u < v.size(); ++u) {
    EXPECT_EQ(a.next_logits(TokenSequence{u}), b.next_logits(TokenSequence{u}));
  }
}

TEST(ToyModel, UnseenRowIsUniform) {
  Vocab v = ab_vocab();
  ToyBigramModel m(v.size(), 1.0);
  for (double x : m.next_logits(TokenSequence{3})) EXPECT_DOUBLE_EQ(x, std::log(1.0 / 5.0));
}

TEST(ToyModel, SmoothedLogitMatchesFormula) {
  Vocab v = ab_vocab();
  ToyBigramModel m = fit_toy_model(std::vector<TokenSequence>{{3, 4}, {3, 4}}, v, 1.0);
  LogitVector row = m.next_logits(TokenSequence{1, 3});
  EXPECT_DOUBLE_EQ(row[4], std::log(3.0 / 7.0));
  EXPECT_DOUBLE_EQ(row[2], std::log(1.0 / 7.0));
}

TEST(ToyModel, ExpOfLogitsSumsToOne) {
  std::mt19937_64 rng(11);
  auto texts = testing::random_corpus(rng, 30, 10, 8);
  Vocab v = build_vocab(texts);
  ToyBigramModel m = fit_toy_model(testing::tokenize_all(texts, v), v, 0.5);
  for (TokenId u = 0; u < v.size(); ++u) {
    double sum = 0;
    for (double x : m.next_logits(TokenSequence{u})) sum += std::exp(x);
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST(ToyModel, RejectsBadSmoothing) {
  EXPECT_THROW(ToyBigramModel(5, 0.0), ParameterError);
  EXPECT_THROW(ToyBigramModel(5, -1.0), ParameterError);
}

TEST(TransitionScores, LengthTwoIsOneLookup) {
  Vocab v = ab_vocab();
  ToyBigramModel m = fit_toy_model(std::vector<TokenSequence>{{1, 3, 4, 2}}, v);
  TokenSequence seq{3, 4};
  auto scores = transition_scores(m, seq);
  ASSERT_EQ(scores.size(), 1u);
  EXPECT_EQ(scores[0], next_logits(m, TokenSequence{3})[4]);
}

TEST(TransitionScores, ToyModelPerPositionFormula) {
  Vocab v = ab_vocab();
  std::vector<TokenSequence> corpus{{1, 3, 4, 2}, {1, 3, 4, 2}};
  ToyBigramModel m = fit_toy_model(corpus, v, 1.0);
  auto scores = transition_scores(m, corpus[0]);
  // Every row the sequence visits has one successor seen twice: (2+1)/(2+5).
  ASSERT_EQ(scores.size(), 3u);
  for (double s : scores) EXPECT_DOUBLE_EQ(s, std::log(3.0 / 7.0));
}

TEST(TransitionScores, TooShortSequence) {
  ToyBigramModel m(5);
  EXPECT_THROW(transition_scores(m, TokenSequence{1}), SequenceTooShortError);
  EXPECT_THROW(transition_scores(m, TokenSequence{}), SequenceTooShortError);
}

TEST(TransitionScores, AgreesWithNextLogitsOnRandomCorpora) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    auto texts = testing::random_corpus(rng, 15, 6, 7);
    Vocab v = build_vocab(texts);
    auto seqs = testing::tokenize_all(texts, v);
    ToyBigramModel m = fit_toy_model(seqs, v, testing::uniform(rng, 0.1, 2.0));
    ShiftedSource shifted(m, testing::uniform(rng, -3.0, 3.0));
    for (const auto& seq : seqs) {
      auto fast = transition_scores(shifted, seq);
      for (std::size_t i = 0; i + 1 < seq.size(); ++i) {
        TokenSequence prefix(seq.begin(), seq.begin() + static_cast<std::ptrdiff_t>(i) + 1);
        ASSERT_EQ(fast[i], next_logits(shifted, prefix)[seq[i + 1]]);
      }
    }
  }
}

TEST(NextLogits, ValidatesPrefix) {
  ToyBigramModel m(5);
  EXPECT_THROW(next_logits(m, TokenSequence{}), SequenceTooShortError);
  EXPECT_THROW(next_logits(m, TokenSequence{1, 7}), InvalidTokenError);
}

TEST(ShiftedSource, PreservesArgmaxAndShiftsValues) {
  Vocab v = ab_vocab();
  ToyBigramModel m = fit_toy_model(std::vector<TokenSequence>{{1, 3, 4, 2}}, v);
  ShiftedSource s(m, 2.5);
  auto base = next_logits(m, TokenSequence{3});
  auto shifted = next_logits(s, TokenSequence{3});
  for (std::size_t i = 0; i < base.size(); ++i) EXPECT_EQ(shifted[i], base[i] + 2.5);
  EXPECT_DOUBLE_EQ(raw_logit_offset(5), std::log(5.0) + 1.0);
}

TEST(ReplaySource, ReturnsStepsInOrderThenUnderruns) {
  ReplaySource r(3, {{1.0, 2.0, 3.0}, {0.5, 0.25, 0.125}});
  EXPECT_EQ(next_logits(r, TokenSequence{1}), (LogitVector{1.0, 2.0, 3.0}));
  EXPECT_EQ(next_logits(r, TokenSequence{1, 2}), (LogitVector{0.5, 0.25, 0.125}));
  EXPECT_THROW(next_logits(r, TokenSequence{1}), ReplayUnderrunError);
  r.rewind();
  EXPECT_EQ(r.remaining(), 2u);
}

TEST(ReplaySource, TransitionScoresConsumeOneStepPerPosition) {
  ReplaySource r(3, {{1.0, 2.0, 3.0}, {4.0, 5.0, 6.0}});
  EXPECT_EQ(transition_scores(r, TokenSequence{0, 2, 1}), (TransitionScores{3.0, 5.0}));
}

TEST(ReplaySource, JsonLoadingValidates) {
  auto r = replay_from_json(R"({"vocab_size": 2, "steps": [[0.5, -1.0]]})");
  EXPECT_EQ(r.vocab_size(), 2u);
  EXPECT_THROW(replay_from_json(R"({"vocab_size": 2, "steps": [[0.5]]})"), FormatError);
  EXPECT_THROW(replay_from_json(R"({"vocab_size": 2, "steps": [[0.5, 1e999]]})"), FormatError);
  EXPECT_THROW(replay_from_json(R"({"steps": []})"), FormatError);
}

TEST(AnySource, DispatchesToWrappedSource) {
  Vocab v = ab_vocab();
  ToyBigramModel m = fit_toy_model(std::vector<TokenSequence>{{1, 3, 4, 2}}, v);
  AnySource any(m);
  EXPECT_EQ(any.vocab_size(), 5u);
  EXPECT_EQ(any.next_logits(TokenSequence{3}), m.next_logits(TokenSequence{3}));
  EXPECT_EQ(any.transition_scores(TokenSequence{1, 3, 4}), m.transition_scores(TokenSequence{1, 3, 4}));
}

}  // namespace
}  // namespace grad
