// Minimal end-to-end use of the library: fit a toy model on a corpus that
// gets one fact wrong, build a graph from a corpus that gets it right, and
// compare plain greedy decoding with graph-steered decoding.

#include <iostream>
#include <string>
#include <vector>

#include "grad/grad.hpp"

int main() {
  const std::vector<std::string> model_corpus{"the capital of france is lyon .",
                                              "the capital of spain is madrid ."};
  const std::vector<std::string> evidence{"the capital of france is paris ."};

  std::vector<std::string> all = model_corpus;
  all.insert(all.end(), evidence.begin(), evidence.end());
  const grad::Vocab vocab = grad::build_vocab(all);

  std::vector<grad::TokenSequence> seqs;
  for (const auto& r : model_corpus) seqs.push_back(grad::tokenize(r, vocab));
  const auto model = grad::fit_toy_model(seqs, vocab);
  grad::ShiftedSource source(model, grad::raw_logit_offset(vocab.size()));

  const auto graph = grad::build_graph(evidence, vocab, source);
  const auto s = grad::stats(graph, evidence.size());
  std::cout << "graph: " << s.nodes << " nodes, " << s.edges << " edges\n";

  const auto prompt = grad::tokenize_prompt("the capital of france is", vocab);
  for (double alpha : {0.0, 1.0}) {
    grad::DecoderConfig config;
    config.alpha = alpha;
    config.max_tokens = 1;
    auto gen = grad::generate(source, graph, prompt, config);
    std::cout << "alpha=" << alpha << ": " << grad::detokenize(gen.continuation, vocab) << '\n';
  }
}
