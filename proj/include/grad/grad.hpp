#pragma once

#include "grad/benchmark.hpp"
#include "grad/bridge.hpp"
#include "grad/decoder.hpp"
#include "grad/errors.hpp"
#include "grad/eval_harness.hpp"
#include "grad/graph_io.hpp"
#include "grad/io.hpp"
#include "grad/logit_source.hpp"
#include "grad/replay_source.hpp"
#include "grad/toy_bigram.hpp"
#include "grad/trace.hpp"
#include "grad/transition_graph.hpp"
#include "grad/types.hpp"
#include "grad/vocab.hpp"
#include "grad/vocab_io.hpp"
