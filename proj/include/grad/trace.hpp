#pragma once

#include <algorithm>
#include <numeric>
#include <ostream>
#include <span>
#include <utility>
#include <vector>

#include "json.hpp"

#include "grad/decoder.hpp"

namespace grad {

// Highest `k` entries as (id, logit), ordered by value then lowest id.
inline std::vector<std::pair<TokenId, double>> top_k(std::span<const double> values, std::size_t k) {
  std::vector<TokenId> ids(values.size());
  std::iota(ids.begin(), ids.end(), TokenId{0});
  k = std::min(k, ids.size());
  std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(k), ids.end(),
                    [&](TokenId a, TokenId b) { return values[a] > values[b] || (values[a] == values[b] && a < b); });
  std::vector<std::pair<TokenId, double>> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) out.emplace_back(ids[i], values[ids[i]]);
  return out;
}

// One JSON object per line. The top-k lists are present only when the trace
// kept its vectors.
inline void write_trace_jsonl(std::ostream& out, std::span<const StepTrace> steps, std::size_t k = 5) {
  for (const auto& step : steps) {
    nlohmann::json line{{"position", step.position},
                        {"chosen", step.chosen},
                        {"scale_factor", step.scale_factor},
                        {"fused_active", step.fused_active}};
    auto add = [&](const char* name, const LogitVector& v) {
      if (v.empty() || k == 0) return;
      auto& arr = line[name] = nlohmann::json::array();
      for (const auto& [id, logit] : top_k(v, k)) arr.push_back({id, logit});
    };
    add("top_model", step.model_logits);
    add("top_graph", step.graph_logits);
    add("top_graph_norm", step.graph_norm);
    add("top_final", step.final_logits);
    out << line.dump() << '\n';
  }
}

}  // namespace grad
