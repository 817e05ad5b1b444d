#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <string_view>

#include "json.hpp"

#include "grad/io.hpp"
#include "grad/transition_graph.hpp"

namespace grad {

// Binary graph file, all integers little-endian:
//   "GTTG" | u8 version=1 | u32 vocab_size | u64 edge_count |
//   edge_count x (u32 src | u32 dst | f64 weight), sorted by (src, dst).
inline constexpr std::string_view kGraphMagic = "GTTG";
inline constexpr std::uint8_t kGraphVersion = 1;
inline constexpr std::size_t kGraphHeaderSize = 4 + 1 + 4 + 8;
inline constexpr std::size_t kGraphRecordSize = 4 + 4 + 8;

namespace detail {

template <class T>
void put_le(std::string& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>(static_cast<std::uint8_t>(value >> (8 * i))));
  }
}

template <class T>
T get_le(std::string_view in, std::size_t offset) {
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    value |= static_cast<T>(static_cast<std::uint8_t>(in[offset + i])) << (8 * i);
  }
  return value;
}

}  // namespace detail

inline std::string encode_graph(const TransitionGraph& graph) {
  if (graph.vocab_size() > std::numeric_limits<std::uint32_t>::max()) {
    throw FormatError("vocab size does not fit the graph file format");
  }
  std::string out;
  out.reserve(kGraphHeaderSize + graph.edge_count() * kGraphRecordSize);
  out += kGraphMagic;
  out.push_back(static_cast<char>(kGraphVersion));
  detail::put_le(out, static_cast<std::uint32_t>(graph.vocab_size()));
  detail::put_le(out, static_cast<std::uint64_t>(graph.edge_count()));
  graph.for_each_edge([&](TokenId u, TokenId v, double w) {
    detail::put_le(out, static_cast<std::uint32_t>(u));
    detail::put_le(out, static_cast<std::uint32_t>(v));
    detail::put_le(out, std::bit_cast<std::uint64_t>(w));
  });
  return out;
}

inline TransitionGraph decode_graph(std::string_view data) {
  if (data.size() < kGraphHeaderSize || data.substr(0, 4) != kGraphMagic) {
    throw FormatError("not a graph file (missing GTTG header)");
  }
  auto version = static_cast<std::uint8_t>(data[4]);
  if (version != kGraphVersion) {
    throw FormatError("unsupported graph file version " + std::to_string(version));
  }
  auto vocab_size = detail::get_le<std::uint32_t>(data, 5);
  auto edge_count = detail::get_le<std::uint64_t>(data, 9);
  std::size_t body = data.size() - kGraphHeaderSize;
  if (body % kGraphRecordSize != 0 || body / kGraphRecordSize != edge_count) {
    throw FormatError("graph file declares " + std::to_string(edge_count) + " edges but carries " +
                      std::to_string(body) + " bytes of edge records");
  }
  TransitionGraph graph(vocab_size);
  std::uint64_t prev_key = 0;
  for (std::uint64_t i = 0; i < edge_count; ++i) {
    std::size_t at = kGraphHeaderSize + i * kGraphRecordSize;
    auto src = detail::get_le<std::uint32_t>(data, at);
    auto dst = detail::get_le<std::uint32_t>(data, at + 4);
    auto w = std::bit_cast<double>(detail::get_le<std::uint64_t>(data, at + 8));
    if (src >= vocab_size || dst >= vocab_size) {
      throw FormatError("edge " + std::to_string(i) + " references a token outside the vocabulary");
    }
    if (!std::isfinite(w)) throw FormatError("edge " + std::to_string(i) + " has a non-finite weight");
    const std::uint64_t key = (std::uint64_t{src} << 32) | dst;
    if (i > 0 && key <= prev_key) {
      throw FormatError("edge record " + std::to_string(i) + " is duplicated or out of (src, dst) order");
    }
    prev_key = key;
    graph.add(src, dst, w);
  }
  return graph;
}

inline void save_graph(const TransitionGraph& graph, const std::filesystem::path& path) {
  io::write_file(path, encode_graph(graph));
}

inline TransitionGraph load_graph(const std::filesystem::path& path) {
  try {
    return decode_graph(io::read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

// Debug format: {"vocab_size": int, "edges": [[src, dst, weight], ...]}.
inline std::string graph_to_json(const TransitionGraph& graph) {
  nlohmann::json doc;
  doc["vocab_size"] = graph.vocab_size();
  auto& edges = doc["edges"] = nlohmann::json::array();
  graph.for_each_edge([&](TokenId u, TokenId v, double w) { edges.push_back({u, v, w}); });
  return doc.dump() + "\n";
}

inline TransitionGraph graph_from_json(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("graph JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("vocab_size") || !doc["vocab_size"].is_number_unsigned() ||
      !doc.contains("edges") || !doc["edges"].is_array()) {
    throw FormatError("graph JSON: expected {\"vocab_size\": int, \"edges\": [...]}");
  }
  TransitionGraph graph(doc["vocab_size"].get<std::size_t>());
  for (const auto& e : doc["edges"]) {
    if (!e.is_array() || e.size() != 3 || !e[0].is_number_unsigned() || !e[1].is_number_unsigned() ||
        !e[2].is_number()) {
      throw FormatError("graph JSON: each edge must be [src, dst, weight]");
    }
    auto u = e[0].get<TokenId>();
    auto v = e[1].get<TokenId>();
    if (graph.has_edge(u, v)) throw FormatError("graph JSON: duplicate edge");
    try {
      graph.add(u, v, e[2].get<double>());
    } catch (const Error& err) {
      throw FormatError(std::string("graph JSON: ") + err.what());
    }
  }
  return graph;
}

}  // namespace grad
