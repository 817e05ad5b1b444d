#pragma once

#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "grad/errors.hpp"
#include "grad/utf8.hpp"

namespace grad::io {

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::string data{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  if (in.bad()) throw IoError("error while reading '" + path.string() + "'");
  return data;
}

inline void write_file(const std::filesystem::path& path, std::string_view data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  out.flush();
  if (!out) throw IoError("error while writing '" + path.string() + "'");
}

// One record per line. Blank (whitespace-only) lines are skipped; a line with
// invalid UTF-8 or a NUL byte is rejected with its 1-based line number.
inline std::vector<std::string> parse_corpus(std::string_view text, std::string_view origin = "corpus") {
  std::vector<std::string> records;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() : nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!utf8::is_valid(line) || line.find('\0') != std::string_view::npos) {
      throw FormatError(std::string(origin) + " line " + std::to_string(line_no) +
                        ": malformed record (invalid UTF-8 or NUL byte)");
    }
    if (utf8::split_whitespace(line).empty()) continue;
    records.emplace_back(line);
  }
  return records;
}

inline std::vector<std::string> load_corpus(const std::filesystem::path& path) {
  return parse_corpus(read_file(path), path.string());
}

}  // namespace grad::io
