#pragma once

#include <cstdint>
#include <fstream>
#include <ostream>
#include <string>
#include <string_view>

#include <json.hpp>

#include "qhosvd/qten.hpp"

namespace qhosvd {

inline uint64_t fnv1a64(std::string_view bytes) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string hex64(uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = digits[v & 0xf];
    v >>= 4;
  }
  return out;
}

inline std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open for digest: " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return hex64(fnv1a64(bytes));
}

/// Serializes a report deterministically: object keys in sorted order (the
/// json type already stores them sorted), floating-point numbers at 17
/// significant digits, two-space indentation. Identical inputs produce
/// byte-identical files.
inline void dump_json(std::ostream& out, const nlohmann::json& j, int indent = 0) {
  const std::string pad(indent, ' '), pad2(indent + 2, ' ');
  switch (j.type()) {
    case nlohmann::json::value_t::object: {
      if (j.empty()) {
        out << "{}";
        return;
      }
      out << "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out << ",\n";
        first = false;
        out << pad2 << nlohmann::json(it.key()).dump() << ": ";
        dump_json(out, it.value(), indent + 2);
      }
      out << '\n' << pad << '}';
      return;
    }
    case nlohmann::json::value_t::array: {
      if (j.empty()) {
        out << "[]";
        return;
      }
      out << "[\n";
      for (size_t i = 0; i < j.size(); ++i) {
        out << pad2;
        dump_json(out, j[i], indent + 2);
        out << (i + 1 < j.size() ? ",\n" : "\n");
      }
      out << pad << ']';
      return;
    }
    case nlohmann::json::value_t::number_float:
      out << format_g17(j.get<double>());
      return;
    default:
      out << j.dump();
      return;
  }
}

inline void write_report(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write report: " + path);
  dump_json(out, j);
  out << '\n';
}

}  // namespace qhosvd
