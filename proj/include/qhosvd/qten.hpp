#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "qhosvd/tensor.hpp"

// QTEN 1: a plain-text tensor interchange format.
//
//   QTEN 1
//   dims: I1 I2 ... Im
//   field: real|complex
//   <row-major entries, one scalar per whitespace token;
//    a complex entry is two consecutive tokens (re im)>
//
// Values are written with 17 significant digits so a write/read cycle is
// bit-exact for IEEE doubles.

namespace qhosvd {

inline std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void write_qten(std::ostream& os, const DenseTensor& a) {
  bool complex_field = false;
  for (int64_t i = 0; i < a.size(); ++i) {
    if (!std::isfinite(a[i].real()) || !std::isfinite(a[i].imag()))
      throw std::invalid_argument("QTEN: refusing to serialize non-finite entries");
    if (a[i].imag() != 0.0) complex_field = true;
  }
  os << "QTEN 1\n";
  os << "dims:";
  for (int64_t d : a.dims()) os << ' ' << d;
  os << "\nfield: " << (complex_field ? "complex" : "real") << "\n";
  for (int64_t i = 0; i < a.size(); ++i) {
    os << format_g17(a[i].real());
    if (complex_field) os << ' ' << format_g17(a[i].imag());
    os << '\n';
  }
}

inline DenseTensor read_qten(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::invalid_argument("QTEN: empty input");
  // Tolerate trailing carriage returns but nothing else.
  while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
  if (line != "QTEN 1") throw std::invalid_argument("QTEN: bad magic line '" + line + "'");

  if (!std::getline(is, line)) throw std::invalid_argument("QTEN: missing dims line");
  std::istringstream dims_line(line);
  std::string tag;
  dims_line >> tag;
  if (tag != "dims:") throw std::invalid_argument("QTEN: expected 'dims:' line");
  std::vector<int64_t> dims;
  int64_t d = 0;
  while (dims_line >> d) {
    if (d <= 0) throw std::invalid_argument("QTEN: dimensions must be positive");
    dims.push_back(d);
  }
  if (!dims_line.eof()) throw std::invalid_argument("QTEN: malformed dims line");
  if (dims.empty()) throw std::invalid_argument("QTEN: no dimensions given");

  if (!std::getline(is, line)) throw std::invalid_argument("QTEN: missing field line");
  std::istringstream field_line(line);
  field_line >> tag;
  std::string field;
  field_line >> field;
  if (tag != "field:" || (field != "real" && field != "complex"))
    throw std::invalid_argument("QTEN: field must be 'real' or 'complex'");
  bool complex_field = field == "complex";

  DenseTensor out(dims);
  for (int64_t i = 0; i < out.size(); ++i) {
    double re = 0.0, im = 0.0;
    if (!(is >> re)) throw std::invalid_argument("QTEN: too few entries");
    if (complex_field && !(is >> im)) throw std::invalid_argument("QTEN: dangling complex entry");
    if (!std::isfinite(re) || !std::isfinite(im))
      throw std::invalid_argument("QTEN: non-finite entry");
    out[i] = cdouble{re, im};
  }
  std::string trailing;
  if (is >> trailing) throw std::invalid_argument("QTEN: trailing tokens after entries");
  return out;
}

inline void write_qten_file(const std::filesystem::path& path, const DenseTensor& a) {
  std::ofstream os(path);
  if (!os) throw std::invalid_argument("QTEN: cannot open for writing: " + path.string());
  write_qten(os, a);
  if (!os) throw std::invalid_argument("QTEN: write failed: " + path.string());
}

inline DenseTensor read_qten_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::invalid_argument("QTEN: cannot open: " + path.string());
  return read_qten(is);
}

}  // namespace qhosvd
