#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "zedbs/channel.hpp"
#include "zedbs/error.hpp"

namespace zedbs {
namespace {

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <class T>
T parse_field(std::string_view text, std::size_t line, const char* name) {
  text = trim(text);
  T value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) {
    throw SchemaError(line, std::string("cannot parse ") + name + " from '" + std::string(text) + "'");
  }
  return value;
}

}  // namespace

void write_rx_csv(std::ostream& os, const RxGridSamples& samples) {
  os << "k,l,t_seconds,re,im\n";
  char buf[128];
  for (const auto& r : samples.records) {
    std::snprintf(buf, sizeof buf, "%d,%d,%.17g,%.17g,%.17g\n", r.k, r.l, r.t, r.y.real(), r.y.imag());
    os << buf;
  }
  if (!os) throw IoError("failed writing sample CSV");
}

RxGridSamples read_rx_csv(std::istream& is) {
  RxGridSamples out;
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(is, line)) throw SchemaError(1, "empty capture (missing header)");
  ++line_no;
  {
    const auto cols = split(trim(line), ',');
    const char* expected[] = {"k", "l", "t_seconds", "re", "im"};
    if (cols.size() != 5) throw SchemaError(line_no, "header must be k,l,t_seconds,re,im");
    for (std::size_t i = 0; i < 5; ++i)
      if (trim(cols[i]) != expected[i]) throw SchemaError(line_no, "header must be k,l,t_seconds,re,im");
  }
  while (std::getline(is, line)) {
    ++line_no;
    const auto text = trim(line);
    if (text.empty()) continue;
    // Writers terminate every record; a missing final newline means the
    // file was cut off mid-record.
    if (is.eof()) throw SchemaError(line_no, "truncated record (no line terminator)");
    const auto cols = split(text, ',');
    if (cols.size() != 5) {
      throw SchemaError(line_no, "expected 5 columns, found " + std::to_string(cols.size()));
    }
    RxSample r;
    r.k = parse_field<int>(cols[0], line_no, "k");
    r.l = parse_field<int>(cols[1], line_no, "l");
    r.t = parse_field<double>(cols[2], line_no, "t_seconds");
    const double re = parse_field<double>(cols[3], line_no, "re");
    const double im = parse_field<double>(cols[4], line_no, "im");
    if (r.k < 0 || r.l < 0) throw SchemaError(line_no, "k and l must be non-negative");
    if (!(r.t >= 0.0) || !std::isfinite(r.t))
      throw SchemaError(line_no, "t_seconds must be finite and non-negative");
    if (!std::isfinite(re) || !std::isfinite(im)) throw SchemaError(line_no, "re and im must be finite");
    r.y = {re, im};
    out.records.push_back(r);
  }
  if (out.records.empty()) throw SchemaError(line_no, "capture has no samples");
  return out;
}

}  // namespace zedbs
