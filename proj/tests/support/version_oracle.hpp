#pragma once

#include <cctype>
#include <compare>
#include <random>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

namespace cdt::testing {

// Independent oracle: pad both segment lists to equal length with ("", "")
// then compare tuples (numeric value, has-suffix, suffix) lexicographically.
struct OracleSeg {
  unsigned long long num = 0;
  std::string suffix;
};

inline std::vector<OracleSeg> oracle_parse(const std::string& v) {
  std::vector<OracleSeg> out;
  std::stringstream ss(v);
  std::string seg;
  while (std::getline(ss, seg, '.')) {
    OracleSeg s;
    std::size_t i = 0;
    while (i < seg.size() && std::isdigit(static_cast<unsigned char>(seg[i]))) s.num = s.num * 10 + (seg[i++] - '0');
    s.suffix = seg.substr(i);
    out.push_back(s);
  }
  return out;
}

inline int oracle_compare(const std::string& a, const std::string& b) {
  auto x = oracle_parse(a), y = oracle_parse(b);
  while (x.size() < y.size()) x.push_back({});
  while (y.size() < x.size()) y.push_back({});
  for (std::size_t i = 0; i < x.size(); ++i) {
    auto kx = std::make_tuple(x[i].num, !x[i].suffix.empty(), x[i].suffix);
    auto ky = std::make_tuple(y[i].num, !y[i].suffix.empty(), y[i].suffix);
    if (kx < ky) return -1;
    if (ky < kx) return 1;
  }
  return 0;
}

inline int sign(std::weak_ordering o) { return o < 0 ? -1 : (o > 0 ? 1 : 0); }

inline std::string random_version(std::mt19937& rng) {
  std::uniform_int_distribution<int> nseg(1, 4), num(0, 12), suf(0, 5);
  static const char* suffixes[] = {"", "", "", "a", "b", "rc1"};
  std::string v;
  int n = nseg(rng);
  for (int i = 0; i < n; ++i) {
    if (i) v += '.';
    v += std::to_string(num(rng));
    v += suffixes[suf(rng)];
  }
  return v;
}

/// Brute-force range membership on the oracle order.
inline bool oracle_in_range(const std::string& v, const std::string* exact, const std::string* start, const std::string* end) {
  if (exact) return oracle_compare(v, *exact) == 0;
  if (start && oracle_compare(v, *start) < 0) return false;
  if (end && oracle_compare(v, *end) >= 0) return false;
  return true;
}

}  // namespace cdt::testing
