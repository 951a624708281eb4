#pragma once

#include <algorithm>
#include <cctype>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cdt::text {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

inline bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](unsigned char x, unsigned char y) {
           return std::tolower(x) == std::tolower(y);
         });
}

inline bool icontains(std::string_view haystack, std::string_view needle) {
  if (needle.empty()) return true;
  auto it = std::search(haystack.begin(), haystack.end(), needle.begin(), needle.end(),
                        [](unsigned char x, unsigned char y) { return std::tolower(x) == std::tolower(y); });
  return it != haystack.end();
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t pos = 0;
  while (true) {
    auto next = s.find(sep, pos);
    parts.push_back(s.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return parts;
}

inline std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> parts;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    auto start = i;
    while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    if (i > start) parts.push_back(s.substr(start, i - start));
  }
  return parts;
}

inline std::vector<std::string_view> lines(std::string_view s) {
  auto out = split(s, '\n');
  for (auto& l : out)
    if (!l.empty() && l.back() == '\r') l.remove_suffix(1);
  if (!out.empty() && out.back().empty()) out.pop_back();
  return out;
}

inline std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

/// Collapses whitespace runs to one space so phrases wrapped across lines
/// still match.
inline std::string normalize_ws(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool space = false;
  for (unsigned char c : s) {
    if (std::isspace(c)) {
      space = true;
      continue;
    }
    if (space && !out.empty()) out.push_back(' ');
    space = false;
    out.push_back(static_cast<char>(c));
  }
  return out;
}

inline std::string_view basename(std::string_view path) {
  auto slash = path.rfind('/');
  return slash == std::string_view::npos ? path : path.substr(slash + 1);
}

inline std::string_view dirname(std::string_view path) {
  auto slash = path.rfind('/');
  return slash == std::string_view::npos ? std::string_view{} : path.substr(0, slash);
}

/// Suffix used for the directory a container is expanded into.
inline constexpr std::string_view kExtractedSuffix = ".extracted";

/// A node path together with every tail that starts right after a
/// `<container>.extracted/` component: "fw.tar.extracted/etc/passwd" yields
/// itself and "etc/passwd". Well-known-path and glob lookups match any of them.
inline std::vector<std::string_view> logical_paths(std::string_view path) {
  std::vector<std::string_view> out{path};
  std::size_t pos = 0;
  while (true) {
    auto hit = path.find(".extracted/", pos);
    if (hit == std::string_view::npos) break;
    auto tail = hit + kExtractedSuffix.size() + 1;
    if (tail < path.size()) out.push_back(path.substr(tail));
    pos = tail;
  }
  return out;
}

inline bool path_is(std::string_view path, std::string_view logical) {
  for (auto p : logical_paths(path))
    if (p == logical) return true;
  return false;
}

namespace detail {
inline bool glob_rec(std::string_view pat, std::string_view s, std::vector<std::string>* caps) {
  while (!pat.empty()) {
    char c = pat.front();
    if (c == '*') {
      bool deep = pat.size() > 1 && pat[1] == '*';
      auto rest = pat.substr(deep ? 2 : 1);
      // Greedy: try the longest span first.
      std::size_t limit = s.size();
      if (!deep) {
        auto slash = s.find('/');
        if (slash != std::string_view::npos) limit = slash;
      }
      for (std::size_t n = limit + 1; n-- > 0;) {
        auto mark = caps ? caps->size() : 0;
        if (caps) caps->emplace_back(s.substr(0, n));
        if (glob_rec(rest, s.substr(n), caps)) return true;
        if (caps) caps->resize(mark);
      }
      return false;
    }
    if (s.empty()) return false;
    if (c == '?') {
      if (s.front() == '/') return false;
      if (caps) caps->emplace_back(s.substr(0, 1));
    } else if (c == '\\' && pat.size() > 1) {
      pat.remove_prefix(1);
      if (pat.front() != s.front()) return false;
    } else if (c != s.front()) {
      return false;
    }
    pat.remove_prefix(1);
    s.remove_prefix(1);
  }
  return s.empty();
}
}  // namespace detail

/// Shell-style glob: `*` spans within one path component, `**` spans any
/// number, `?` is one non-slash character, `\` escapes. Returns the text
/// captured by each wildcard, in pattern order, on a full match.
inline std::optional<std::vector<std::string>> glob_match(std::string_view pattern, std::string_view s) {
  std::vector<std::string> caps;
  if (!detail::glob_rec(pattern, s, &caps)) return std::nullopt;
  return caps;
}

/// Printable runs of at least `min_run` bytes, one per line, in file order.
/// Mirrors what `strings` recovers from executables.
inline std::string printable_runs(std::string_view bytes, std::size_t min_run = 4) {
  std::string out;
  std::size_t start = 0;
  auto flush = [&](std::size_t end) {
    if (end - start >= min_run) {
      out.append(bytes.substr(start, end - start));
      out.push_back('\n');
    }
  };
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    unsigned char c = static_cast<unsigned char>(bytes[i]);
    bool printable = (c >= 0x20 && c < 0x7F) || c == '\t';
    if (!printable) {
      flush(i);
      start = i + 1;
    }
  }
  flush(bytes.size());
  return out;
}

}  // namespace cdt::text
