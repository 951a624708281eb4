#pragma once

// Aho-Corasick automaton over byte strings, plus a helper that pulls a
// required literal out of a regular expression so the automaton can act as
// a prefilter.

#include <array>
#include <cstdint>
#include <queue>
#include <string>
#include <string_view>
#include <vector>

namespace cdt::sca {

class MultiSearch {
 public:
  /// Adds a pattern and returns its id.
  std::size_t add(std::string_view pattern) {
    std::size_t state = 0;
    for (unsigned char c : pattern) {
      if (nodes_[state].next[c] < 0) {
        nodes_[state].next[c] = static_cast<std::int32_t>(nodes_.size());
        nodes_.emplace_back();
      }
      state = static_cast<std::size_t>(nodes_[state].next[c]);
    }
    nodes_[state].out.push_back(count_);
    lengths_.push_back(pattern.size());
    built_ = false;
    return count_++;
  }

  std::size_t size() const { return count_; }

  /// Calls `hit(id, end_offset)` for every occurrence in `text`.
  template <class F>
  void scan(std::string_view text, F&& hit) {
    if (!built_) build();
    std::size_t state = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
      state = static_cast<std::size_t>(nodes_[state].next[static_cast<unsigned char>(text[i])]);
      for (auto s = state; s != 0; s = nodes_[s].dict) {
        for (auto id : nodes_[s].out) hit(id, i + 1);
      }
    }
  }

  /// Which patterns occur at least once.
  std::vector<bool> present(std::string_view text) {
    std::vector<bool> seen(count_, false);
    scan(text, [&](std::size_t id, std::size_t) { seen[id] = true; });
    return seen;
  }

  std::size_t pattern_length(std::size_t id) const { return lengths_[id]; }

 private:
  struct Node {
    Node() { next.fill(-1); }
    std::array<std::int32_t, 256> next;
    std::size_t fail = 0;
    std::size_t dict = 0;  // nearest suffix state that ends a pattern
    std::vector<std::size_t> out;
  };

  void build() {
    std::queue<std::size_t> q;
    for (auto& n : nodes_[0].next) {
      if (n < 0) {
        n = 0;
      } else {
        nodes_[static_cast<std::size_t>(n)].fail = 0;
        q.push(static_cast<std::size_t>(n));
      }
    }
    while (!q.empty()) {
      auto s = q.front();
      q.pop();
      auto f = nodes_[s].fail;
      nodes_[s].dict = nodes_[f].out.empty() ? nodes_[f].dict : f;
      for (int c = 0; c < 256; ++c) {
        auto& t = nodes_[s].next[c];
        if (t < 0) {
          t = nodes_[f].next[c];
        } else {
          nodes_[static_cast<std::size_t>(t)].fail = static_cast<std::size_t>(nodes_[f].next[c]);
          q.push(static_cast<std::size_t>(t));
        }
      }
    }
    built_ = true;
  }

  std::vector<Node> nodes_{1};
  std::vector<std::size_t> lengths_;
  std::size_t count_ = 0;
  bool built_ = false;
};

/// Longest literal every match of the ECMAScript regex `re` must contain.
/// Only top-level literals are considered; alternation anywhere gives up.
inline std::string required_literal(std::string_view re) {
  if (re.find('|') != std::string_view::npos) return {};
  std::string best, cur;
  auto cut = [&] {
    if (cur.size() > best.size()) best = cur;
    cur.clear();
  };
  int depth = 0;
  for (std::size_t i = 0; i < re.size(); ++i) {
    char c = re[i];
    std::string lit;
    bool literal = false;
    if (c == '\\' && i + 1 < re.size()) {
      char e = re[++i];
      if (std::string_view(".\\/-+*?()[]{}^$|").find(e) != std::string_view::npos) {
        lit = e;
        literal = depth == 0;
      } else {
        cut();
        continue;
      }
    } else if (c == '(') {
      ++depth;
      cut();
      continue;
    } else if (c == ')') {
      --depth;
      cut();
      continue;
    } else if (c == '[') {
      cut();
      for (++i; i < re.size() && re[i] != ']'; ++i)
        if (re[i] == '\\') ++i;
      continue;
    } else if (std::string_view(".^$+*?{}").find(c) != std::string_view::npos) {
      cut();
      continue;
    } else {
      lit = c;
      literal = depth == 0;
    }
    if (!literal) {
      cut();
      continue;
    }
    char q = i + 1 < re.size() ? re[i + 1] : '\0';
    if (q == '?' || q == '*' || q == '{') {
      cut();  // this character is optional or repeated
    } else if (q == '+') {
      cur += lit;
      cut();
    } else {
      cur += lit;
    }
  }
  cut();
  return best;
}

}  // namespace cdt::sca
