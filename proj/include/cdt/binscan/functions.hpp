#pragma once

// Function reconstruction, parameter/stack inference, control flow graphs.

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "cdt/binscan/image.hpp"

namespace cdt::binscan {

struct Function {
  std::string name;
  int entry = 0;
  std::vector<int> body;  // sorted ordinals
  int params = 0;
  int stack_slots = 0;

  bool contains(int ordinal) const { return std::binary_search(body.begin(), body.end(), ordinal); }
  friend bool operator==(const Function&, const Function&) = default;
};

/// Intra-function successors of `o`: fallthrough and branch targets.
/// CALL falls through; RET and HALT have none.
inline std::vector<int> successors(const Program& il, int o) {
  const auto& in = il[static_cast<std::size_t>(o)];
  std::vector<int> out;
  if (ends_path(in.op)) return out;
  if (in.op != Op::JMP && static_cast<std::size_t>(o) + 1 < il.size()) out.push_back(o + 1);
  if (is_branch(in.op) && std::find(out.begin(), out.end(), in.imm) == out.end()) out.push_back(in.imm);
  return out;
}

inline std::string synthesized_name(int ordinal) { return "fn_" + std::to_string(ordinal); }

/// Entries are symbol ordinals, CALL targets, and ordinal 0. Each reachable
/// ordinal goes to the closest preceding entry that reaches it (or the
/// closest following one when none precedes it). Reachability does not run
/// through other entries.
inline std::vector<Function> reconstruct_functions(const Program& il, const std::vector<std::pair<std::string, int>>& symbols) {
  if (il.empty()) return {};
  std::map<int, std::string> entries;
  for (const auto& [name, ordinal] : symbols) {
    if (ordinal < 0 || static_cast<std::size_t>(ordinal) >= il.size())
      throw Error(ErrorKind::bad_call_target, "symbol " + name, "ordinal " + std::to_string(ordinal) + " is outside the code section");
    entries.emplace(ordinal, name);
  }
  for (const auto& in : il) {
    if (in.op != Op::CALL) continue;
    if (in.imm < 0 || static_cast<std::size_t>(in.imm) >= il.size())
      throw Error(ErrorKind::bad_call_target, "ordinal " + std::to_string(in.index), "target outside the code section");
    entries.emplace(in.imm, synthesized_name(in.imm));
  }
  entries.emplace(0, synthesized_name(0));

  std::map<int, std::vector<int>> reached_by;  // ordinal -> entries reaching it
  for (const auto& [entry, name] : entries) {
    std::vector<bool> seen(il.size(), false);
    std::vector<int> stack{entry};
    seen[static_cast<std::size_t>(entry)] = true;
    while (!stack.empty()) {
      int o = stack.back();
      stack.pop_back();
      reached_by[o].push_back(entry);
      for (int s : successors(il, o)) {
        if (seen[static_cast<std::size_t>(s)] || (s != entry && entries.count(s))) continue;
        seen[static_cast<std::size_t>(s)] = true;
        stack.push_back(s);
      }
    }
  }
  std::map<int, Function> fns;
  for (const auto& [entry, name] : entries) fns[entry] = Function{name, entry, {}, 0, 0};
  for (const auto& [o, from] : reached_by) {
    int owner = -1;
    for (int e : from)
      if (e <= o && e > owner) owner = e;
    if (owner < 0) owner = *std::min_element(from.begin(), from.end());
    fns[owner].body.push_back(o);
  }
  std::vector<Function> out;
  for (auto& [e, f] : fns) out.push_back(std::move(f));
  return out;
}

/// params: one more than the highest of r0-r3 read before any write on some
/// path from the entry. stack_slots: distinct ALLOC sites in the body.
inline Function analyze_params_stack(Function fn, const Program& il) {
  // Backward liveness restricted to the body.
  std::map<int, std::uint32_t> live_in;
  bool changed = true;
  while (changed) {
    changed = false;
    for (auto it = fn.body.rbegin(); it != fn.body.rend(); ++it) {
      const auto& in = il[static_cast<std::size_t>(*it)];
      std::uint32_t out = 0;
      for (int s : successors(il, *it))
        if (fn.contains(s) && s != fn.entry) out |= live_in[s];
      if (int w = writes(in); w >= 0) out &= ~(1u << w);
      for (int r : reads(in)) out |= 1u << r;
      if (live_in[*it] != out) {
        live_in[*it] = out;
        changed = true;
      }
    }
  }
  fn.params = 0;
  for (int r = 0; r < kArgRegisters; ++r)
    if (live_in[fn.entry] & (1u << r)) fn.params = r + 1;
  fn.stack_slots = static_cast<int>(std::count_if(fn.body.begin(), fn.body.end(), [&](int o) {
    return il[static_cast<std::size_t>(o)].op == Op::ALLOC;
  }));
  return fn;
}

enum class EdgeKind { fallthrough, branch, call, ret };

struct Block {
  int first = 0;
  int last = 0;  // inclusive
  friend bool operator==(const Block&, const Block&) = default;
};

/// `to` is a block index, or kExit for return edges and for control that
/// leaves the body (tail jumps, running off the end). Call edges keep
/// `to == kExit` and name the callee's entry ordinal.
struct Edge {
  int from = 0;
  int to = 0;
  EdgeKind kind = EdgeKind::fallthrough;
  int callee = -1;
  friend bool operator==(const Edge&, const Edge&) = default;
};

inline constexpr int kExit = -1;

struct Cfg {
  std::vector<Block> blocks;
  std::vector<Edge> edges;

  int block_of(int ordinal) const {
    for (std::size_t i = 0; i < blocks.size(); ++i)
      if (blocks[i].first <= ordinal && ordinal <= blocks[i].last) return static_cast<int>(i);
    return kExit;
  }
  std::size_t internal_edges() const {
    return static_cast<std::size_t>(std::count_if(edges.begin(), edges.end(), [](const Edge& e) {
      return (e.kind == EdgeKind::fallthrough || e.kind == EdgeKind::branch) && e.to != kExit;
    }));
  }
  std::vector<const Edge*> out_edges(int block) const {
    std::vector<const Edge*> out;
    for (const auto& e : edges)
      if (e.from == block) out.push_back(&e);
    return out;
  }
};

/// Leaders: entry, branch targets inside the body, and the instruction after
/// a branch or CALL. A block also ends where the next ordinal is outside the
/// body. The entry block is always block 0.
inline Cfg build_cfg(const Function& fn, const Program& il) {
  std::set<int> leaders{fn.entry};
  for (int o : fn.body) {
    const auto& in = il[static_cast<std::size_t>(o)];
    if (in.imm < 0 && is_branch(in.op))
      throw Error(ErrorKind::bad_branch_target, "ordinal " + std::to_string(o), "negative target");
    if (is_branch(in.op) && static_cast<std::size_t>(in.imm) >= il.size())
      throw Error(ErrorKind::bad_branch_target, "ordinal " + std::to_string(o), "target is not an instruction");
    if (is_branch(in.op) && fn.contains(in.imm)) leaders.insert(in.imm);
    if ((is_branch(in.op) || in.op == Op::CALL || ends_path(in.op)) && fn.contains(o + 1)) leaders.insert(o + 1);
  }
  Cfg cfg;
  std::vector<int> order(leaders.begin(), leaders.end());
  std::stable_partition(order.begin(), order.end(), [&](int l) { return l == fn.entry; });
  for (int lead : order) {
    int last = lead;
    while (fn.contains(last + 1) && !leaders.count(last + 1)) {
      const auto& in = il[static_cast<std::size_t>(last)];
      if (is_branch(in.op) || in.op == Op::CALL || ends_path(in.op)) break;
      ++last;
    }
    cfg.blocks.push_back({lead, last});
  }
  auto index_of = [&](int ordinal) {
    if (!fn.contains(ordinal)) return kExit;
    return cfg.block_of(ordinal);
  };
  for (std::size_t b = 0; b < cfg.blocks.size(); ++b) {
    int from = static_cast<int>(b);
    int last = cfg.blocks[b].last;
    const auto& in = il[static_cast<std::size_t>(last)];
    if (in.op == Op::HALT) continue;
    if (in.op == Op::RET) {
      cfg.edges.push_back({from, kExit, EdgeKind::ret, -1});
      continue;
    }
    if (in.op == Op::CALL) cfg.edges.push_back({from, kExit, EdgeKind::call, in.imm});
    if (in.op != Op::JMP) {
      bool has_next = static_cast<std::size_t>(last) + 1 < il.size();
      cfg.edges.push_back({from, has_next ? index_of(last + 1) : kExit, EdgeKind::fallthrough, -1});
    }
    if (is_branch(in.op)) cfg.edges.push_back({from, index_of(in.imm), EdgeKind::branch, -1});
  }
  return cfg;
}

}  // namespace cdt::binscan
