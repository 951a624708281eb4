#pragma once

// Forward may-analysis over per-register value sets.
//
// Abstract values: unknown, const(k), alloc(site, size), freed(site),
// rand_tainted. A block's input is a bounded list of register environments,
// each carrying the shortest instruction path that produced it. Blocks
// visited too often or holding too many environments collapse into one
// environment whose sets are the union of all of them, so the classic
// per-register union lattice is the fallback. The `before` facts are always
// that union.

#include <algorithm>
#include <array>
#include <map>
#include <queue>
#include <set>
#include <vector>

#include "cdt/binscan/functions.hpp"

namespace cdt::binscan {

enum class ValueKind { unknown, constant, alloc, freed, tainted };

struct AbsValue {
  ValueKind kind = ValueKind::unknown;
  std::int64_t k = 0;  // constant value
  int site = -1;       // ALLOC ordinal
  std::int32_t size = 0;
  friend auto operator<=>(const AbsValue&, const AbsValue&) = default;

  static AbsValue unknown() { return {}; }
  static AbsValue constant(std::int64_t k) { return {ValueKind::constant, k, -1, 0}; }
  static AbsValue alloc(int site, std::int32_t size) { return {ValueKind::alloc, 0, site, size}; }
  static AbsValue freed(int site) { return {ValueKind::freed, 0, site, 0}; }
  static AbsValue tainted() { return {ValueKind::tainted, 0, -1, 0}; }
};

using ValueSet = std::vector<AbsValue>;  // sorted, unique
using Env = std::array<ValueSet, kRegisters>;

inline constexpr std::size_t kMaxEnvs = 1024;
inline constexpr int kMaxVisits = 4;
inline constexpr std::size_t kMaxConsts = 8;

inline std::string format_value(const AbsValue& v) {
  switch (v.kind) {
    case ValueKind::constant: return "const(" + std::to_string(v.k) + ")";
    case ValueKind::alloc: return "alloc(" + std::to_string(v.site) + "," + std::to_string(v.size) + ")";
    case ValueKind::freed: return "freed(" + std::to_string(v.site) + ")";
    case ValueKind::tainted: return "rand_tainted";
    default: return "unknown";
  }
}

/// Two's-complement 32-bit wraparound, matching the machine registers.
inline std::int64_t wrap32(std::int64_t v) { return static_cast<std::int32_t>(static_cast<std::uint32_t>(v)); }

inline void normalize(ValueSet& s) {
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  auto consts = std::count_if(s.begin(), s.end(), [](const AbsValue& v) { return v.kind == ValueKind::constant; });
  if (static_cast<std::size_t>(consts) > kMaxConsts) {
    std::erase_if(s, [](const AbsValue& v) { return v.kind == ValueKind::constant; });
    s.push_back(AbsValue::unknown());
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
  }
}

inline bool join_into(Env& into, const Env& from) {
  bool changed = false;
  for (int r = 0; r < kRegisters; ++r) {
    ValueSet merged;
    std::set_union(into[r].begin(), into[r].end(), from[r].begin(), from[r].end(), std::back_inserter(merged));
    normalize(merged);
    if (merged != into[r]) {
      into[r] = std::move(merged);
      changed = true;
    }
  }
  return changed;
}

inline Env initial_env() {
  Env e;
  for (auto& s : e) s = {AbsValue::unknown()};
  return e;
}

/// Shorter first, then lexicographic.
inline bool trace_less(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) return a.size() < b.size();
  return a < b;
}

struct PathState {
  Env regs;
  std::vector<int> trace;  // ordinals executed before the block starts
};

/// Applies one instruction to an environment.
inline void transfer(const Instruction& in, Env& env) {
  switch (in.op) {
    case Op::LOADI: env[in.rd] = {AbsValue::constant(in.imm)}; break;
    case Op::MOV: env[in.rd] = env[in.rs1]; break;
    case Op::ADD:
    case Op::SUB: {
      ValueSet rhs = in.rs2 != 0 ? env[in.rs2] : ValueSet{AbsValue::constant(0)};
      ValueSet out;
      for (const auto& a : env[in.rs1]) {
        for (const auto& b : rhs) {
          if (a.kind == ValueKind::tainted || b.kind == ValueKind::tainted) {
            out.push_back(AbsValue::tainted());
          } else if (a.kind == ValueKind::constant && b.kind == ValueKind::constant) {
            out.push_back(AbsValue::constant(in.op == Op::ADD ? wrap32(a.k + b.k + in.imm) : wrap32(a.k - b.k - in.imm)));
          } else {
            out.push_back(AbsValue::unknown());
          }
        }
      }
      normalize(out);
      env[in.rd] = std::move(out);
      break;
    }
    case Op::LOAD: env[in.rd] = {AbsValue::unknown()}; break;
    case Op::ALLOC: env[in.rd] = {AbsValue::alloc(in.index, in.imm)}; break;
    case Op::FREE: {
      std::set<int> sites;
      for (const auto& v : env[in.rs1])
        if (v.kind == ValueKind::alloc) sites.insert(v.site);
      bool strong = env[in.rs1].size() == 1 && sites.size() == 1;
      for (auto& set : env) {
        ValueSet out;
        for (const auto& v : set) {
          if (v.kind == ValueKind::alloc && sites.count(v.site)) {
            out.push_back(AbsValue::freed(v.site));
            if (!strong) out.push_back(v);
          } else {
            out.push_back(v);
          }
        }
        normalize(out);
        set = std::move(out);
      }
      break;
    }
    case Op::CALL: env[0] = {AbsValue::unknown()}; break;
    case Op::RAND: env[in.rd] = {AbsValue::tainted()}; break;
    default: break;
  }
}

struct Facts {
  Cfg cfg;
  std::vector<std::vector<PathState>> block_in;
  std::map<int, Env> before;  // union over all paths, per reachable ordinal
  Env at_exit{};              // union over states leaving the function
  std::size_t iterations = 0;
  std::size_t iteration_cap = 0;
};

inline std::size_t iteration_cap(const Cfg& cfg) { return cfg.blocks.size() * kRegisters * 16; }

namespace detail {

struct BlockState {
  std::vector<PathState> envs;
  bool collapsed = false;
  int visits = 0;

  void collapse() {
    if (collapsed || envs.empty()) {
      collapsed = true;
      return;
    }
    PathState joined = envs.front();
    for (std::size_t i = 1; i < envs.size(); ++i) {
      join_into(joined.regs, envs[i].regs);
      if (trace_less(envs[i].trace, joined.trace)) joined.trace = envs[i].trace;
    }
    envs = {std::move(joined)};
    collapsed = true;
  }

  bool merge(const PathState& p) {
    if (collapsed) {
      if (envs.empty()) {
        envs.push_back(p);
        return true;
      }
      bool changed = join_into(envs[0].regs, p.regs);
      if (trace_less(p.trace, envs[0].trace)) {
        envs[0].trace = p.trace;
        changed = true;
      }
      return changed;
    }
    for (auto& e : envs) {
      if (e.regs != p.regs) continue;
      if (trace_less(p.trace, e.trace)) {
        e.trace = p.trace;
        return true;
      }
      return false;
    }
    envs.push_back(p);
    if (envs.size() > kMaxEnvs) collapse();
    return true;
  }
};

/// Runs a block over one path state. `visit(instruction, env_before, trace_so_far)`
/// sees every instruction; `leave(to_block, state)` gets every outgoing state.
template <class Visit, class Leave>
void run_block(const Cfg& cfg, int b, const Program& il, PathState p, Visit&& visit, Leave&& leave) {
  const auto& blk = cfg.blocks[static_cast<std::size_t>(b)];
  for (int o = blk.first; o <= blk.last; ++o) {
    const auto& in = il[static_cast<std::size_t>(o)];
    visit(in, p.regs, p.trace);
    transfer(in, p.regs);
    p.trace.push_back(o);
  }
  for (const auto& e : cfg.edges) {
    if (e.from != b || e.kind == EdgeKind::call) continue;
    leave(e.to, p);
  }
}

}  // namespace detail

/// Worklist fixpoint over the CFG in block order.
inline Facts dataflow_taint(const Function& fn, const Cfg& cfg, const Program& il) {
  Facts facts;
  facts.cfg = cfg;
  facts.iteration_cap = iteration_cap(cfg);
  if (cfg.blocks.empty()) return facts;
  std::vector<detail::BlockState> state(cfg.blocks.size());
  state[0].envs.push_back({initial_env(), {}});
  std::set<int> work{0};
  while (!work.empty()) {
    int b = *work.begin();
    work.erase(work.begin());
    if (++facts.iterations > facts.iteration_cap)
      throw Error(ErrorKind::iteration_cap, fn.name, "dataflow did not converge within " + std::to_string(facts.iteration_cap) + " block visits");
    auto& st = state[static_cast<std::size_t>(b)];
    if (++st.visits > kMaxVisits) st.collapse();
    auto envs = st.envs;
    for (const auto& p : envs) {
      detail::run_block(cfg, b, il, p, [](const Instruction&, const Env&, const std::vector<int>&) {},
                        [&](int to, const PathState& out) {
                          if (to == kExit) return;
                          if (state[static_cast<std::size_t>(to)].merge(out)) work.insert(to);
                        });
    }
  }
  for (std::size_t b = 0; b < cfg.blocks.size(); ++b) {
    facts.block_in.push_back(state[b].envs);
    for (const auto& p : state[b].envs) {
      detail::run_block(
          cfg, static_cast<int>(b), il, p,
          [&](const Instruction& in, const Env& env, const std::vector<int>&) {
            auto [it, fresh] = facts.before.try_emplace(in.index, env);
            if (!fresh) join_into(it->second, env);
          },
          [&](int to, const PathState& out) {
            if (to == kExit) join_into(facts.at_exit, out.regs);
          });
      const auto& last = il[static_cast<std::size_t>(cfg.blocks[b].last)];
      if (last.op == Op::HALT) {
        Env env = p.regs;
        for (int o = cfg.blocks[b].first; o <= cfg.blocks[b].last; ++o) transfer(il[static_cast<std::size_t>(o)], env);
        join_into(facts.at_exit, env);
      }
    }
  }
  return facts;
}

}  // namespace cdt::binscan
