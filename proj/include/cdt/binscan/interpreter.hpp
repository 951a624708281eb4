#pragma once

// Concrete IL interpreter used to confirm or refute weakness findings.
//
// Inputs the function cannot know (initial registers, RAND, call results,
// loads from unknown memory) are free symbols. A branch that compares free
// symbols follows the witness trace and records the assumption it made; a
// branch decided by concrete values goes wherever the values say, which is
// how statically infeasible witnesses get refuted.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cdt/binscan/weakness.hpp"

namespace cdt::binscan {

inline constexpr std::size_t kStepBudget = 10000;

struct ValidationResult {
  Validation status = Validation::unconfirmed;
  std::string reason;
  std::size_t steps = 0;
};

namespace detail {

class Machine {
 public:
  enum class Kind { integer, pointer, symbol };
  struct Value {
    Kind kind = Kind::integer;
    std::int64_t v = 0;  // integer value, object id or symbol id
    bool tainted = false;
  };

  Value fresh(bool tainted = false) {
    syms_.push_back({});
    return {Kind::symbol, static_cast<std::int64_t>(syms_.size() - 1), tainted};
  }

  Value resolve(Value x) const {
    while (x.kind == Kind::symbol) {
      const auto& s = syms_[static_cast<std::size_t>(x.v)];
      if (s.pinned) return {Kind::integer, *s.pinned, x.tainted};
      if (!s.alias) break;
      x.v = *s.alias;
    }
    return x;
  }

  /// Decided equality, or nullopt when it depends on free symbols.
  std::optional<bool> equal(Value a, Value b) const {
    a = resolve(a);
    b = resolve(b);
    if (a.kind == Kind::integer && b.kind == Kind::integer) return a.v == b.v;
    if (a.kind == Kind::pointer || b.kind == Kind::pointer) return a.kind == b.kind && a.v == b.v;
    if (a.kind == Kind::symbol && b.kind == Kind::symbol && a.v == b.v) return true;
    for (const auto& [x, y] : distinct_) {
      auto rx = resolve(x), ry = resolve(y);
      if (same(rx, a) && same(ry, b)) return false;
      if (same(rx, b) && same(ry, a)) return false;
    }
    return std::nullopt;
  }

  void assume(Value a, Value b, bool eq) {
    a = resolve(a);
    b = resolve(b);
    if (!eq) {
      distinct_.emplace_back(a, b);
      return;
    }
    if (a.kind != Kind::symbol) std::swap(a, b);
    auto& s = syms_[static_cast<std::size_t>(a.v)];
    if (b.kind == Kind::integer) s.pinned = b.v;
    else s.alias = b.v;
  }

  std::int64_t alloc(int site, std::int32_t size) {
    objects_.push_back({site, std::max<std::int32_t>(size, 0), false, {}});
    objects_.back().cells.resize(static_cast<std::size_t>(objects_.back().size));
    return static_cast<std::int64_t>(objects_.size() - 1);
  }

  struct Object {
    int site;
    std::int32_t size;
    bool freed;
    std::vector<std::optional<Value>> cells;
  };
  Object& object(std::int64_t id) { return objects_[static_cast<std::size_t>(id)]; }

 private:
  struct Sym {
    std::optional<std::int64_t> pinned;
    std::optional<std::int64_t> alias;
  };
  static bool same(const Value& x, const Value& y) { return x.kind == y.kind && x.v == y.v; }

  std::vector<Sym> syms_;
  std::vector<Object> objects_;
  std::vector<std::pair<Value, Value>> distinct_;
};

}  // namespace detail

/// Executes `fn` from its entry, steering free branches along the finding's
/// trace, and reports whether the flagged access really happens at the site.
inline ValidationResult dynamic_validate(const Function& fn, const WeaknessFinding& finding, const Program& il,
                                         const CalleeNames& names,
                                         const std::vector<std::string>& sinks = default_sensitive_sinks(),
                                         std::size_t budget = kStepBudget) {
  using M = detail::Machine;
  M m;
  std::array<M::Value, kRegisters> reg;
  for (auto& r : reg) r = m.fresh();
  ValidationResult res;
  int pc = fn.entry;
  std::size_t pos = 0;  // index of pc in the trace while on it
  bool on_trace = !finding.trace.empty() && finding.trace.front() == pc;
  std::optional<int> left_at;

  auto arith = [&](M::Value a, M::Value b, bool add, std::int32_t imm) -> M::Value {
    a = m.resolve(a);
    b = m.resolve(b);
    bool t = a.tainted || b.tainted;
    if (a.kind == M::Kind::integer && b.kind == M::Kind::integer)
      return {M::Kind::integer, add ? wrap32(a.v + b.v + imm) : wrap32(a.v - b.v - imm), t};
    return m.fresh(t);
  };

  while (true) {
    if (res.steps++ >= budget) {
      res.reason = "step budget of " + std::to_string(budget) + " exhausted before the flagged access";
      return res;
    }
    const auto& in = il[static_cast<std::size_t>(pc)];
    int next = pc + 1;
    std::optional<std::string> fault;
    switch (in.op) {
      case Op::NOP: break;
      case Op::LOADI: reg[in.rd] = {M::Kind::integer, in.imm, false}; break;
      case Op::MOV: reg[in.rd] = reg[in.rs1]; break;
      case Op::ADD:
      case Op::SUB:
        reg[in.rd] = arith(reg[in.rs1], in.rs2 ? reg[in.rs2] : M::Value{}, in.op == Op::ADD, in.imm);
        break;
      case Op::LOAD:
      case Op::STORE: {
        auto base = m.resolve(reg[in.rs1]);
        std::optional<M::Value> loaded;
        if (base.kind == M::Kind::pointer) {
          auto& obj = m.object(base.v);
          if (obj.freed) {
            fault = "CWE-416";
          } else if (in.imm < 0 || in.imm >= obj.size) {
            fault = in.op == Op::LOAD ? "CWE-125" : "CWE-119";
          } else if (in.op == Op::STORE) {
            obj.cells[static_cast<std::size_t>(in.imm)] = reg[in.rd];
          } else {
            loaded = obj.cells[static_cast<std::size_t>(in.imm)];
          }
        }
        if (in.op == Op::LOAD) reg[in.rd] = loaded ? *loaded : m.fresh();
        break;
      }
      case Op::ALLOC: reg[in.rd] = {M::Kind::pointer, m.alloc(in.index, in.imm), false}; break;
      case Op::FREE: {
        auto p = m.resolve(reg[in.rs1]);
        if (p.kind == M::Kind::pointer) m.object(p.v).freed = true;
        break;
      }
      case Op::CALL: {
        auto it = names.find(in.imm);
        if (it != names.end() && std::find(sinks.begin(), sinks.end(), it->second) != sinks.end())
          for (int r = 0; r < kArgRegisters; ++r)
            if (m.resolve(reg[r]).tainted) fault = "CWE-338";
        reg[0] = m.fresh();
        break;
      }
      case Op::RAND: reg[in.rd] = m.fresh(true); break;
      case Op::JMP: next = in.imm; break;
      case Op::BEQ: {
        auto decided = m.equal(reg[in.rd], reg[in.rs1]);
        if (decided) {
          next = *decided ? in.imm : pc + 1;
        } else {
          bool take = false;
          if (on_trace && pos + 1 < finding.trace.size()) take = finding.trace[pos + 1] == in.imm && in.imm != pc + 1;
          m.assume(reg[in.rd], reg[in.rs1], take);
          next = take ? in.imm : pc + 1;
        }
        break;
      }
      case Op::RET:
      case Op::HALT: break;
    }
    if (fault && pc == finding.site && *fault == finding.cwe_id) {
      res.status = Validation::confirmed;
      res.reason = "reproduced " + *fault + " at ordinal " + std::to_string(pc) + " after " + std::to_string(res.steps) + " steps";
      return res;
    }
    if (ends_path(in.op) || !fn.contains(next) || static_cast<std::size_t>(next) >= il.size()) {
      if (left_at)
        res.reason = "execution left the witness path at ordinal " + std::to_string(*left_at) + " and never faulted at the site";
      else
        res.reason = "function exited without the flagged access at ordinal " + std::to_string(finding.site);
      return res;
    }
    if (on_trace) {
      if (pos + 1 < finding.trace.size() && finding.trace[pos + 1] == next) {
        ++pos;
      } else {
        on_trace = false;
        if (pos + 1 < finding.trace.size()) left_at = pc;
      }
    }
    pc = next;
  }
}

}  // namespace cdt::binscan
