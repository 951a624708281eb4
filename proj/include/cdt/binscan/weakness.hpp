#pragma once

// Weakness rules over dataflow facts, and remediation text.

#include <map>
#include <set>
#include <string>
#include <vector>

#include "cdt/binscan/dataflow.hpp"
#include "cdt/core/severity.hpp"

namespace cdt::binscan {

inline const std::vector<std::string>& default_sensitive_sinks() {
  static const std::vector<std::string> sinks{"make_key", "generate_token", "set_password"};
  return sinks;
}

enum class Validation { unvalidated, confirmed, unconfirmed };

struct WeaknessFinding {
  std::string cwe_id;
  std::string function;
  int site = 0;
  std::vector<int> trace;  // function entry ... site
  Severity severity = Severity::low;
  Validation validation = Validation::unvalidated;
  std::string validation_note;
  std::string remediation;
  friend bool operator==(const WeaknessFinding&, const WeaknessFinding&) = default;
};

inline Severity weakness_severity(std::string_view cwe) {
  if (cwe == "CWE-416") return Severity::high;
  if (cwe == "CWE-119" || cwe == "CWE-125") return Severity::medium;
  return Severity::low;
}

/// Names of call targets, keyed by entry ordinal.
using CalleeNames = std::map<int, std::string>;

inline CalleeNames callee_names(const std::vector<Function>& fns) {
  CalleeNames out;
  for (const auto& f : fns) out[f.entry] = f.name;
  return out;
}

/// (cwe, site) pairs an instruction triggers in one environment.
inline std::vector<std::string> triggered(const Instruction& in, const Env& env, const CalleeNames& names,
                                          const std::vector<std::string>& sinks) {
  std::set<std::string> out;
  if (in.op == Op::LOAD || in.op == Op::STORE) {
    for (const auto& v : env[in.rs1]) {
      if (v.kind == ValueKind::freed) out.insert("CWE-416");
      if (v.kind == ValueKind::alloc && (in.imm < 0 || in.imm >= v.size))
        out.insert(in.op == Op::LOAD ? "CWE-125" : "CWE-119");
    }
  } else if (in.op == Op::CALL) {
    auto it = names.find(in.imm);
    if (it != names.end() && std::find(sinks.begin(), sinks.end(), it->second) != sinks.end()) {
      for (int r = 0; r < kArgRegisters; ++r)
        for (const auto& v : env[r])
          if (v.kind == ValueKind::tainted) out.insert("CWE-338");
    }
  }
  return {out.begin(), out.end()};
}

inline std::string suggest_remediation(const WeaknessFinding& f) {
  auto at = "ordinal " + std::to_string(f.site) + " in " + f.function;
  if (f.cwe_id == "CWE-416")
    return "Use after free at " + at + ": clear or reassign the pointer right after it is freed on the traced path, "
           "and do not dereference it after free.";
  if (f.cwe_id == "CWE-125")
    return "Out-of-bounds read at " + at + ": bound the offset against the allocation size before the load.";
  if (f.cwe_id == "CWE-119")
    return "Out-of-bounds write at " + at + ": bound the offset against the allocation size before the store.";
  if (f.cwe_id == "CWE-338")
    return "Weak randomness reaches a sensitive call at " + at +
           ": replace the randomness source with a cryptographically secure generator for this sink.";
  return "Weakness " + f.cwe_id + " at " + at + ": review the flagged instruction and the traced path.";
}

/// One finding per (cwe, site) with the shortest witness trace.
inline std::vector<WeaknessFinding> detect_weaknesses(const Function& fn, const Facts& facts, const Program& il,
                                                      const CalleeNames& names,
                                                      const std::vector<std::string>& sinks = default_sensitive_sinks()) {
  std::map<std::pair<int, std::string>, std::vector<int>> best;
  for (std::size_t b = 0; b < facts.block_in.size(); ++b) {
    for (const auto& p : facts.block_in[b]) {
      detail::run_block(
          facts.cfg, static_cast<int>(b), il, p,
          [&](const Instruction& in, const Env& env, const std::vector<int>& trace) {
            for (const auto& cwe : triggered(in, env, names, sinks)) {
              auto witness = trace;
              witness.push_back(in.index);
              auto [it, fresh] = best.try_emplace({in.index, cwe}, witness);
              if (!fresh && trace_less(witness, it->second)) it->second = witness;
            }
          },
          [](int, const PathState&) {});
    }
  }
  std::vector<WeaknessFinding> out;
  for (auto& [key, trace] : best) {
    WeaknessFinding f;
    f.cwe_id = key.second;
    f.function = fn.name;
    f.site = key.first;
    f.trace = std::move(trace);
    f.severity = weakness_severity(f.cwe_id);
    f.remediation = suggest_remediation(f);
    out.push_back(std::move(f));
  }
  return out;
}

}  // namespace cdt::binscan

namespace cdt {

template <>
struct EnumNames<binscan::Validation> {
  using V = binscan::Validation;
  static constexpr std::array values{CDT_ENUM_NAME(V, unvalidated), CDT_ENUM_NAME(V, confirmed),
                                     CDT_ENUM_NAME(V, unconfirmed)};
};

}  // namespace cdt
