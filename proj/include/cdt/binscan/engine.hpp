#pragma once

// All binary analysis phases for one MVFW file.

#include <algorithm>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cdt/binscan/interpreter.hpp"

namespace cdt::binscan {

struct BinaryReport {
  std::string artifact;  // logical path or file name
  std::string digest;
  CpuArch arch = CpuArch::unknown;
  std::vector<Function> functions;
  std::vector<std::string> symbols;
  std::vector<WeaknessFinding> findings;
  friend bool operator==(const BinaryReport&, const BinaryReport&) = default;
};

struct ScanOptions {
  std::vector<std::string> sinks = default_sensitive_sinks();
  bool validate = true;
};

inline bool finding_less(const WeaknessFinding& a, const WeaknessFinding& b) {
  return std::tie(a.function, a.site, a.cwe_id) < std::tie(b.function, b.site, b.cwe_id);
}

/// Runs the analysis phases on decoded IL. Functions are analysed
/// independently; findings are sorted by (function, site, cwe).
inline std::vector<WeaknessFinding> analyze_program(const Program& il, std::vector<Function>& functions,
                                                    const ScanOptions& opts = {}) {
  auto names = callee_names(functions);
  std::vector<WeaknessFinding> out;
  for (auto& fn : functions) {
    fn = analyze_params_stack(fn, il);
    auto cfg = build_cfg(fn, il);
    auto facts = dataflow_taint(fn, cfg, il);
    for (auto& f : detect_weaknesses(fn, facts, il, names, opts.sinks)) {
      if (opts.validate) {
        auto v = dynamic_validate(fn, f, il, names, opts.sinks);
        f.validation = v.status;
        f.validation_note = v.reason;
      }
      out.push_back(std::move(f));
    }
  }
  std::sort(out.begin(), out.end(), finding_less);
  return out;
}

inline BinaryReport scan_binary(Bytes bytes, const std::string& artifact = {}, const ScanOptions& opts = {}) {
  BinaryReport rep;
  rep.artifact = artifact;
  rep.digest = sha256_hex(std::span<const std::uint8_t>(bytes));
  auto image = load_binary(std::move(bytes));
  map_sections(image);
  rep.arch = image.arch;
  auto il = disassemble(image);
  std::vector<std::pair<std::string, int>> symbols;
  for (const auto& s : image.symbols) {
    symbols.emplace_back(s.name, symbol_ordinal(image, s));
    rep.symbols.push_back(s.name);
  }
  rep.functions = reconstruct_functions(il, symbols);
  rep.findings = analyze_program(il, rep.functions, opts);
  return rep;
}

inline BinaryReport scan_binary_file(const std::filesystem::path& path, const std::string& artifact = {},
                                     const ScanOptions& opts = {}) {
  return scan_binary(read_file(path), artifact.empty() ? path.filename().string() : artifact, opts);
}

inline nlohmann::json to_json(const BinaryReport& r) {
  nlohmann::json j{{"artifact", r.artifact}, {"digest", r.digest}, {"arch", name_of(r.arch)}, {"symbols", r.symbols}};
  j["functions"] = nlohmann::json::array();
  for (const auto& f : r.functions)
    j["functions"].push_back({{"name", f.name}, {"entry", f.entry}, {"body", f.body}, {"params", f.params},
                              {"stack_slots", f.stack_slots}});
  j["findings"] = nlohmann::json::array();
  for (const auto& f : r.findings)
    j["findings"].push_back({{"cwe_id", f.cwe_id}, {"function", f.function}, {"site", f.site}, {"trace", f.trace},
                             {"severity", name_of(f.severity)}, {"validation", name_of(f.validation)},
                             {"validation_note", f.validation_note}, {"remediation", f.remediation}});
  return j;
}

inline BinaryReport report_from_json(const nlohmann::json& j) {
  try {
    BinaryReport r;
    r.artifact = j.at("artifact").get<std::string>();
    r.digest = j.at("digest").get<std::string>();
    r.arch = parse_enum<CpuArch>(j.at("arch").get<std::string>()).value();
    r.symbols = j.at("symbols").get<std::vector<std::string>>();
    for (const auto& f : j.at("functions"))
      r.functions.push_back({f.at("name").get<std::string>(), f.at("entry").get<int>(), f.at("body").get<std::vector<int>>(),
                             f.at("params").get<int>(), f.at("stack_slots").get<int>()});
    for (const auto& f : j.at("findings")) {
      WeaknessFinding w;
      w.cwe_id = f.at("cwe_id").get<std::string>();
      w.function = f.at("function").get<std::string>();
      w.site = f.at("site").get<int>();
      w.trace = f.at("trace").get<std::vector<int>>();
      w.severity = parse_enum<Severity>(f.at("severity").get<std::string>()).value();
      w.validation = parse_enum<Validation>(f.at("validation").get<std::string>()).value();
      w.validation_note = f.at("validation_note").get<std::string>();
      w.remediation = f.at("remediation").get<std::string>();
      r.findings.push_back(std::move(w));
    }
    return r;
  } catch (const std::exception& e) {
    throw Error(ErrorKind::malformed_document, "binscan report", e.what());
  }
}

}  // namespace cdt::binscan
