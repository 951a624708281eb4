#pragma once

// SBoM x CVE matching and firmware-context filtering.

#include <algorithm>
#include <string>
#include <tuple>
#include <vector>

#include "cdt/vuln/cve_db.hpp"

namespace cdt::vuln {

enum class Applicability { applicable, filtered_out };

struct Component {
  std::string vendor;
  std::string product;
  std::string version;
  friend auto operator<=>(const Component&, const Component&) = default;
};

struct KnownFinding {
  std::string cve_id;
  Component component;
  std::vector<std::string> cwe_ids;
  Severity severity = Severity::low;
  double cvss = 0.0;
  Applicability applicability = Applicability::applicable;
  std::string filter_reason;
  friend bool operator==(const KnownFinding&, const KnownFinding&) = default;
};

inline bool known_less(const KnownFinding& a, const KnownFinding& b) {
  return std::tie(a.cve_id, a.component) < std::tie(b.cve_id, b.component);
}

inline bool affects(const CveRecord& r, const model::SbomEntry& e, const AliasTable& aliases) {
  auto id = aliases.resolve(e.vendor, e.product);
  for (const auto& a : r.affected)
    if (aliases.resolve(a.vendor, a.product) == id && in_range(a, e.version)) return true;
  return false;
}

/// One finding per (entry, record) pair that matches. Entries whose version
/// is "unknown" match nothing.
inline std::vector<KnownFinding> match_cves(const std::vector<model::SbomEntry>& sbom, const std::vector<CveRecord>& db,
                                            const AliasTable& aliases = {}) {
  std::map<Identity, std::vector<const CveRecord*>> by_id;
  for (const auto& r : db) {
    std::set<Identity> ids;
    for (const auto& a : r.affected) ids.insert(aliases.resolve(a.vendor, a.product));
    for (const auto& id : ids) by_id[id].push_back(&r);
  }
  std::vector<KnownFinding> out;
  for (const auto& e : sbom) {
    auto it = by_id.find(aliases.resolve(e.vendor, e.product));
    if (it == by_id.end()) continue;
    for (const auto* r : it->second)
      if (affects(*r, e, aliases))
        out.push_back({r->cve_id, {e.vendor, e.product, e.version}, r->cwe_ids, r->severity, r->cvss,
                       Applicability::applicable, {}});
  }
  std::sort(out.begin(), out.end(), known_less);
  return out;
}

/// The first constraint the twin fails, or nothing.
inline std::optional<std::string> context_mismatch(const ContextConstraints& c, const std::string& description,
                                                   const model::CyberDigitalTwin& cdt) {
  if (c.os_families && !c.os_families->count(cdt.os_info.family))
    return "os family: firmware is " + std::string(name_of(cdt.os_info.family));
  if (c.cpu_archs && !c.cpu_archs->count(cdt.hw_bom.cpu_arch))
    return "cpu arch: firmware is " + std::string(name_of(cdt.hw_bom.cpu_arch));
  for (const auto& [k, v] : c.required_kernel_flags) {
    auto it = cdt.kernel_config.find(k);
    if (it == cdt.kernel_config.end()) return "kernel flag: " + k + " not set";
    if (it->second != v) return "kernel flag: " + k + "=" + it->second + ", requires " + v;
  }
  for (const auto& kw : c.description_keywords_exclude)
    if (text::icontains(description, kw)) return "description keyword: " + kw;
  return std::nullopt;
}

/// Flips applicable findings to filtered_out when their record's context
/// (plus any analyst overrides) does not fit the twin. Count and order are kept.
inline std::vector<KnownFinding> filter_by_context(std::vector<KnownFinding> findings, const model::CyberDigitalTwin& cdt,
                                                   const std::vector<CveRecord>& db, const ContextOverrides& overrides = {}) {
  std::map<std::string, const CveRecord*> by_cve;
  for (const auto& r : db) by_cve[r.cve_id] = &r;
  for (auto& f : findings) {
    if (f.applicability != Applicability::applicable) continue;
    auto it = by_cve.find(f.cve_id);
    if (it == by_cve.end()) continue;
    if (auto why = context_mismatch(effective_context(*it->second, overrides), it->second->description, cdt)) {
      f.applicability = Applicability::filtered_out;
      f.filter_reason = *why;
    }
  }
  return findings;
}

}  // namespace cdt::vuln

namespace cdt {

template <>
struct EnumNames<vuln::Applicability> {
  using V = vuln::Applicability;
  static constexpr std::array values{CDT_ENUM_NAME(V, applicable), CDT_ENUM_NAME(V, filtered_out)};
};

}  // namespace cdt
