#pragma once

// Retracing findings to requirements, verdicts, and the CSV report.

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "cdt/binscan/weakness.hpp"
#include "cdt/core/csv.hpp"
#include "cdt/core/digest.hpp"
#include "cdt/verify/policies.hpp"
#include "cdt/verify/requirements.hpp"
#include "cdt/vuln/matcher.hpp"

namespace cdt::verify {

enum class FindingKind { known, weakness, policy };
enum class VerdictStatus { fulfilled, unfulfilled, not_evaluated };

}  // namespace cdt::verify

namespace cdt {

template <>
struct EnumNames<verify::FindingKind> {
  using V = verify::FindingKind;
  static constexpr std::array values{CDT_ENUM_NAME(V, known), CDT_ENUM_NAME(V, weakness), CDT_ENUM_NAME(V, policy)};
};

template <>
struct EnumNames<verify::VerdictStatus> {
  using V = verify::VerdictStatus;
  static constexpr std::array values{CDT_ENUM_NAME(V, fulfilled), CDT_ENUM_NAME(V, unfulfilled),
                                     CDT_ENUM_NAME(V, not_evaluated)};
};

}  // namespace cdt

namespace cdt::verify {

/// One report-level finding of any kind.
struct Finding {
  std::string id;
  FindingKind kind = FindingKind::known;
  std::string component;  // product, binary artifact, or policy check id
  std::string version;
  std::string cve_id;
  std::vector<std::string> cwe_ids;
  Severity severity = Severity::low;
  bool applicable = true;
  std::string validation;  // weaknesses only
  std::string check_id;    // policy only
  friend bool operator==(const Finding&, const Finding&) = default;
};

/// Stable across runs and row order: hash of (kind, component, version, cve/cwe, site).
inline std::string finding_id(FindingKind kind, std::string_view component, std::string_view version,
                              std::string_view cve_or_cwe, std::string_view site) {
  Sha256 h;
  for (auto part : {name_of(kind), component, version, cve_or_cwe, site}) {
    h.update(part);
    h.update(std::string_view("\x1f", 1));
  }
  static constexpr char prefix[] = {'K', 'W', 'P'};
  return std::string(1, prefix[static_cast<int>(kind)]) + "-" + h.hex().substr(0, 16);
}

inline Finding from_known(const vuln::KnownFinding& k) {
  Finding f;
  f.kind = FindingKind::known;
  f.component = k.component.vendor + ":" + k.component.product;
  f.version = k.component.version;
  f.cve_id = k.cve_id;
  f.cwe_ids = k.cwe_ids;
  f.severity = k.severity;
  f.applicable = k.applicability == vuln::Applicability::applicable;
  f.id = finding_id(f.kind, f.component, f.version, f.cve_id, "");
  return f;
}

inline Finding from_weakness(const std::string& artifact, const binscan::WeaknessFinding& w) {
  Finding f;
  f.kind = FindingKind::weakness;
  f.component = artifact;
  f.cwe_ids = {w.cwe_id};
  f.severity = w.severity;
  f.validation = std::string(name_of(w.validation));
  f.id = finding_id(f.kind, f.component, "", w.cwe_id, w.function + "@" + std::to_string(w.site));
  return f;
}

inline Finding from_policy(const PolicyFinding& p) {
  Finding f;
  f.kind = FindingKind::policy;
  f.component = p.check_id;
  f.check_id = p.check_id;
  if (p.cwe_id) f.cwe_ids = {*p.cwe_id};
  f.severity = p.severity;
  f.id = finding_id(f.kind, f.component, "", p.cwe_id.value_or(""), p.evidence);
  return f;
}

/// req_id -> ids of findings whose CWEs map to it. Filtered-out known
/// findings are skipped.
using Retraced = std::map<std::string, std::vector<std::string>>;

inline Retraced retrace(const std::vector<Finding>& findings, const std::vector<CweMapping>& mappings) {
  std::map<std::string, std::set<std::string>> by_cwe;
  for (const auto& m : mappings) by_cwe[m.cwe_id].insert(m.req_id);
  std::map<std::string, std::set<std::string>> acc;
  for (const auto& f : findings) {
    if (!f.applicable) continue;
    for (const auto& cwe : f.cwe_ids)
      if (auto it = by_cwe.find(cwe); it != by_cwe.end())
        for (const auto& req : it->second) acc[req].insert(f.id);
  }
  Retraced out;
  for (auto& [req, ids] : acc) out[req] = {ids.begin(), ids.end()};
  return out;
}

struct RequirementVerdict {
  std::string req_id;
  VerdictStatus status = VerdictStatus::not_evaluated;
  std::vector<std::string> retraced_findings;
  friend bool operator==(const RequirementVerdict&, const RequirementVerdict&) = default;
};

/// A requirement fails when anything is retraced to it or one of its policy
/// checks produced a finding; with no mapping and no checks it is not evaluated.
inline std::vector<RequirementVerdict> verify_requirements(const std::vector<Requirement>& requirements,
                                                           const Retraced& retraced,
                                                           const std::vector<Finding>& policy_results,
                                                           const std::vector<CweMapping>& mappings) {
  std::set<std::string> mapped;
  for (const auto& m : mappings) mapped.insert(m.req_id);
  std::vector<RequirementVerdict> out;
  for (const auto& r : requirements) {
    std::set<std::string> ids;
    if (auto it = retraced.find(r.req_id); it != retraced.end()) ids.insert(it->second.begin(), it->second.end());
    for (const auto& p : policy_results)
      if (p.kind == FindingKind::policy &&
          std::find(r.policy_check_ids.begin(), r.policy_check_ids.end(), p.check_id) != r.policy_check_ids.end())
        ids.insert(p.id);
    RequirementVerdict v{r.req_id, VerdictStatus::fulfilled, {ids.begin(), ids.end()}};
    if (!ids.empty()) v.status = VerdictStatus::unfulfilled;
    else if (!mapped.count(r.req_id) && r.policy_check_ids.empty()) v.status = VerdictStatus::not_evaluated;
    out.push_back(std::move(v));
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.req_id < b.req_id; });
  return out;
}

// Report ----------------------------------------------------------------------

inline const csv::Row& report_header() {
  static const csv::Row h{"firmware_id", "finding_id", "finding_kind", "component", "version", "cve_id", "cwe_id",
                          "severity", "applicability", "validation", "requirement_ids", "requirement_status"};
  return h;
}

enum Column : std::size_t {
  kFirmwareId, kFindingId, kFindingKind, kComponent, kVersion, kCveId, kCweId,
  kSeverity, kApplicability, kValidation, kRequirementIds, kRequirementStatus, kColumns
};

/// finding_kind of the per-requirement summary rows.
inline constexpr std::string_view kSummaryKind = "requirement";

inline bool finding_row_less(const Finding& a, const Finding& b) {
  return std::tie(a.kind, a.component, a.version, a.cve_id, a.cwe_ids, a.id) <
         std::tie(b.kind, b.component, b.version, b.cve_id, b.cwe_ids, b.id);
}

inline std::vector<csv::Row> report_rows(const std::string& firmware_id, std::vector<Finding> findings,
                                         const std::vector<RequirementVerdict>& verdicts) {
  std::sort(findings.begin(), findings.end(), finding_row_less);
  std::map<std::string, std::vector<const RequirementVerdict*>> by_finding;
  for (const auto& v : verdicts)
    for (const auto& id : v.retraced_findings) by_finding[id].push_back(&v);
  std::vector<csv::Row> rows{report_header()};
  for (const auto& f : findings) {
    std::vector<std::string> reqs, statuses;
    if (f.applicable)
      if (auto it = by_finding.find(f.id); it != by_finding.end())
        for (const auto* v : it->second) {
          reqs.push_back(v->req_id);
          statuses.emplace_back(name_of(v->status));
        }
    std::string status = text::join(statuses, ";");
    if (f.applicable && reqs.empty()) status = "unmapped";
    rows.push_back({firmware_id, f.id, std::string(name_of(f.kind)), f.component, f.version, f.cve_id,
                    text::join(f.cwe_ids, ";"), std::string(name_of(f.severity)),
                    f.applicable ? "applicable" : "filtered_out", f.validation, text::join(reqs, ";"), status});
  }
  for (const auto& v : verdicts)
    rows.push_back({firmware_id, "", std::string(kSummaryKind), "", "", "", "", "", "", "", v.req_id,
                    std::string(name_of(v.status))});
  return rows;
}

inline std::string format_report(const std::vector<csv::Row>& rows) {
  std::string out;
  for (const auto& r : rows) out += csv::format_row(r);
  return out;
}

inline std::string emit_report(const std::string& firmware_id, const std::vector<Finding>& findings,
                               const std::vector<RequirementVerdict>& verdicts, const std::filesystem::path& dest) {
  auto text = format_report(report_rows(firmware_id, findings, verdicts));
  write_file(dest, text);
  return text;
}

/// Parses a report, checking the header; rows keep the column order above.
inline std::vector<csv::Row> parse_report(std::string_view text) {
  auto rows = csv::parse(text);
  if (rows.empty() || rows[0] != report_header())
    throw Error(ErrorKind::schema_mismatch, "header", "not a report in the expected column layout");
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (rows[i].size() != kColumns)
      throw Error(ErrorKind::schema_mismatch, "line " + std::to_string(i + 1), "expected " + std::to_string(kColumns) + " fields");
  rows.erase(rows.begin());
  return rows;
}

struct ReportTotals {
  std::size_t known_applicable = 0;
  std::size_t known_filtered = 0;
  std::size_t known_critical = 0;
  std::size_t weaknesses = 0;
  std::size_t weaknesses_high = 0;
  std::size_t weaknesses_confirmed = 0;
  std::size_t policy = 0;
  std::size_t requirements = 0;
  std::size_t unfulfilled = 0;
  friend bool operator==(const ReportTotals&, const ReportTotals&) = default;
};

inline ReportTotals totals(const std::vector<csv::Row>& rows) {
  ReportTotals t;
  for (const auto& r : rows) {
    const auto& kind = r[kFindingKind];
    if (kind == "known") {
      if (r[kApplicability] == "applicable") {
        ++t.known_applicable;
        t.known_critical += r[kSeverity] == "critical";
      } else {
        ++t.known_filtered;
      }
    } else if (kind == "weakness") {
      ++t.weaknesses;
      t.weaknesses_high += r[kSeverity] == "high" || r[kSeverity] == "critical";
      t.weaknesses_confirmed += r[kValidation] == "confirmed";
    } else if (kind == "policy") {
      ++t.policy;
    } else if (kind == kSummaryKind) {
      ++t.requirements;
      t.unfulfilled += r[kRequirementStatus] == "unfulfilled";
    }
  }
  return t;
}

}  // namespace cdt::verify
