#pragma once

// Differences between two reports: finding rows by finding_id, summary rows
// by req_id.

#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cdt/verify/report.hpp"

namespace cdt::pipeline {

struct StatusChange {
  std::string req_id;
  std::string old_status;  // "absent" when the requirement is new
  std::string new_status;  // "absent" when it was dropped
  friend auto operator<=>(const StatusChange&, const StatusChange&) = default;
};

struct ReportDiff {
  std::vector<std::string> added;
  std::vector<std::string> removed;
  std::vector<StatusChange> status_changes;
  bool empty() const { return added.empty() && removed.empty() && status_changes.empty(); }
  friend bool operator==(const ReportDiff&, const ReportDiff&) = default;
};

inline constexpr std::string_view kAbsent = "absent";

inline ReportDiff diff_reports(std::string_view old_report, std::string_view new_report) {
  auto index = [](std::string_view text, std::set<std::string>& ids, std::map<std::string, std::string>& status) {
    for (const auto& row : verify::parse_report(text)) {
      if (row[verify::kFindingKind] == verify::kSummaryKind) status[row[verify::kRequirementIds]] = row[verify::kRequirementStatus];
      else ids.insert(row[verify::kFindingId]);
    }
  };
  std::set<std::string> old_ids, new_ids;
  std::map<std::string, std::string> old_status, new_status;
  index(old_report, old_ids, old_status);
  index(new_report, new_ids, new_status);

  ReportDiff d;
  std::set_difference(new_ids.begin(), new_ids.end(), old_ids.begin(), old_ids.end(), std::back_inserter(d.added));
  std::set_difference(old_ids.begin(), old_ids.end(), new_ids.begin(), new_ids.end(), std::back_inserter(d.removed));
  std::set<std::string> reqs;
  for (const auto& [k, _] : old_status) reqs.insert(k);
  for (const auto& [k, _] : new_status) reqs.insert(k);
  for (const auto& req : reqs) {
    auto o = old_status.count(req) ? old_status[req] : std::string(kAbsent);
    auto n = new_status.count(req) ? new_status[req] : std::string(kAbsent);
    if (o != n) d.status_changes.push_back({req, o, n});
  }
  return d;
}

inline nlohmann::json to_json(const ReportDiff& d) {
  nlohmann::json j{{"added", d.added}, {"removed", d.removed}, {"status_changes", nlohmann::json::array()}};
  for (const auto& s : d.status_changes) j["status_changes"].push_back({{"req_id", s.req_id}, {"old", s.old_status}, {"new", s.new_status}});
  return j;
}

}  // namespace cdt::pipeline
