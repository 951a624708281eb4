#pragma once

// Requirements file (JSON array) and CWE -> requirement mapping (CSV).
//
//   [{"req_id": "REQ-HARD", "title": "...", "source": "UNECE WP.29 Annex A 4.3.6",
//     "policy_check_ids": ["aslr"]}]
//
//   cwe_id,req_id
//   CWE-416,REQ-HARD

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cdt/core/csv.hpp"
#include "cdt/core/digest.hpp"
#include "cdt/core/text.hpp"

namespace cdt::verify {

struct Requirement {
  std::string req_id;
  std::string title;
  std::string source;
  std::vector<std::string> policy_check_ids;
  friend bool operator==(const Requirement&, const Requirement&) = default;
};

struct CweMapping {
  std::string cwe_id;
  std::string req_id;
  friend auto operator<=>(const CweMapping&, const CweMapping&) = default;
};

inline std::vector<Requirement> parse_requirements(std::string_view content) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(content);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::malformed_document, "offset " + std::to_string(e.byte), "requirements file is not valid JSON");
  }
  if (!doc.is_array()) throw Error(ErrorKind::malformed_document, "requirements", "top level must be an array");
  std::vector<Requirement> out;
  std::set<std::string> seen;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& j = doc[i];
    auto where = "requirement " + std::to_string(i);
    auto fail = [&](const std::string& what) { throw Error(ErrorKind::malformed_entry, where, what); };
    if (!j.is_object() || !j.contains("req_id") || !j["req_id"].is_string() || j["req_id"].get<std::string>().empty())
      fail("req_id missing");
    Requirement r;
    r.req_id = j["req_id"].get<std::string>();
    where = r.req_id;
    for (auto [key, dst] : {std::pair{"title", &r.title}, std::pair{"source", &r.source}}) {
      if (!j.contains(key)) continue;
      if (!j[key].is_string()) fail(std::string(key) + " must be a string");
      *dst = j[key].get<std::string>();
    }
    if (j.contains("policy_check_ids")) {
      if (!j["policy_check_ids"].is_array()) fail("policy_check_ids must be an array");
      for (const auto& c : j["policy_check_ids"]) {
        if (!c.is_string()) fail("policy_check_ids must hold strings");
        r.policy_check_ids.push_back(c.get<std::string>());
      }
    }
    if (!seen.insert(r.req_id).second) throw Error(ErrorKind::duplicate, r.req_id, "req_id appears twice");
    out.push_back(std::move(r));
  }
  std::sort(out.begin(), out.end(), [](const Requirement& a, const Requirement& b) { return a.req_id < b.req_id; });
  return out;
}

inline std::vector<Requirement> load_requirements(const std::filesystem::path& path) {
  return parse_requirements(read_text(path));
}

inline std::vector<CweMapping> parse_mappings(std::string_view content) {
  auto rows = csv::parse(content);
  if (rows.empty() || rows[0].size() != 2 || text::trim(rows[0][0]) != "cwe_id" || text::trim(rows[0][1]) != "req_id")
    throw Error(ErrorKind::malformed_document, "line 1", "mapping header must be 'cwe_id,req_id'");
  std::vector<CweMapping> out;
  std::set<CweMapping> seen;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    auto where = "line " + std::to_string(i + 1);
    if (row.size() == 1 && text::trim(row[0]).empty()) continue;
    if (row.size() != 2) throw Error(ErrorKind::malformed_entry, where, "expected two fields");
    CweMapping m{std::string(text::trim(row[0])), std::string(text::trim(row[1]))};
    if (!m.cwe_id.starts_with("CWE-") || m.req_id.empty())
      throw Error(ErrorKind::malformed_entry, where, "expected '<CWE-N>,<req_id>'");
    if (!seen.insert(m).second) throw Error(ErrorKind::duplicate, where, m.cwe_id + " -> " + m.req_id + " listed twice");
    out.push_back(std::move(m));
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline std::vector<CweMapping> load_mappings(const std::filesystem::path& path) { return parse_mappings(read_text(path)); }

}  // namespace cdt::verify
