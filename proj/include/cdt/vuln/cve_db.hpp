#pragma once

// Offline CVE feed: a JSON array of records.
//
//   {"cve_id": "CVE-2020-11656", "description": "...", "cwe_ids": ["CWE-416"],
//    "cvss": 9.8, "severity": "critical",            (optional; must agree with cvss)
//    "affected": [{"vendor": "sqlite", "product": "sqlite",
//                  "version_exact": "3.31.1"} |
//                 {"vendor": ..., "product": ..., "version_start_incl": "3.0", "version_end_excl": "3.32.0"}],
//    "context": {"os_families": [...], "cpu_archs": [...],
//                "required_kernel_flags": ["k=v"], "description_keywords_exclude": [...]},
//    "fixed_in": "3.32.0"}
//
// Alias table lines: `<alias> -> <canonical vendor> <canonical product>`,
// where alias is `product` or `vendor:product`.

#include <map>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cdt/core/digest.hpp"
#include "cdt/core/severity.hpp"
#include "cdt/core/text.hpp"
#include "cdt/core/version.hpp"
#include "cdt/model/cdt.hpp"

namespace cdt::vuln {

using nlohmann::json;

struct AffectedRange {
  std::string vendor;
  std::string product;
  std::optional<std::string> version_exact;
  std::optional<std::string> version_start_incl;
  std::optional<std::string> version_end_excl;
  friend bool operator==(const AffectedRange&, const AffectedRange&) = default;
};

struct ContextConstraints {
  std::optional<std::set<model::OsFamily>> os_families;
  std::optional<std::set<model::CpuArch>> cpu_archs;
  std::vector<std::pair<std::string, std::string>> required_kernel_flags;
  std::vector<std::string> description_keywords_exclude;
  bool empty() const {
    return !os_families && !cpu_archs && required_kernel_flags.empty() && description_keywords_exclude.empty();
  }
  friend bool operator==(const ContextConstraints&, const ContextConstraints&) = default;
};

struct CveRecord {
  std::string cve_id;
  std::string description;
  std::vector<std::string> cwe_ids;
  double cvss = 0.0;
  Severity severity = Severity::low;
  std::vector<AffectedRange> affected;
  ContextConstraints context;
  std::optional<std::string> fixed_in;
  friend bool operator==(const CveRecord&, const CveRecord&) = default;
};

inline bool is_cve_id(std::string_view s) {
  static const std::regex re("CVE-[0-9]{4}-[0-9]{4,}");
  return std::regex_match(s.begin(), s.end(), re);
}

inline bool is_cwe_id(std::string_view s) {
  static const std::regex re("CWE-[0-9]+");
  return std::regex_match(s.begin(), s.end(), re);
}

/// Does `version` fall in the range? "unknown" and unparseable versions never do.
inline bool in_range(const AffectedRange& r, std::string_view version) {
  auto v = Version::parse(version);
  if (!v || version == kUnknownVersion) return false;
  if (r.version_exact) return *v == Version::from(*r.version_exact);
  if (r.version_start_incl && *v < Version::from(*r.version_start_incl)) return false;
  if (r.version_end_excl && !(*v < Version::from(*r.version_end_excl))) return false;
  return true;
}

namespace detail {

template <class E>
std::set<E> enum_set(const json& j, const std::string& field, const std::function<void(const std::string&)>& fail) {
  if (!j.is_array()) fail(field + " must be an array");
  std::set<E> out;
  for (const auto& x : j) {
    auto v = x.is_string() ? parse_enum<E>(x.get<std::string>()) : std::nullopt;
    if (!v) fail(field + ": unknown value " + x.dump());
    out.insert(*v);
  }
  return out;
}

inline std::vector<std::string> string_list(const json& j, const std::string& field,
                                            const std::function<void(const std::string&)>& fail) {
  if (!j.is_array()) fail(field + " must be an array");
  std::vector<std::string> out;
  for (const auto& x : j) {
    if (!x.is_string()) fail(field + " must hold strings");
    out.push_back(x.get<std::string>());
  }
  return out;
}

inline std::optional<std::string> opt_version(const json& j, const char* key, const std::function<void(const std::string&)>& fail) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  if (!j[key].is_string() || !is_valid_version(j[key].get<std::string>())) fail(std::string(key) + " is not a dotted version");
  return j[key].get<std::string>();
}

}  // namespace detail

inline ContextConstraints parse_context(const json& j, const std::function<void(const std::string&)>& fail) {
  ContextConstraints c;
  if (j.is_null()) return c;
  if (!j.is_object()) fail("context must be an object");
  if (j.contains("os_families") && !j["os_families"].is_null())
    c.os_families = detail::enum_set<model::OsFamily>(j["os_families"], "os_families", fail);
  if (j.contains("cpu_archs") && !j["cpu_archs"].is_null())
    c.cpu_archs = detail::enum_set<model::CpuArch>(j["cpu_archs"], "cpu_archs", fail);
  if (j.contains("required_kernel_flags") && !j["required_kernel_flags"].is_null())
    for (const auto& flag : detail::string_list(j["required_kernel_flags"], "required_kernel_flags", fail)) {
      auto eq = flag.find('=');
      if (eq == std::string::npos || eq == 0) fail("kernel flag '" + flag + "' is not key=value");
      c.required_kernel_flags.emplace_back(std::string(text::trim(flag.substr(0, eq))),
                                           std::string(text::trim(flag.substr(eq + 1))));
    }
  if (j.contains("description_keywords_exclude") && !j["description_keywords_exclude"].is_null())
    c.description_keywords_exclude =
        detail::string_list(j["description_keywords_exclude"], "description_keywords_exclude", fail);
  return c;
}

inline CveRecord parse_cve_record(const json& j, const std::string& where) {
  std::string at = where;
  auto fail = [&](const std::string& what) { throw Error(ErrorKind::malformed_entry, at, what); };
  if (!j.is_object()) fail("record must be an object");
  if (!j.contains("cve_id") || !j["cve_id"].is_string() || !is_cve_id(j["cve_id"].get<std::string>()))
    fail("cve_id missing or not of the form CVE-YYYY-NNNN");
  CveRecord r;
  r.cve_id = j["cve_id"].get<std::string>();
  at = r.cve_id;
  if (j.contains("description")) {
    if (!j["description"].is_string()) fail("description must be a string");
    r.description = j["description"].get<std::string>();
  }
  if (j.contains("cwe_ids")) r.cwe_ids = detail::string_list(j["cwe_ids"], "cwe_ids", fail);
  for (const auto& c : r.cwe_ids)
    if (!is_cwe_id(c)) fail("bad CWE id '" + c + "'");
  if (!j.contains("cvss") || !j["cvss"].is_number()) fail("cvss missing");
  r.cvss = j["cvss"].get<double>();
  if (!(r.cvss >= 0.0 && r.cvss <= 10.0)) fail("cvss outside 0.0-10.0");
  r.severity = severity_from_cvss(r.cvss);
  if (j.contains("severity") && !j["severity"].is_null()) {
    auto s = j["severity"].is_string() ? parse_enum<Severity>(j["severity"].get<std::string>()) : std::nullopt;
    if (!s || *s != r.severity) fail("severity disagrees with cvss");
  }
  if (!j.contains("affected") || !j["affected"].is_array() || j["affected"].empty()) fail("affected must be a nonempty array");
  for (const auto& a : j["affected"]) {
    if (!a.is_object() || !a.contains("vendor") || !a.contains("product") || !a["vendor"].is_string() ||
        !a["product"].is_string())
      fail("affected entry needs vendor and product");
    AffectedRange ar{a["vendor"].get<std::string>(), a["product"].get<std::string>(),
                     detail::opt_version(a, "version_exact", fail), detail::opt_version(a, "version_start_incl", fail),
                     detail::opt_version(a, "version_end_excl", fail)};
    if (ar.version_exact && (ar.version_start_incl || ar.version_end_excl))
      fail("version_exact is exclusive with range bounds");
    if (ar.version_start_incl && ar.version_end_excl &&
        !(Version::from(*ar.version_start_incl) < Version::from(*ar.version_end_excl)))
      fail("version_start_incl must be below version_end_excl");
    r.affected.push_back(std::move(ar));
  }
  if (j.contains("context")) r.context = parse_context(j["context"], fail);
  r.fixed_in = detail::opt_version(j, "fixed_in", fail);
  return r;
}

inline std::vector<CveRecord> parse_cve_db(std::string_view content) {
  json doc;
  try {
    doc = json::parse(content);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::malformed_entry, "offset " + std::to_string(e.byte), "feed is not valid JSON");
  }
  if (!doc.is_array()) throw Error(ErrorKind::malformed_document, "feed", "top level must be an array");
  std::vector<CveRecord> out;
  std::set<std::string> seen;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    auto r = parse_cve_record(doc[i], "record " + std::to_string(i));
    if (!seen.insert(r.cve_id).second) throw Error(ErrorKind::duplicate, r.cve_id, "cve_id appears twice");
    out.push_back(std::move(r));
  }
  return out;
}

inline std::vector<CveRecord> load_cve_db(const std::filesystem::path& path) { return parse_cve_db(read_text(path)); }

inline json to_json(const CveRecord& r) {
  json aff = json::array();
  for (const auto& a : r.affected) {
    json x{{"vendor", a.vendor}, {"product", a.product}};
    if (a.version_exact) x["version_exact"] = *a.version_exact;
    if (a.version_start_incl) x["version_start_incl"] = *a.version_start_incl;
    if (a.version_end_excl) x["version_end_excl"] = *a.version_end_excl;
    aff.push_back(std::move(x));
  }
  json ctx = json::object();
  if (r.context.os_families) {
    ctx["os_families"] = json::array();
    for (auto f : *r.context.os_families) ctx["os_families"].push_back(name_of(f));
  }
  if (r.context.cpu_archs) {
    ctx["cpu_archs"] = json::array();
    for (auto a : *r.context.cpu_archs) ctx["cpu_archs"].push_back(name_of(a));
  }
  if (!r.context.required_kernel_flags.empty()) {
    ctx["required_kernel_flags"] = json::array();
    for (const auto& [k, v] : r.context.required_kernel_flags) ctx["required_kernel_flags"].push_back(k + "=" + v);
  }
  if (!r.context.description_keywords_exclude.empty())
    ctx["description_keywords_exclude"] = r.context.description_keywords_exclude;
  json j{{"cve_id", r.cve_id}, {"description", r.description}, {"cwe_ids", r.cwe_ids}, {"cvss", r.cvss},
         {"severity", name_of(r.severity)}, {"affected", aff}, {"context", ctx}};
  if (r.fixed_in) j["fixed_in"] = *r.fixed_in;
  return j;
}

inline std::string format_cve_db(const std::vector<CveRecord>& db) {
  json arr = json::array();
  for (const auto& r : db) arr.push_back(to_json(r));
  return arr.dump(1) + "\n";
}

// Aliases -------------------------------------------------------------------

/// Lowercased (vendor, product) identity after alias resolution.
using Identity = std::pair<std::string, std::string>;

class AliasTable {
 public:
  void add(std::string alias, std::string vendor, std::string product) {
    map_[text::to_lower(alias)] = {text::to_lower(vendor), text::to_lower(product)};
  }

  Identity resolve(std::string_view vendor, std::string_view product) const {
    auto v = text::to_lower(vendor), p = text::to_lower(product);
    if (auto it = map_.find(v + ":" + p); it != map_.end()) return it->second;
    if (auto it = map_.find(p); it != map_.end()) return it->second;
    return {v, p};
  }

  std::size_t size() const { return map_.size(); }

 private:
  std::map<std::string, Identity> map_;
};

inline AliasTable parse_alias_table(std::string_view content) {
  AliasTable t;
  int n = 0;
  for (auto line : text::lines(content)) {
    ++n;
    auto s = text::trim(line);
    if (s.empty() || s.front() == '#') continue;
    auto arrow = s.find("->");
    auto rhs = arrow == std::string_view::npos ? std::vector<std::string_view>{} : text::split_ws(s.substr(arrow + 2));
    auto lhs = arrow == std::string_view::npos ? std::string_view{} : text::trim(s.substr(0, arrow));
    if (lhs.empty() || rhs.size() != 2 || text::split_ws(lhs).size() != 1)
      throw Error(ErrorKind::malformed_entry, "line " + std::to_string(n), "expected '<alias> -> <vendor> <product>'");
    t.add(std::string(lhs), std::string(rhs[0]), std::string(rhs[1]));
  }
  return t;
}

inline AliasTable load_alias_table(const std::filesystem::path& path) { return parse_alias_table(read_text(path)); }

// Context side file ---------------------------------------------------------

/// Analyst-supplied constraints: {"*": {...}, "CVE-...": {...}}. "*" applies
/// to every record.
using ContextOverrides = std::map<std::string, ContextConstraints>;

inline ContextOverrides parse_context_overrides(std::string_view content) {
  json doc;
  try {
    doc = json::parse(content);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::malformed_document, "offset " + std::to_string(e.byte), "context file is not valid JSON");
  }
  if (!doc.is_object()) throw Error(ErrorKind::malformed_document, "context", "top level must be an object");
  ContextOverrides out;
  for (const auto& [key, value] : doc.items()) {
    if (key != "*" && !is_cve_id(key)) throw Error(ErrorKind::malformed_entry, key, "key must be '*' or a CVE id");
    out[key] = parse_context(value, [&](const std::string& what) { throw Error(ErrorKind::malformed_entry, key, what); });
  }
  return out;
}

inline ContextOverrides load_context_overrides(const std::filesystem::path& path) {
  return parse_context_overrides(read_text(path));
}

/// Both sets of constraints must hold.
inline ContextConstraints merge(ContextConstraints a, const ContextConstraints& b) {
  auto meet = [](auto& x, const auto& y) {
    if (!y) return;
    if (!x) {
      x = y;
      return;
    }
    std::decay_t<decltype(*x)> both;
    for (const auto& v : *x)
      if (y->count(v)) both.insert(v);
    x = std::move(both);
  };
  meet(a.os_families, b.os_families);
  meet(a.cpu_archs, b.cpu_archs);
  a.required_kernel_flags.insert(a.required_kernel_flags.end(), b.required_kernel_flags.begin(), b.required_kernel_flags.end());
  a.description_keywords_exclude.insert(a.description_keywords_exclude.end(), b.description_keywords_exclude.begin(),
                                        b.description_keywords_exclude.end());
  return a;
}

inline ContextConstraints effective_context(const CveRecord& r, const ContextOverrides& overrides) {
  auto c = r.context;
  if (auto it = overrides.find("*"); it != overrides.end()) c = merge(c, it->second);
  if (auto it = overrides.find(r.cve_id); it != overrides.end()) c = merge(c, it->second);
  return c;
}

}  // namespace cdt::vuln
