#pragma once

// Component signature database.
//
// One JSON object per line:
//   {"vendor": "madler", "product": "zlib", "origin": "open_source",
//    "licenses": ["Zlib"], "latest": "1.2.11",
//    "indicators": [{"kind": "filename", "pattern": "libz.so.*", "version_capture": 1}]}
//
// path/filename patterns are globs (see text::glob_match) and capture
// groups are the wildcards, numbered from 1. unique_string patterns are
// ECMAScript regular expressions searched in the printable runs of a file.
// pkgdb patterns are globs over package names in the package database.

#include <optional>
#include <regex>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "cdt/core/error.hpp"
#include "cdt/core/text.hpp"
#include "cdt/core/version.hpp"
#include "cdt/model/cdt.hpp"

namespace cdt::sca {

using model::IndicatorKind;
using model::Origin;

struct Indicator {
  IndicatorKind kind = IndicatorKind::filename;
  std::string pattern;
  std::optional<int> version_capture;
};

struct Signature {
  std::string vendor;
  std::string product;
  Origin origin = Origin::unknown;
  std::vector<std::string> licenses;
  std::optional<std::string> latest;  // newest upstream release, for outdated-component checks
  std::vector<Indicator> indicators;
};

namespace detail {

inline std::size_t glob_wildcards(std::string_view pattern) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < pattern.size(); ++i) {
    if (pattern[i] == '\\') {
      ++i;
    } else if (pattern[i] == '*') {
      ++n;
      if (i + 1 < pattern.size() && pattern[i + 1] == '*') ++i;
    } else if (pattern[i] == '?') {
      ++n;
    }
  }
  return n;
}

inline Indicator parse_indicator(const nlohmann::json& j, const std::string& where) {
  auto fail = [&](const std::string& what) { throw Error(ErrorKind::malformed_entry, where, what); };
  if (!j.is_object()) fail("indicator must be an object");
  Indicator ind;
  auto kind = parse_enum<IndicatorKind>(j.value("kind", std::string{}));
  if (!kind) fail("indicator kind must be path, filename, unique_string or pkgdb");
  ind.kind = *kind;
  if (!j.contains("pattern") || !j["pattern"].is_string() || j["pattern"].get<std::string>().empty())
    fail("indicator needs a nonempty pattern");
  ind.pattern = j["pattern"].get<std::string>();
  if (j.contains("version_capture") && !j["version_capture"].is_null()) {
    if (!j["version_capture"].is_number_integer() || j["version_capture"].get<int>() < 1)
      fail("version_capture must be a positive integer");
    ind.version_capture = j["version_capture"].get<int>();
  }
  if (ind.kind == IndicatorKind::unique_string) {
    try {
      std::regex re(ind.pattern, std::regex::ECMAScript);
      if (ind.version_capture && static_cast<unsigned>(*ind.version_capture) > re.mark_count())
        fail("version_capture exceeds the pattern's group count");
    } catch (const std::regex_error& e) {
      fail(std::string("bad regular expression: ") + e.what());
    }
  } else if (ind.version_capture && ind.kind != IndicatorKind::pkgdb &&
             static_cast<std::size_t>(*ind.version_capture) > glob_wildcards(ind.pattern)) {
    fail("version_capture exceeds the glob's wildcard count");
  }
  return ind;
}

}  // namespace detail

inline Signature parse_signature(const nlohmann::json& j, const std::string& where) {
  auto fail = [&](const std::string& what) { throw Error(ErrorKind::malformed_entry, where, what); };
  if (!j.is_object()) fail("record must be an object");
  Signature sig;
  for (auto key : {"vendor", "product"}) {
    if (!j.contains(key) || !j[key].is_string() || j[key].get<std::string>().empty())
      fail(std::string("missing or empty '") + key + "'");
  }
  sig.vendor = j["vendor"].get<std::string>();
  sig.product = j["product"].get<std::string>();
  if (j.contains("origin")) {
    auto o = j["origin"].is_string() ? parse_enum<Origin>(j["origin"].get<std::string>()) : std::nullopt;
    if (!o) fail("unknown origin");
    sig.origin = *o;
  }
  if (j.contains("licenses")) {
    if (!j["licenses"].is_array()) fail("licenses must be an array");
    for (const auto& l : j["licenses"]) {
      if (!l.is_string()) fail("license ids must be strings");
      sig.licenses.push_back(l.get<std::string>());
    }
  }
  if (j.contains("latest") && !j["latest"].is_null()) {
    if (!j["latest"].is_string() || !is_valid_version(j["latest"].get<std::string>()))
      fail("latest must be a dotted version");
    sig.latest = j["latest"].get<std::string>();
  }
  if (!j.contains("indicators") || !j["indicators"].is_array() || j["indicators"].empty())
    fail("at least one indicator is required");
  for (std::size_t i = 0; i < j["indicators"].size(); ++i)
    sig.indicators.push_back(detail::parse_indicator(j["indicators"][i], where + " indicator " + std::to_string(i)));
  return sig;
}

/// Parses a signature database. Blank lines and lines starting with '#'
/// are skipped. Errors name the offending line.
inline std::vector<Signature> parse_signature_db(std::string_view content) {
  std::vector<Signature> out;
  std::set<std::tuple<std::string, std::string, IndicatorKind, std::string>> seen;
  std::size_t lineno = 0;
  for (auto line : text::lines(content)) {
    ++lineno;
    auto t = text::trim(line);
    if (t.empty() || t.front() == '#') continue;
    auto where = "line " + std::to_string(lineno);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(t);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorKind::malformed_entry, where, e.what());
    }
    auto sig = parse_signature(j, where);
    for (const auto& ind : sig.indicators)
      if (!seen.emplace(sig.vendor, sig.product, ind.kind, ind.pattern).second)
        throw Error(ErrorKind::malformed_entry, where,
                    "duplicate indicator '" + ind.pattern + "' for " + sig.vendor + "/" + sig.product);
    out.push_back(std::move(sig));
  }
  return out;
}

inline std::vector<Signature> load_signature_db(const std::filesystem::path& path) {
  return parse_signature_db(read_text(path));
}

inline std::string format_signature(const Signature& sig) {
  nlohmann::json j{{"vendor", sig.vendor}, {"product", sig.product}, {"origin", name_of(sig.origin)},
                   {"licenses", sig.licenses}};
  if (sig.latest) j["latest"] = *sig.latest;
  j["indicators"] = nlohmann::json::array();
  for (const auto& ind : sig.indicators) {
    nlohmann::json ij{{"kind", name_of(ind.kind)}, {"pattern", ind.pattern}};
    if (ind.version_capture) ij["version_capture"] = *ind.version_capture;
    j["indicators"].push_back(ij);
  }
  return j.dump();
}

}  // namespace cdt::sca
