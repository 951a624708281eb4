#pragma once

// Component identification over an extracted file tree.

#include <algorithm>
#include <filesystem>
#include <map>
#include <regex>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "cdt/core/digest.hpp"
#include "cdt/core/text.hpp"
#include "cdt/core/version.hpp"
#include "cdt/extract/extractor.hpp"
#include "cdt/model/cdt.hpp"
#include "cdt/sca/multi_search.hpp"
#include "cdt/sca/signature.hpp"

namespace cdt::sca {

namespace fs = std::filesystem;
using extract::FileNode;
using extract::NodeKind;
using model::Evidence;
using model::SbomEntry;

struct FileTree {
  fs::path root;
  std::vector<FileNode> nodes;

  static FileTree at(const fs::path& root) { return {root, extract::list_tree(root)}; }
  fs::path file(const FileNode& n) const { return root / n.path; }
};

struct SbomResult {
  std::vector<SbomEntry> entries;
  std::vector<std::string> warnings;
};

inline constexpr std::size_t kMinAnchor = 3;
inline constexpr std::string_view kPackageDbPath = "var/lib/pkgdb/status";

namespace detail {

using Key = std::tuple<std::string, std::string, std::string>;

class Collector {
 public:
  void add(const Signature& sig, std::string version, Evidence ev) {
    auto& e = by_key_[{sig.vendor, sig.product, version}];
    if (e.vendor.empty()) {
      e.vendor = sig.vendor;
      e.product = sig.product;
      e.version = std::move(version);
      e.origin = sig.origin;
    }
    e.evidence.push_back(std::move(ev));
  }

  /// Evidence without a version is attached to every versioned entry of
  /// the same component; it only stands alone when nothing else was found.
  std::vector<SbomEntry> finish() {
    std::vector<SbomEntry> out;
    std::map<std::pair<std::string, std::string>, std::vector<Evidence>> unversioned;
    for (auto& [key, e] : by_key_)
      if (e.version == kUnknownVersion) unversioned[{e.vendor, e.product}] = e.evidence;
    for (auto& [key, e] : by_key_) {
      auto it = unversioned.find({e.vendor, e.product});
      if (e.version == kUnknownVersion) {
        bool has_versioned = std::any_of(by_key_.begin(), by_key_.end(), [&](const auto& kv) {
          return kv.second.vendor == e.vendor && kv.second.product == e.product && kv.second.version != kUnknownVersion;
        });
        if (has_versioned) continue;
      } else if (it != unversioned.end()) {
        e.evidence.insert(e.evidence.end(), it->second.begin(), it->second.end());
      }
      out.push_back(e);
    }
    model::canonicalize(out);
    return out;
  }

 private:
  std::map<Key, SbomEntry> by_key_;
};

inline std::string captured_version(const std::vector<std::string>& caps, const std::optional<int>& which) {
  if (!which) return std::string(kUnknownVersion);
  auto i = static_cast<std::size_t>(*which) - 1;
  if (i >= caps.size() || !is_valid_version(caps[i])) return {};
  return caps[i];
}

struct StringRule {
  const Signature* sig;
  const Indicator* ind;
  std::regex re;
  bool anchored;
};

}  // namespace detail

/// Matches every signature indicator (except pkgdb) against the tree. A
/// version is reported when the indicator has a version capture and the
/// captured text is a valid version; otherwise the component is "unknown".
inline SbomResult scan_components(const FileTree& tree, const std::vector<Signature>& signatures) {
  SbomResult result;
  detail::Collector found;
  std::vector<detail::StringRule> rules;
  MultiSearch anchors;
  std::vector<std::size_t> anchor_rule;
  std::vector<std::size_t> unanchored;
  for (const auto& sig : signatures) {
    for (const auto& ind : sig.indicators) {
      if (ind.kind != IndicatorKind::unique_string) continue;
      auto lit = required_literal(ind.pattern);
      rules.push_back({&sig, &ind, std::regex(ind.pattern, std::regex::ECMAScript | std::regex::optimize),
                       lit.size() >= kMinAnchor});
      if (rules.back().anchored) {
        anchors.add(lit);
        anchor_rule.push_back(rules.size() - 1);
      } else {
        unanchored.push_back(rules.size() - 1);
      }
    }
  }

  auto report = [&](const Signature& sig, const Indicator& ind, const std::vector<std::string>& caps,
                    const std::string& path) {
    auto version = detail::captured_version(caps, ind.version_capture);
    if (version.empty()) {
      result.warnings.push_back(path + ": " + sig.product + " matched but the captured version is not valid");
      version = std::string(kUnknownVersion);
    }
    found.add(sig, version, {ind.kind, path});
  };

  for (const auto& node : tree.nodes) {
    if (node.kind != NodeKind::regular) continue;
    auto logical = text::logical_paths(node.path);
    auto base = text::basename(node.path);
    for (const auto& sig : signatures) {
      for (const auto& ind : sig.indicators) {
        if (ind.kind == IndicatorKind::filename) {
          if (auto caps = text::glob_match(ind.pattern, base)) report(sig, ind, *caps, node.path);
        } else if (ind.kind == IndicatorKind::path) {
          for (auto lp : logical) {
            if (auto caps = text::glob_match(ind.pattern, lp)) {
              report(sig, ind, *caps, node.path);
              break;
            }
          }
        }
      }
    }
    if (rules.empty()) continue;

    std::string content;
    try {
      content = read_text(tree.file(node));
    } catch (const Error& e) {
      result.warnings.push_back(e.what());
      continue;
    }
    auto runs = text::printable_runs(content);
    std::map<std::size_t, std::set<std::size_t>> candidate_lines;  // rule -> line starts
    anchors.scan(runs, [&](std::size_t id, std::size_t end) {
      auto begin = end - anchors.pattern_length(id);
      auto nl = runs.rfind('\n', begin);
      candidate_lines[anchor_rule[id]].insert(nl == std::string::npos ? 0 : nl + 1);
    });
    auto try_line = [&](const detail::StringRule& rule, std::string_view line) {
      std::match_results<std::string_view::const_iterator> m;
      if (!std::regex_search(line.begin(), line.end(), m, rule.re)) return false;
      std::vector<std::string> caps;
      for (std::size_t g = 1; g < m.size(); ++g) caps.push_back(m[g].matched ? m[g].str() : std::string{});
      report(*rule.sig, *rule.ind, caps, node.path);
      return true;
    };
    std::string_view all(runs);
    for (const auto& [ri, starts] : candidate_lines) {
      for (auto s : starts) {
        auto e = all.find('\n', s);
        if (try_line(rules[ri], all.substr(s, e == std::string_view::npos ? std::string_view::npos : e - s))) break;
      }
    }
    for (auto ri : unanchored) {
      for (auto line : text::lines(all))
        if (try_line(rules[ri], line)) break;
    }
  }
  result.entries = found.finish();
  return result;
}

struct PackageRecord {
  std::string package;
  std::string version;
  std::string vendor;
};

/// Parses a package database: stanzas of "Key: Value" lines separated by
/// blank lines. Package and Version are required, Vendor is optional.
/// Continuation lines (leading whitespace) are ignored.
inline std::vector<PackageRecord> parse_package_stanzas(std::string_view content, const std::string& where,
                                                        std::vector<std::string>* warnings) {
  std::vector<PackageRecord> out;
  std::map<std::string, std::string> fields;
  std::size_t stanza_line = 0, lineno = 0;
  auto flush = [&] {
    if (fields.empty()) return;
    auto pkg = fields.find("package"), ver = fields.find("version");
    auto loc = where + ":" + std::to_string(stanza_line);
    if (pkg == fields.end() || pkg->second.empty()) {
      if (warnings) warnings->push_back(loc + ": stanza without Package skipped");
    } else if (ver == fields.end() || ver->second.empty()) {
      if (warnings) warnings->push_back(loc + ": package " + pkg->second + " has no Version; skipped");
    } else if (!is_valid_version(ver->second)) {
      if (warnings) warnings->push_back(loc + ": package " + pkg->second + " has unparseable version '" + ver->second + "'; skipped");
    } else {
      auto vendor = fields.find("vendor");
      out.push_back({pkg->second, ver->second, vendor == fields.end() ? std::string{} : vendor->second});
    }
    fields.clear();
  };
  for (auto line : text::lines(content)) {
    ++lineno;
    if (text::trim(line).empty()) {
      flush();
      continue;
    }
    if (line.front() == ' ' || line.front() == '\t') continue;
    if (fields.empty()) stanza_line = lineno;
    auto colon = line.find(':');
    if (colon == std::string_view::npos) continue;
    fields[text::to_lower(text::trim(line.substr(0, colon)))] = std::string(text::trim(line.substr(colon + 1)));
  }
  flush();
  return out;
}

/// Reads every package database in the tree. A package whose name matches
/// a signature's pkgdb indicator takes that signature's vendor, product and
/// origin; otherwise vendor falls back to the Vendor field or the package
/// name.
inline SbomResult parse_package_db(const FileTree& tree, const std::vector<Signature>& signatures = {}) {
  SbomResult result;
  std::map<detail::Key, SbomEntry> by_key;
  for (const auto& node : tree.nodes) {
    if (node.kind != NodeKind::regular || !text::path_is(node.path, kPackageDbPath)) continue;
    auto records = parse_package_stanzas(read_text(tree.file(node)), node.path, &result.warnings);
    for (const auto& rec : records) {
      SbomEntry e;
      e.vendor = rec.vendor.empty() ? rec.package : rec.vendor;
      e.product = rec.package;
      e.version = rec.version;
      for (const auto& sig : signatures) {
        bool hit = std::any_of(sig.indicators.begin(), sig.indicators.end(), [&](const Indicator& ind) {
          return ind.kind == IndicatorKind::pkgdb && text::glob_match(ind.pattern, rec.package);
        });
        if (hit) {
          e.vendor = sig.vendor;
          e.product = sig.product;
          e.origin = sig.origin;
          break;
        }
      }
      auto& slot = by_key[{e.vendor, e.product, e.version}];
      if (slot.vendor.empty()) slot = e;
      slot.evidence.push_back({IndicatorKind::pkgdb, node.path});
    }
  }
  for (auto& [k, e] : by_key) result.entries.push_back(std::move(e));
  model::canonicalize(result.entries);
  return result;
}

/// Union of scanned and package-database entries keyed by (vendor,
/// product, version). Evidence and licenses are merged; a known origin from
/// the package database wins.
inline std::vector<SbomEntry> build_sbom(const std::vector<SbomEntry>& scanned, const std::vector<SbomEntry>& packaged) {
  std::map<detail::Key, SbomEntry> merged;
  for (const auto& e : scanned) {
    auto& slot = merged[{e.vendor, e.product, e.version}];
    if (slot.vendor.empty()) {
      slot = e;
    } else {
      slot.evidence.insert(slot.evidence.end(), e.evidence.begin(), e.evidence.end());
      slot.licenses.insert(slot.licenses.end(), e.licenses.begin(), e.licenses.end());
      if (slot.origin == Origin::unknown) slot.origin = e.origin;
    }
  }
  for (const auto& e : packaged) {
    auto& slot = merged[{e.vendor, e.product, e.version}];
    if (slot.vendor.empty()) {
      slot = e;
      continue;
    }
    slot.evidence.insert(slot.evidence.end(), e.evidence.begin(), e.evidence.end());
    slot.licenses.insert(slot.licenses.end(), e.licenses.begin(), e.licenses.end());
    if (e.origin != Origin::unknown) slot.origin = e.origin;
  }
  std::vector<SbomEntry> out;
  for (auto& [k, e] : merged) out.push_back(std::move(e));
  model::canonicalize(out);
  return out;
}

}  // namespace cdt::sca
