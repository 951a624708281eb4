#pragma once

// License identification for SBOM entries.

#include <string>
#include <vector>

#include "cdt/sca/scanner.hpp"

namespace cdt::sca {

struct LicenseFingerprint {
  std::string spdx_id;
  std::vector<std::string> phrases;  // all must appear (case and whitespace insensitive)
};

inline const std::vector<LicenseFingerprint>& license_fingerprints() {
  static const std::vector<LicenseFingerprint> table{
      {"GPL-2.0", {"GNU GENERAL PUBLIC LICENSE Version 2"}},
      {"GPL-3.0", {"GNU GENERAL PUBLIC LICENSE Version 3"}},
      {"LGPL-2.1", {"GNU LESSER GENERAL PUBLIC LICENSE Version 2.1"}},
      {"LGPL-3.0", {"GNU LESSER GENERAL PUBLIC LICENSE Version 3"}},
      {"Apache-2.0", {"Apache License Version 2.0"}},
      {"MIT", {"Permission is hereby granted, free of charge, to any person obtaining a copy",
               "THE SOFTWARE IS PROVIDED \"AS IS\""}},
      {"Zlib", {"provided 'as-is', without any express or implied warranty",
                "Altered source versions must be plainly marked as such"}},
      {"bzip2-1.0.6", {"bzip2/libbzip2 version 1.0.6"}},
      {"MPL-2.0", {"Mozilla Public License Version 2.0"}},
      {"BSD-3-Clause", {"Redistribution and use in source and binary forms", "Neither the name of"}},
  };
  return table;
}

/// SPDX ids whose fingerprint phrases all occur in `license_text`.
inline std::vector<std::string> identify_licenses(std::string_view license_text) {
  auto norm = text::to_lower(text::normalize_ws(license_text));
  std::vector<std::string> out;
  for (const auto& fp : license_fingerprints()) {
    bool all = true;
    for (const auto& p : fp.phrases)
      if (norm.find(text::to_lower(text::normalize_ws(p))) == std::string::npos) {
        all = false;
        break;
      }
    if (all) out.push_back(fp.spdx_id);
  }
  return out;
}

inline bool is_license_file(std::string_view path) {
  auto base = text::to_lower(text::basename(path));
  return base.starts_with("license") || base.starts_with("licence") || base.starts_with("copying") ||
         base == "copyright";
}

/// Fills each entry's licenses from its signature and from license texts
/// found next to its evidence (same directory or its parent) or under
/// usr/share/doc/<product>/.
inline std::vector<SbomEntry> analyze_licenses(std::vector<SbomEntry> sbom, const FileTree& tree,
                                               const std::vector<Signature>& signatures = {}) {
  std::map<std::string, std::vector<std::string>> by_dir;  // directory -> ids found in its license files
  for (const auto& node : tree.nodes) {
    if (node.kind != NodeKind::regular || !is_license_file(node.path)) continue;
    auto ids = identify_licenses(read_text(tree.file(node)));
    auto& slot = by_dir[std::string(text::dirname(node.path))];
    slot.insert(slot.end(), ids.begin(), ids.end());
  }
  auto add_dir = [&](std::vector<std::string>& out, std::string_view dir) {
    if (auto it = by_dir.find(std::string(dir)); it != by_dir.end()) out.insert(out.end(), it->second.begin(), it->second.end());
  };
  for (auto& e : sbom) {
    for (const auto& sig : signatures)
      if (sig.vendor == e.vendor && sig.product == e.product)
        e.licenses.insert(e.licenses.end(), sig.licenses.begin(), sig.licenses.end());
    for (const auto& ev : e.evidence) {
      if (ev.kind == IndicatorKind::pkgdb) continue;
      auto dir = text::dirname(ev.path);
      add_dir(e.licenses, dir);
      if (!dir.empty()) add_dir(e.licenses, text::dirname(dir));
    }
    for (const auto& [dir, ids] : by_dir)
      for (auto lp : text::logical_paths(dir))
        if (lp == "usr/share/doc/" + e.product) e.licenses.insert(e.licenses.end(), ids.begin(), ids.end());
    model::canonicalize(e);
  }
  return sbom;
}

}  // namespace cdt::sca
