#pragma once

// Pipeline configuration file (JSON). Relative paths resolve against the
// directory holding the config file.
//
//   {"image": "fw.tar", "signatures": "sigs.json", "cve_db": "cves.json",
//    "requirements": "reqs.json", "mapping": "cwe_map.csv",
//    "context": "context.json", "aliases": "aliases.txt",
//    "output_dir": "out", "max_depth": 8}

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cdt/core/digest.hpp"
#include "cdt/extract/extractor.hpp"

namespace cdt::pipeline {

namespace fs = std::filesystem;

struct PipelineConfig {
  fs::path image_path;
  fs::path signature_db_path;
  fs::path cve_db_path;
  fs::path requirements_path;
  fs::path mapping_path;
  std::optional<fs::path> context_overrides_path;
  std::optional<fs::path> alias_path;
  fs::path output_dir;
  int max_depth = extract::kDefaultMaxDepth;

  fs::path cdt_file() const { return output_dir / "cdt.json"; }
  fs::path report_file() const { return output_dir / "report.csv"; }
  fs::path extracted_dir() const { return output_dir / "extracted"; }
  fs::path cache_file() const { return output_dir / "binscan_cache.json"; }
  fs::path state_file() const { return output_dir / "state.json"; }
};

inline PipelineConfig parse_config(std::string_view content, const fs::path& base = {}) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(content);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::config, "offset " + std::to_string(e.byte), "config is not valid JSON");
  }
  if (!doc.is_object()) throw Error(ErrorKind::config, "config", "top level must be an object");
  auto path = [&](const char* key, bool required) -> std::optional<fs::path> {
    if (!doc.contains(key) || doc[key].is_null()) {
      if (required) throw Error(ErrorKind::config, key, "missing");
      return std::nullopt;
    }
    if (!doc[key].is_string() || doc[key].get<std::string>().empty()) throw Error(ErrorKind::config, key, "must be a path");
    fs::path p = doc[key].get<std::string>();
    return p.is_absolute() ? p : base / p;
  };
  PipelineConfig c;
  c.image_path = *path("image", true);
  c.signature_db_path = *path("signatures", true);
  c.cve_db_path = *path("cve_db", true);
  c.requirements_path = *path("requirements", true);
  c.mapping_path = *path("mapping", true);
  c.context_overrides_path = path("context", false);
  c.alias_path = path("aliases", false);
  c.output_dir = *path("output_dir", true);
  if (doc.contains("max_depth")) {
    if (!doc["max_depth"].is_number_integer() || doc["max_depth"].get<int>() < 1)
      throw Error(ErrorKind::config, "max_depth", "must be a positive integer");
    c.max_depth = doc["max_depth"].get<int>();
  }
  return c;
}

inline PipelineConfig load_config(const fs::path& file) {
  return parse_config(read_text(file), fs::absolute(file).parent_path());
}

inline nlohmann::json to_json(const PipelineConfig& c) {
  nlohmann::json j{{"image", c.image_path.string()},         {"signatures", c.signature_db_path.string()},
                   {"cve_db", c.cve_db_path.string()},       {"requirements", c.requirements_path.string()},
                   {"mapping", c.mapping_path.string()},     {"output_dir", c.output_dir.string()},
                   {"max_depth", c.max_depth}};
  if (c.context_overrides_path) j["context"] = c.context_overrides_path->string();
  if (c.alias_path) j["aliases"] = c.alias_path->string();
  return j;
}

/// Input files that must exist at run start, by config key.
inline std::vector<std::pair<std::string, fs::path>> input_files(const PipelineConfig& c) {
  std::vector<std::pair<std::string, fs::path>> out{{"image", c.image_path},
                                                    {"signatures", c.signature_db_path},
                                                    {"cve_db", c.cve_db_path},
                                                    {"requirements", c.requirements_path},
                                                    {"mapping", c.mapping_path}};
  if (c.context_overrides_path) out.emplace_back("context", *c.context_overrides_path);
  if (c.alias_path) out.emplace_back("aliases", *c.alias_path);
  return out;
}

inline void validate_config(const PipelineConfig& c) {
  for (const auto& [key, p] : input_files(c))
    if (!fs::exists(p)) throw Error(ErrorKind::config, key, p.string() + " does not exist");
  if (c.max_depth < 1) throw Error(ErrorKind::config, "max_depth", "must be a positive integer");
}

/// Content digest of a file, or of a directory's listed tree.
inline std::string content_digest(const fs::path& p) {
  if (fs::is_directory(p)) return extract::tree_digest(extract::list_tree(p));
  return sha256_file(p);
}

}  // namespace cdt::pipeline
