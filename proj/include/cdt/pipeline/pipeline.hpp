#pragma once

// create -> analyze -> verify, plus the re-analysis path that starts from a
// stored twin.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cdt/binscan/engine.hpp"
#include "cdt/pipeline/config.hpp"
#include "cdt/sca/facets.hpp"
#include "cdt/sca/licenses.hpp"
#include "cdt/sca/scanner.hpp"
#include "cdt/verify/report.hpp"
#include "cdt/vuln/matcher.hpp"

namespace cdt::pipeline {

/// Stages actually executed, in order, plus non-fatal warnings.
struct StageLog {
  std::vector<std::string> stages;
  std::vector<std::string> warnings;
  std::size_t cache_hits = 0;
  std::size_t cache_misses = 0;

  void enter(std::string stage) { stages.push_back(std::move(stage)); }
  const std::string& current() const {
    static const std::string none = "startup";
    return stages.empty() ? none : stages.back();
  }
  bool ran(std::string_view stage) const { return std::find(stages.begin(), stages.end(), stage) != stages.end(); }
  void warn(std::vector<std::string> ws) { warnings.insert(warnings.end(), ws.begin(), ws.end()); }
};

// Twin creation ---------------------------------------------------------------

struct Created {
  model::CyberDigitalTwin cdt;
  fs::path root;
};

inline Created create_twin(const fs::path& image, const std::vector<sca::Signature>& signatures, const fs::path& extract_dir,
                           int max_depth, StageLog& log) {
  log.enter("extract");
  auto ex = extract::extract_recursive(image, extract_dir, max_depth);
  log.warn(ex.warnings);
  sca::FileTree tree{ex.root, ex.nodes};

  model::CyberDigitalTwin cdt;
  cdt.firmware_id = fs::absolute(image).lexically_normal().filename().string();
  if (cdt.firmware_id.empty()) cdt.firmware_id = "firmware";
  cdt.created_at = model::now_utc();
  cdt.file_tree_digest = extract::tree_digest(ex.nodes);

  log.enter("sca");
  auto scanned = sca::scan_components(tree, signatures);
  auto packaged = sca::parse_package_db(tree, signatures);
  log.warn(scanned.warnings);
  log.warn(packaged.warnings);
  auto sbom = sca::build_sbom(scanned.entries, packaged.entries);

  log.enter("facets");
  auto facets = sca::harvest_cdt_facets(tree);
  log.warn(facets.warnings);
  sca::apply_facets(cdt, facets);

  log.enter("licenses");
  cdt.sbom = sca::analyze_licenses(std::move(sbom), tree, signatures);
  model::canonicalize(cdt);
  return {std::move(cdt), ex.root};
}

// Binscan cache ---------------------------------------------------------------

/// Binary reports keyed by content digest, persisted as one JSON object.
class BinscanCache {
 public:
  static BinscanCache load(const fs::path& file) {
    BinscanCache c;
    if (!fs::exists(file)) return c;
    try {
      auto doc = nlohmann::json::parse(read_text(file));
      for (const auto& [digest, rep] : doc.items()) c.reports_[digest] = binscan::report_from_json(rep);
    } catch (const std::exception&) {
      c.reports_.clear();  // unreadable cache is rebuilt
    }
    return c;
  }

  void save(const fs::path& file) const {
    nlohmann::json doc = nlohmann::json::object();
    for (const auto& [digest, rep] : reports_) doc[digest] = binscan::to_json(rep);
    write_file(file, doc.dump(1) + "\n");
  }

  std::optional<binscan::BinaryReport> get(const std::string& digest) const {
    auto it = reports_.find(digest);
    if (it == reports_.end()) return std::nullopt;
    return it->second;
  }

  void put(const binscan::BinaryReport& r) { reports_[r.digest] = r; }
  std::size_t size() const { return reports_.size(); }

 private:
  std::map<std::string, binscan::BinaryReport> reports_;
};

inline std::vector<binscan::BinaryReport> scan_artifacts(const model::CyberDigitalTwin& cdt, const fs::path& root,
                                                         BinscanCache& cache, StageLog& log) {
  log.enter("binscan");
  std::vector<binscan::BinaryReport> out;
  for (const auto& artifact : cdt.code_artifacts) {
    auto file = root / artifact;
    if (!fs::is_regular_file(file))
      throw Error(ErrorKind::stale_cdt, artifact, "code artifact missing from " + root.string() + "; run the full pipeline");
    auto bytes = read_file(file);
    auto digest = sha256_hex(std::span<const std::uint8_t>(bytes));
    if (auto hit = cache.get(digest)) {
      ++log.cache_hits;
      hit->artifact = artifact;
      out.push_back(std::move(*hit));
      continue;
    }
    ++log.cache_misses;
    auto rep = binscan::scan_binary(std::move(bytes), artifact);
    cache.put(rep);
    out.push_back(std::move(rep));
  }
  return out;
}

// Analysis ------------------------------------------------------------------

struct AnalysisInputs {
  std::vector<vuln::CveRecord> cve_db;
  vuln::AliasTable aliases;
  vuln::ContextOverrides overrides;
  std::vector<verify::Requirement> requirements;
  std::vector<verify::CweMapping> mappings;
  verify::LatestVersions latest;
};

inline verify::LatestVersions latest_versions(const std::vector<sca::Signature>& signatures) {
  verify::LatestVersions out;
  for (const auto& s : signatures)
    if (s.latest) out[{s.vendor, s.product}] = *s.latest;
  return out;
}

inline AnalysisInputs load_inputs(const PipelineConfig& c, StageLog& log) {
  AnalysisInputs in;
  log.enter("load-inputs");
  in.cve_db = vuln::load_cve_db(c.cve_db_path);
  if (c.alias_path) in.aliases = vuln::load_alias_table(*c.alias_path);
  if (c.context_overrides_path) in.overrides = vuln::load_context_overrides(*c.context_overrides_path);
  in.requirements = verify::load_requirements(c.requirements_path);
  in.mappings = verify::load_mappings(c.mapping_path);
  in.latest = latest_versions(sca::load_signature_db(c.signature_db_path));
  return in;
}

struct Analysis {
  std::vector<verify::Finding> findings;
  std::vector<verify::RequirementVerdict> verdicts;
  std::string report;  // CSV text
};

/// 0 when nothing is unfulfilled, 1 otherwise.
inline int verdict_exit_code(const std::vector<verify::RequirementVerdict>& verdicts) {
  for (const auto& v : verdicts)
    if (v.status == verify::VerdictStatus::unfulfilled) return 1;
  return 0;
}

inline Analysis analyze_twin(const model::CyberDigitalTwin& cdt, const AnalysisInputs& in,
                             const std::vector<binscan::BinaryReport>& binaries, StageLog& log) {
  Analysis a;
  log.enter("match");
  auto known = vuln::match_cves(cdt.sbom, in.cve_db, in.aliases);
  log.enter("filter");
  known = vuln::filter_by_context(std::move(known), cdt, in.cve_db, in.overrides);
  for (const auto& k : known) a.findings.push_back(verify::from_known(k));
  for (const auto& b : binaries)
    for (const auto& w : b.findings) a.findings.push_back(verify::from_weakness(b.artifact, w));

  log.enter("policies");
  std::vector<verify::Finding> policy;
  for (const auto& p : verify::check_policies(cdt, in.latest)) policy.push_back(verify::from_policy(p));

  log.enter("verify");
  auto retraced = verify::retrace(a.findings, in.mappings);
  a.verdicts = verify::verify_requirements(in.requirements, retraced, policy, in.mappings);
  a.findings.insert(a.findings.end(), policy.begin(), policy.end());

  log.enter("emit");
  a.report = verify::format_report(verify::report_rows(cdt.firmware_id, a.findings, a.verdicts));
  return a;
}

// Runs -----------------------------------------------------------------------

struct RunResult {
  fs::path cdt_file;
  fs::path report_file;
  int exit_code = 2;
  std::string diagnostic;  // set when exit_code == 2
  std::optional<ErrorKind> error;
  StageLog log;
  std::string report;
};

/// Recorded beside the twin so later runs can tell whether it is stale.
struct RunState {
  std::string image_digest;
  std::string file_tree_digest;
};

inline void save_state(const fs::path& file, const RunState& s) {
  write_file(file, nlohmann::json{{"image_digest", s.image_digest}, {"file_tree_digest", s.file_tree_digest}}.dump(1) + "\n");
}

inline std::optional<RunState> load_state(const fs::path& file) {
  if (!fs::exists(file)) return std::nullopt;
  try {
    auto j = nlohmann::json::parse(read_text(file));
    return RunState{j.at("image_digest").get<std::string>(), j.at("file_tree_digest").get<std::string>()};
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

namespace detail {

template <typename F>
RunResult guarded(RunResult r, F&& body) {
  try {
    body(r);
  } catch (const Error& e) {
    r.exit_code = 2;
    r.error = e.kind();
    r.diagnostic = "stage " + r.log.current() + ": " + e.what();
  } catch (const std::exception& e) {
    r.exit_code = 2;
    r.error = ErrorKind::io;
    r.diagnostic = "stage " + r.log.current() + ": " + e.what();
  }
  return r;
}

inline void finish(RunResult& r, const PipelineConfig& c, const model::CyberDigitalTwin& cdt, const fs::path& root,
                   const AnalysisInputs& in) {
  auto cache = BinscanCache::load(c.cache_file());
  auto binaries = scan_artifacts(cdt, root, cache, r.log);
  if (r.log.cache_misses) cache.save(c.cache_file());
  auto a = analyze_twin(cdt, in, binaries, r.log);
  write_file(c.report_file(), a.report);
  r.report_file = c.report_file();
  r.report = std::move(a.report);
  r.exit_code = verdict_exit_code(a.verdicts);
}

}  // namespace detail

/// Full pipeline. Exit code 0 when every requirement is fulfilled (or not
/// evaluated), 1 when any is unfulfilled, 2 on any error.
inline RunResult run_pipeline(const PipelineConfig& c) {
  return detail::guarded({}, [&](RunResult& r) {
    r.log.enter("config");
    validate_config(c);
    auto image_digest = content_digest(c.image_path);
    auto signatures = sca::load_signature_db(c.signature_db_path);
    auto in = load_inputs(c, r.log);

    fs::create_directories(c.output_dir);
    fs::remove_all(c.extracted_dir());
    auto created = create_twin(c.image_path, signatures, c.extracted_dir(), c.max_depth, r.log);
    write_file(c.cdt_file(), model::serialize(created.cdt));
    r.cdt_file = c.cdt_file();
    save_state(c.state_file(), {image_digest, created.cdt.file_tree_digest});

    detail::finish(r, c, created.cdt, created.root, in);
  });
}

/// Re-runs matching and verification from a stored twin. Extraction and
/// SCA are skipped; binaries come from the cache when their digest is known.
/// With `check_image`, a twin built from a different image is rejected.
inline RunResult reanalyze(const fs::path& cdt_file, const PipelineConfig& c, bool check_image = true) {
  return detail::guarded({}, [&](RunResult& r) {
    r.log.enter("load-cdt");
    auto cdt = model::deserialize(read_text(cdt_file));
    r.cdt_file = cdt_file;
    if (check_image) {
      auto state = load_state(c.state_file());
      if (!state || state->file_tree_digest != cdt.file_tree_digest)
        throw Error(ErrorKind::stale_cdt, cdt_file.string(), "no record ties this twin to the image; run the full pipeline");
      if (content_digest(c.image_path) != state->image_digest)
        throw Error(ErrorKind::stale_cdt, c.image_path.string(), "image changed since the twin was built; run the full pipeline");
    }
    auto in = load_inputs(c, r.log);
    detail::finish(r, c, cdt, c.extracted_dir(), in);
  });
}

}  // namespace cdt::pipeline
