#include <chrono>
#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "cdt/binscan/assembler.hpp"
#include "cdt/pipeline/watch.hpp"

namespace {

namespace fs = std::filesystem;
using namespace cdt;

constexpr int kExitError = 2;

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("cdt");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::info);
  if (const char* env = std::getenv("CDT_LOG")) {
    auto level = spdlog::level::from_str(env);
    if (level == spdlog::level::off && std::string_view(env) != "off")
      spdlog::warn("CDT_LOG={} is not a log level; keeping info", env);
    else
      spdlog::set_level(level);
  }
}

void log_run(const pipeline::StageLog& log) {
  spdlog::debug("stages: {}", text::join(log.stages, " "));
  if (log.cache_hits || log.cache_misses)
    spdlog::debug("binscan cache: {} hit(s), {} miss(es)", log.cache_hits, log.cache_misses);
  for (const auto& w : log.warnings) spdlog::warn("{}", w);
}

int report_run(const pipeline::RunResult& r) {
  log_run(r.log);
  if (r.exit_code == kExitError) {
    spdlog::error("{}", r.diagnostic);
    return kExitError;
  }
  auto totals = verify::totals(verify::parse_report(r.report));
  spdlog::info("report {}: {} known ({} filtered), {} weakness(es), {} policy finding(s), {}/{} requirement(s) unfulfilled",
               r.report_file.string(), totals.known_applicable, totals.known_filtered, totals.weaknesses, totals.policy,
               totals.unfulfilled, totals.requirements);
  return r.exit_code;
}

template <typename F>
int guarded(std::string_view stage, F&& body) {
  try {
    return body();
  } catch (const Error& e) {
    spdlog::error("stage {}: {}", stage, e.what());
  } catch (const std::exception& e) {
    spdlog::error("stage {}: {}", stage, e.what());
  }
  return kExitError;
}

struct CreateArgs {
  std::string image, signatures, out, extract_dir;
  int max_depth = extract::kDefaultMaxDepth;
};

int cmd_create(const CreateArgs& a) {
  return guarded("create", [&] {
    fs::path out = a.out;
    fs::path dir = a.extract_dir.empty() ? fs::absolute(out).parent_path() / "extracted" : fs::path(a.extract_dir);
    pipeline::StageLog log;
    auto sigs = sca::load_signature_db(a.signatures);
    auto created = pipeline::create_twin(a.image, sigs, dir, a.max_depth, log);
    write_file(out, model::serialize(created.cdt));
    log_run(log);
    spdlog::info("twin {} written to {} ({} sbom entries, {} code artifact(s))", created.cdt.firmware_id, out.string(),
                 created.cdt.sbom.size(), created.cdt.code_artifacts.size());
    return 0;
  });
}

struct AnalyzeArgs {
  std::string cdt_file, cve_db, requirements, mapping, context, aliases, signatures, artifacts, cache, out;
};

int cmd_analyze(const AnalyzeArgs& a) {
  return guarded("analyze", [&] {
    pipeline::StageLog log;
    auto cdt = model::deserialize(read_text(a.cdt_file));
    pipeline::AnalysisInputs in;
    in.cve_db = vuln::load_cve_db(a.cve_db);
    in.requirements = verify::load_requirements(a.requirements);
    in.mappings = verify::load_mappings(a.mapping);
    if (!a.context.empty()) in.overrides = vuln::load_context_overrides(a.context);
    if (!a.aliases.empty()) in.aliases = vuln::load_alias_table(a.aliases);
    if (!a.signatures.empty()) in.latest = pipeline::latest_versions(sca::load_signature_db(a.signatures));

    fs::path root = a.artifacts.empty() ? fs::absolute(a.cdt_file).parent_path() / "extracted" : fs::path(a.artifacts);
    fs::path cache_file = a.cache.empty() ? fs::absolute(a.cdt_file).parent_path() / "binscan_cache.json" : fs::path(a.cache);
    auto cache = pipeline::BinscanCache::load(cache_file);
    auto binaries = pipeline::scan_artifacts(cdt, root, cache, log);
    if (log.cache_misses) cache.save(cache_file);
    auto analysis = pipeline::analyze_twin(cdt, in, binaries, log);
    write_file(a.out, analysis.report);

    pipeline::RunResult r;
    r.exit_code = pipeline::verdict_exit_code(analysis.verdicts);
    r.report = analysis.report;
    r.report_file = a.out;
    r.log = log;
    return report_run(r);
  });
}

int cmd_run(const std::string& config_file) {
  return guarded("config", [&] { return report_run(pipeline::run_pipeline(pipeline::load_config(config_file))); });
}

int cmd_reanalyze(const std::string& config_file) {
  return guarded("config", [&] {
    auto c = pipeline::load_config(config_file);
    return report_run(pipeline::reanalyze(c.cdt_file(), c));
  });
}

int cmd_watch(const std::string& config_file, double interval, int ticks) {
  return guarded("watch", [&] {
    pipeline::Watcher w(pipeline::load_config(config_file));
    if (report_run(w.last_run()) == kExitError) spdlog::warn("initial run failed; retrying on the next change");
    std::size_t seen = 0;
    int done = 0;
    auto period = std::chrono::milliseconds(static_cast<long long>(interval * 1000));
    w.run(
        period,
        [&](const pipeline::ReportDiff& d) {
          report_run(w.last_run());
          std::cout << pipeline::to_json(d).dump() << std::endl;
        },
        [&] {
          for (; seen < w.warnings().size(); ++seen) spdlog::warn("{}", w.warnings()[seen]);
          return ticks > 0 && done++ >= ticks;
        });
    return 0;
  });
}

int cmd_diff(const std::string& old_file, const std::string& new_file) {
  return guarded("diff", [&] {
    auto d = pipeline::diff_reports(read_text(old_file), read_text(new_file));
    std::cout << pipeline::to_json(d).dump(1) << "\n";
    return d.empty() ? 0 : 1;
  });
}

int cmd_scan_binary(const std::string& file) {
  return guarded("binscan", [&] {
    auto rep = binscan::scan_binary_file(file);
    std::cout << binscan::to_json(rep).dump(1) << "\n";
    spdlog::info("{}: {} function(s), {} finding(s)", file, rep.functions.size(), rep.findings.size());
    return 0;
  });
}

int cmd_assemble(const std::string& source, const std::string& out, const std::string& arch) {
  return guarded("assemble", [&] {
    std::optional<model::CpuArch> a;
    if (!arch.empty()) {
      a = parse_enum<model::CpuArch>(arch);
      if (!a || *a == model::CpuArch::unknown) throw Error(ErrorKind::config, "--arch", "expected MV32 or MV16");
    }
    write_file(out, binscan::assemble_image(read_text(source), a));
    return 0;
  });
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Cyber digital twin builder and requirements verifier"};
  app.require_subcommand(1);

  CreateArgs create;
  auto* c = app.add_subcommand("create", "Extract a firmware image and write its twin");
  c->add_option("image", create.image, "Firmware image file or directory")->required();
  c->add_option("--signatures", create.signatures, "Component signature DB")->required();
  c->add_option("--out", create.out, "Twin document to write")->required();
  c->add_option("--extract-dir", create.extract_dir, "Where to unpack (default: extracted/ beside --out)");
  c->add_option("--max-depth", create.max_depth, "Container nesting limit")->check(CLI::PositiveNumber);

  AnalyzeArgs analyze;
  auto* a = app.add_subcommand("analyze", "Match, scan and verify a stored twin");
  a->add_option("cdt", analyze.cdt_file, "Twin document")->required();
  a->add_option("--cve-db", analyze.cve_db, "CVE feed")->required();
  a->add_option("--requirements", analyze.requirements, "Requirements file")->required();
  a->add_option("--mapping", analyze.mapping, "CWE to requirement mapping")->required();
  a->add_option("--context", analyze.context, "Analyst context overrides");
  a->add_option("--aliases", analyze.aliases, "Product alias table");
  a->add_option("--signatures", analyze.signatures, "Signature DB, for outdated-component checks");
  a->add_option("--artifacts", analyze.artifacts, "Extracted tree holding code artifacts");
  a->add_option("--cache", analyze.cache, "Binary scan cache file");
  a->add_option("--out", analyze.out, "Report CSV to write")->required();

  std::string config_file;
  auto* r = app.add_subcommand("run", "Full pipeline from a config file");
  r->add_option("config", config_file, "Pipeline config")->required();

  auto* re = app.add_subcommand("reanalyze", "Re-run analysis from the stored twin");
  re->add_option("config", config_file, "Pipeline config")->required();

  double interval = static_cast<double>(pipeline::kDefaultPollInterval.count());
  int ticks = 0;
  auto* w = app.add_subcommand("watch", "Poll inputs and print report diffs as JSON lines");
  w->add_option("config", config_file, "Pipeline config")->required();
  w->add_option("--interval", interval, "Seconds between polls")->check(CLI::PositiveNumber);
  w->add_option("--ticks", ticks, "Stop after this many polls (0 = forever)")->check(CLI::NonNegativeNumber);

  std::string old_report, new_report;
  auto* d = app.add_subcommand("diff", "Compare two reports");
  d->add_option("old", old_report)->required();
  d->add_option("new", new_report)->required();

  std::string binary;
  auto* s = app.add_subcommand("scan-binary", "Analyse one MVFW file and print JSON");
  s->add_option("file", binary)->required();

  std::string source, out, arch;
  auto* as = app.add_subcommand("assemble", "Assemble MV source into an MVFW file");
  as->add_option("source", source)->required();
  as->add_option("--out", out)->required();
  as->add_option("--arch", arch, "MV32 or MV16 (default: .arch directive, else MV32)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kExitError;
  }

  if (*c) return cmd_create(create);
  if (*a) return cmd_analyze(analyze);
  if (*r) return cmd_run(config_file);
  if (*re) return cmd_reanalyze(config_file);
  if (*w) return cmd_watch(config_file, interval, ticks);
  if (*d) return cmd_diff(old_report, new_report);
  if (*s) return cmd_scan_binary(binary);
  if (*as) return cmd_assemble(source, out, arch);
  return kExitError;
}
