#pragma once

// Polling monitor. Each tick compares content digests of the inputs with
// the last successful run and re-runs the smallest stage set that covers
// the change.

#include <chrono>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <thread>

#include "cdt/pipeline/diff.hpp"
#include "cdt/pipeline/pipeline.hpp"

namespace cdt::pipeline {

inline constexpr std::chrono::seconds kDefaultPollInterval{5};

enum class RerunKind { none, full, reanalyze };

/// Inputs whose change invalidates the twin itself.
inline bool needs_full_run(std::string_view key) { return key == "image" || key == "signatures"; }

class Watcher {
 public:
  /// Performs the initial full run.
  explicit Watcher(PipelineConfig config) : config_(std::move(config)) {
    last_ = run_pipeline(config_);
    if (last_.exit_code != 2) {
      report_ = last_.report;
      digests_ = snapshot();
    }
  }

  const RunResult& last_run() const { return last_; }
  const std::string& report() const { return report_; }
  RerunKind last_rerun() const { return rerun_; }
  const std::vector<std::string>& warnings() const { return warnings_; }
  bool healthy() const { return !digests_.empty(); }

  /// One poll. Returns a diff when something changed and the re-run
  /// succeeded; failures are recorded and retried on the next tick.
  std::optional<ReportDiff> tick() {
    rerun_ = RerunKind::none;
    std::map<std::string, std::string> now;
    try {
      now = snapshot();
    } catch (const std::exception& e) {
      warnings_.push_back(std::string("poll: ") + e.what());
      return std::nullopt;
    }
    if (now == digests_) return std::nullopt;

    bool full = digests_.empty();
    for (const auto& [key, digest] : now) {
      auto it = digests_.find(key);
      if ((it == digests_.end() || it->second != digest) && needs_full_run(key)) full = true;
    }
    for (const auto& [key, _] : digests_)
      if (!now.count(key) && needs_full_run(key)) full = true;

    rerun_ = full ? RerunKind::full : RerunKind::reanalyze;
    auto result = full ? run_pipeline(config_) : reanalyze(config_.cdt_file(), config_, false);
    last_ = result;
    if (result.exit_code == 2) {
      warnings_.push_back(result.diagnostic);
      return std::nullopt;
    }
    auto base = report_.empty() ? verify::format_report({verify::report_header()}) : report_;
    auto d = diff_reports(base, result.report);
    report_ = result.report;
    digests_ = std::move(now);
    return d;
  }

  /// Ticks until `stop` returns true, sleeping `interval` between polls.
  void run(std::chrono::milliseconds interval, const std::function<void(const ReportDiff&)>& on_diff,
           const std::function<bool()>& stop) {
    while (!stop()) {
      std::this_thread::sleep_for(interval);
      if (auto d = tick()) on_diff(*d);
    }
  }

 private:
  std::map<std::string, std::string> snapshot() const {
    std::map<std::string, std::string> out;
    for (const auto& [key, path] : input_files(config_)) out[key] = content_digest(path);
    return out;
  }

  PipelineConfig config_;
  RunResult last_;
  std::string report_;
  std::map<std::string, std::string> digests_;
  RerunKind rerun_ = RerunKind::none;
  std::vector<std::string> warnings_;
};

}  // namespace cdt::pipeline
