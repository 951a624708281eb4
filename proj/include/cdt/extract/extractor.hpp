#pragma once

// Recursive firmware unpacking into a validated file tree.

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cdt/core/digest.hpp"
#include "cdt/core/error.hpp"
#include "cdt/core/text.hpp"
#include "cdt/extract/archive.hpp"
#include "cdt/extract/format.hpp"

namespace cdt::extract {

namespace fs = std::filesystem;

enum class NodeKind { regular, directory };

struct FileNode {
  std::string path;  // relative to the extraction root, '/' separated
  NodeKind kind = NodeKind::regular;
  std::string content_digest;  // sha256 hex; empty for directories
  std::uint64_t size_bytes = 0;
  friend bool operator==(const FileNode&, const FileNode&) = default;
};

struct ExtractionResult {
  fs::path root;
  std::vector<FileNode> nodes;  // sorted by path
  std::vector<std::string> warnings;
};

inline constexpr int kDefaultMaxDepth = 8;

/// Walks an extracted tree and returns its nodes sorted by path. Anything
/// that is neither a regular file nor a directory is skipped with a warning.
inline std::vector<FileNode> list_tree(const fs::path& root, std::vector<std::string>* warnings = nullptr) {
  std::vector<FileNode> nodes;
  for (auto it = fs::recursive_directory_iterator(root); it != fs::recursive_directory_iterator(); ++it) {
    const auto& entry = *it;
    auto rel = fs::relative(entry.path(), root).generic_string();
    auto status = entry.symlink_status();
    if (fs::is_symlink(status)) {
      if (warnings) warnings->push_back("ignored symbolic link '" + rel + "'");
      continue;
    }
    if (fs::is_directory(status)) {
      nodes.push_back({rel, NodeKind::directory, "", 0});
    } else if (fs::is_regular_file(status)) {
      nodes.push_back({rel, NodeKind::regular, sha256_file(entry.path()), entry.file_size()});
    } else if (warnings) {
      warnings->push_back("ignored special file '" + rel + "'");
    }
  }
  std::sort(nodes.begin(), nodes.end(), [](const FileNode& a, const FileNode& b) { return a.path < b.path; });
  return nodes;
}

/// Content hash of a whole tree: paths, kinds and file digests.
inline std::string tree_digest(const std::vector<FileNode>& nodes) {
  Sha256 h;
  for (const auto& n : nodes) {
    h.update(n.kind == NodeKind::directory ? "d " : "f ");
    h.update(n.path);
    h.update(" ");
    h.update(n.content_digest);
    h.update("\n");
  }
  return h.hex();
}

namespace detail {

inline ContainerFormat sniff(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  std::uint8_t lead[kSniffBytes];
  in.read(reinterpret_cast<char*>(lead), sizeof lead);
  auto got = static_cast<std::size_t>(in.gcount());
  return detect_format(std::span<const std::uint8_t>(lead, got), file.filename().string());
}

inline void copy_tree(const fs::path& from, const fs::path& to, std::vector<std::string>& warnings) {
  fs::create_directories(to);
  std::vector<fs::directory_entry> entries(fs::directory_iterator(from), fs::directory_iterator{});
  std::sort(entries.begin(), entries.end());
  for (const auto& e : entries) {
    auto status = e.symlink_status();
    auto target = to / e.path().filename();
    if (fs::is_symlink(status)) {
      warnings.push_back("ignored symbolic link '" + e.path().string() + "'");
    } else if (fs::is_directory(status)) {
      copy_tree(e.path(), target, warnings);
    } else if (fs::is_regular_file(status)) {
      fs::copy_file(e.path(), target, fs::copy_options::overwrite_existing);
    } else {
      warnings.push_back("ignored special file '" + e.path().string() + "'");
    }
  }
}

class Expander {
 public:
  Expander(fs::path root, int max_depth, std::vector<std::string>& warnings)
      : root_(std::move(root)), max_depth_(max_depth), warnings_(warnings) {}

  /// `level` is the container nesting level of anything found directly in
  /// `dir`'s subtree (1 for the image itself).
  void expand_dir(const fs::path& dir, int level) {
    std::vector<fs::directory_entry> entries(fs::directory_iterator(dir), fs::directory_iterator{});
    std::sort(entries.begin(), entries.end());
    std::set<fs::path> handled;
    for (const auto& e : entries) {
      if (!fs::is_regular_file(e.symlink_status())) continue;
      if (expand_file(e.path(), level)) handled.insert(container_dir(e.path()));
    }
    for (const auto& e : entries) {
      if (!fs::is_directory(e.symlink_status()) || handled.count(e.path())) continue;
      expand_dir(e.path(), level);
    }
  }

 private:
  static fs::path container_dir(const fs::path& file) {
    return file.parent_path() / (file.filename().string() + std::string(text::kExtractedSuffix));
  }

  std::string rel(const fs::path& p) const { return fs::relative(p, root_).generic_string(); }

  /// Returns true when `file` was a container and has been expanded.
  bool expand_file(const fs::path& file, int level) {
    auto format = sniff(file);
    if (format == ContainerFormat::opaque) return false;
    if (level > max_depth_)
      throw Error(ErrorKind::depth_exceeded, rel(file),
                  "container nesting exceeds max depth " + std::to_string(max_depth_));
    auto target = container_dir(file);
    Unpacked unpacked;
    try {
      auto data = read_file(file);
      switch (format) {
        case ContainerFormat::tar_like: unpacked = read_tar(data); break;
        case ContainerFormat::zip_like: unpacked = read_zip(data); break;
        case ContainerFormat::flat_image: unpacked = read_flat(data); break;
        case ContainerFormat::gzip_like: {
          auto payload = read_gzip(data);
          unpacked.entries.push_back({gzip_member_name(data, file.filename().string()), false, std::move(payload)});
          break;
        }
        default: return false;
      }
    } catch (const CorruptContainer& e) {
      warnings_.push_back(rel(file) + ": corrupt " + std::string(name_of(format)) + " container (" + e.what() +
                          "); kept as opaque");
      return false;
    }
    for (auto& w : unpacked.warnings) warnings_.push_back(rel(file) + ": " + w);
    std::error_code ec;
    fs::remove_all(target, ec);
    fs::create_directories(target);
    for (const auto& entry : unpacked.entries) write_member(target, entry, file);
    expand_dir(target, level + 1);
    return true;
  }

  void write_member(const fs::path& target, const ArchiveEntry& entry, const fs::path& container) {
    auto dest = target / fs::path(entry.path);
    std::error_code ec;
    if (entry.is_dir) {
      fs::create_directories(dest, ec);
    } else {
      fs::create_directories(dest.parent_path(), ec);
      if (!ec && fs::is_directory(dest)) ec = std::make_error_code(std::errc::is_a_directory);
      if (!ec) {
        try {
          write_file(dest, std::span<const std::uint8_t>(entry.data));
        } catch (const Error&) {
          ec = std::make_error_code(std::errc::io_error);
        }
      }
    }
    if (ec) warnings_.push_back(rel(container) + ": could not materialise member '" + entry.path + "' (" + ec.message() + ")");
  }

  fs::path root_;
  int max_depth_;
  std::vector<std::string>& warnings_;
};

}  // namespace detail

/// Copies `image` (a file or a directory) under `dest_dir` and expands every
/// recognised container, at any nesting level, into a sibling
/// `<name>.extracted/` directory. Corrupt containers stay as opaque files
/// and produce a warning. Nesting deeper than `max_depth` throws
/// depth_exceeded naming the offending container.
///
/// `dest_dir` must be absent, empty, or the image directory itself (in
/// which case the tree is expanded in place).
inline ExtractionResult extract_recursive(const fs::path& image, const fs::path& dest_dir,
                                          int max_depth = kDefaultMaxDepth) {
  if (max_depth < 1) throw Error(ErrorKind::config, "max_depth", "must be at least 1");
  if (!fs::exists(image)) throw Error(ErrorKind::io, image.string(), "image not found");
  ExtractionResult result;
  bool in_place = fs::exists(dest_dir) && fs::equivalent(image, dest_dir);
  if (!in_place && fs::exists(dest_dir) && !fs::is_empty(dest_dir))
    throw Error(ErrorKind::io, dest_dir.string(), "destination is not empty");
  fs::create_directories(dest_dir);
  result.root = fs::canonical(dest_dir);

  if (!in_place) {
    if (fs::is_directory(image)) {
      detail::copy_tree(image, result.root, result.warnings);
    } else if (fs::is_regular_file(image)) {
      fs::copy_file(image, result.root / image.filename());
    } else {
      throw Error(ErrorKind::io, image.string(), "image is neither a file nor a directory");
    }
  }
  detail::Expander(result.root, max_depth, result.warnings).expand_dir(result.root, 1);
  result.nodes = list_tree(result.root, &result.warnings);
  return result;
}

struct ManifestEntry {
  std::string digest;
  std::string path;
};

/// One `<hex-digest> <path>` per line; blank lines and '#' comments skipped.
inline std::vector<ManifestEntry> parse_manifest(std::string_view text) {
  std::vector<ManifestEntry> out;
  std::size_t lineno = 0;
  for (auto line : text::lines(text)) {
    ++lineno;
    auto t = text::trim(line);
    if (t.empty() || t.front() == '#') continue;
    auto sp = t.find(' ');
    if (sp == std::string_view::npos)
      throw Error(ErrorKind::malformed_entry, "manifest line " + std::to_string(lineno), "expected '<digest> <path>'");
    out.push_back({std::string(t.substr(0, sp)), std::string(text::trim(t.substr(sp + 1)))});
  }
  return out;
}

inline std::string format_manifest(const std::vector<FileNode>& nodes) {
  std::string out;
  for (const auto& n : nodes)
    if (n.kind == NodeKind::regular) out += n.content_digest + " " + n.path + "\n";
  return out;
}

struct ValidationCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct ValidationReport {
  std::vector<ValidationCheck> checks;
  bool ok() const {
    return std::all_of(checks.begin(), checks.end(), [](const ValidationCheck& c) { return c.passed; });
  }
  const ValidationCheck* find(std::string_view name) const {
    for (const auto& c : checks)
      if (c.name == name) return &c;
    return nullptr;
  }
};

/// A regular node whose `<path>.extracted` directory sits next to it was
/// expanded; it is a container, not payload.
inline std::set<std::string> expanded_containers(const std::vector<FileNode>& nodes) {
  std::set<std::string> dirs, out;
  for (const auto& n : nodes)
    if (n.kind == NodeKind::directory) dirs.insert(n.path);
  for (const auto& n : nodes)
    if (n.kind == NodeKind::regular && dirs.count(n.path + std::string(text::kExtractedSuffix))) out.insert(n.path);
  return out;
}

/// Heuristic checks on an extraction: (a) it produced payload files,
/// (b) every path stays inside the root, and (c) when a manifest is given,
/// every listed path is present with the listed digest. Manifest paths are
/// matched against each node's logical paths, so "/etc/passwd" finds
/// "fw.tar.extracted/etc/passwd".
inline ValidationReport validate_extraction(const std::vector<FileNode>& nodes,
                                            const std::optional<std::vector<ManifestEntry>>& manifest) {
  ValidationReport report;
  auto containers = expanded_containers(nodes);
  std::size_t payload = 0;
  for (const auto& n : nodes)
    if (n.kind == NodeKind::regular && !containers.count(n.path)) ++payload;
  report.checks.push_back({"regular_files", payload > 0, std::to_string(payload) + " payload file(s)"});

  std::vector<std::string> escaping;
  for (const auto& n : nodes) {
    auto clean = sanitize_member_path(n.path);
    if (!clean || *clean != n.path) escaping.push_back(n.path);
  }
  report.checks.push_back({"no_path_escape", escaping.empty(),
                           escaping.empty() ? "all paths contained" : "escaping path: " + escaping.front()});

  if (manifest) {
    std::multimap<std::string, const FileNode*> by_logical;
    for (const auto& n : nodes)
      if (n.kind == NodeKind::regular)
        for (auto p : text::logical_paths(n.path)) by_logical.emplace(std::string(p), &n);
    std::vector<std::string> problems;
    for (const auto& m : *manifest) {
      std::string_view want = m.path;
      while (!want.empty() && want.front() == '/') want.remove_prefix(1);
      auto [lo, hi] = by_logical.equal_range(std::string(want));
      if (lo == hi) {
        problems.push_back("missing " + m.path);
        continue;
      }
      bool match = std::any_of(lo, hi, [&](const auto& kv) { return kv.second->content_digest == m.digest; });
      if (!match) problems.push_back("digest mismatch " + m.path);
    }
    std::string detail = problems.empty() ? std::to_string(manifest->size()) + " entries matched" : text::join(problems, "; ");
    report.checks.push_back({"manifest", problems.empty(), detail});
  }
  return report;
}

}  // namespace cdt::extract
