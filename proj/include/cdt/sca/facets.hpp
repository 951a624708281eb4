#pragma once

// Harvests the non-SBoM twin categories from well-known files.
//
//   etc/os-release           KEY=value; ID / ID_LIKE pick the family
//   etc/sysctl.conf          key = value -> kernel_config (vm.* also memory_config)
//   etc/sysctl.d/*.conf      same
//   etc/login.defs           KEY value -> os_security_config
//   etc/passwd, etc/shadow   user:secret:...; "x" defers to shadow, "*" / "!" lock the account
//   etc/tokens               name=token
//   etc/firewall.rules       <allow|deny> <in|out> <pattern>
//   etc/interfaces           <kind>[unit] [name], e.g. eth0 or can can0
//   etc/ssl/protocols        one protocol per line
//   etc/frameworks.list      <name> <version>
//   etc/app.d/<stem>.conf    key=value -> app_config as <stem>.<key>
//   etc/hw/peripherals       one peripheral per line
//   any file with a PEM header, any file with MVFW magic

#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cdt/binscan/image.hpp"
#include "cdt/model/cdt.hpp"
#include "cdt/sca/scanner.hpp"

namespace cdt::sca {

using model::AppFramework;
using model::Credential;
using model::EncryptionAsset;
using model::FirewallRule;
using model::HwBom;
using model::InterfaceDecl;
using model::OsInfo;
using model::Settings;

struct Facets {
  OsInfo os_info;
  Settings kernel_config;
  Settings os_security_config;
  Settings memory_config;
  std::vector<Credential> credentials;
  std::vector<FirewallRule> firewall_rules;
  std::vector<InterfaceDecl> network_interfaces;
  std::vector<EncryptionAsset> encryption_assets;
  std::vector<std::string> apis;
  std::vector<AppFramework> app_frameworks;
  Settings app_config;
  HwBom hw_bom;
  std::vector<std::string> code_artifacts;
  std::vector<std::string> warnings;
};

inline constexpr std::uint64_t kPemScanLimit = 1u << 20;

namespace detail {

inline std::string unquote(std::string_view v) {
  v = text::trim(v);
  if (v.size() >= 2 && (v.front() == '"' || v.front() == '\'') && v.back() == v.front()) v = v.substr(1, v.size() - 2);
  return std::string(v);
}

inline bool skip_line(std::string_view line) {
  line = text::trim(line);
  return line.empty() || line.front() == '#' || line.front() == ';';
}

/// key=value lines; returns pairs in file order.
inline std::vector<std::pair<std::string, std::string>> key_values(std::string_view content, char sep = '=') {
  std::vector<std::pair<std::string, std::string>> out;
  for (auto line : text::lines(content)) {
    if (skip_line(line)) continue;
    auto at = line.find(sep);
    if (at == std::string_view::npos) continue;
    auto key = text::trim(line.substr(0, at));
    if (key.empty()) continue;
    out.emplace_back(std::string(key), unquote(line.substr(at + 1)));
  }
  return out;
}

inline OsInfo parse_os_release(std::string_view content) {
  static const std::set<std::string> rtos{"freertos", "zephyr", "qnx", "vxworks", "threadx", "nucleus", "integrity", "rtems"};
  std::map<std::string, std::string> kv;
  for (auto& [k, v] : key_values(content)) kv[k] = v;
  OsInfo os;
  os.name = kv.count("NAME") ? kv["NAME"] : kv["ID"];
  os.version = kv.count("VERSION_ID") ? kv["VERSION_ID"] : kv["VERSION"];
  if (os.name.empty()) {
    os.version.clear();
    return os;
  }
  os.family = model::OsFamily::linux_like;
  for (const auto& key : {"ID", "ID_LIKE", "NAME"})
    for (auto word : text::split_ws(text::to_lower(kv[key])))
      if (rtos.count(std::string(word))) os.family = model::OsFamily::rtos_like;
  return os;
}

inline std::optional<model::InterfaceKind> interface_kind(std::string_view word) {
  static const std::map<std::string, model::InterfaceKind, std::less<>> aliases{
      {"eth", model::InterfaceKind::ethernet}, {"wlan", model::InterfaceKind::wifi},
      {"bt", model::InterfaceKind::bluetooth}, {"lte", model::InterfaceKind::cellular},
      {"sms", model::InterfaceKind::sms_logical}};
  auto lower = text::to_lower(word);
  while (!lower.empty() && std::isdigit(static_cast<unsigned char>(lower.back()))) lower.pop_back();
  if (auto k = parse_enum<model::InterfaceKind>(lower)) return k;
  if (auto it = aliases.find(lower); it != aliases.end()) return it->second;
  return std::nullopt;
}

inline std::string pem_algorithm(std::string_view label) {
  auto words = text::split_ws(label);
  if (words.size() > 2) return std::string(words.front());
  return "unspecified";
}

class Harvester {
 public:
  explicit Harvester(Facets& out) : f_(out) {}

  void file(const FileTree& tree, const FileNode& node) {
    const auto& p = node.path;
    auto is = [&](std::string_view logical) { return text::path_is(p, logical); };
    auto under = [&](std::string_view dir, std::string_view ext) {
      for (auto lp : text::logical_paths(p))
        if (lp.starts_with(dir) && lp.ends_with(ext) && lp.find('/', dir.size()) == std::string_view::npos) return true;
      return false;
    };
    auto bytes = node.size_bytes <= kPemScanLimit ? read_file(tree.file(node)) : head(tree.file(node));
    auto content = as_chars(bytes);

    if (binscan::has_magic(bytes)) {
      artifact(tree, node, bytes);
      return;
    }
    if (is("etc/os-release")) f_.os_info = parse_os_release(content);
    if (is("etc/sysctl.conf") || under("etc/sysctl.d/", ".conf")) sysctl(content);
    if (is("etc/login.defs"))
      for (auto line : text::lines(content)) {
        if (skip_line(line)) continue;
        auto w = text::split_ws(line);
        if (w.size() >= 2) f_.os_security_config[std::string(w[0])] = std::string(w[1]);
      }
    if (is("etc/passwd")) passwd_ = std::string(content);
    if (is("etc/shadow")) shadow_ = std::string(content);
    if (is("etc/tokens"))
      for (auto& [k, v] : key_values(content)) f_.credentials.push_back({k, v, model::SecretKind::token});
    if (is("etc/firewall.rules")) firewall(p, content);
    if (is("etc/interfaces"))
      for (auto line : text::lines(content)) {
        if (skip_line(line)) continue;
        auto w = text::split_ws(line);
        if (auto k = interface_kind(w[0])) f_.network_interfaces.push_back({*k, p});
        else f_.warnings.push_back(p + ": unknown interface kind '" + std::string(w[0]) + "'");
      }
    if (is("etc/ssl/protocols"))
      for (auto line : text::lines(content))
        if (!skip_line(line)) f_.encryption_assets.push_back({model::AssetKind::protocol_decl, p, std::string(text::trim(line))});
    if (is("etc/frameworks.list"))
      for (auto line : text::lines(content)) {
        if (skip_line(line)) continue;
        auto w = text::split_ws(line);
        f_.app_frameworks.push_back({std::string(w[0]), w.size() > 1 ? std::string(w[1]) : std::string(kUnknownVersion)});
      }
    if (under("etc/app.d/", ".conf")) {
      auto stem = std::string(text::basename(p));
      stem.resize(stem.size() - 5);
      for (auto& [k, v] : key_values(content)) f_.app_config[stem + "." + k] = v;
    }
    if (is("etc/hw/peripherals"))
      for (auto line : text::lines(content))
        if (!skip_line(line)) f_.hw_bom.peripherals.emplace_back(text::trim(line));
    if (node.size_bytes <= kPemScanLimit) pem(p, content);
  }

  void finish() {
    std::map<std::string, std::string> shadow;
    for (auto line : text::lines(shadow_)) {
      auto parts = text::split(line, ':');
      if (parts.size() >= 2 && !parts[0].empty()) shadow[std::string(parts[0])] = std::string(parts[1]);
    }
    for (auto line : text::lines(passwd_)) {
      if (skip_line(line)) continue;
      auto parts = text::split(line, ':');
      if (parts.size() < 2 || parts[0].empty()) continue;
      std::string user(parts[0]), secret(parts[1]);
      if (secret == "x") {
        auto it = shadow.find(user);
        if (it == shadow.end()) continue;
        secret = it->second;
      }
      if (secret == "*" || secret.starts_with('!')) continue;
      auto kind = model::looks_hashed(secret) ? model::SecretKind::hashed : model::SecretKind::plaintext;
      f_.credentials.push_back({user, secret, kind});
    }
  }

 private:
  static Bytes head(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    Bytes b(kHeaderProbe);
    in.read(reinterpret_cast<char*>(b.data()), static_cast<std::streamsize>(b.size()));
    b.resize(static_cast<std::size_t>(in.gcount()));
    return b;
  }
  static constexpr std::size_t kHeaderProbe = 16;

  void sysctl(std::string_view content) {
    for (auto& [k, v] : key_values(content)) {
      f_.kernel_config[k] = v;
      if (k.starts_with("vm.")) f_.memory_config[k] = v;
    }
  }

  void firewall(const std::string& p, std::string_view content) {
    int line_no = 0;
    for (auto line : text::lines(content)) {
      ++line_no;
      if (skip_line(line)) continue;
      auto w = text::split_ws(line);
      auto action = parse_enum<model::FirewallAction>(w[0]);
      auto dir = w.size() > 1 ? parse_enum<model::Direction>(w[1]) : std::nullopt;
      if (!action || !dir || w.size() < 3) {
        f_.warnings.push_back(p + ":" + std::to_string(line_no) + ": unparsable firewall rule");
        continue;
      }
      std::string pattern(w[2]);
      for (std::size_t i = 3; i < w.size(); ++i) pattern += " " + std::string(w[i]);
      f_.firewall_rules.push_back({static_cast<int>(f_.firewall_rules.size()), *action, *dir, pattern});
    }
  }

  void pem(const std::string& p, std::string_view content) {
    static constexpr std::string_view begin = "-----BEGIN ";
    for (auto at = content.find(begin); at != std::string_view::npos; at = content.find(begin, at + 1)) {
      auto end = content.find("-----", at + begin.size());
      if (end == std::string_view::npos) break;
      auto label = content.substr(at + begin.size(), end - at - begin.size());
      if (label.ends_with("PRIVATE KEY"))
        f_.encryption_assets.push_back({model::AssetKind::private_key, p, pem_algorithm(label)});
      else if (label.ends_with("PUBLIC KEY"))
        f_.encryption_assets.push_back({model::AssetKind::public_key, p, pem_algorithm(label)});
      else if (label == "CERTIFICATE")
        f_.encryption_assets.push_back({model::AssetKind::public_key, p, "x509"});
    }
  }

  void artifact(const FileTree& tree, const FileNode& node, Bytes bytes) {
    f_.code_artifacts.push_back(node.path);
    try {
      if (bytes.size() < node.size_bytes) bytes = read_file(tree.file(node));
      auto image = binscan::load_binary(std::move(bytes));
      int bits = image.arch == model::CpuArch::MV32 ? 32 : 16;
      if (f_.hw_bom.cpu_arch == model::CpuArch::unknown) {
        f_.hw_bom.cpu_arch = image.arch;
        f_.hw_bom.cpu_bits = bits;
      } else if (f_.hw_bom.cpu_arch != image.arch) {
        f_.warnings.push_back(node.path + ": architecture " + std::string(name_of(image.arch)) + " differs from " +
                              std::string(name_of(f_.hw_bom.cpu_arch)));
      }
      binscan::map_sections(image);
      for (const auto& s : image.symbols) f_.apis.push_back(s.name);
    } catch (const Error& e) {
      f_.warnings.push_back(node.path + ": " + e.what());
    }
  }

  Facets& f_;
  std::string passwd_, shadow_;
};

}  // namespace detail

/// Nodes are visited in path order, so the first MVFW artifact decides the
/// hardware architecture and later conflicting ones only warn.
inline Facets harvest_cdt_facets(const FileTree& tree) {
  Facets f;
  detail::Harvester h(f);
  for (const auto& node : tree.nodes)
    if (node.kind == NodeKind::regular) h.file(tree, node);
  h.finish();
  model::sort_unique(f.credentials);
  model::sort_unique(f.network_interfaces);
  model::sort_unique(f.encryption_assets);
  model::sort_unique(f.apis);
  model::sort_unique(f.app_frameworks);
  model::sort_unique(f.hw_bom.peripherals);
  model::sort_unique(f.code_artifacts);
  return f;
}

inline void apply_facets(model::CyberDigitalTwin& cdt, const Facets& f) {
  cdt.os_info = f.os_info;
  cdt.kernel_config = f.kernel_config;
  cdt.os_security_config = f.os_security_config;
  cdt.memory_config = f.memory_config;
  cdt.credentials = f.credentials;
  cdt.firewall_rules = f.firewall_rules;
  cdt.network_interfaces = f.network_interfaces;
  cdt.encryption_assets = f.encryption_assets;
  cdt.apis = f.apis;
  cdt.app_frameworks = f.app_frameworks;
  cdt.app_config = f.app_config;
  cdt.hw_bom = f.hw_bom;
  cdt.code_artifacts = f.code_artifacts;
}

}  // namespace cdt::sca
