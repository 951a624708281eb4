#pragma once

// Built-in policy checks over a twin. Evidence is a JSON pointer into the
// serialized twin document.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cdt/core/severity.hpp"
#include "cdt/core/version.hpp"
#include "cdt/model/cdt.hpp"

namespace cdt::verify {

namespace check {
inline constexpr std::string_view aslr = "aslr";
inline constexpr std::string_view plaintext_credentials = "plaintext_credentials";
inline constexpr std::string_view firewall_default_deny = "firewall_default_deny";
inline constexpr std::string_view embedded_private_key = "embedded_private_key";
inline constexpr std::string_view outdated_component = "outdated_component";
}  // namespace check

inline const std::vector<std::string_view>& policy_check_ids() {
  static const std::vector<std::string_view> ids{check::aslr, check::plaintext_credentials, check::firewall_default_deny,
                                                 check::embedded_private_key, check::outdated_component};
  return ids;
}

struct PolicyFinding {
  std::string check_id;
  std::optional<std::string> cwe_id;
  std::string description;
  Severity severity = Severity::low;
  std::string evidence;
  friend bool operator==(const PolicyFinding&, const PolicyFinding&) = default;
};

/// Newest known release per (vendor, product), from signature metadata.
using LatestVersions = std::map<std::pair<std::string, std::string>, std::string>;

inline std::string pointer_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '~') out += "~0";
    else if (c == '/') out += "~1";
    else out += c;
  }
  return out;
}

inline std::vector<PolicyFinding> check_policies(model::CyberDigitalTwin cdt, const LatestVersions& latest = {}) {
  model::canonicalize(cdt);
  std::vector<PolicyFinding> out;

  static const std::string aslr_key = "kernel.randomize_va_space";
  auto it = cdt.kernel_config.find(aslr_key);
  int level = 0;
  if (it != cdt.kernel_config.end()) {
    try {
      level = std::stoi(it->second);
    } catch (const std::exception&) {
      level = 0;
    }
  }
  if (level < 1)
    out.push_back({std::string(check::aslr), "CWE-1189",
                   it == cdt.kernel_config.end() ? "address space layout randomization is not configured"
                                                 : "address space layout randomization is disabled (" + it->second + ")",
                   Severity::medium,
                   it == cdt.kernel_config.end() ? "/kernel_config" : "/kernel_config/" + pointer_escape(aslr_key)});

  for (std::size_t i = 0; i < cdt.credentials.size(); ++i)
    if (cdt.credentials[i].secret_kind == model::SecretKind::plaintext)
      out.push_back({std::string(check::plaintext_credentials), "CWE-256",
                     "plaintext password for user '" + cdt.credentials[i].username + "'", Severity::high,
                     "/credentials/" + std::to_string(i)});

  std::optional<std::size_t> last_in;
  for (std::size_t i = 0; i < cdt.firewall_rules.size(); ++i)
    if (cdt.firewall_rules[i].direction == model::Direction::in) last_in = i;
  if (last_in && cdt.firewall_rules[*last_in].action != model::FirewallAction::deny)
    out.push_back({std::string(check::firewall_default_deny), std::nullopt,
                   "last inbound firewall rule allows '" + cdt.firewall_rules[*last_in].pattern + "' instead of denying",
                   Severity::medium, "/firewall_rules/" + std::to_string(*last_in)});

  for (std::size_t i = 0; i < cdt.encryption_assets.size(); ++i)
    if (cdt.encryption_assets[i].kind == model::AssetKind::private_key)
      out.push_back({std::string(check::embedded_private_key), "CWE-321",
                     "private key embedded at " + cdt.encryption_assets[i].path, Severity::high,
                     "/encryption_assets/" + std::to_string(i)});

  for (std::size_t i = 0; i < cdt.sbom.size(); ++i) {
    const auto& e = cdt.sbom[i];
    auto l = latest.find({e.vendor, e.product});
    if (l == latest.end() || e.version == kUnknownVersion || !is_valid_version(e.version)) continue;
    if (compare_versions(e.version, l->second) < 0)
      out.push_back({std::string(check::outdated_component), std::nullopt,
                     e.product + " " + e.version + " predates " + l->second, Severity::low, "/sbom/" + std::to_string(i)});
  }
  return out;
}

}  // namespace cdt::verify
