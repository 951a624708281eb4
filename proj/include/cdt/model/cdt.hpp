#pragma once

// Cyber Digital Twin data model and its canonical JSON document.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "cdt/core/enum_names.hpp"
#include "cdt/core/error.hpp"
#include "cdt/core/version.hpp"

namespace cdt::model {

enum class CpuArch { MV32, MV16, unknown };
enum class InterfaceKind { ethernet, usb, wifi, bluetooth, can, cellular, radio, zigbee, sms_logical };
enum class Origin { open_source, commercial, first_party, unknown };
enum class IndicatorKind { path, filename, unique_string, pkgdb };
enum class OsFamily { linux_like, rtos_like, none };
enum class SecretKind { plaintext, hashed, token };
enum class FirewallAction { allow, deny };
enum class Direction { in, out };
enum class AssetKind { public_key, private_key, protocol_decl };

struct HwBom {
  CpuArch cpu_arch = CpuArch::unknown;
  int cpu_bits = 0;
  std::vector<std::string> peripherals;
  friend bool operator==(const HwBom&, const HwBom&) = default;
};

struct InterfaceDecl {
  InterfaceKind kind = InterfaceKind::ethernet;
  std::string evidence_path;
  friend auto operator<=>(const InterfaceDecl&, const InterfaceDecl&) = default;
};

struct Evidence {
  IndicatorKind kind = IndicatorKind::path;
  std::string path;
  friend auto operator<=>(const Evidence&, const Evidence&) = default;
};

struct SbomEntry {
  std::string vendor;
  std::string product;
  std::string version{kUnknownVersion};
  Origin origin = Origin::unknown;
  std::vector<Evidence> evidence;
  std::vector<std::string> licenses;
  friend bool operator==(const SbomEntry&, const SbomEntry&) = default;
};

struct OsInfo {
  OsFamily family = OsFamily::none;
  std::string name;
  std::string version;
  friend bool operator==(const OsInfo&, const OsInfo&) = default;
};

using Settings = std::map<std::string, std::string>;

struct Credential {
  std::string username;
  std::string secret;
  SecretKind secret_kind = SecretKind::plaintext;
  friend auto operator<=>(const Credential&, const Credential&) = default;
};

struct FirewallRule {
  int ordinal = 0;
  FirewallAction action = FirewallAction::deny;
  Direction direction = Direction::in;
  std::string pattern;
  friend auto operator<=>(const FirewallRule&, const FirewallRule&) = default;
};

struct EncryptionAsset {
  AssetKind kind = AssetKind::public_key;
  std::string path;
  std::string algorithm;
  friend auto operator<=>(const EncryptionAsset&, const EncryptionAsset&) = default;
};

struct AppFramework {
  std::string name;
  std::string version;
  friend auto operator<=>(const AppFramework&, const AppFramework&) = default;
};

using Timestamp = std::chrono::sys_seconds;

struct CyberDigitalTwin {
  std::string firmware_id;
  Timestamp created_at{};
  std::string file_tree_digest;
  HwBom hw_bom;
  std::vector<InterfaceDecl> network_interfaces;
  std::vector<SbomEntry> sbom;
  OsInfo os_info;
  Settings kernel_config;
  Settings os_security_config;
  Settings memory_config;
  std::vector<Credential> credentials;
  std::vector<FirewallRule> firewall_rules;
  std::vector<AppFramework> app_frameworks;
  std::vector<std::string> apis;
  Settings app_config;
  std::vector<EncryptionAsset> encryption_assets;
  std::vector<std::string> code_artifacts;
};

/// Top-level document keys, in the order the schema lists them.
inline const std::vector<std::string>& document_keys() {
  static const std::vector<std::string> keys{
      "firmware_id",   "created_at",     "file_tree_digest",   "hw_bom",        "network_interfaces",
      "sbom",          "os_info",        "kernel_config",      "os_security_config", "memory_config",
      "credentials",   "firewall_rules", "app_frameworks",     "apis",          "app_config",
      "encryption_assets", "code_artifacts"};
  return keys;
}

/// `$<scheme>$` prefix as used by crypt(3) hashes.
inline bool looks_hashed(std::string_view secret) {
  if (secret.size() < 3 || secret[0] != '$') return false;
  std::size_t i = 1;
  while (i < secret.size() && std::isalnum(static_cast<unsigned char>(secret[i]))) ++i;
  return i > 1 && i < secret.size() && secret[i] == '$';
}

/// Canonical SBoM order: vendor, product, then version order with the raw
/// text as tie-break so "1.2" and "1.2.0" stay distinct but adjacent.
inline bool sbom_less(const SbomEntry& a, const SbomEntry& b) {
  if (a.vendor != b.vendor) return a.vendor < b.vendor;
  if (a.product != b.product) return a.product < b.product;
  auto va = Version::parse(a.version), vb = Version::parse(b.version);
  if (va && vb) {
    if (auto c = *va <=> *vb; c != 0) return c < 0;
  }
  return a.version < b.version;
}

template <class T>
void sort_unique(std::vector<T>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

inline void canonicalize(SbomEntry& e) {
  sort_unique(e.evidence);
  std::vector<std::string> seen;
  for (auto& l : e.licenses)
    if (std::find(seen.begin(), seen.end(), l) == seen.end()) seen.push_back(l);
  e.licenses = std::move(seen);
}

inline void canonicalize(std::vector<SbomEntry>& sbom) {
  for (auto& e : sbom) canonicalize(e);
  std::stable_sort(sbom.begin(), sbom.end(), sbom_less);
}

/// Puts every list into its canonical order. Serialisation, equality and
/// the pipeline all operate on canonical twins.
inline void canonicalize(CyberDigitalTwin& cdt) {
  sort_unique(cdt.hw_bom.peripherals);
  sort_unique(cdt.network_interfaces);
  canonicalize(cdt.sbom);
  sort_unique(cdt.credentials);
  std::sort(cdt.firewall_rules.begin(), cdt.firewall_rules.end());
  sort_unique(cdt.app_frameworks);
  sort_unique(cdt.apis);
  sort_unique(cdt.encryption_assets);
  sort_unique(cdt.code_artifacts);
}

/// Content equality on canonical forms; created_at is deliberately ignored.
inline bool same_content(CyberDigitalTwin a, CyberDigitalTwin b) {
  canonicalize(a);
  canonicalize(b);
  return a.firmware_id == b.firmware_id && a.file_tree_digest == b.file_tree_digest &&
         a.hw_bom == b.hw_bom && a.network_interfaces == b.network_interfaces && a.sbom == b.sbom &&
         a.os_info == b.os_info && a.kernel_config == b.kernel_config &&
         a.os_security_config == b.os_security_config && a.memory_config == b.memory_config &&
         a.credentials == b.credentials && a.firewall_rules == b.firewall_rules &&
         a.app_frameworks == b.app_frameworks && a.apis == b.apis && a.app_config == b.app_config &&
         a.encryption_assets == b.encryption_assets && a.code_artifacts == b.code_artifacts;
}

inline bool operator==(const CyberDigitalTwin& a, const CyberDigitalTwin& b) { return same_content(a, b); }

inline std::string format_timestamp(Timestamp t) {
  auto day = std::chrono::floor<std::chrono::days>(t);
  std::chrono::year_month_day ymd{day};
  std::chrono::hh_mm_ss hms{t - day};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                static_cast<int>(hms.seconds().count()));
  return buf;
}

inline std::optional<Timestamp> parse_timestamp(std::string_view s) {
  int y, mo, d, h, mi, sec;
  char z = 0;
  std::string str(s);
  if (str.size() != 20 ||
      std::sscanf(str.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d%c", &y, &mo, &d, &h, &mi, &sec, &z) != 7 || z != 'Z')
    return std::nullopt;
  std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(mo)},
                                  std::chrono::day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || sec > 59 || h < 0 || mi < 0 || sec < 0) return std::nullopt;
  return std::chrono::sys_days{ymd} + std::chrono::hours{h} + std::chrono::minutes{mi} + std::chrono::seconds{sec};
}

inline Timestamp now_utc() { return std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now()); }

}  // namespace cdt::model

namespace cdt {


template <>
struct EnumNames<model::CpuArch> {
  static constexpr std::array values{CDT_ENUM_NAME(model::CpuArch, MV32), CDT_ENUM_NAME(model::CpuArch, MV16),
                                     CDT_ENUM_NAME(model::CpuArch, unknown)};
};
template <>
struct EnumNames<model::InterfaceKind> {
  static constexpr std::array values{
      CDT_ENUM_NAME(model::InterfaceKind, ethernet), CDT_ENUM_NAME(model::InterfaceKind, usb),
      CDT_ENUM_NAME(model::InterfaceKind, wifi),     CDT_ENUM_NAME(model::InterfaceKind, bluetooth),
      CDT_ENUM_NAME(model::InterfaceKind, can),      CDT_ENUM_NAME(model::InterfaceKind, cellular),
      CDT_ENUM_NAME(model::InterfaceKind, radio),    CDT_ENUM_NAME(model::InterfaceKind, zigbee),
      CDT_ENUM_NAME(model::InterfaceKind, sms_logical)};
};
template <>
struct EnumNames<model::Origin> {
  static constexpr std::array values{CDT_ENUM_NAME(model::Origin, open_source), CDT_ENUM_NAME(model::Origin, commercial),
                                     CDT_ENUM_NAME(model::Origin, first_party), CDT_ENUM_NAME(model::Origin, unknown)};
};
template <>
struct EnumNames<model::IndicatorKind> {
  static constexpr std::array values{CDT_ENUM_NAME(model::IndicatorKind, path),
                                     CDT_ENUM_NAME(model::IndicatorKind, filename),
                                     CDT_ENUM_NAME(model::IndicatorKind, unique_string),
                                     CDT_ENUM_NAME(model::IndicatorKind, pkgdb)};
};
template <>
struct EnumNames<model::OsFamily> {
  static constexpr std::array values{CDT_ENUM_NAME(model::OsFamily, linux_like),
                                     CDT_ENUM_NAME(model::OsFamily, rtos_like), CDT_ENUM_NAME(model::OsFamily, none)};
};
template <>
struct EnumNames<model::SecretKind> {
  static constexpr std::array values{CDT_ENUM_NAME(model::SecretKind, plaintext),
                                     CDT_ENUM_NAME(model::SecretKind, hashed), CDT_ENUM_NAME(model::SecretKind, token)};
};
template <>
struct EnumNames<model::FirewallAction> {
  static constexpr std::array values{CDT_ENUM_NAME(model::FirewallAction, allow),
                                     CDT_ENUM_NAME(model::FirewallAction, deny)};
};
template <>
struct EnumNames<model::Direction> {
  static constexpr std::array values{CDT_ENUM_NAME(model::Direction, in), CDT_ENUM_NAME(model::Direction, out)};
};
template <>
struct EnumNames<model::AssetKind> {
  static constexpr std::array values{CDT_ENUM_NAME(model::AssetKind, public_key),
                                     CDT_ENUM_NAME(model::AssetKind, private_key),
                                     CDT_ENUM_NAME(model::AssetKind, protocol_decl)};
};


}  // namespace cdt

namespace cdt::model {

namespace detail {

using nlohmann::json;

inline void violation(const std::string& path, const std::string& what) {
  throw Error(ErrorKind::invariant_violation, path, what);
}

inline json settings_json(const Settings& s) {
  json j = json::object();
  for (const auto& [k, v] : s) j[k] = v;
  return j;
}

/// Typed access into the document with field-path diagnostics.
class Reader {
 public:
  static void malformed(const std::string& path, const std::string& what) {
    throw Error(ErrorKind::malformed_document, path, what);
  }

  static const json& field(const json& obj, const std::string& key, const std::string& path) {
    if (!obj.is_object()) malformed(path, "expected an object");
    auto it = obj.find(key);
    if (it == obj.end()) malformed(join(path, key), "missing required field");
    return *it;
  }

  static std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
  }

  static std::string str(const json& obj, const std::string& key, const std::string& path) {
    const auto& v = field(obj, key, path);
    if (!v.is_string()) malformed(join(path, key), "expected a string");
    return v.get<std::string>();
  }

  static const json& array(const json& obj, const std::string& key, const std::string& path) {
    const auto& v = field(obj, key, path);
    if (!v.is_array()) malformed(join(path, key), "expected an array");
    return v;
  }

  template <class E>
  static E enumeration(const json& obj, const std::string& key, const std::string& path) {
    auto s = str(obj, key, path);
    auto e = parse_enum<E>(s);
    if (!e) malformed(join(path, key), "unknown value '" + s + "'");
    return *e;
  }

  static std::vector<std::string> strings(const json& obj, const std::string& key, const std::string& path) {
    std::vector<std::string> out;
    const auto& arr = array(obj, key, path);
    for (std::size_t i = 0; i < arr.size(); ++i) {
      if (!arr[i].is_string()) malformed(join(path, key) + "[" + std::to_string(i) + "]", "expected a string");
      out.push_back(arr[i].get<std::string>());
    }
    return out;
  }

  static Settings settings(const json& obj, const std::string& key, const std::string& path) {
    const auto& v = field(obj, key, path);
    if (!v.is_object()) malformed(join(path, key), "expected an object");
    Settings s;
    for (auto it = v.begin(); it != v.end(); ++it) {
      if (!it.value().is_string()) malformed(join(path, key) + "." + it.key(), "expected a string");
      s[it.key()] = it.value().get<std::string>();
    }
    return s;
  }
};

inline std::string at(const std::string& key, std::size_t i) { return key + "[" + std::to_string(i) + "]"; }

}  // namespace detail

/// Checks every model invariant that can be checked without the extracted
/// tree. Throws invariant_violation naming the field path.
inline void validate(const CyberDigitalTwin& cdt) {
  using detail::at;
  using detail::violation;
  if (cdt.firmware_id.empty()) violation("firmware_id", "must be nonempty");
  const auto bits = cdt.hw_bom.cpu_bits;
  if (bits != 0 && bits != 16 && bits != 32) violation("hw_bom.cpu_bits", "must be 0, 16 or 32");
  std::set<std::tuple<std::string, std::string, std::string>> seen;
  for (std::size_t i = 0; i < cdt.sbom.size(); ++i) {
    const auto& e = cdt.sbom[i];
    if (!seen.emplace(e.vendor, e.product, e.version).second)
      violation(at("sbom", i), "duplicate (vendor, product, version)");
    if (!is_valid_version(e.version)) violation(at("sbom", i) + ".version", "unparseable version '" + e.version + "'");
    if (e.evidence.empty()) violation(at("sbom", i) + ".evidence", "detected entries need evidence");
  }
  for (std::size_t i = 0; i < cdt.credentials.size(); ++i) {
    const auto& c = cdt.credentials[i];
    if ((c.secret_kind == SecretKind::hashed) != looks_hashed(c.secret))
      violation(at("credentials", i) + ".secret_kind", "hashed iff secret has a $scheme$ prefix");
  }
  std::vector<int> ordinals;
  for (const auto& r : cdt.firewall_rules) ordinals.push_back(r.ordinal);
  std::sort(ordinals.begin(), ordinals.end());
  for (std::size_t i = 0; i < ordinals.size(); ++i)
    if (ordinals[i] != static_cast<int>(i)) violation("firewall_rules", "ordinals must be unique and contiguous from 0");
  for (std::size_t i = 0; i < cdt.encryption_assets.size(); ++i) {
    const auto& a = cdt.encryption_assets[i];
    if (a.kind != AssetKind::protocol_decl && a.path.empty())
      violation(at("encryption_assets", i) + ".path", "keys need a path");
  }
  if (cdt.os_info.family == OsFamily::none && !cdt.os_info.name.empty())
    violation("os_info.name", "must be empty when family is none");
}

inline std::string serialize(CyberDigitalTwin cdt) {
  using nlohmann::json;
  canonicalize(cdt);
  json doc = json::object();
  doc["firmware_id"] = cdt.firmware_id;
  doc["created_at"] = format_timestamp(cdt.created_at);
  doc["file_tree_digest"] = cdt.file_tree_digest;
  doc["hw_bom"] = {{"cpu_arch", name_of(cdt.hw_bom.cpu_arch)},
                   {"cpu_bits", cdt.hw_bom.cpu_bits},
                   {"peripherals", cdt.hw_bom.peripherals}};
  doc["network_interfaces"] = json::array();
  for (const auto& i : cdt.network_interfaces)
    doc["network_interfaces"].push_back({{"kind", name_of(i.kind)}, {"evidence_path", i.evidence_path}});
  doc["sbom"] = json::array();
  for (const auto& e : cdt.sbom) {
    json ev = json::array();
    for (const auto& x : e.evidence) ev.push_back({{"indicator_kind", name_of(x.kind)}, {"matched_path", x.path}});
    doc["sbom"].push_back({{"vendor", e.vendor},
                           {"product", e.product},
                           {"version", e.version},
                           {"origin", name_of(e.origin)},
                           {"evidence", std::move(ev)},
                           {"licenses", e.licenses}});
  }
  doc["os_info"] = {{"family", name_of(cdt.os_info.family)}, {"name", cdt.os_info.name}, {"version", cdt.os_info.version}};
  doc["kernel_config"] = detail::settings_json(cdt.kernel_config);
  doc["os_security_config"] = detail::settings_json(cdt.os_security_config);
  doc["memory_config"] = detail::settings_json(cdt.memory_config);
  doc["credentials"] = json::array();
  for (const auto& c : cdt.credentials)
    doc["credentials"].push_back(
        {{"username", c.username}, {"secret", c.secret}, {"secret_kind", name_of(c.secret_kind)}});
  doc["firewall_rules"] = json::array();
  for (const auto& r : cdt.firewall_rules)
    doc["firewall_rules"].push_back({{"ordinal", r.ordinal},
                                     {"action", name_of(r.action)},
                                     {"direction", name_of(r.direction)},
                                     {"pattern", r.pattern}});
  doc["app_frameworks"] = json::array();
  for (const auto& f : cdt.app_frameworks) doc["app_frameworks"].push_back({{"name", f.name}, {"version", f.version}});
  doc["apis"] = cdt.apis;
  doc["app_config"] = detail::settings_json(cdt.app_config);
  doc["encryption_assets"] = json::array();
  for (const auto& a : cdt.encryption_assets)
    doc["encryption_assets"].push_back({{"kind", name_of(a.kind)}, {"path", a.path}, {"algorithm", a.algorithm}});
  doc["code_artifacts"] = cdt.code_artifacts;
  return doc.dump(2) + "\n";
}

inline CyberDigitalTwin deserialize(std::string_view document) {
  using detail::at;
  using detail::Reader;
  using nlohmann::json;
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::malformed_document, "", e.what());
  }
  if (!doc.is_object()) Reader::malformed("", "top level must be an object");
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    const auto& keys = document_keys();
    if (std::find(keys.begin(), keys.end(), it.key()) == keys.end()) Reader::malformed(it.key(), "unexpected key");
  }

  CyberDigitalTwin cdt;
  cdt.firmware_id = Reader::str(doc, "firmware_id", "");
  auto ts = parse_timestamp(Reader::str(doc, "created_at", ""));
  if (!ts) Reader::malformed("created_at", "expected YYYY-MM-DDTHH:MM:SSZ");
  cdt.created_at = *ts;
  cdt.file_tree_digest = Reader::str(doc, "file_tree_digest", "");

  const auto& hw = Reader::field(doc, "hw_bom", "");
  cdt.hw_bom.cpu_arch = Reader::enumeration<CpuArch>(hw, "cpu_arch", "hw_bom");
  const auto& bits = Reader::field(hw, "cpu_bits", "hw_bom");
  if (!bits.is_number_integer()) Reader::malformed("hw_bom.cpu_bits", "expected an integer");
  cdt.hw_bom.cpu_bits = bits.get<int>();
  cdt.hw_bom.peripherals = Reader::strings(hw, "peripherals", "hw_bom");

  const auto& ifs = Reader::array(doc, "network_interfaces", "");
  for (std::size_t i = 0; i < ifs.size(); ++i) {
    auto p = at("network_interfaces", i);
    cdt.network_interfaces.push_back(
        {Reader::enumeration<InterfaceKind>(ifs[i], "kind", p), Reader::str(ifs[i], "evidence_path", p)});
  }

  const auto& sbom = Reader::array(doc, "sbom", "");
  for (std::size_t i = 0; i < sbom.size(); ++i) {
    auto p = at("sbom", i);
    SbomEntry e;
    e.vendor = Reader::str(sbom[i], "vendor", p);
    e.product = Reader::str(sbom[i], "product", p);
    e.version = Reader::str(sbom[i], "version", p);
    e.origin = Reader::enumeration<Origin>(sbom[i], "origin", p);
    const auto& ev = Reader::array(sbom[i], "evidence", p);
    for (std::size_t k = 0; k < ev.size(); ++k) {
      auto q = at(p + ".evidence", k);
      e.evidence.push_back(
          {Reader::enumeration<IndicatorKind>(ev[k], "indicator_kind", q), Reader::str(ev[k], "matched_path", q)});
    }
    e.licenses = Reader::strings(sbom[i], "licenses", p);
    cdt.sbom.push_back(std::move(e));
  }

  const auto& os = Reader::field(doc, "os_info", "");
  cdt.os_info = {Reader::enumeration<OsFamily>(os, "family", "os_info"), Reader::str(os, "name", "os_info"),
                 Reader::str(os, "version", "os_info")};
  cdt.kernel_config = Reader::settings(doc, "kernel_config", "");
  cdt.os_security_config = Reader::settings(doc, "os_security_config", "");
  cdt.memory_config = Reader::settings(doc, "memory_config", "");

  const auto& creds = Reader::array(doc, "credentials", "");
  for (std::size_t i = 0; i < creds.size(); ++i) {
    auto p = at("credentials", i);
    cdt.credentials.push_back({Reader::str(creds[i], "username", p), Reader::str(creds[i], "secret", p),
                               Reader::enumeration<SecretKind>(creds[i], "secret_kind", p)});
  }

  const auto& rules = Reader::array(doc, "firewall_rules", "");
  for (std::size_t i = 0; i < rules.size(); ++i) {
    auto p = at("firewall_rules", i);
    const auto& ord = Reader::field(rules[i], "ordinal", p);
    if (!ord.is_number_integer()) Reader::malformed(p + ".ordinal", "expected an integer");
    cdt.firewall_rules.push_back({ord.get<int>(), Reader::enumeration<FirewallAction>(rules[i], "action", p),
                                  Reader::enumeration<Direction>(rules[i], "direction", p),
                                  Reader::str(rules[i], "pattern", p)});
  }

  const auto& fws = Reader::array(doc, "app_frameworks", "");
  for (std::size_t i = 0; i < fws.size(); ++i) {
    auto p = at("app_frameworks", i);
    cdt.app_frameworks.push_back({Reader::str(fws[i], "name", p), Reader::str(fws[i], "version", p)});
  }
  cdt.apis = Reader::strings(doc, "apis", "");
  cdt.app_config = Reader::settings(doc, "app_config", "");

  const auto& assets = Reader::array(doc, "encryption_assets", "");
  for (std::size_t i = 0; i < assets.size(); ++i) {
    auto p = at("encryption_assets", i);
    cdt.encryption_assets.push_back({Reader::enumeration<AssetKind>(assets[i], "kind", p),
                                     Reader::str(assets[i], "path", p), Reader::str(assets[i], "algorithm", p)});
  }
  cdt.code_artifacts = Reader::strings(doc, "code_artifacts", "");

  validate(cdt);
  canonicalize(cdt);
  return cdt;
}

}  // namespace cdt::model
