#pragma once

#include <cctype>
#include <compare>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cdt/core/error.hpp"

namespace cdt {

/// Placeholder used when a component is detected but its version is not.
inline constexpr std::string_view kUnknownVersion = "unknown";

/// Dotted version. Each segment is a maximal run of digits followed by an
/// optional alphanumeric suffix ("1", "0rc2", "8a"). Missing trailing
/// segments compare as "0"; a bare number sorts before the same number with
/// any suffix; suffixes compare bytewise.
class Version {
 public:
  struct Segment {
    std::string digits;  // leading zeros stripped; empty means 0
    std::string suffix;
    friend bool operator==(const Segment&, const Segment&) = default;
  };

  static std::optional<Version> parse(std::string_view text) {
    if (text.empty()) return std::nullopt;
    Version v;
    v.text_ = std::string(text);
    std::size_t pos = 0;
    while (true) {
      auto dot = text.find('.', pos);
      auto seg = text.substr(pos, dot == std::string_view::npos ? std::string_view::npos : dot - pos);
      if (seg.empty()) return std::nullopt;
      std::size_t i = 0;
      while (i < seg.size() && std::isdigit(static_cast<unsigned char>(seg[i]))) ++i;
      for (std::size_t j = i; j < seg.size(); ++j)
        if (!std::isalnum(static_cast<unsigned char>(seg[j]))) return std::nullopt;
      Segment s;
      auto digits = seg.substr(0, i);
      while (!digits.empty() && digits.front() == '0') digits.remove_prefix(1);
      s.digits = std::string(digits);
      s.suffix = std::string(seg.substr(i));
      v.segments_.push_back(std::move(s));
      if (dot == std::string_view::npos) break;
      pos = dot + 1;
    }
    return v;
  }

  static Version from(std::string_view text) {
    auto v = parse(text);
    if (!v) throw Error(ErrorKind::unparseable_version, std::string(text), "not a dotted version");
    return *std::move(v);
  }

  const std::string& str() const noexcept { return text_; }
  const std::vector<Segment>& segments() const noexcept { return segments_; }

  friend std::weak_ordering operator<=>(const Version& a, const Version& b) {
    static const Segment zero{};
    auto n = std::max(a.segments_.size(), b.segments_.size());
    for (std::size_t i = 0; i < n; ++i) {
      const auto& x = i < a.segments_.size() ? a.segments_[i] : zero;
      const auto& y = i < b.segments_.size() ? b.segments_[i] : zero;
      if (auto c = compare_digits(x.digits, y.digits); c != 0) return c;
      if (x.suffix.empty() != y.suffix.empty())
        return x.suffix.empty() ? std::weak_ordering::less : std::weak_ordering::greater;
      if (auto c = x.suffix.compare(y.suffix); c != 0)
        return c < 0 ? std::weak_ordering::less : std::weak_ordering::greater;
    }
    return std::weak_ordering::equivalent;
  }
  friend bool operator==(const Version& a, const Version& b) { return (a <=> b) == 0; }

 private:
  static std::weak_ordering compare_digits(const std::string& a, const std::string& b) {
    if (a.size() != b.size())
      return a.size() < b.size() ? std::weak_ordering::less : std::weak_ordering::greater;
    auto c = a.compare(b);
    if (c == 0) return std::weak_ordering::equivalent;
    return c < 0 ? std::weak_ordering::less : std::weak_ordering::greater;
  }

  std::string text_;
  std::vector<Segment> segments_;
};

inline bool is_valid_version(std::string_view text) { return Version::parse(text).has_value(); }

/// Throws ErrorKind::unparseable_version when either side fails the grammar.
inline std::weak_ordering compare_versions(std::string_view a, std::string_view b) {
  return Version::from(a) <=> Version::from(b);
}

}  // namespace cdt
