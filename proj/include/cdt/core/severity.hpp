#pragma once

#include "cdt/core/enum_names.hpp"

namespace cdt {

enum class Severity { low, medium, high, critical };

template <>
struct EnumNames<Severity> {
  static constexpr std::array values{std::pair{Severity::low, std::string_view{"low"}},
                                     std::pair{Severity::medium, std::string_view{"medium"}},
                                     std::pair{Severity::high, std::string_view{"high"}},
                                     std::pair{Severity::critical, std::string_view{"critical"}}};
};

/// CVSS v3 qualitative bands; "none" (0.0) folds into low.
constexpr Severity severity_from_cvss(double score) {
  if (score >= 9.0) return Severity::critical;
  if (score >= 7.0) return Severity::high;
  if (score >= 4.0) return Severity::medium;
  return Severity::low;
}

}  // namespace cdt
