#pragma once

#include <array>
#include <optional>
#include <string_view>
#include <utility>

#define CDT_ENUM_NAME(E, v) std::pair { E::v, std::string_view{#v} }

namespace cdt {

/// Specialise with `static constexpr std::array values{std::pair{E::x, "x"}, ...}`.
template <class E>
struct EnumNames;

template <class E>
constexpr std::string_view name_of(E value) {
  for (const auto& [v, name] : EnumNames<E>::values)
    if (v == value) return name;
  return "?";
}

template <class E>
constexpr std::optional<E> parse_enum(std::string_view name) {
  for (const auto& [v, n] : EnumNames<E>::values)
    if (n == name) return v;
  return std::nullopt;
}

}  // namespace cdt
