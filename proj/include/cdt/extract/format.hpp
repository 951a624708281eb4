#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <string_view>

#include "cdt/core/enum_names.hpp"
#include "cdt/core/text.hpp"

namespace cdt::extract {

enum class ContainerFormat { directory, tar_like, zip_like, gzip_like, flat_image, opaque };

/// Bytes detect_format needs to see to recognise every supported magic
/// (the ustar marker sits at offset 257).
inline constexpr std::size_t kSniffBytes = 512;

inline constexpr std::string_view kFlatMagic = "FLT1";

/// Pure function of the leading bytes and the file name. Magic numbers win;
/// the extension is consulted only when no magic matches. `directory` is
/// never returned here, directories are recognised by the filesystem.
inline ContainerFormat detect_format(std::span<const std::uint8_t> lead, std::string_view filename) {
  auto starts = [&](std::string_view magic) {
    return lead.size() >= magic.size() && std::memcmp(lead.data(), magic.data(), magic.size()) == 0;
  };
  if (lead.size() >= 2 && lead[0] == 0x1F && lead[1] == 0x8B) return ContainerFormat::gzip_like;
  if (starts(std::string_view("PK\x03\x04", 4)) || starts(std::string_view("PK\x05\x06", 4)))
    return ContainerFormat::zip_like;
  if (starts(kFlatMagic)) return ContainerFormat::flat_image;
  if (lead.size() >= 262 && std::memcmp(lead.data() + 257, "ustar", 5) == 0) return ContainerFormat::tar_like;

  auto name = text::to_lower(text::basename(filename));
  auto ends = [&](std::string_view ext) { return name.size() > ext.size() && name.ends_with(ext); };
  if (ends(".tar")) return ContainerFormat::tar_like;
  if (ends(".zip")) return ContainerFormat::zip_like;
  if (ends(".gz") || ends(".tgz")) return ContainerFormat::gzip_like;
  if (ends(".flt")) return ContainerFormat::flat_image;
  return ContainerFormat::opaque;
}

}  // namespace cdt::extract

namespace cdt {
template <>
struct EnumNames<extract::ContainerFormat> {
  static constexpr std::array values{std::pair{extract::ContainerFormat::directory, std::string_view{"directory"}},
                                     std::pair{extract::ContainerFormat::tar_like, std::string_view{"tar_like"}},
                                     std::pair{extract::ContainerFormat::zip_like, std::string_view{"zip_like"}},
                                     std::pair{extract::ContainerFormat::gzip_like, std::string_view{"gzip_like"}},
                                     std::pair{extract::ContainerFormat::flat_image, std::string_view{"flat_image"}},
                                     std::pair{extract::ContainerFormat::opaque, std::string_view{"opaque"}}};
};
}  // namespace cdt
