#pragma once

// MVFW container: header, section table, symbol table.
//
//   "MVFW" | u8 format version (1) | u8 arch (1 MV32, 2 MV16) | u16 LE section count
//   per section: u8 kind (1 code, 2 data, 3 symtab) | u32 LE offset | u32 LE length
//   symtab entry: u16 LE name length | name | u32 LE code byte offset

#include <algorithm>
#include <filesystem>
#include <string>
#include <vector>

#include "cdt/binscan/isa.hpp"
#include "cdt/core/digest.hpp"

namespace cdt::binscan {

inline constexpr std::string_view kMagic = "MVFW";
inline constexpr std::uint8_t kFormatVersion = 1;
inline constexpr std::size_t kHeaderSize = 8;
inline constexpr std::size_t kSectionEntrySize = 9;

enum class SectionKind : std::uint8_t { code = 1, data = 2, symtab = 3 };

struct Section {
  SectionKind kind = SectionKind::code;
  std::uint32_t offset = 0;
  std::uint32_t length = 0;
  friend bool operator==(const Section&, const Section&) = default;
};

struct Symbol {
  std::string name;
  std::uint32_t offset = 0;  // code byte offset
  friend bool operator==(const Symbol&, const Symbol&) = default;
};

struct BinaryImage {
  CpuArch arch = CpuArch::unknown;
  std::vector<Section> sections;
  std::vector<Symbol> symbols;
  Bytes bytes;

  std::span<const std::uint8_t> slice(const Section& s) const {
    return std::span<const std::uint8_t>(bytes).subspan(s.offset, s.length);
  }
  const Section& code() const {
    for (const auto& s : sections)
      if (s.kind == SectionKind::code) return s;
    throw Error(ErrorKind::bad_code_sections, "sections", "no code section");
  }
};

inline CpuArch arch_from_code(std::uint8_t code) {
  switch (code) {
    case 1: return CpuArch::MV32;
    case 2: return CpuArch::MV16;
    default: throw Error(ErrorKind::unknown_arch, "header.arch", "arch code " + std::to_string(code));
  }
}

inline std::uint8_t arch_code(CpuArch arch) {
  switch (arch) {
    case CpuArch::MV32: return 1;
    case CpuArch::MV16: return 2;
    default: throw Error(ErrorKind::unknown_arch, "arch", "no arch code");
  }
}

inline bool has_magic(std::span<const std::uint8_t> bytes) {
  return bytes.size() >= kMagic.size() && as_chars(bytes.first(kMagic.size())) == kMagic;
}

/// Parses the header and section table.
inline BinaryImage load_binary(Bytes bytes) {
  if (!has_magic(bytes)) throw Error(ErrorKind::bad_magic, "header", "missing MVFW magic");
  ByteReader rd(bytes);
  rd.take(kMagic.size());
  auto version = rd.le<std::uint8_t>();
  auto arch = rd.le<std::uint8_t>();
  auto count = rd.le<std::uint16_t>();
  if (!count) throw Error(ErrorKind::truncated, "header", "file ends inside the header");
  if (*version != kFormatVersion)
    throw Error(ErrorKind::unsupported_format_version, "header.version", "version " + std::to_string(*version));
  BinaryImage img;
  img.arch = arch_from_code(*arch);
  for (std::uint16_t i = 0; i < *count; ++i) {
    auto where = "sections[" + std::to_string(i) + "]";
    auto kind = rd.le<std::uint8_t>();
    auto off = rd.le<std::uint32_t>();
    auto len = rd.le<std::uint32_t>();
    if (!len) throw Error(ErrorKind::truncated, where, "file ends inside the section table");
    if (*kind < 1 || *kind > 3) throw Error(ErrorKind::malformed_entry, where, "section kind " + std::to_string(*kind));
    img.sections.push_back({static_cast<SectionKind>(*kind), *off, *len});
  }
  img.bytes = std::move(bytes);
  return img;
}

inline BinaryImage load_binary(const std::filesystem::path& path) { return load_binary(read_file(path)); }

/// Bounds and overlap checks, exactly one code section, at most one symbol
/// table. Parses the symbol table into `image.symbols`.
inline BinaryImage& map_sections(BinaryImage& image) {
  std::size_t table_end = kHeaderSize + kSectionEntrySize * image.sections.size();
  std::vector<std::pair<std::uint64_t, std::uint64_t>> ranges;
  int code = 0, symtab = 0;
  for (std::size_t i = 0; i < image.sections.size(); ++i) {
    const auto& s = image.sections[i];
    auto where = "sections[" + std::to_string(i) + "]";
    std::uint64_t end = std::uint64_t{s.offset} + s.length;
    if (s.offset < table_end || end > image.bytes.size())
      throw Error(ErrorKind::section_out_of_bounds, where, "range [" + std::to_string(s.offset) + ", " +
                                                                std::to_string(end) + ") is outside the file body");
    if (s.length > 0) ranges.emplace_back(s.offset, end);
    code += s.kind == SectionKind::code;
    symtab += s.kind == SectionKind::symtab;
  }
  std::sort(ranges.begin(), ranges.end());
  for (std::size_t i = 1; i < ranges.size(); ++i)
    if (ranges[i].first < ranges[i - 1].second)
      throw Error(ErrorKind::overlapping_sections, "sections",
                  "byte " + std::to_string(ranges[i].first) + " belongs to two sections");
  if (code != 1) throw Error(ErrorKind::bad_code_sections, "sections", std::to_string(code) + " code sections");
  if (symtab > 1) throw Error(ErrorKind::bad_code_sections, "sections", "more than one symbol table");

  image.symbols.clear();
  auto ws = word_size(image.arch);
  auto code_len = image.code().length;
  for (const auto& s : image.sections) {
    if (s.kind != SectionKind::symtab) continue;
    ByteReader rd(image.slice(s));
    while (!rd.at_end()) {
      auto where = "symtab[" + std::to_string(image.symbols.size()) + "]";
      auto n = rd.le<std::uint16_t>();
      auto name = n ? rd.take(*n) : std::nullopt;
      auto off = name ? rd.le<std::uint32_t>() : std::nullopt;
      if (!off) throw Error(ErrorKind::truncated, where, "symbol table ends inside an entry");
      if (*off >= code_len || *off % ws != 0)
        throw Error(ErrorKind::bad_call_target, where, "offset " + std::to_string(*off) + " is not an instruction in the code section");
      image.symbols.push_back({std::string(as_chars(*name)), *off});
    }
  }
  return image;
}

/// Decodes the code section of a mapped image.
inline Program disassemble(const BinaryImage& image) { return decode(image.slice(image.code()), image.arch); }

/// Symbol ordinal: byte offset divided by the word size.
inline int symbol_ordinal(const BinaryImage& image, const Symbol& s) {
  return static_cast<int>(s.offset / word_size(image.arch));
}

/// Writes an MVFW file with code, optional data, and a symbol table (when
/// symbols are given). Symbol offsets are instruction ordinals here and are
/// scaled to byte offsets.
inline Bytes write_image(CpuArch arch, const Program& program, std::span<const std::uint8_t> data = {},
                         const std::vector<std::pair<std::string, int>>& symbols = {}) {
  auto code = encode_program(program, arch);
  ByteWriter sym;
  for (const auto& [name, ordinal] : symbols) {
    sym.le<std::uint16_t>(static_cast<std::uint16_t>(name.size())).raw(name);
    sym.le<std::uint32_t>(static_cast<std::uint32_t>(ordinal * word_size(arch)));
  }
  std::vector<std::pair<SectionKind, const Bytes*>> parts{{SectionKind::code, &code}};
  Bytes data_copy(data.begin(), data.end());
  if (!data.empty()) parts.push_back({SectionKind::data, &data_copy});
  if (!symbols.empty()) parts.push_back({SectionKind::symtab, &sym.bytes()});
  ByteWriter out;
  out.raw(kMagic).le<std::uint8_t>(kFormatVersion).le<std::uint8_t>(arch_code(arch));
  out.le<std::uint16_t>(static_cast<std::uint16_t>(parts.size()));
  auto offset = static_cast<std::uint32_t>(kHeaderSize + kSectionEntrySize * parts.size());
  for (const auto& [kind, bytes] : parts) {
    out.le<std::uint8_t>(static_cast<std::uint8_t>(kind)).le<std::uint32_t>(offset);
    out.le<std::uint32_t>(static_cast<std::uint32_t>(bytes->size()));
    offset += static_cast<std::uint32_t>(bytes->size());
  }
  for (const auto& [kind, bytes] : parts) out.raw(*bytes);
  return out.take();
}

}  // namespace cdt::binscan
