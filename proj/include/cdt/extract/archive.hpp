#pragma once

// Readers and writers for the supported container formats. Readers throw
// CorruptContainer; the extractor turns that into an opaque node plus a
// warning.

#include <zlib.h>

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

#include "cdt/core/bytes.hpp"
#include "cdt/core/text.hpp"
#include "cdt/extract/format.hpp"

namespace cdt::extract {

struct CorruptContainer : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ArchiveEntry {
  std::string path;
  bool is_dir = false;
  Bytes data;
};

struct Unpacked {
  std::vector<ArchiveEntry> entries;
  std::vector<std::string> warnings;
};

/// Upper bound on any single decompressed payload.
inline constexpr std::size_t kMaxInflated = std::size_t{1} << 31;

/// Normalises an archive member path. Leading slashes and "." components
/// are dropped; a ".." component makes the path unsafe (nullopt).
inline std::optional<std::string> sanitize_member_path(std::string_view raw) {
  std::vector<std::string_view> parts;
  for (auto part : text::split(raw, '/')) {
    if (part.empty() || part == ".") continue;
    if (part == "..") return std::nullopt;
    parts.push_back(part);
  }
  if (parts.empty()) return std::nullopt;
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += '/';
    out += parts[i];
  }
  return out;
}

namespace detail {

inline Bytes inflate_stream(std::span<const std::uint8_t> in, int window_bits, std::size_t* consumed = nullptr) {
  z_stream zs{};
  if (inflateInit2(&zs, window_bits) != Z_OK) throw CorruptContainer("inflateInit failed");
  zs.next_in = const_cast<Bytef*>(in.data());
  zs.avail_in = static_cast<uInt>(in.size());
  Bytes out;
  std::uint8_t buf[1 << 15];
  int rc;
  do {
    zs.next_out = buf;
    zs.avail_out = sizeof buf;
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      throw CorruptContainer(std::string("inflate: ") + (zs.msg ? zs.msg : "data error"));
    }
    out.insert(out.end(), buf, buf + (sizeof buf - zs.avail_out));
    if (out.size() > kMaxInflated) {
      inflateEnd(&zs);
      throw CorruptContainer("inflated payload exceeds size limit");
    }
    if (rc != Z_STREAM_END && zs.avail_in == 0 && zs.avail_out != 0) {
      inflateEnd(&zs);
      throw CorruptContainer("truncated compressed stream");
    }
  } while (rc != Z_STREAM_END);
  if (consumed) *consumed = in.size() - zs.avail_in;
  inflateEnd(&zs);
  return out;
}

inline Bytes deflate_stream(std::span<const std::uint8_t> in, int window_bits) {
  z_stream zs{};
  if (deflateInit2(&zs, Z_DEFAULT_COMPRESSION, Z_DEFLATED, window_bits, 8, Z_DEFAULT_STRATEGY) != Z_OK)
    throw std::runtime_error("deflateInit failed");
  zs.next_in = const_cast<Bytef*>(in.data());
  zs.avail_in = static_cast<uInt>(in.size());
  Bytes out(deflateBound(&zs, static_cast<uLong>(in.size())));
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  deflate(&zs, Z_FINISH);
  out.resize(zs.total_out);
  deflateEnd(&zs);
  return out;
}

inline std::uint32_t crc32_of(std::span<const std::uint8_t> data) {
  return static_cast<std::uint32_t>(crc32(0L, data.data(), static_cast<uInt>(data.size())));
}

inline std::uint64_t parse_octal(const std::uint8_t* field, std::size_t len) {
  std::uint64_t v = 0;
  std::size_t i = 0;
  while (i < len && (field[i] == ' ' || field[i] == 0)) ++i;
  for (; i < len && field[i] >= '0' && field[i] <= '7'; ++i) v = v * 8 + (field[i] - '0');
  for (; i < len; ++i)
    if (field[i] != ' ' && field[i] != 0) throw CorruptContainer("bad octal field in tar header");
  return v;
}

inline std::string cstr_field(const std::uint8_t* field, std::size_t len) {
  std::size_t n = 0;
  while (n < len && field[n] != 0) ++n;
  return std::string(reinterpret_cast<const char*>(field), n);
}

inline void push_entry(Unpacked& out, std::string_view raw, bool is_dir, Bytes data) {
  auto clean = sanitize_member_path(raw);
  if (!clean) {
    out.warnings.push_back("skipped unsafe member path '" + std::string(raw) + "'");
    return;
  }
  if (!raw.empty() && raw.front() == '/') out.warnings.push_back("stripped leading '/' from '" + std::string(raw) + "'");
  out.entries.push_back({*std::move(clean), is_dir, std::move(data)});
}

}  // namespace detail

/// POSIX ustar with GNU long names and pax path records.
inline Unpacked read_tar(std::span<const std::uint8_t> data) {
  Unpacked out;
  std::size_t pos = 0;
  std::string long_name;
  bool saw_end = false;
  while (pos + 512 <= data.size()) {
    const std::uint8_t* h = data.data() + pos;
    if (std::all_of(h, h + 512, [](std::uint8_t b) { return b == 0; })) {
      saw_end = true;
      break;
    }
    unsigned sum = 0;
    for (int i = 0; i < 512; ++i) sum += (i >= 148 && i < 156) ? ' ' : h[i];
    if (detail::parse_octal(h + 148, 8) != sum) throw CorruptContainer("tar header checksum mismatch");
    auto size = detail::parse_octal(h + 124, 12);
    char type = static_cast<char>(h[156]);
    std::string name = detail::cstr_field(h, 100);
    if (std::memcmp(h + 257, "ustar", 5) == 0) {
      auto prefix = detail::cstr_field(h + 345, 155);
      if (!prefix.empty()) name = prefix + "/" + name;
    }
    pos += 512;
    if (pos + size > data.size()) throw CorruptContainer("tar member '" + name + "' truncated");
    auto body = data.subspan(pos, static_cast<std::size_t>(size));
    pos += (size + 511) / 512 * 512;

    if (!long_name.empty() && type != 'L' && type != 'x') {
      name = long_name;
      long_name.clear();
    }
    switch (type) {
      case '0':
      case '\0':
      case '7':
        detail::push_entry(out, name, false, Bytes(body.begin(), body.end()));
        break;
      case '5':
        detail::push_entry(out, name, true, {});
        break;
      case 'L':
        long_name = detail::cstr_field(body.data(), body.size());
        break;
      case 'x': {
        // pax extended header: "<len> key=value\n" records; only path matters here.
        std::string_view recs = as_chars(body);
        for (auto line : text::lines(recs)) {
          auto sp = line.find(' ');
          if (sp == std::string_view::npos) continue;
          auto kv = line.substr(sp + 1);
          if (kv.starts_with("path=")) long_name = std::string(kv.substr(5));
        }
        break;
      }
      case 'g':
        break;
      case '1':
      case '2':
        out.warnings.push_back("ignored link member '" + name + "'");
        break;
      default:
        out.warnings.push_back("ignored special member '" + name + "' (type " + std::string(1, type) + ")");
    }
  }
  if (!saw_end && pos != data.size()) throw CorruptContainer("tar stream ends mid-header");
  return out;
}

inline Unpacked read_zip(std::span<const std::uint8_t> data) {
  constexpr std::uint32_t kEocd = 0x06054b50, kCentral = 0x02014b50, kLocal = 0x04034b50;
  if (data.size() < 22) throw CorruptContainer("zip too short for end-of-central-directory");
  std::size_t eocd = std::string::npos;
  std::size_t lowest = data.size() > 22 + 0xFFFF ? data.size() - 22 - 0xFFFF : 0;
  for (std::size_t i = data.size() - 22 + 1; i-- > lowest;) {
    if (ByteReader(data.subspan(i, 4)).le<std::uint32_t>() == kEocd) {
      eocd = i;
      break;
    }
  }
  if (eocd == std::string::npos) throw CorruptContainer("zip end-of-central-directory not found");
  ByteReader er(data.subspan(eocd + 10));
  auto count = *er.le<std::uint16_t>();
  er.le<std::uint32_t>();  // central directory size
  auto cd_off = *er.le<std::uint32_t>();
  if (cd_off > data.size()) throw CorruptContainer("zip central directory offset out of range");

  Unpacked out;
  ByteReader cd(data.subspan(cd_off));
  for (unsigned n = 0; n < count; ++n) {
    auto sig = cd.le<std::uint32_t>();
    if (!sig || *sig != kCentral) throw CorruptContainer("zip central header signature mismatch");
    auto fixed = cd.take(42);
    if (!fixed) throw CorruptContainer("zip central header truncated");
    ByteReader f(*fixed);
    f.le<std::uint16_t>();  // made by
    f.le<std::uint16_t>();  // needed
    auto flags = *f.le<std::uint16_t>();
    auto method = *f.le<std::uint16_t>();
    f.le<std::uint32_t>();  // dos time
    auto crc = *f.le<std::uint32_t>();
    auto csize = *f.le<std::uint32_t>();
    auto usize = *f.le<std::uint32_t>();
    auto name_len = *f.le<std::uint16_t>();
    auto extra_len = *f.le<std::uint16_t>();
    auto comment_len = *f.le<std::uint16_t>();
    f.le<std::uint16_t>();  // disk
    f.le<std::uint16_t>();  // internal attrs
    auto ext_attrs = *f.le<std::uint32_t>();
    auto local_off = *f.le<std::uint32_t>();
    auto name_bytes = cd.take(name_len);
    if (!name_bytes || !cd.take(extra_len) || !cd.take(comment_len))
      throw CorruptContainer("zip central header truncated");
    std::string name(as_chars(*name_bytes));
    if (csize == 0xFFFFFFFF || usize == 0xFFFFFFFF || local_off == 0xFFFFFFFF)
      throw CorruptContainer("zip64 members are not supported");
    if ((ext_attrs >> 16 & 0170000) == 0120000) {
      out.warnings.push_back("ignored link member '" + name + "'");
      continue;
    }
    if (flags & 1) {
      out.warnings.push_back("skipped encrypted member '" + name + "'");
      continue;
    }
    bool is_dir = !name.empty() && name.back() == '/';
    if (local_off > data.size()) throw CorruptContainer("zip local header offset out of range");
    ByteReader lr(data.subspan(local_off));
    if (lr.le<std::uint32_t>() != kLocal) throw CorruptContainer("zip local header signature mismatch");
    auto lfixed = lr.take(26);
    if (!lfixed) throw CorruptContainer("zip local header truncated");
    ByteReader lf(lfixed->subspan(22));
    auto lname = *lf.le<std::uint16_t>();
    auto lextra = *lf.le<std::uint16_t>();
    if (!lr.take(std::size_t{lname} + lextra)) throw CorruptContainer("zip local header truncated");
    auto payload = lr.take(csize);
    if (!payload) throw CorruptContainer("zip member '" + name + "' truncated");
    Bytes content;
    if (method == 0) {
      content.assign(payload->begin(), payload->end());
    } else if (method == 8) {
      content = detail::inflate_stream(*payload, -MAX_WBITS);
    } else {
      throw CorruptContainer("zip member '" + name + "' uses unsupported method " + std::to_string(method));
    }
    if (content.size() != usize || detail::crc32_of(content) != crc)
      throw CorruptContainer("zip member '" + name + "' fails size/crc check");
    detail::push_entry(out, name, is_dir, is_dir ? Bytes{} : std::move(content));
  }
  return out;
}

/// Name recorded in the gzip FNAME field, if any.
inline std::optional<std::string> gzip_stored_name(std::span<const std::uint8_t> data) {
  if (data.size() < 10 || data[0] != 0x1F || data[1] != 0x8B) return std::nullopt;
  auto flags = data[3];
  std::size_t pos = 10;
  if (flags & 0x04) {
    if (pos + 2 > data.size()) return std::nullopt;
    pos += 2 + (data[pos] | data[pos + 1] << 8);
  }
  if (!(flags & 0x08)) return std::nullopt;
  std::string name;
  while (pos < data.size() && data[pos] != 0) name.push_back(static_cast<char>(data[pos++]));
  if (pos >= data.size()) return std::nullopt;
  return name;
}

/// Decompresses all concatenated gzip members.
inline Bytes read_gzip(std::span<const std::uint8_t> data) {
  Bytes out;
  std::size_t pos = 0;
  do {
    std::size_t used = 0;
    auto part = detail::inflate_stream(data.subspan(pos), 16 + MAX_WBITS, &used);
    out.insert(out.end(), part.begin(), part.end());
    pos += used;
    if (out.size() > kMaxInflated) throw CorruptContainer("inflated payload exceeds size limit");
  } while (pos + 2 <= data.size() && data[pos] == 0x1F && data[pos + 1] == 0x8B);
  return out;
}

/// Member name to use for a gzip payload: FNAME when present, otherwise the
/// container name without its compression suffix.
inline std::string gzip_member_name(std::span<const std::uint8_t> data, std::string_view container_name) {
  if (auto stored = gzip_stored_name(data)) {
    auto base = std::string(text::basename(*stored));
    if (sanitize_member_path(base)) return base;
  }
  std::string name(text::basename(container_name));
  auto lower = text::to_lower(name);
  if (lower.ends_with(".tgz")) return name.substr(0, name.size() - 4) + ".tar";
  if (lower.ends_with(".gz") && name.size() > 3) return name.substr(0, name.size() - 3);
  return name + ".raw";
}

/// Flat image: "FLT1", u32 count, then per entry u16 path length, path,
/// u32 content length, content. All integers little-endian.
inline Unpacked read_flat(std::span<const std::uint8_t> data) {
  ByteReader r(data);
  auto magic = r.take(4);
  if (!magic || as_chars(*magic) != "FLT1") throw CorruptContainer("flat image magic mismatch");
  auto count = r.le<std::uint32_t>();
  if (!count) throw CorruptContainer("flat image header truncated");
  Unpacked out;
  for (std::uint32_t i = 0; i < *count; ++i) {
    auto plen = r.le<std::uint16_t>();
    if (!plen) throw CorruptContainer("flat image entry " + std::to_string(i) + " truncated");
    auto path = r.take(*plen);
    auto clen = path ? r.le<std::uint32_t>() : std::nullopt;
    auto body = clen ? r.take(*clen) : std::nullopt;
    if (!body) throw CorruptContainer("flat image entry " + std::to_string(i) + " truncated");
    detail::push_entry(out, as_chars(*path), false, Bytes(body->begin(), body->end()));
  }
  if (!r.at_end()) throw CorruptContainer("flat image has trailing bytes");
  return out;
}

// Writers. Used to build fixtures and by `cdt pack`-style tooling.

inline Bytes write_flat(const std::vector<ArchiveEntry>& entries) {
  ByteWriter w;
  std::uint32_t n = 0;
  for (const auto& e : entries) n += e.is_dir ? 0 : 1;
  w.raw(kFlatMagic).le<std::uint32_t>(n);
  for (const auto& e : entries) {
    if (e.is_dir) continue;
    w.le<std::uint16_t>(static_cast<std::uint16_t>(e.path.size())).raw(e.path);
    w.le<std::uint32_t>(static_cast<std::uint32_t>(e.data.size())).raw(e.data);
  }
  return w.take();
}

inline Bytes write_tar(const std::vector<ArchiveEntry>& entries) {
  Bytes out;
  auto header = [&](std::string_view name, char type, std::uint64_t size) {
    std::uint8_t h[512] = {};
    std::string_view prefix;
    if (name.size() > 100) {
      auto split = name.rfind('/', 155);
      if (split != std::string_view::npos && name.size() - split - 1 <= 100 && split > 0) {
        prefix = name.substr(0, split);
        name = name.substr(split + 1);
      }
    }
    std::memcpy(h, name.data(), std::min<std::size_t>(name.size(), 100));
    std::snprintf(reinterpret_cast<char*>(h + 100), 8, "%07o", type == '5' ? 0755u : 0644u);
    std::snprintf(reinterpret_cast<char*>(h + 108), 8, "%07o", 0u);
    std::snprintf(reinterpret_cast<char*>(h + 116), 8, "%07o", 0u);
    std::snprintf(reinterpret_cast<char*>(h + 124), 12, "%011llo", static_cast<unsigned long long>(size));
    std::snprintf(reinterpret_cast<char*>(h + 136), 12, "%011o", 0u);
    h[156] = static_cast<std::uint8_t>(type);
    std::memcpy(h + 257, "ustar\0" "00", 8);
    std::memcpy(h + 345, prefix.data(), std::min<std::size_t>(prefix.size(), 155));
    std::memset(h + 148, ' ', 8);
    unsigned sum = 0;
    for (auto b : h) sum += b;
    std::snprintf(reinterpret_cast<char*>(h + 148), 8, "%06o", sum);
    h[155] = ' ';
    out.insert(out.end(), h, h + 512);
  };
  auto body = [&](std::span<const std::uint8_t> data) {
    out.insert(out.end(), data.begin(), data.end());
    out.resize((out.size() + 511) / 512 * 512, 0);
  };
  for (const auto& e : entries) {
    std::string name = e.is_dir ? e.path + "/" : e.path;
    bool fits = name.size() <= 100 || (name.rfind('/', 155) != std::string::npos &&
                                       name.size() - name.rfind('/', 155) - 1 <= 100);
    if (!fits) {
      Bytes ln(name.begin(), name.end());
      ln.push_back(0);
      header("././@LongLink", 'L', ln.size());
      body(ln);
      header(std::string_view(name).substr(0, 100), e.is_dir ? '5' : '0', e.data.size());
    } else {
      header(name, e.is_dir ? '5' : '0', e.data.size());
    }
    if (!e.is_dir) body(e.data);
  }
  out.resize(out.size() + 1024, 0);
  return out;
}

inline Bytes write_zip(const std::vector<ArchiveEntry>& entries, bool compress = true) {
  ByteWriter w;
  ByteWriter central;
  std::uint16_t count = 0;
  for (const auto& e : entries) {
    std::string name = e.is_dir ? e.path + "/" : e.path;
    auto crc = detail::crc32_of(e.data);
    bool deflated = compress && !e.is_dir && !e.data.empty();
    Bytes payload = deflated ? detail::deflate_stream(e.data, -MAX_WBITS) : e.data;
    auto offset = static_cast<std::uint32_t>(w.bytes().size());
    std::uint16_t method = deflated ? 8 : 0;
    w.le<std::uint32_t>(0x04034b50).le<std::uint16_t>(20).le<std::uint16_t>(0).le<std::uint16_t>(method);
    w.le<std::uint32_t>(0).le<std::uint32_t>(crc).le<std::uint32_t>(static_cast<std::uint32_t>(payload.size()));
    w.le<std::uint32_t>(static_cast<std::uint32_t>(e.data.size()));
    w.le<std::uint16_t>(static_cast<std::uint16_t>(name.size())).le<std::uint16_t>(0).raw(name).raw(payload);
    central.le<std::uint32_t>(0x02014b50).le<std::uint16_t>(0x031E).le<std::uint16_t>(20).le<std::uint16_t>(0);
    central.le<std::uint16_t>(method).le<std::uint32_t>(0).le<std::uint32_t>(crc);
    central.le<std::uint32_t>(static_cast<std::uint32_t>(payload.size()));
    central.le<std::uint32_t>(static_cast<std::uint32_t>(e.data.size()));
    central.le<std::uint16_t>(static_cast<std::uint16_t>(name.size())).le<std::uint16_t>(0).le<std::uint16_t>(0);
    central.le<std::uint16_t>(0).le<std::uint16_t>(0);
    central.le<std::uint32_t>((e.is_dir ? 0040755u : 0100644u) << 16).le<std::uint32_t>(offset).raw(name);
    ++count;
  }
  auto cd_off = static_cast<std::uint32_t>(w.bytes().size());
  auto cd = central.take();
  w.raw(cd);
  w.le<std::uint32_t>(0x06054b50).le<std::uint16_t>(0).le<std::uint16_t>(0).le<std::uint16_t>(count);
  w.le<std::uint16_t>(count).le<std::uint32_t>(static_cast<std::uint32_t>(cd.size())).le<std::uint32_t>(cd_off);
  w.le<std::uint16_t>(0);
  return w.take();
}

inline Bytes write_gzip(std::span<const std::uint8_t> data, std::string_view stored_name = {}) {
  Bytes out{0x1F, 0x8B, 8, static_cast<std::uint8_t>(stored_name.empty() ? 0 : 0x08), 0, 0, 0, 0, 0, 0xFF};
  if (!stored_name.empty()) {
    out.insert(out.end(), stored_name.begin(), stored_name.end());
    out.push_back(0);
  }
  auto body = detail::deflate_stream(data, -MAX_WBITS);
  out.insert(out.end(), body.begin(), body.end());
  ByteWriter trailer;
  trailer.le<std::uint32_t>(detail::crc32_of(data)).le<std::uint32_t>(static_cast<std::uint32_t>(data.size()));
  auto t = trailer.take();
  out.insert(out.end(), t.begin(), t.end());
  return out;
}

}  // namespace cdt::extract
