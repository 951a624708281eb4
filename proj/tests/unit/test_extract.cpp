#include <gtest/gtest.h>

#include <random>
#include <set>

#include "cdt/extract/extractor.hpp"
#include "support/packing.hpp"
#include "support/temp_dir.hpp"

namespace {

using namespace cdt;
using namespace cdt::extract;
using cdt::testing::TempDir;
using cdt::testing::Tree;

ContainerFormat detect(std::string_view bytes, std::string_view name) {
  return detect_format(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()), name);
}

const FileNode* find_node(const std::vector<FileNode>& nodes, std::string_view path) {
  for (const auto& n : nodes)
    if (n.path == path) return &n;
  return nullptr;
}

TEST(DetectFormat, MagicBytes) {
  EXPECT_EQ(detect(std::string("\x1F\x8B\x08\0\0\0\0\0", 8), "x.bin"), ContainerFormat::gzip_like);
  EXPECT_EQ(detect(std::string("PK\x03\x04\0\0\0\0", 8), "x"), ContainerFormat::zip_like);
  EXPECT_EQ(detect("FLT1\0\0\0\0", "dump"), ContainerFormat::flat_image);
  EXPECT_EQ(detect("\x13\x37\xAA\x01\x99\x42\x00\x07", "blob.bin"), ContainerFormat::opaque);
  auto tar = write_tar({{"a.txt", false, to_bytes("x")}});
  EXPECT_EQ(detect_format(tar, "noext"), ContainerFormat::tar_like);
}

TEST(DetectFormat, MagicBeatsExtension) {
  EXPECT_EQ(detect(std::string("PK\x03\x04\0\0\0\0", 8), "image.tar"), ContainerFormat::zip_like);
  EXPECT_EQ(detect("plain text here", "archive.zip"), ContainerFormat::zip_like);
  EXPECT_EQ(detect("plain text here", "notes.txt"), ContainerFormat::opaque);
}

TEST(Extract, ZipContainingTarContainingFile) {
  TempDir tmp;
  auto tar = write_tar({{"docs/a.txt", false, to_bytes("hello nested world")}});
  auto zip = write_zip({{"inner.tar", false, tar}});
  write_file(tmp / "fw.zip", std::span<const std::uint8_t>(zip));
  auto result = extract_recursive(tmp / "fw.zip", tmp / "out");
  auto* node = find_node(result.nodes, "fw.zip.extracted/inner.tar.extracted/docs/a.txt");
  ASSERT_NE(node, nullptr);
  EXPECT_EQ(node->content_digest, sha256_hex(std::string_view("hello nested world")));
  EXPECT_TRUE(result.warnings.empty());
  EXPECT_TRUE(std::is_sorted(result.nodes.begin(), result.nodes.end(),
                             [](const FileNode& a, const FileNode& b) { return a.path < b.path; }));
}

TEST(Extract, PlainDirectoryIsIdentity) {
  TempDir tmp;
  tmp.write("img/etc/passwd", "root:x:0:0\n");
  tmp.write("img/usr/bin/tool", "binary");
  auto result = extract_recursive(tmp / "img", tmp / "out");
  auto listing = list_tree(tmp / "img");
  EXPECT_EQ(result.nodes, listing);
}

TEST(Extract, DepthExceededNamesInnermostArchive) {
  TempDir tmp;
  Bytes blob = write_tar({{"leaf.txt", false, to_bytes("bottom")}});
  std::string name = "l9.tar";
  for (int level = 8; level >= 1; --level) {
    blob = write_tar({{name, false, blob}});
    name = "l" + std::to_string(level) + ".tar";
  }
  write_file(tmp / name, std::span<const std::uint8_t>(blob));
  try {
    extract_recursive(tmp / name, tmp / "out", 8);
    FAIL() << "expected depth-exceeded";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::depth_exceeded);
    EXPECT_TRUE(std::string_view(e.where()).ends_with("/l9.tar")) << e.where();
  }
  TempDir ok;
  write_file(ok / name, std::span<const std::uint8_t>(blob));
  auto result = extract_recursive(ok / name, ok / "out", 9);
  EXPECT_EQ(std::count_if(result.nodes.begin(), result.nodes.end(),
                          [](const FileNode& n) { return n.path.ends_with("leaf.txt"); }),
            1);
}

TEST(Extract, CorruptInnerContainerDegradesToOpaque) {
  TempDir tmp;
  auto good = write_tar({{"ok.txt", false, to_bytes("fine")}});
  Bytes broken = write_zip({{"x.txt", false, to_bytes("soon broken")}});
  broken.resize(broken.size() / 2);
  broken[0] = 'P';
  auto outer = write_tar({{"good.tar", false, good}, {"broken.zip", false, broken}});
  write_file(tmp / "fw.tar", std::span<const std::uint8_t>(outer));
  auto result = extract_recursive(tmp / "fw.tar", tmp / "out");
  EXPECT_NE(find_node(result.nodes, "fw.tar.extracted/good.tar.extracted/ok.txt"), nullptr);
  EXPECT_NE(find_node(result.nodes, "fw.tar.extracted/broken.zip"), nullptr);
  EXPECT_EQ(find_node(result.nodes, "fw.tar.extracted/broken.zip.extracted"), nullptr);
  ASSERT_EQ(result.warnings.size(), 1u);
  EXPECT_NE(result.warnings[0].find("corrupt zip_like"), std::string::npos);
}

TEST(Extract, UnsafeMembersAreSkipped) {
  TempDir tmp;
  auto tar = write_tar({{"../escape.txt", false, to_bytes("evil")}, {"safe/./ok.txt", false, to_bytes("ok")}});
  write_file(tmp / "fw.tar", std::span<const std::uint8_t>(tar));
  auto result = extract_recursive(tmp / "fw.tar", tmp / "out");
  EXPECT_FALSE(std::filesystem::exists(tmp / "escape.txt"));
  EXPECT_FALSE(std::filesystem::exists(tmp / "out" / "escape.txt"));
  EXPECT_NE(find_node(result.nodes, "fw.tar.extracted/safe/ok.txt"), nullptr);
  EXPECT_EQ(result.warnings.size(), 1u);
}

TEST(Extract, SymlinksInDirectoryImageIgnored) {
  TempDir tmp;
  tmp.write("img/real.txt", "data");
  std::filesystem::create_symlink("/etc/passwd", tmp / "img/link");
  auto result = extract_recursive(tmp / "img", tmp / "out");
  EXPECT_EQ(find_node(result.nodes, "link"), nullptr);
  ASSERT_EQ(result.warnings.size(), 1u);
  EXPECT_NE(result.warnings[0].find("symbolic link"), std::string::npos);
}

TEST(Extract, GzipMemberNaming) {
  TempDir tmp;
  auto inner = write_tar({{"etc/os-release", false, to_bytes("ID=linux\n")}});
  write_file(tmp / "img/rootfs.tgz", std::span<const std::uint8_t>(write_gzip(inner)));
  write_file(tmp / "img/named.gz", std::span<const std::uint8_t>(write_gzip(to_bytes("abc"), "original.txt")));
  auto result = extract_recursive(tmp / "img", tmp / "out");
  EXPECT_NE(find_node(result.nodes, "rootfs.tgz.extracted/rootfs.tar.extracted/etc/os-release"), nullptr);
  EXPECT_NE(find_node(result.nodes, "named.gz.extracted/original.txt"), nullptr);
}

TEST(Extract, FlatImageLayoutIsBitExact) {
  auto blob = write_flat({{"a", false, to_bytes("xy")}});
  Bytes expected{'F', 'L', 'T', '1', 1, 0, 0, 0, 1, 0, 'a', 2, 0, 0, 0, 'x', 'y'};
  EXPECT_EQ(blob, expected);
  auto back = read_flat(blob);
  ASSERT_EQ(back.entries.size(), 1u);
  EXPECT_EQ(back.entries[0].path, "a");
  expected.push_back(0);
  EXPECT_THROW(read_flat(expected), CorruptContainer);
}

TEST(Extract, IdempotentAndDeterministic) {
  TempDir tmp;
  std::mt19937 rng(1);
  auto tree = cdt::testing::random_tree(rng);
  auto [blob, name] = cdt::testing::pack_nested(tree, {ContainerFormat::gzip_like, ContainerFormat::zip_like,
                                                       ContainerFormat::tar_like});
  write_file(tmp / name, std::span<const std::uint8_t>(blob));
  auto first = extract_recursive(tmp / name, tmp / "a");
  auto second = extract_recursive(tmp / name, tmp / "b");
  EXPECT_EQ(first.nodes, second.nodes);
  auto again = extract_recursive(tmp / "a", tmp / "c");
  EXPECT_EQ(first.nodes, again.nodes);
  auto in_place = extract_recursive(tmp / "a", tmp / "a");
  EXPECT_EQ(first.nodes, in_place.nodes);
  EXPECT_EQ(tree_digest(first.nodes), tree_digest(again.nodes));
}

TEST(Extract, NonEmptyDestinationRejected) {
  TempDir tmp;
  tmp.write("img/a", "1");
  tmp.write("out/existing", "2");
  EXPECT_THROW(extract_recursive(tmp / "img", tmp / "out"), Error);
}

TEST(Validate, ManifestExactMatchPasses) {
  TempDir tmp;
  auto tar = write_tar({{"etc/passwd", false, to_bytes("root:x:0:0\n")}, {"bin/sh", false, to_bytes("sh")}});
  write_file(tmp / "fw.tar", std::span<const std::uint8_t>(tar));
  auto result = extract_recursive(tmp / "fw.tar", tmp / "out");
  auto manifest = parse_manifest(sha256_hex(std::string_view("root:x:0:0\n")) + " /etc/passwd\n" +
                                 sha256_hex(std::string_view("sh")) + " /bin/sh\n");
  auto report = validate_extraction(result.nodes, manifest);
  EXPECT_TRUE(report.ok());
  EXPECT_EQ(report.checks.size(), 3u);
}

TEST(Validate, MissingManifestPathNamed) {
  TempDir tmp;
  auto tar = write_tar({{"bin/sh", false, to_bytes("sh")}});
  write_file(tmp / "fw.tar", std::span<const std::uint8_t>(tar));
  auto result = extract_recursive(tmp / "fw.tar", tmp / "out");
  auto report = validate_extraction(result.nodes, parse_manifest(std::string(64, 'a') + " /etc/passwd\n"));
  ASSERT_NE(report.find("manifest"), nullptr);
  EXPECT_FALSE(report.find("manifest")->passed);
  EXPECT_NE(report.find("manifest")->detail.find("/etc/passwd"), std::string::npos);
  EXPECT_TRUE(report.find("regular_files")->passed);
}

TEST(Validate, EmptyDirectoryArchiveFailsRegularFileCheck) {
  TempDir tmp;
  auto tar = write_tar({{"etc", true, {}}, {"usr/lib", true, {}}});
  write_file(tmp / "fw.tar", std::span<const std::uint8_t>(tar));
  auto result = extract_recursive(tmp / "fw.tar", tmp / "out");
  ASSERT_FALSE(result.nodes.empty());
  auto report = validate_extraction(result.nodes, std::nullopt);
  EXPECT_FALSE(report.find("regular_files")->passed);
  EXPECT_TRUE(report.find("no_path_escape")->passed);
  EXPECT_EQ(report.find("manifest"), nullptr);
}

TEST(Validate, EscapingPathFlagged) {
  std::vector<FileNode> nodes{{"a.txt", NodeKind::regular, "d", 1}, {"../b.txt", NodeKind::regular, "d", 1}};
  auto report = validate_extraction(nodes, std::nullopt);
  EXPECT_FALSE(report.find("no_path_escape")->passed);
}

}  // namespace
