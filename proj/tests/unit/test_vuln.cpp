#include <gtest/gtest.h>

#include <random>

#include "cdt/vuln/matcher.hpp"
#include "support/match_oracle.hpp"

namespace {

using namespace cdt;
using namespace cdt::vuln;
using cdt::testing::oracle_in_range;
using cdt::testing::random_version;
using model::SbomEntry;

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected an error";
  return ErrorKind::io;
}

const char* kFeed = R"([
 {"cve_id":"CVE-2020-11656","description":"In SQLite through 3.31.1, the ALTER TABLE implementation has a use-after-free.",
  "cwe_ids":["CWE-416"],"cvss":9.8,
  "affected":[{"vendor":"sqlite","product":"sqlite","version_end_excl":"3.32.0"}]},
 {"cve_id":"CVE-2020-13631","description":"SQLite before 3.32.0 allows a virtual table to be renamed.",
  "cwe_ids":["CWE-20"],"cvss":5.5,"severity":"medium",
  "affected":[{"vendor":"sqlite","product":"sqlite","version_start_incl":"3.0","version_end_excl":"3.32.0"}],
  "fixed_in":"3.32.0"}
])";

SbomEntry entry(std::string vendor, std::string product, std::string version) {
  return {vendor, product, version, model::Origin::open_source, {{model::IndicatorKind::path, "x"}}, {}};
}

TEST(CveDb, LoadsFeed) {
  auto db = parse_cve_db(kFeed);
  ASSERT_EQ(db.size(), 2u);
  EXPECT_EQ(db[0].cve_id, "CVE-2020-11656");
  EXPECT_EQ(db[0].cwe_ids, std::vector<std::string>{"CWE-416"});
  EXPECT_EQ(db[0].severity, Severity::critical);
  EXPECT_EQ(db[1].severity, Severity::medium);
  EXPECT_EQ(db[1].fixed_in, "3.32.0");
  EXPECT_TRUE(db[0].context.empty());
  EXPECT_EQ(parse_cve_db(format_cve_db(db)), db);
  EXPECT_TRUE(parse_cve_db("[]").empty());
}

TEST(CveDb, SeverityBands) {
  EXPECT_EQ(severity_from_cvss(9.0), Severity::critical);
  EXPECT_EQ(severity_from_cvss(8.9), Severity::high);
  EXPECT_EQ(severity_from_cvss(7.0), Severity::high);
  EXPECT_EQ(severity_from_cvss(6.9), Severity::medium);
  EXPECT_EQ(severity_from_cvss(4.0), Severity::medium);
  EXPECT_EQ(severity_from_cvss(3.9), Severity::low);
  EXPECT_EQ(severity_from_cvss(0.0), Severity::low);
}

TEST(CveDb, RejectsBadRecords) {
  auto rec = [](const std::string& body) { return "[{\"cve_id\":\"CVE-2021-0001\",\"cvss\":5.0," + body + "}]"; };
  try {
    parse_cve_db(rec(R"("affected":[{"vendor":"a","product":"b","version_exact":"1.0","version_end_excl":"2.0"}])"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::malformed_entry);
    EXPECT_EQ(e.where(), "CVE-2021-0001");
  }
  EXPECT_EQ(kind_of([&] { parse_cve_db(rec(R"("affected":[{"vendor":"a","product":"b","version_start_incl":"2.0","version_end_excl":"1.0"}])")); }),
            ErrorKind::malformed_entry);
  EXPECT_EQ(kind_of([&] { parse_cve_db(rec(R"("affected":[]")")); }), ErrorKind::malformed_entry);
  EXPECT_EQ(kind_of([&] { parse_cve_db(rec(R"("severity":"low","affected":[{"vendor":"a","product":"b"}])")); }),
            ErrorKind::malformed_entry);
  EXPECT_EQ(kind_of([&] { parse_cve_db(rec(R"("cwe_ids":["416"],"affected":[{"vendor":"a","product":"b"}])")); }),
            ErrorKind::malformed_entry);
  EXPECT_EQ(kind_of([&] { parse_cve_db(R"([{"cve_id":"CVE-21-1","cvss":1,"affected":[{"vendor":"a","product":"b"}]}])"); }),
            ErrorKind::malformed_entry);
  EXPECT_EQ(kind_of([&] { parse_cve_db(R"([{"cve_id":"CVE-2021-0001","cvss":11,"affected":[{"vendor":"a","product":"b"}]}])"); }),
            ErrorKind::malformed_entry);
  auto one = rec(R"("affected":[{"vendor":"a","product":"b"}])");
  auto two = one.substr(0, one.size() - 1) + "," + one.substr(1);
  EXPECT_EQ(kind_of([&] { parse_cve_db(two); }), ErrorKind::duplicate);
  try {
    parse_cve_db("[{\"cve_id\": ");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::malformed_entry);
    EXPECT_TRUE(e.where().starts_with("offset"));
  }
}

TEST(Match, SqliteScenario) {
  auto db = parse_cve_db(kFeed);
  auto found = match_cves({entry("sqlite", "sqlite", "3.31.1")}, db);
  ASSERT_EQ(found.size(), 2u);
  EXPECT_EQ(found[0].cve_id, "CVE-2020-11656");
  EXPECT_EQ(found[0].cwe_ids, std::vector<std::string>{"CWE-416"});
  EXPECT_EQ(found[0].applicability, Applicability::applicable);
  EXPECT_EQ(found[1].cve_id, "CVE-2020-13631");
  EXPECT_TRUE(match_cves({entry("sqlite", "sqlite", "3.32.0")}, db).empty());
  EXPECT_TRUE(match_cves({}, db).empty());
  EXPECT_EQ(match_cves({entry("SQLite", "SQLITE", "3.31.1")}, db).size(), 2u);
  EXPECT_TRUE(match_cves({entry("sqlite", "sqlite", "unknown")}, db).empty());
}

TEST(Match, Aliases) {
  auto db = parse_cve_db(kFeed);
  auto aliases = parse_alias_table("# product aliases\nsqlite3 -> sqlite sqlite\nacme:libsql -> sqlite sqlite\n");
  EXPECT_EQ(aliases.size(), 2u);
  EXPECT_EQ(match_cves({entry("debian", "sqlite3", "3.31.1")}, db, aliases).size(), 2u);
  EXPECT_EQ(match_cves({entry("acme", "libsql", "3.31.1")}, db, aliases).size(), 2u);
  EXPECT_TRUE(match_cves({entry("other", "libsql", "3.31.1")}, db, aliases).empty());
  EXPECT_EQ(kind_of([] { parse_alias_table("sqlite3 sqlite"); }), ErrorKind::malformed_entry);
}

TEST(Match, AgreesWithBruteForce) {
  std::mt19937 rng(99);
  std::size_t pairs = 0;
  for (int round = 0; round < 40; ++round) {
    auto sbom = cdt::testing::random_sbom(rng, 50, 3, 5);
    // Round-trip through the feed format so the parser is exercised too.
    auto db = parse_cve_db(format_cve_db(cdt::testing::random_feed(rng, 200, 3, 5)));
    ASSERT_EQ(cdt::testing::matched(sbom, db), cdt::testing::oracle_matches(sbom, db)) << "round " << round;
    pairs += sbom.size() * db.size();
  }
  EXPECT_GE(pairs, 10000u);
}

model::CyberDigitalTwin linux_twin() {
  model::CyberDigitalTwin cdt;
  cdt.firmware_id = "fw";
  cdt.os_info = {model::OsFamily::linux_like, "Acme Linux", "4.2"};
  cdt.hw_bom = {model::CpuArch::MV32, 32, {}};
  cdt.kernel_config = {{"kernel.randomize_va_space", "2"}};
  return cdt;
}

CveRecord with_context(std::string id, std::string description, std::string context_json) {
  auto feed = R"([{"cve_id":")" + id + R"(","description":")" + description +
              R"(","cvss":7.5,"affected":[{"vendor":"a","product":"b"}],"context":)" + context_json + "}]";
  return parse_cve_db(feed)[0];
}

TEST(Filter, ContextRules) {
  std::vector<CveRecord> db{
      with_context("CVE-2021-0001", "kernel bug", R"({"os_families":["rtos_like"]})"),
      with_context("CVE-2021-0002", "plain", "{}"),
      with_context("CVE-2021-0003", "Only affects Windows hosts", R"({"description_keywords_exclude":["windows"]})"),
      with_context("CVE-2021-0004", "arch", R"({"cpu_archs":["MV16"]})"),
      with_context("CVE-2021-0005", "flag", R"({"required_kernel_flags":["kernel.randomize_va_space=0"]})"),
      with_context("CVE-2021-0006", "flag ok", R"({"required_kernel_flags":["kernel.randomize_va_space=2"],"os_families":["linux_like"]})"),
  };
  auto matched = match_cves({entry("a", "b", "1.0")}, db);
  ASSERT_EQ(matched.size(), 6u);
  auto filtered = filter_by_context(matched, linux_twin(), db);
  ASSERT_EQ(filtered.size(), matched.size());
  std::map<std::string, std::string> reasons;
  for (std::size_t i = 0; i < filtered.size(); ++i) {
    EXPECT_EQ(filtered[i].cve_id, matched[i].cve_id);
    EXPECT_EQ(filtered[i].applicability == Applicability::filtered_out, !filtered[i].filter_reason.empty());
    if (filtered[i].applicability == Applicability::filtered_out) reasons[filtered[i].cve_id] = filtered[i].filter_reason;
  }
  ASSERT_EQ(reasons.size(), 4u);
  EXPECT_TRUE(reasons["CVE-2021-0001"].starts_with("os family"));
  EXPECT_TRUE(reasons["CVE-2021-0003"].starts_with("description keyword"));
  EXPECT_TRUE(reasons["CVE-2021-0004"].starts_with("cpu arch"));
  EXPECT_TRUE(reasons["CVE-2021-0005"].starts_with("kernel flag"));
}

TEST(Filter, OverridesOnlyNarrow) {
  std::vector<CveRecord> db{with_context("CVE-2021-0002", "plain", "{}"),
                            with_context("CVE-2021-0007", "other", "{}")};
  auto matched = match_cves({entry("a", "b", "1.0")}, db);
  auto overrides = parse_context_overrides(R"({"CVE-2021-0007":{"cpu_archs":["MV16"]}})");
  auto filtered = filter_by_context(matched, linux_twin(), db, overrides);
  EXPECT_EQ(filtered[0].applicability, Applicability::applicable);
  EXPECT_EQ(filtered[1].applicability, Applicability::filtered_out);
  auto all = parse_context_overrides(R"({"*":{"os_families":["rtos_like"]}})");
  for (const auto& f : filter_by_context(matched, linux_twin(), db, all))
    EXPECT_EQ(f.applicability, Applicability::filtered_out);
  EXPECT_EQ(kind_of([] { parse_context_overrides(R"({"bogus":{}})"); }), ErrorKind::malformed_entry);
}

TEST(Filter, NeverAddsOrRemoves) {
  std::mt19937 rng(3);
  const char* contexts[] = {"{}", R"({"os_families":["rtos_like"]})", R"({"cpu_archs":["MV32"]})",
                            R"({"description_keywords_exclude":["x"]})"};
  for (int round = 0; round < 50; ++round) {
    std::vector<CveRecord> db;
    for (int i = 0; i < 20; ++i)
      db.push_back(with_context("CVE-2022-" + std::to_string(1000 + i), rng() % 2 ? "x" : "y", contexts[rng() % 4]));
    auto matched = match_cves({entry("a", "b", "1.0")}, db);
    auto filtered = filter_by_context(matched, linux_twin(), db);
    ASSERT_EQ(filtered.size(), matched.size());
    for (std::size_t i = 0; i < matched.size(); ++i) {
      EXPECT_EQ(filtered[i].cve_id, matched[i].cve_id);
      EXPECT_EQ(filtered[i].component, matched[i].component);
    }
    EXPECT_EQ(filter_by_context(filtered, linux_twin(), db), filtered);
  }
}

}  // namespace
