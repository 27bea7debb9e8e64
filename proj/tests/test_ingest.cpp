#include <gtest/gtest.h>

#include <fstream>
#include <set>

#include "gasfeeg/ingest.hpp"
#include "test_util.hpp"

using namespace gasfeeg;
using testutil::TempDir;

namespace {

std::filesystem::path write_text(const TempDir& d, const std::string& name, const std::string& body) {
  const auto p = d / name;
  std::ofstream(p) << body;
  return p;
}

Signal signal_of(std::size_t n) {
  Signal s;
  s.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) s.samples[i] = static_cast<double>(i);
  s.source_id = "sig";
  return s;
}

std::vector<EpochRef> refs(std::size_t n, const std::string& tag) {
  std::vector<EpochRef> v;
  for (std::size_t i = 0; i < n; ++i) v.push_back({tag + ".csv", tag, i * 256});
  return v;
}

}  // namespace

TEST(ReadRecord, SelectsColumn) {
  TempDir d("ingest");
  const auto p = write_text(d, "r.csv", "1.0,2.0\n3.0,4.0\n5.0,6.0");
  const auto s = read_record(p, ',', 1);
  EXPECT_EQ(s.samples, (std::vector<double>{2.0, 4.0, 6.0}));
  EXPECT_EQ(s.source_id, "r");
  EXPECT_EQ(s.channel_index, 1u);
}

TEST(ReadRecord, EmptyFileHasNoSamples) {
  TempDir d("ingest");
  const auto p = write_text(d, "e.csv", "");
  try {
    read_record(p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("no samples"), std::string::npos);
  }
}

TEST(ReadRecord, NonNumericFieldNamesRowAndColumn) {
  TempDir d("ingest");
  const auto p = write_text(d, "bad.csv", "1.0,abc\n");
  try {
    read_record(p, ',', 1);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.row, 1u);
    EXPECT_EQ(e.column, 2u);
    EXPECT_NE(std::string(e.what()).find("row 1"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("column 2"), std::string::npos);
  }
}

TEST(ReadRecord, RejectsRaggedRowsNanAndBadChannel) {
  TempDir d("ingest");
  EXPECT_THROW(read_record(write_text(d, "rag.csv", "1,2\n3\n")), ParseError);
  EXPECT_THROW(read_record(write_text(d, "nan.csv", "1\nnan\n")), ParseError);
  EXPECT_THROW(read_record(write_text(d, "inf.csv", "1\ninf\n")), ParseError);
  EXPECT_THROW(read_record(write_text(d, "ch.csv", "1,2\n"), ',', 2), ParseError);
  EXPECT_THROW(read_record(d / "missing.csv"), Error);
}

TEST(ReadRecord, AcceptsScientificWhitespaceAndBlankLines) {
  TempDir d("ingest");
  const auto p = write_text(d, "sci.txt", "  1e3   -2.5E-1\n\n+4 5\r\n");
  const auto s = read_record(p, ' ', 0);
  EXPECT_EQ(s.samples, (std::vector<double>{1000.0, 4.0}));
  const auto s1 = read_record(p, ' ', 1);
  EXPECT_EQ(s1.samples, (std::vector<double>{-0.25, 5.0}));
}

TEST(ReadRecord, WriteRoundTripIsBitExact) {
  TempDir d("ingest");
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x(1 + rng.below(200));
    for (auto& v : x) v = rng.normal(0.0, std::pow(10.0, rng.uniform(-8.0, 8.0)));
    const auto p = d / ("rt" + std::to_string(trial) + ".csv");
    write_record(p, x);
    EXPECT_EQ(read_record(p).samples, x);
  }
}

TEST(SplitEpochs, Counts) {
  EXPECT_EQ(split_epochs(signal_of(10240), 256, Label::Normal).size(), 40u);
  const auto one = split_epochs(signal_of(256), 256, Label::Focal);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].start_index, 0u);
  EXPECT_EQ(one[0].label, Label::Focal);
  const auto rem = split_epochs(signal_of(511), 256, Label::Normal);
  ASSERT_EQ(rem.size(), 1u);
  EXPECT_EQ(rem[0].samples.back(), 255.0);
  EXPECT_THROW(split_epochs(signal_of(100), 256, Label::Normal), Error);
  EXPECT_THROW(split_epochs(signal_of(100), 1, Label::Normal), Error);
}

TEST(SplitEpochs, PropertyFloorCountConsecutiveNonOverlapping) {
  Rng rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t len = 2 + rng.below(300);
    const std::size_t n = len + rng.below(5000);
    const auto eps = split_epochs(signal_of(n), len, Label::Normal);
    ASSERT_EQ(eps.size(), n / len);
    for (std::size_t e = 0; e < eps.size(); ++e) {
      ASSERT_EQ(eps[e].samples.size(), len);
      ASSERT_EQ(eps[e].start_index, e * len);
      ASSERT_EQ(eps[e].samples.front(), static_cast<double>(e * len));
    }
  }
}

TEST(BuildManifest, FullDatasetCounts) {
  const auto m = build_manifest(refs(390, "n"), refs(390, "f"), 0.8, 42);
  EXPECT_EQ(m.entries.size(), 780u);
  EXPECT_EQ(m.count(Label::Normal, Split::Train), 312u);
  EXPECT_EQ(m.count(Label::Focal, Split::Train), 312u);
  EXPECT_EQ(m.count(Label::Normal, Split::Validation), 78u);
  EXPECT_EQ(m.count(Label::Focal, Split::Validation), 78u);
}

TEST(BuildManifest, RoundedTrainCountAndDeterminism) {
  const auto a = build_manifest(refs(10, "n"), refs(10, "f"), 0.7, 5);
  EXPECT_EQ(a.count(Label::Normal, Split::Train), 7u);
  EXPECT_EQ(a.count(Label::Focal, Split::Validation), 3u);
  const auto b = build_manifest(refs(10, "n"), refs(10, "f"), 0.5, 9);
  const auto c = build_manifest(refs(10, "n"), refs(10, "f"), 0.5, 9);
  EXPECT_EQ(to_json(b), to_json(c));
  const auto e = build_manifest(refs(10, "n"), refs(10, "f"), 0.5, 10);
  EXPECT_NE(to_json(b), to_json(e));
}

TEST(BuildManifest, Errors) {
  EXPECT_THROW(build_manifest(refs(1, "n"), refs(10, "f"), 0.5, 1), Error);
  EXPECT_THROW(build_manifest(refs(10, "n"), refs(10, "f"), 1.0, 1), Error);
  EXPECT_THROW(build_manifest(refs(10, "n"), refs(10, "f"), 0.0, 1), Error);
}

TEST(BuildManifest, PropertyPartitionAndBalance) {
  Rng rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t nn = 2 + rng.below(60);
    const std::size_t nf = rng.below(2) ? nn : 2 + rng.below(60);
    const double frac = rng.uniform(0.05, 0.95);
    const auto m = build_manifest(refs(nn, "n"), refs(nf, "f"), frac, rng.next_u64());
    ASSERT_EQ(m.entries.size(), nn + nf);
    std::set<std::pair<std::string, std::size_t>> seen;
    for (const auto& e : m.entries) ASSERT_TRUE(seen.insert({e.source_id, e.start_index}).second);
    for (std::size_t i = 0; i < nn; ++i) ASSERT_TRUE(seen.count({"n", i * 256}));
    for (std::size_t i = 0; i < nf; ++i) ASSERT_TRUE(seen.count({"f", i * 256}));
    const auto tn = m.count(Label::Normal, Split::Train), tf = m.count(Label::Focal, Split::Train);
    ASSERT_EQ(tn + m.count(Label::Normal, Split::Validation), nn);
    ASSERT_GE(tn, 1u);
    ASSERT_LT(tn, nn);
    if (nn == nf) ASSERT_LE(tn > tf ? tn - tf : tf - tn, 1u);
  }
}

TEST(Manifest, JsonRoundTrip) {
  TempDir d("ingest");
  const auto m = build_manifest(refs(6, "n"), refs(7, "f"), 0.6, 3);
  save_manifest(d / "m.json", m);
  const auto back = load_manifest(d / "m.json");
  EXPECT_EQ(to_json(back), to_json(m));
}
