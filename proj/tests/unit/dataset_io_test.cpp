// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <set>
#include <sstream>

#include "hsf/error.hpp"
#include "hsf/hidden_state_io.hpp"
#include "support/oracles.hpp"

namespace hsf {
namespace {

std::string serialize(const Dataset& ds, DatasetFormat f) {
  std::ostringstream os;
  write_dataset(ds, os, f);
  return os.str();
}

Dataset deserialize(const std::string& bytes) {
  std::istringstream is(bytes);
  return read_dataset(is);
}

// Field-by-field equality with bitwise float comparison (keeps -0.0).
void expect_identical(const Dataset& a, const Dataset& b) {
  ASSERT_EQ(a.hidden_dim, b.hidden_dim);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& x = a.records[i];
    const auto& y = b.records[i];
    ASSERT_EQ(x.id, y.id);
    ASSERT_EQ(x.label, y.label);
    ASSERT_EQ(x.source_tag, y.source_tag);
    ASSERT_EQ(x.token_count, y.token_count);
    ASSERT_EQ(x.values.size(), y.values.size());
    ASSERT_EQ(std::memcmp(x.values.data(), y.values.data(), x.values.size() * sizeof(float)), 0)
        << "record " << i;
  }
}

Dataset tiny() {
  Dataset ds;
  ds.hidden_dim = 2;
  ds.records.push_back(make_record("only", Label::Harmful, "advbench", {{1.0f, -1.0f}}));
  return ds;
}

TEST(HiddenStateIo, EmptyDatasetRoundTrips) {
  Dataset ds;
  ds.hidden_dim = 4;
  for (auto f : {DatasetFormat::Binary, DatasetFormat::DebugText}) {
    const auto back = deserialize(serialize(ds, f));
    EXPECT_EQ(back.hidden_dim, 4u);
    EXPECT_TRUE(back.empty());
  }
  // magic + version + hidden_dim + count
  EXPECT_EQ(serialize(ds, DatasetFormat::Binary).size(), 4u + 4u + 4u + 8u);
}

TEST(HiddenStateIo, SingleRecordRoundTrips) {
  for (auto f : {DatasetFormat::Binary, DatasetFormat::DebugText}) {
    expect_identical(deserialize(serialize(tiny(), f)), tiny());
  }
}

TEST(HiddenStateIo, BinaryLayoutIsExact) {
  const std::string b = serialize(tiny(), DatasetFormat::Binary);
  const unsigned char expected[] = {
      'H', 'S', 'F', '1', 1, 0, 0, 0,  // magic, version
      2, 0, 0, 0,                      // hidden_dim
      1, 0, 0, 0, 0, 0, 0, 0,          // record count
      4, 0, 0, 0, 'o', 'n', 'l', 'y',  // id
      1,                               // label
      8, 0, 0, 0, 'a', 'd', 'v', 'b', 'e', 'n', 'c', 'h',
      1, 0, 0, 0,                      // token count
      0x00, 0x00, 0x80, 0x3f,          // 1.0f
      0x00, 0x00, 0x80, 0xbf,          // -1.0f
  };
  ASSERT_EQ(b.size(), sizeof expected);
  EXPECT_EQ(std::memcmp(b.data(), expected, sizeof expected), 0);
}

TEST(HiddenStateIo, RandomDatasetsAgreeAcrossFormats) {
  CounterRng rng(100, 0);
  const Dataset ds = oracle::random_dataset(rng, 8, 100, 8, 16);
  const auto from_bin = deserialize(serialize(ds, DatasetFormat::Binary));
  const auto from_txt = deserialize(serialize(ds, DatasetFormat::DebugText));
  expect_identical(from_bin, ds);
  expect_identical(from_txt, ds);
}

TEST(HiddenStateIo, BinaryWriteIsPure) {
  CounterRng rng(3, 0);
  const Dataset ds = oracle::random_dataset(rng, 5, 20, 1, 4);
  EXPECT_EQ(serialize(ds, DatasetFormat::Binary), serialize(ds, DatasetFormat::Binary));
}

TEST(HiddenStateIo, DebugTextKeepsProvenance) {
  Dataset ds = tiny();
  ds.provenance = {{"model", "toy"}, {"layer", "final"}};
  EXPECT_EQ(deserialize(serialize(ds, DatasetFormat::DebugText)).provenance, ds.provenance);
}

TEST(HiddenStateIo, DebugTextHeaderLine) {
  const std::string t = serialize(tiny(), DatasetFormat::DebugText);
  EXPECT_EQ(t.substr(0, t.find('\n')), R"({"hsf_version":1,"hidden_dim":2})");
}

TEST(HiddenStateIo, WrongMagicIsUnrecognized) {
  std::string b = serialize(tiny(), DatasetFormat::Binary);
  b[3] = '2';
  try {
    (void)deserialize(b);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("unrecognized format"), std::string::npos);
  }
}

TEST(HiddenStateIo, VersionMismatch) {
  std::string b = serialize(tiny(), DatasetFormat::Binary);
  b[4] = 2;
  EXPECT_THROW((void)deserialize(b), FormatError);
}

TEST(HiddenStateIo, TruncationNamesRecordIndex) {
  Dataset ds;
  ds.hidden_dim = 2;
  ds.records.push_back(make_record("a", Label::Benign, "", {{1, 2}}));
  ds.records.push_back(make_record("b", Label::Harmful, "", {{3, 4}, {5, 6}}));
  const std::string b = serialize(ds, DatasetFormat::Binary);
  try {
    (void)deserialize(b.substr(0, b.size() - 3));
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("record 1"), std::string::npos) << e.what();
    EXPECT_TRUE(e.offset().has_value());
  }
}

TEST(HiddenStateIo, NonFiniteValueRejected) {
  std::string b = serialize(tiny(), DatasetFormat::Binary);
  const float nan = std::numeric_limits<float>::quiet_NaN();
  std::memcpy(b.data() + b.size() - 4, &nan, 4);
  EXPECT_THROW((void)deserialize(b), FormatError);
}

TEST(HiddenStateIo, TrailingBytesRejected) {
  EXPECT_THROW((void)deserialize(serialize(tiny(), DatasetFormat::Binary) + "x"), FormatError);
}

TEST(HiddenStateIo, DebugTextDimensionMismatch) {
  const std::string t =
      "{\"hsf_version\":1,\"hidden_dim\":2}\n"
      "{\"id\":\"a\",\"label\":0,\"tag\":\"\",\"tokens\":[[1.0,2.0,3.0]]}\n";
  EXPECT_THROW((void)deserialize(t), Error);
}

TEST(HiddenStateIo, WriterRejectsDuplicateIds) {
  Dataset ds = tiny();
  ds.records.push_back(ds.records[0]);
  std::ostringstream os;
  EXPECT_THROW(write_dataset(ds, os, DatasetFormat::Binary), InvariantError);
}

TEST(HiddenStateIo, WriterRejectsFieldsWiderThanU32) {
  Dataset ds;
  ds.hidden_dim = std::size_t{1} << 32;
  std::ostringstream os;
  EXPECT_THROW(write_dataset(ds, os, DatasetFormat::Binary), DimensionError);
}

TEST(HiddenStateIo, MissingFileNamesPath) {
  try {
    (void)load_dataset("/nonexistent/dir/x.hsf");
    FAIL();
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/dir/x.hsf"), std::string::npos);
  }
}

TEST(HiddenStateIo, SaveAndLoadFile) {
  const auto path = std::filesystem::temp_directory_path() / "hsf_io_test.hsf";
  save_dataset(tiny(), path, DatasetFormat::Binary);
  expect_identical(load_dataset(path), tiny());
  std::filesystem::remove(path);
}

TEST(Verdicts, RoundTrip) {
  const std::vector<JudgeVerdict> v = {{"a", true}, {"b", false}, {"c \"q\"", true}};
  std::ostringstream os;
  write_verdicts(v, os);
  std::istringstream is(os.str());
  EXPECT_EQ(read_verdicts(is), v);
}

TEST(Verdicts, LineFormat) {
  std::istringstream is("{\"id\": \"x\", \"unsafe\": true}\n\n{\"id\":\"y\",\"unsafe\":false}\n");
  const auto v = read_verdicts(is);
  ASSERT_EQ(v.size(), 2u);
  EXPECT_EQ(v[0], (JudgeVerdict{"x", true}));
  EXPECT_EQ(v[1], (JudgeVerdict{"y", false}));
}

TEST(Verdicts, EmptyIdRejected) {
  std::istringstream is("{\"id\":\"\",\"unsafe\":true}\n");
  EXPECT_THROW((void)read_verdicts(is), Error);
}

Dataset labelled(std::size_t harmful, std::size_t benign) {
  Dataset ds;
  ds.hidden_dim = 1;
  for (std::size_t i = 0; i < harmful + benign; ++i) {
    ds.records.push_back(make_record("r" + std::to_string(i),
                                     i < harmful ? Label::Harmful : Label::Benign, "",
                                     {{static_cast<float>(i)}}));
  }
  return ds;
}

std::set<std::string> ids(const Dataset& ds) {
  std::set<std::string> out;
  for (const auto& r : ds.records) out.insert(r.id);
  return out;
}

TEST(SplitDataset, UnstratifiedCounts) {
  const auto [train, val] = split_dataset(labelled(5, 5), {0.8, 1, false});
  EXPECT_EQ(train.size(), 8u);
  EXPECT_EQ(val.size(), 2u);
  auto a = ids(train);
  for (const auto& id : ids(val)) EXPECT_FALSE(a.contains(id));
}

TEST(SplitDataset, Deterministic) {
  const auto ds = labelled(7, 9);
  const auto s1 = split_dataset(ds, {0.5, 42, true});
  const auto s2 = split_dataset(ds, {0.5, 42, true});
  EXPECT_EQ(s1.first, s2.first);
  EXPECT_EQ(s1.second, s2.second);
}

TEST(SplitDataset, StratifiedCounts) {
  const auto [train, val] = split_dataset(labelled(6, 4), {0.5, 3, true});
  std::size_t harmful = 0;
  for (const auto& r : train.records) harmful += r.label == Label::Harmful;
  EXPECT_EQ(harmful, 3u);
  EXPECT_EQ(train.size() - harmful, 2u);
}

TEST(SplitDataset, PartitionForManySeeds) {
  const auto ds = labelled(13, 8);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    for (bool strat : {false, true}) {
      const auto [train, val] = split_dataset(ds, {0.7, seed, strat});
      ASSERT_EQ(train.size() + val.size(), ds.size());
      auto all = ids(train);
      for (const auto& id : ids(val)) ASSERT_TRUE(all.insert(id).second);
      ASSERT_EQ(all, ids(ds));
      if (strat) {
        std::size_t h = 0;
        for (const auto& r : train.records) h += r.label == Label::Harmful;
        ASSERT_LE(std::abs(static_cast<double>(h) - 0.7 * 13), 1.0);
        ASSERT_LE(std::abs(static_cast<double>(train.size() - h) - 0.7 * 8), 1.0);
      }
    }
  }
}

TEST(SplitDataset, EmptyClassUnderStratification) {
  EXPECT_THROW((void)split_dataset(labelled(4, 0), {0.5, 1, true}), InvariantError);
}

TEST(SplitDataset, TooSmall) {
  EXPECT_THROW((void)split_dataset(labelled(1, 0), {0.5, 1, false}), Error);
}

}  // namespace
}  // namespace hsf
