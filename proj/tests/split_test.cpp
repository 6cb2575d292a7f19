#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "mycoeval/dataset.hpp"
#include "mycoeval/error.hpp"
#include "mycoeval/random.hpp"

namespace mycoeval {
namespace {

/// Registry whose stratum sizes are given in presence_stratum order.
Dataset registry(const std::array<int, 4>& stratum_sizes) {
  std::vector<ImageRecord> records;
  int next = 0;
  for (int s = 0; s < 4; ++s) {
    for (int i = 0; i < stratum_sizes[s]; ++i) {
      ImageRecord r;
      r.image_id = fmt::format("img{:05d}", next++);
      r.dims = {2048, 2048};
      if (s & 2) r.ground_truth.push_back(Box(10, 10, 200, 40, ClassId::kFungal));
      if (s & 1) r.ground_truth.push_back(Box(500, 500, 560, 560, ClassId::kArtefact));
      records.push_back(std::move(r));
    }
  }
  // Interleave strata so input order is not stratum order.
  Stream rng(99);
  rng.shuffle(std::span<ImageRecord>(records));
  return Dataset(std::move(records));
}

void expect_partition(const Dataset& d, const SplitAssignment& s) {
  std::set<std::string> all;
  for (const auto* part : {&s.train, &s.val, &s.test}) {
    EXPECT_TRUE(std::is_sorted(part->begin(), part->end()));
    for (const auto& id : *part) EXPECT_TRUE(all.insert(id).second) << id;
  }
  EXPECT_EQ(all.size(), d.size());
  for (const auto& r : d.records()) EXPECT_TRUE(all.count(r.image_id));
}

TEST(LargestRemainderTest, ExactAndRounded) {
  EXPECT_EQ(largest_remainder(2540, kDefaultFractions), (std::array<std::size_t, 3>{2032, 254, 254}));
  EXPECT_EQ(largest_remainder(10, kDefaultFractions), (std::array<std::size_t, 3>{8, 1, 1}));
  EXPECT_EQ(largest_remainder(7, kDefaultFractions), (std::array<std::size_t, 3>{5, 1, 1}));
  EXPECT_THROW(largest_remainder(7, {0.5, 0.4, 0.05}), Error);
}

TEST(StratifiedSplitTest, Registry2540) {
  // 2,540 frames in four presence strata.
  const Dataset d = registry({1700, 180, 560, 100});
  const auto s = stratified_split(d, kDefaultFractions, 2024);
  expect_partition(d, s);
  EXPECT_EQ(s.train.size(), 2032u);
  EXPECT_EQ(s.val.size(), 254u);
  EXPECT_EQ(s.test.size(), 254u);
  for (const auto& row : s.strata) {
    for (int k = 0; k < 3; ++k) {
      EXPECT_LT(std::abs(static_cast<double>(row.counts[k]) - row.total * kDefaultFractions[k]),
                1.0);
    }
  }
}

TEST(StratifiedSplitTest, SingleStratumOfTen) {
  const Dataset d = registry({10, 0, 0, 0});
  const auto s = stratified_split(d, kDefaultFractions, 1);
  EXPECT_EQ(s.train.size(), 8u);
  EXPECT_EQ(s.val.size(), 1u);
  EXPECT_EQ(s.test.size(), 1u);
}

TEST(StratifiedSplitTest, DeterministicForSeedAndInputOrder) {
  const Dataset d = registry({40, 13, 29, 7});
  const auto a = stratified_split(d, kDefaultFractions, 77);
  const auto b = stratified_split(d, kDefaultFractions, 77);
  EXPECT_EQ(serialize_split(a), serialize_split(b));

  std::vector<ImageRecord> reversed(d.records().rbegin(), d.records().rend());
  const auto c = stratified_split(Dataset(std::move(reversed)), kDefaultFractions, 77);
  EXPECT_EQ(serialize_split(a), serialize_split(c));

  const auto other = stratified_split(d, kDefaultFractions, 78);
  EXPECT_NE(serialize_split(a), serialize_split(other));
}

TEST(StratifiedSplitTest, TinyStrataWarnButAreNeverDropped) {
  const Dataset d = registry({1, 2, 1, 1});
  Warnings w;
  const auto s = stratified_split(d, kDefaultFractions, 3, &w);
  expect_partition(d, s);
  EXPECT_GE(w.size(), 4u);
  EXPECT_EQ(s.train.size() + s.val.size() + s.test.size(), 5u);
  const auto target = largest_remainder(5, kDefaultFractions);
  EXPECT_EQ(s.train.size(), target[0]);
  EXPECT_EQ(s.val.size(), target[1]);
  EXPECT_EQ(s.test.size(), target[2]);
}

TEST(StratifiedSplitTest, RandomRegistriesStayProportional) {
  Stream rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    const std::array<int, 4> sizes{rng.between(0, 60), rng.between(0, 60), rng.between(0, 60),
                                   rng.between(1, 60)};
    const Dataset d = registry(sizes);
    const SplitFractions f =
        trial % 2 ? kDefaultFractions : SplitFractions{0.7, 0.2, 0.1};
    const auto s = stratified_split(d, f, static_cast<std::uint64_t>(trial));
    expect_partition(d, s);
    const auto target = largest_remainder(d.size(), f);
    EXPECT_EQ(s.train.size(), target[0]);
    EXPECT_EQ(s.val.size(), target[1]);
    EXPECT_EQ(s.test.size(), target[2]);
    for (const auto& row : s.strata) {
      for (int k = 0; k < 3; ++k) {
        EXPECT_LT(std::abs(static_cast<double>(row.counts[k]) - row.total * f[k]), 1.0 + 1e-9);
      }
    }
  }
}

TEST(StratifiedSplitTest, UsageErrors) {
  EXPECT_THROW(stratified_split(Dataset{}, kDefaultFractions, 0), Error);
  EXPECT_THROW(stratified_split(registry({3, 0, 0, 0}), {0.8, 0.1, 0.2}, 0), Error);
}

TEST(StratifiedSplitTest, CustomStratumFunction) {
  const Dataset d = registry({30, 0, 0, 0});
  auto by_parity = [](const ImageRecord& r) { return (r.image_id.back() - '0') % 2; };
  const auto s = stratified_split(d, kDefaultFractions, 5, nullptr, by_parity);
  EXPECT_EQ(s.strata.size(), 2u);
  expect_partition(d, s);
}

}  // namespace
}  // namespace mycoeval
