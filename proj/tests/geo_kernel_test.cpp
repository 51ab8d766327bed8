#include <cmath>
#include <limits>
#include <sstream>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "saenad/error.hpp"
#include "saenad/geo_kernel.hpp"
#include "saenad/random.hpp"

using namespace saenad;

namespace {

std::vector<GeoPoint> random_points(std::size_t n, std::uint64_t seed, double box = 1.0) {
  Rng rng(seed);
  std::vector<GeoPoint> pts(n);
  for (auto& p : pts) p = {30.0 + rng.uniform(0.0, box), -97.0 + rng.uniform(0.0, box)};
  return pts;
}

const GeoPoint kA{30.27, -97.74};
const GeoPoint kB{30.30, -97.70};

}  // namespace

TEST(Rbf, CoincidentPointsGiveOne) {
  EXPECT_EQ(rbf(kA, kA, 60.0, DistanceMetric::EuclideanDegrees), 1.0);
  EXPECT_EQ(rbf(kA, kA, default_gamma(DistanceMetric::HaversineKm), DistanceMetric::HaversineKm), 1.0);
}

TEST(Rbf, MatchesHighPrecisionValues) {
  EXPECT_NEAR(rbf(kA, kB, 60.0, DistanceMetric::EuclideanDegrees), oracle::kRbfAustinPair, 1e-14);
  EXPECT_NEAR(distance(kA, kB, DistanceMetric::HaversineKm), oracle::kHaversineAustinPairKm, 1e-9);
  EXPECT_NEAR(default_gamma(DistanceMetric::HaversineKm), oracle::kHaversineGamma, 1e-15);
  EXPECT_NEAR(rbf(kA, kB, oracle::kHaversineGamma, DistanceMetric::HaversineKm), oracle::kRbfAustinPairHaversine,
              1e-12);
}

TEST(Rbf, ThresholdDistanceGivesPointOne) {
  // gamma d^2 = ln 10  =>  exp(-gamma d^2) = 0.1
  const double d = std::sqrt(std::log(10.0) / 60.0);
  EXPECT_NEAR(rbf({0.0, 0.0}, {0.0, d}, 60.0, DistanceMetric::EuclideanDegrees), 0.1, 1e-15);
}

TEST(Rbf, DecreasesWithDistance) {
  for (auto metric : {DistanceMetric::EuclideanDegrees, DistanceMetric::HaversineKm}) {
    const double g = default_gamma(metric);
    double prev = 1.0;
    for (int k = 1; k < 50; ++k) {
      const double v = rbf({10.0, 10.0}, {10.0 + 0.005 * k, 10.0}, g, metric);
      ASSERT_LT(v, prev);
      prev = v;
    }
  }
}

TEST(Rbf, RejectsBadInput) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(rbf({nan, 0.0}, kA, 60.0, DistanceMetric::EuclideanDegrees), ValidationError);
  EXPECT_THROW(rbf(kA, {0.0, std::numeric_limits<double>::infinity()}, 60.0, DistanceMetric::EuclideanDegrees),
               ValidationError);
  EXPECT_THROW(rbf(kA, kB, 0.0, DistanceMetric::EuclideanDegrees), ValidationError);
  EXPECT_THROW(rbf(kA, kB, -1.0, DistanceMetric::EuclideanDegrees), ValidationError);
}

TEST(Metric, ParsesAndPrints) {
  for (auto m : {DistanceMetric::EuclideanDegrees, DistanceMetric::HaversineKm}) EXPECT_EQ(parse_metric(to_string(m)), m);
  EXPECT_THROW(parse_metric("manhattan"), ValidationError);
}

TEST(BuildKernel, ValueJustBelowThresholdIsDropped) {
  // exp(-60 d^2) = 0.0999
  const double d = std::sqrt(-std::log(0.0999) / 60.0);
  const std::vector<GeoPoint> pts{{0.0, 0.0}, {0.0, d}};
  const auto k = build_kernel(pts, KernelOptions{});
  EXPECT_EQ(k.stored_entries(), 0u);
  EXPECT_EQ(k.value(0, 1), 0.0);
}

TEST(BuildKernel, CoincidentDistinctPoisStoreOne) {
  const std::vector<GeoPoint> pts{kA, kA};
  const auto k = build_kernel(pts, KernelOptions{});
  EXPECT_EQ(k.value(0, 1), 1.0);
  EXPECT_EQ(k.value(1, 0), 1.0);
  EXPECT_EQ(k.value(0, 0), 0.0);
  EXPECT_EQ(k.stored_entries(), 2u);
}

TEST(BuildKernel, EqualsBruteForceAndKeepsContract) {
  for (bool grid : {false, true}) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const auto pts = random_points(200, seed);
      KernelOptions o;
      o.grid_index = grid;
      const auto k = build_kernel(pts, o);
      const auto ref = oracle::brute_force_kernel(pts, 60.0, 0.1);
      std::size_t expected = 0;
      for (PoiIndex i = 0; i < 200; ++i) {
        for (PoiIndex j = 0; j < 200; ++j) {
          ASSERT_EQ(k.value(i, j), ref[i][j]) << i << "," << j << " grid=" << grid;
          ASSERT_EQ(k.value(i, j), k.value(j, i));
          if (ref[i][j] != 0.0) ++expected;
        }
        ASSERT_EQ(k.value(i, i), 0.0);
        const auto col = k.column(i);
        for (std::size_t e = 0; e < col.rows.size(); ++e) {
          ASSERT_NE(col.rows[e], i);
          ASSERT_GE(col.values[e], 0.1);
          ASSERT_LE(col.values[e], 1.0);
        }
      }
      EXPECT_EQ(k.stored_entries(), expected);
    }
  }
}

TEST(BuildKernel, GridAndThreadsMatchBruteForceExactly) {
  const auto pts = random_points(300, 9, 3.0);
  const auto base = build_kernel(pts, KernelOptions{});
  KernelOptions o;
  o.grid_index = true;
  o.threads = 3;
  EXPECT_TRUE(build_kernel(pts, o) == base);
  o.metric = DistanceMetric::HaversineKm;
  o.gamma = default_gamma(o.metric);
  KernelOptions plain = o;
  plain.grid_index = false;
  plain.threads = 1;
  EXPECT_TRUE(build_kernel(pts, o) == build_kernel(pts, plain));
}

TEST(BuildKernel, LargerGammaNeverStoresMore) {
  const auto pts = random_points(150, 4);
  std::size_t prev = std::numeric_limits<std::size_t>::max();
  for (double g : {1.0, 10.0, 30.0, 60.0, 120.0, 500.0}) {
    KernelOptions o;
    o.gamma = g;
    const auto n = build_kernel(pts, o).stored_entries();
    EXPECT_LE(n, prev) << g;
    prev = n;
  }
}

TEST(BuildKernel, FarApartPointsGiveEmptyKernel) {
  const std::vector<GeoPoint> pts{{0, 0}, {0, 5}, {5, 0}};
  EXPECT_EQ(build_kernel(pts, KernelOptions{}).stored_entries(), 0u);
}

TEST(BuildKernel, ColumnOutOfRangeIsIndexError) {
  const auto k = build_kernel(random_points(5, 1), KernelOptions{});
  EXPECT_THROW(k.column(5), IndexError);
}

TEST(SliceColumns, EmptyRepeatedAndSelfEntries) {
  const auto pts = random_points(30, 2, 0.3);
  const auto k = build_kernel(pts, KernelOptions{});
  const std::vector<PoiIndex> none;
  const auto empty = slice_columns(k, none);
  EXPECT_EQ(empty.rows(), 30u);
  EXPECT_EQ(empty.cols(), 0u);

  const std::vector<PoiIndex> twice{4, 4};
  const auto s = slice_columns(k, twice);
  ASSERT_EQ(s.cols(), 2u);
  EXPECT_EQ(s.to_dense().col(0), s.to_dense().col(1));
  EXPECT_EQ(s.value(4, 0), 0.0);

  const std::vector<PoiIndex> picks{3, 7, 11};
  const auto dense = k.to_dense();
  const auto sl = slice_columns(k, picks).to_dense();
  for (std::size_t j = 0; j < picks.size(); ++j) {
    EXPECT_EQ(sl.col(static_cast<Eigen::Index>(j)), dense.col(picks[j]));
    EXPECT_EQ(sl(picks[j], static_cast<Eigen::Index>(j)), 0.0);
  }

  const std::vector<PoiIndex> bad{30};
  EXPECT_THROW(slice_columns(k, bad), IndexError);
}

TEST(KernelCodec, RoundTripsBitExactly) {
  const auto k = build_kernel(random_points(80, 3, 0.5), KernelOptions{});
  std::stringstream buf;
  GeoKernelCodec::write(buf, k, 77);
  std::uint64_t key = 0;
  const auto back = GeoKernelCodec::read(buf, "mem", &key);
  EXPECT_EQ(key, 77u);
  EXPECT_TRUE(back == k);

  std::string bytes;
  {
    std::stringstream again;
    GeoKernelCodec::write(again, k, 77);
    bytes = again.str();
  }
  std::stringstream truncated(bytes.substr(0, bytes.size() / 2));
  EXPECT_THROW(GeoKernelCodec::read(truncated, "mem"), IoError);
  bytes[0] = 'X';
  std::stringstream corrupt(bytes);
  EXPECT_THROW(GeoKernelCodec::read(corrupt, "mem"), IoError);
}

TEST(KernelCodec, CacheKeyTracksEveryOption) {
  KernelOptions o;
  const auto base = kernel_cache_key(1, o);
  EXPECT_NE(base, kernel_cache_key(2, o));
  auto g = o;
  g.gamma = 61;
  EXPECT_NE(base, kernel_cache_key(1, g));
  auto t = o;
  t.threshold = 0.2;
  EXPECT_NE(base, kernel_cache_key(1, t));
  auto m = o;
  m.metric = DistanceMetric::HaversineKm;
  EXPECT_NE(base, kernel_cache_key(1, m));
  auto grid = o;
  grid.grid_index = true;
  EXPECT_EQ(base, kernel_cache_key(1, grid));
}
