#include "ascvol/quantify.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <functional>
#include <map>
#include <numeric>
#include <random>

#include "test_support.hpp"

using namespace ascvol;

namespace {

BinaryMask mask_with_count(Dims d, VoxelSpacing sp, std::size_t ones) {
  std::vector<std::uint8_t> v(d.count(), 0);
  std::fill(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(ones), std::uint8_t{1});
  return BinaryMask(d, sp, GridKind::Binary, std::move(v));
}

// Union-find over every neighboring foreground pair; independent of the
// library's stack flood fill.
std::vector<std::uint64_t> oracle_component_sizes(const BinaryMask& m, int conn) {
  const auto d = m.dims();
  std::vector<std::size_t> parent(m.size());
  std::iota(parent.begin(), parent.end(), 0);
  std::function<std::size_t(std::size_t)> find = [&](std::size_t x) {
    return parent[x] == x ? x : parent[x] = find(parent[x]);
  };
  for (std::size_t k = 0; k < d.nz; ++k)
    for (std::size_t j = 0; j < d.ny; ++j)
      for (std::size_t i = 0; i < d.nx; ++i) {
        if (!m(i, j, k)) continue;
        for (int dk = -1; dk <= 1; ++dk)
          for (int dj = -1; dj <= 1; ++dj)
            for (int di = -1; di <= 1; ++di) {
              const int manhattan = std::abs(di) + std::abs(dj) + std::abs(dk);
              if (manhattan == 0 || (conn == 6 && manhattan > 1)) continue;
              const long ii = static_cast<long>(i) + di, jj = static_cast<long>(j) + dj, kk = static_cast<long>(k) + dk;
              if (ii < 0 || jj < 0 || kk < 0 || ii >= static_cast<long>(d.nx) || jj >= static_cast<long>(d.ny) ||
                  kk >= static_cast<long>(d.nz))
                continue;
              if (!m(ii, jj, kk)) continue;
              parent[find(m.index(i, j, k))] = find(m.index(ii, jj, kk));
            }
      }
  std::map<std::size_t, std::uint64_t> sizes;
  for (std::size_t n = 0; n < m.size(); ++n)
    if (m[n]) ++sizes[find(n)];
  std::vector<std::uint64_t> out;
  for (auto [root, s] : sizes) out.push_back(s);
  std::sort(out.begin(), out.end(), std::greater<>());
  return out;
}

}  // namespace

TEST(MaskVolume, Examples) {
  const BinaryMask empty({4, 4, 4}, {}, GridKind::Binary, std::uint8_t{0});
  EXPECT_EQ(mask_volume_ml(empty).volume_ml, 0.0);
  EXPECT_EQ(mask_volume_ml(empty).voxel_count, 0u);

  const auto m1 = mask_with_count({100, 100, 2}, {0.8, 0.8, 5.0}, 10000);
  EXPECT_EQ(mask_volume_ml(m1).voxel_count, 10000u);
  EXPECT_NEAR(mask_volume_ml(m1).volume_ml, 32.0, 1e-9);

  const BinaryMask m2({100, 100, 100}, {1, 1, 1}, GridKind::Binary, std::uint8_t{1});
  EXPECT_DOUBLE_EQ(mask_volume_ml(m2).volume_ml, 1000.0);
}

TEST(Detect, Boundary) {
  EXPECT_EQ(detect(49.999).category, Category::NoAscites);
  EXPECT_FALSE(detect(49.999).detected);
  EXPECT_EQ(detect(50.0).category, Category::Ascites);
  EXPECT_TRUE(detect(50.0).detected);
  EXPECT_EQ(detect(0.0).category, Category::NoAscites);
  EXPECT_EQ(to_string(Category::Ascites), "ascites");
  EXPECT_EQ(to_string(Category::NoAscites), "no-ascites");
  EXPECT_ASCVOL_ERROR(detect(1.0, DetectionPolicy{-1}), Errc::InvalidParameter);
  EXPECT_ASCVOL_ERROR(detect(-1.0), Errc::InvalidParameter);
}

TEST(Detect, MonotoneInVolume) {
  for (double thr : {0.0, 10.0, 50.0, 123.4}) {
    const DetectionPolicy p{thr};
    bool prev = false;
    for (double v = 0; v < 300; v += 0.25) {
      const bool d = detect(v, p).detected;
      EXPECT_TRUE(!prev || d);
      prev = d;
    }
  }
}

TEST(Quantify, CombinesVolumeAndDetection) {
  const BinaryMask m({100, 100, 6}, {1, 1, 1}, GridKind::Binary, std::uint8_t{1});
  const auto r = quantify(m);
  EXPECT_EQ(r.voxel_count, 60000u);
  EXPECT_DOUBLE_EQ(r.volume_ml, 60.0);
  EXPECT_TRUE(r.detected);
  EXPECT_FALSE(quantify(m, {60.5}).detected);
}

TEST(PercentError, Examples) {
  EXPECT_EQ(percent_volume_error(2.5, 2.5), 0.0);
  EXPECT_NEAR(percent_volume_error(3590, 4070), 100.0 * 480.0 / 4070.0, 1e-12);
  EXPECT_NEAR(percent_volume_error(3590, 4070), 11.8, 0.05);
  EXPECT_NEAR(percent_volume_error(600, 760), 21.1, 0.05);
  EXPECT_ASCVOL_ERROR(percent_volume_error(1.0, 0.0), Errc::ZeroReference);
}

TEST(PercentError, ReferenceIsTheDenominator) {
  // the predicted-denominator reading would give 13.37% here
  EXPECT_GT(std::abs(percent_volume_error(3590, 4070) - 100.0 * 480.0 / 3590.0), 1.0);
}

TEST(Pockets, EmptyMask) {
  const BinaryMask m({3, 3, 3}, {}, GridKind::Binary, std::uint8_t{0});
  const auto r = connected_pockets(m);
  EXPECT_EQ(r.n_components, 0u);
  EXPECT_TRUE(r.component_volumes_ml.empty());
  EXPECT_FALSE(r.largest_fraction.has_value());
}

TEST(Pockets, TwoIslands) {
  BinaryMask m({5, 5, 5}, {2, 2, 2}, GridKind::Binary, std::uint8_t{0});
  m(0, 0, 0) = 1;
  m(4, 4, 4) = 1;
  for (auto c : {Connectivity::Face6, Connectivity::Full26}) {
    const auto r = connected_pockets(m, c);
    ASSERT_EQ(r.n_components, 2u);
    EXPECT_EQ(r.component_volumes_ml[0], r.component_volumes_ml[1]);
    EXPECT_DOUBLE_EQ(r.component_volumes_ml[0], 0.008);
    EXPECT_DOUBLE_EQ(*r.largest_fraction, 0.5);
  }
}

TEST(Pockets, CornerContact) {
  BinaryMask m({2, 2, 2}, {}, GridKind::Binary, std::uint8_t{0});
  m(0, 0, 0) = 1;
  m(1, 1, 1) = 1;
  EXPECT_EQ(connected_pockets(m, Connectivity::Full26).n_components, 1u);
  EXPECT_EQ(connected_pockets(m, Connectivity::Face6).n_components, 2u);
  EXPECT_EQ(oracle_component_sizes(m, 26).size(), 1u);
  EXPECT_EQ(oracle_component_sizes(m, 6).size(), 2u);
}

TEST(Pockets, EveryTwoVoxelPatternOnTheCube) {
  // exhaustive over all pairs on the 2×2×2 neighborhood
  for (std::size_t a = 0; a < 8; ++a)
    for (std::size_t b = a + 1; b < 8; ++b) {
      BinaryMask m({2, 2, 2}, {}, GridKind::Binary, std::uint8_t{0});
      m[a] = 1;
      m[b] = 1;
      for (int c : {6, 26}) {
        EXPECT_EQ(connected_pockets(m, connectivity_from_int(c)).component_voxels, oracle_component_sizes(m, c));
      }
    }
}

TEST(Pockets, MatchesUnionFindOracleOnRandomMasks) {
  std::mt19937_64 rng(99);
  for (int t = 0; t < 40; ++t) {
    const Dims d{3 + static_cast<std::size_t>(t % 5), 4, 2 + static_cast<std::size_t>(t % 3)};
    const auto m = ascvol::testing::random_mask(rng, d, 0.15 + 0.02 * (t % 10));
    for (int c : {6, 26}) {
      const auto r = connected_pockets(m, connectivity_from_int(c));
      const auto expect = oracle_component_sizes(m, c);
      EXPECT_EQ(r.component_voxels, expect);
      EXPECT_EQ(r.n_components, expect.size());
    }
  }
}

TEST(Pockets, LabelsAreRasterOrdered) {
  BinaryMask m({5, 1, 1}, {}, GridKind::Binary, std::vector<std::uint8_t>{1, 0, 1, 1, 0});
  const auto l = label_components(m, Connectivity::Face6);
  EXPECT_EQ(l.labels, (std::vector<std::uint32_t>{1, 0, 2, 2, 0}));
  EXPECT_EQ(l.sizes, (std::vector<std::uint64_t>{1, 2}));
}

TEST(Pockets, ConnectivityFlagValidation) {
  EXPECT_ASCVOL_ERROR(connectivity_from_int(18), Errc::InvalidParameter);
}

TEST(QuantifyProperty, AdditivityOfDisjointMasks) {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 25; ++t) {
    const Dims d{6, 5, 4};
    const VoxelSpacing sp(0.7, 0.9, 2.5);
    auto a = ascvol::testing::random_mask(rng, d, 0.3, sp);
    auto b = ascvol::testing::random_mask(rng, d, 0.3, sp);
    for (std::size_t n = 0; n < a.size(); ++n)
      if (a[n]) b[n] = 0;
    BinaryMask u = a;
    for (std::size_t n = 0; n < u.size(); ++n) u[n] = a[n] | b[n];
    EXPECT_EQ(mask_volume_ml(u).voxel_count, mask_volume_ml(a).voxel_count + mask_volume_ml(b).voxel_count);
    EXPECT_NEAR(mask_volume_ml(u).volume_ml, mask_volume_ml(a).volume_ml + mask_volume_ml(b).volume_ml, 1e-12);
  }
}

TEST(QuantifyProperty, DoublingDzDoublesVolume) {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 25; ++t) {
    std::uniform_real_distribution<double> u(0.3, 5.0);
    const VoxelSpacing sp(u(rng), u(rng), u(rng));
    const auto m = ascvol::testing::random_mask(rng, {7, 7, 7}, 0.4, sp);
    const BinaryMask m2(m.dims(), VoxelSpacing(sp.dx(), sp.dy(), 2 * sp.dz()), GridKind::Binary,
                        std::vector<std::uint8_t>(m.values().begin(), m.values().end()));
    EXPECT_EQ(mask_volume_ml(m2).volume_ml, 2 * mask_volume_ml(m).volume_ml);
  }
}

TEST(QuantifyProperty, PocketVolumesSumToTotal) {
  std::mt19937_64 rng(9);
  for (int t = 0; t < 25; ++t) {
    const auto m = ascvol::testing::random_mask(rng, {9, 8, 7}, 0.2, {0.8, 0.8, 5.0});
    const auto r = connected_pockets(m);
    const std::uint64_t sum = std::accumulate(r.component_voxels.begin(), r.component_voxels.end(), std::uint64_t{0});
    EXPECT_EQ(sum, mask_volume_ml(m).voxel_count);
    const double vs = std::accumulate(r.component_volumes_ml.begin(), r.component_volumes_ml.end(), 0.0);
    EXPECT_NEAR(vs, mask_volume_ml(m).volume_ml, unit_voxel_volume_mm3(m.spacing()) / 1000.0);
    EXPECT_TRUE(std::is_sorted(r.component_voxels.begin(), r.component_voxels.end(), std::greater<>()));
    if (r.largest_fraction) {
      EXPECT_GT(*r.largest_fraction, 0.0);
      EXPECT_LE(*r.largest_fraction, 1.0);
    }
  }
}

TEST(Classify, InclusionClasses) {
  EXPECT_EQ(classify({"a", 60, 70}), Inclusion::BothPositive);
  EXPECT_EQ(classify({"b", 60, 10}), Inclusion::FalsePositive);
  EXPECT_EQ(classify({"c", 10, 70}), Inclusion::FalseNegative);
  EXPECT_EQ(classify({"d", 10, 10}), Inclusion::BothNegative);
  EXPECT_EQ(classify({"e", 50, 50}), Inclusion::BothPositive);
  EXPECT_EQ(to_string(Inclusion::FalsePositive), "excluded:false_positive");
}
