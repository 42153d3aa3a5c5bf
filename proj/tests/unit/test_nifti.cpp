#include "ascvol/nifti.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "test_support.hpp"

using namespace ascvol;
using ascvol::testing::RawNifti;
using ascvol::testing::TempDir;

namespace {

RawNifti raw_float32(int nx, int ny, int nz, const std::vector<float>& values) {
  RawNifti r;
  r.dim[1] = static_cast<std::int16_t>(nx);
  r.dim[2] = static_cast<std::int16_t>(ny);
  r.dim[3] = static_cast<std::int16_t>(nz);
  r.datatype = 16;
  r.bitpix = 32;
  r.set_data(values);
  return r;
}

}  // namespace

TEST(VolumeIo, MinimalFloat32FromIndependentWriter) {
  TempDir tmp;
  const std::vector<float> v{0, 1, 2, 3, 4, 5, 6, 7};
  raw_float32(2, 2, 2, v).write(tmp / "min.nii");
  const auto g = read_volume(tmp / "min.nii", GridKind::Intensity);
  EXPECT_EQ(g.dims(), (Dims{2, 2, 2}));
  ASSERT_EQ(g.size(), 8u);
  EXPECT_DOUBLE_EQ(g.spacing().dx(), 1.0);
  EXPECT_DOUBLE_EQ(g.spacing().dy(), 1.0);
  EXPECT_DOUBLE_EQ(g.spacing().dz(), 1.0);
  for (std::size_t n = 0; n < 8; ++n) EXPECT_EQ(g[n], v[n]);
}

TEST(VolumeIo, TwoFileMagicIsRejected) {
  TempDir tmp;
  auto r = raw_float32(2, 2, 2, std::vector<float>(8, 0.f));
  r.magic[0] = 'n';
  r.magic[1] = 'i';
  r.magic[2] = '1';
  r.write(tmp / "ni1.nii");
  EXPECT_ASCVOL_ERROR(read_volume(tmp / "ni1.nii", GridKind::Intensity), Errc::BadMagic);
}

TEST(VolumeIo, Int16SlopeAndIntercept) {
  TempDir tmp;
  RawNifti r;
  r.datatype = 4;
  r.bitpix = 16;
  r.scl_slope = 2;
  r.scl_inter = 1;
  r.set_data(std::vector<std::int16_t>{3});
  r.write(tmp / "s.nii");
  const auto g = read_volume(tmp / "s.nii", GridKind::Intensity);
  ASSERT_EQ(g.size(), 1u);
  EXPECT_EQ(g[0], 7.0f);
}

TEST(VolumeIo, ZeroSlopeMeansNoScaling) {
  TempDir tmp;
  RawNifti r;
  r.datatype = 4;
  r.bitpix = 16;
  r.scl_slope = 0;
  r.scl_inter = 100;
  r.set_data(std::vector<std::int16_t>{-5});
  r.write(tmp / "z.nii");
  EXPECT_EQ(read_volume(tmp / "z.nii", GridKind::Intensity)[0], -5.0f);
}

TEST(VolumeIo, AxisOrderAsymmetricFixture) {
  TempDir tmp;
  const int nx = 3, ny = 4, nz = 5;
  std::vector<float> v(nx * ny * nz);
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) v[i + nx * (j + ny * k)] = static_cast<float>(i + 10 * j + 100 * k);
  raw_float32(nx, ny, nz, v).write(tmp / "axis.nii");
  const auto g = read_volume(tmp / "axis.nii", GridKind::Intensity);
  EXPECT_EQ(g.dims(), (Dims{3, 4, 5}));
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) EXPECT_EQ(g(i, j, k), static_cast<float>(i + 10 * j + 100 * k));

  // and the writer lays voxels out the same way
  const auto bytes = encode_nifti(g);
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        float f;
        std::memcpy(&f, bytes.data() + 352 + 4 * (i + nx * (j + ny * k)), 4);
        EXPECT_EQ(f, static_cast<float>(i + 10 * j + 100 * k));
      }
}

TEST(VolumeIo, RescaleLinearity) {
  TempDir tmp;
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> raw_d(-3000, 3000);
  std::uniform_real_distribution<float> coef(-4.f, 4.f);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::int16_t> raw(24);
    for (auto& x : raw) x = static_cast<std::int16_t>(raw_d(rng));
    float s = coef(rng);
    if (s == 0.f) s = 1.f;
    const float b = coef(rng) * 100.f;
    RawNifti r;
    r.dim[1] = 2;
    r.dim[2] = 3;
    r.dim[3] = 4;
    r.datatype = 4;
    r.bitpix = 16;
    r.scl_slope = s;
    r.scl_inter = b;
    r.set_data(raw);
    r.write(tmp / "lin.nii");
    RawNifti unscaled = r;
    unscaled.scl_slope = 0;
    unscaled.write(tmp / "raw.nii");
    const auto g = read_volume(tmp / "lin.nii", GridKind::Intensity);
    const auto g0 = read_volume(tmp / "raw.nii", GridKind::Intensity);
    for (std::size_t n = 0; n < raw.size(); ++n) {
      const double expect = static_cast<double>(s) * g0[n] + static_cast<double>(b);
      EXPECT_NEAR(g[n], expect, 1e-6 * std::max(1.0, std::abs(expect)));
    }
  }
}

TEST(VolumeIo, ProbabilityGridRoundTrip) {
  TempDir tmp;
  std::vector<float> v(27);
  for (std::size_t n = 0; n < v.size(); ++n) v[n] = static_cast<float>(n) / 26.0f;
  const ProbabilityMap g({3, 3, 3}, {1, 1, 1}, GridKind::Probability, v);
  write_volume(g, tmp / "p.nii");
  const auto back = read_volume(tmp / "p.nii", GridKind::Probability);
  EXPECT_EQ(back, g);
}

TEST(VolumeIo, SpacingRoundTrip) {
  TempDir tmp;
  const CtVolume g({2, 2, 2}, {0.8, 0.8, 5.0}, GridKind::Intensity, 1.0f);
  write_volume(g, tmp / "sp.nii");
  const auto back = read_volume(tmp / "sp.nii", GridKind::Intensity);
  const double eps = std::numeric_limits<float>::epsilon();
  EXPECT_NEAR(back.spacing().dx(), 0.8, 0.8 * eps);
  EXPECT_NEAR(back.spacing().dy(), 0.8, 0.8 * eps);
  EXPECT_NEAR(back.spacing().dz(), 5.0, 5.0 * eps);
}

TEST(VolumeIo, UnwritablePath) {
  const CtVolume g({1, 1, 1}, {}, GridKind::Intensity, 0.f);
  EXPECT_ASCVOL_ERROR(write_volume(g, "/nonexistent_dir_ascvol/x/y.nii"), Errc::IoFailure);
}

TEST(VolumeIo, MissingFile) {
  EXPECT_ASCVOL_ERROR(read_volume("/nonexistent_dir_ascvol/none.nii", GridKind::Intensity), Errc::IoFailure);
}

TEST(VolumeIo, UnitVoxelVolume) {
  EXPECT_DOUBLE_EQ(unit_voxel_volume_mm3({1, 1, 1}), 1.0);
  EXPECT_NEAR(unit_voxel_volume_mm3({0.8, 0.8, 5.0}), 3.2, 1e-12);
  // 0.742 · 0.742 = 0.550564; · 5 = 2.75282
  EXPECT_NEAR(unit_voxel_volume_mm3({0.742, 0.742, 5.0}), 2.75282, 1e-12);
}

TEST(VolumeIo, SpacingMustBePositiveFinite) {
  EXPECT_ASCVOL_ERROR(VoxelSpacing(0, 1, 1), Errc::InvalidParameter);
  EXPECT_ASCVOL_ERROR(VoxelSpacing(1, -1, 1), Errc::InvalidParameter);
  EXPECT_ASCVOL_ERROR(VoxelSpacing(1, 1, std::numeric_limits<double>::infinity()), Errc::InvalidParameter);
}

TEST(VolumeIo, FourDimensionalRejected) {
  TempDir tmp;
  auto r = raw_float32(2, 2, 2, std::vector<float>(16, 0.f));
  r.dim[0] = 4;
  r.dim[4] = 2;
  r.write(tmp / "4d.nii");
  EXPECT_ASCVOL_ERROR(read_volume(tmp / "4d.nii", GridKind::Intensity), Errc::UnsupportedDims);
}

TEST(VolumeIo, UnsupportedDatatypeRejected) {
  TempDir tmp;
  RawNifti r;
  r.datatype = 8;  // int32
  r.bitpix = 32;
  r.set_data(std::vector<std::int32_t>{1});
  r.write(tmp / "i32.nii");
  EXPECT_ASCVOL_ERROR(read_volume(tmp / "i32.nii", GridKind::Intensity), Errc::UnsupportedDatatype);
}

TEST(VolumeIo, BigEndianRejected) {
  TempDir tmp;
  auto r = raw_float32(1, 1, 1, {0.f});
  r.sizeof_hdr = static_cast<std::int32_t>(__builtin_bswap32(348u));
  r.write(tmp / "be.nii");
  EXPECT_ASCVOL_ERROR(read_volume(tmp / "be.nii", GridKind::Intensity), Errc::UnsupportedEndianness);
}

TEST(VolumeIo, TruncatedData) {
  TempDir tmp;
  auto r = raw_float32(2, 2, 2, std::vector<float>(8, 0.f));
  r.data.resize(20);
  r.write(tmp / "t.nii");
  EXPECT_ASCVOL_ERROR(read_volume(tmp / "t.nii", GridKind::Intensity), Errc::TruncatedFile);
}

TEST(VolumeIo, TruncatedHeader) {
  TempDir tmp;
  std::ofstream(tmp / "h.nii", std::ios::binary) << "short";
  EXPECT_ASCVOL_ERROR(read_volume(tmp / "h.nii", GridKind::Intensity), Errc::TruncatedFile);
}

TEST(VolumeIo, NonBinaryMaskRejected) {
  TempDir tmp;
  raw_float32(2, 1, 1, {0.f, 0.5f}).write(tmp / "nb.nii");
  EXPECT_ASCVOL_ERROR(read_mask(tmp / "nb.nii"), Errc::NonBinaryMask);

  // slope turns {0,1} into {1,3}
  RawNifti r;
  r.dim[1] = 2;
  r.datatype = 2;
  r.bitpix = 8;
  r.scl_slope = 2;
  r.scl_inter = 1;
  r.set_data(std::vector<std::uint8_t>{0, 1});
  r.write(tmp / "nb2.nii");
  EXPECT_ASCVOL_ERROR(read_mask(tmp / "nb2.nii"), Errc::NonBinaryMask);
}

TEST(VolumeIo, BinaryToleranceForFloatMasks) {
  TempDir tmp;
  raw_float32(3, 1, 1, {1.0f + 1e-7f, 0.0f, 1.0f - 5e-7f}).write(tmp / "tol.nii");
  const auto m = read_mask(tmp / "tol.nii");
  EXPECT_EQ(m[0], 1);
  EXPECT_EQ(m[1], 0);
  EXPECT_EQ(m[2], 1);
  raw_float32(1, 1, 1, {1.0f + 1e-4f}).write(tmp / "tol2.nii");
  EXPECT_ASCVOL_ERROR(read_mask(tmp / "tol2.nii"), Errc::NonBinaryMask);
}

TEST(VolumeIo, NanRejectedAfterLoad) {
  TempDir tmp;
  raw_float32(1, 1, 1, {std::numeric_limits<float>::quiet_NaN()}).write(tmp / "nan.nii");
  EXPECT_ASCVOL_ERROR(read_volume(tmp / "nan.nii", GridKind::Intensity), Errc::InvalidGrid);
}

TEST(VolumeIo, ProbabilityRangeEnforced) {
  TempDir tmp;
  raw_float32(1, 1, 1, {1.5f}).write(tmp / "pr.nii");
  EXPECT_ASCVOL_ERROR(read_volume(tmp / "pr.nii", GridKind::Probability), Errc::InvalidGrid);
}

TEST(VolumeIo, NonPositivePixdimRejected) {
  TempDir tmp;
  auto r = raw_float32(1, 1, 1, {0.f});
  r.pixdim[2] = 0;
  r.write(tmp / "pd.nii");
  EXPECT_ASCVOL_ERROR(read_volume(tmp / "pd.nii", GridKind::Intensity), Errc::InvalidHeader);
}

TEST(VolumeIo, OrientationIsCarriedNotUsed) {
  TempDir tmp;
  auto r = raw_float32(1, 1, 1, {0.f});
  auto bytes = r.bytes();
  const std::int16_t qform = 1;
  std::memcpy(bytes.data() + 252, &qform, 2);
  const float qb = 0.5f;
  std::memcpy(bytes.data() + 256, &qb, 4);
  const auto h = parse_nifti_header(bytes);
  EXPECT_EQ(h.qform_code, 1);
  EXPECT_EQ(h.quatern[0], 0.5f);
  EXPECT_EQ(h.dim[1], 1);
}

TEST(VolumeIo, RoundTripPropertyAllDatatypes) {
  TempDir tmp;
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    std::uniform_int_distribution<std::size_t> dd(1, 7);
    const Dims d{dd(rng), dd(rng), dd(rng)};
    std::uniform_real_distribution<double> sd(0.3, 6.0);
    const VoxelSpacing sp(sd(rng), sd(rng), sd(rng));

    std::vector<float> f(d.count());
    std::normal_distribution<float> nf(0.f, 500.f);
    for (auto& x : f) x = nf(rng);
    const CtVolume gf(d, sp, GridKind::Intensity, f);
    write_volume(gf, tmp / "f.nii");
    const auto bf = read_volume(tmp / "f.nii", GridKind::Intensity);
    EXPECT_EQ(bf.values().size(), gf.values().size());
    EXPECT_TRUE(std::equal(bf.values().begin(), bf.values().end(), gf.values().begin()));
    EXPECT_TRUE(spacing_close(bf.spacing(), sp, 1e-6));

    std::vector<double> dv(d.count());
    for (auto& x : dv) x = nf(rng) * 1.000001;
    const Grid<double> gd(d, sp, GridKind::Intensity, dv);
    write_volume(gd, tmp / "d.nii", Datatype::Float64);
    const auto bd = read_volume<double>(tmp / "d.nii", GridKind::Intensity);
    EXPECT_EQ(bd.dims(), d);
    EXPECT_TRUE(std::equal(bd.values().begin(), bd.values().end(), gd.values().begin()));

    std::vector<std::int16_t> iv(d.count());
    std::uniform_int_distribution<int> iu(-32768, 32767);
    for (auto& x : iv) x = static_cast<std::int16_t>(iu(rng));
    const Grid<std::int16_t> gi(d, sp, GridKind::Intensity, iv);
    write_volume(gi, tmp / "i.nii", Datatype::Int16);
    const auto bi = read_volume<std::int16_t>(tmp / "i.nii", GridKind::Intensity);
    EXPECT_TRUE(std::equal(bi.values().begin(), bi.values().end(), gi.values().begin()));

    auto m = ascvol::testing::random_mask(rng, d, 0.4, sp);
    write_volume(m, tmp / "m.nii", Datatype::UInt8);
    const auto bm = read_mask(tmp / "m.nii");
    EXPECT_EQ(bm.values().size(), m.values().size());
    EXPECT_TRUE(std::equal(bm.values().begin(), bm.values().end(), m.values().begin()));
    EXPECT_EQ(bm.kind(), GridKind::Binary);
  }
}

TEST(VolumeIo, IntegerTargetRequiresRepresentableValues) {
  const CtVolume g({1, 1, 1}, {}, GridKind::Intensity, 0.5f);
  EXPECT_ASCVOL_ERROR(encode_nifti(g, Datatype::Int16), Errc::InvalidParameter);
  const CtVolume big({1, 1, 1}, {}, GridKind::Intensity, 300.f);
  EXPECT_ASCVOL_ERROR(encode_nifti(big, Datatype::UInt8), Errc::InvalidParameter);
}

#if ASCVOL_HAVE_ZLIB
TEST(VolumeIo, GzipContainerRoundTrip) {
  TempDir tmp;
  std::vector<float> v(60);
  for (std::size_t n = 0; n < v.size(); ++n) v[n] = static_cast<float>(n) * 0.25f - 3.f;
  const CtVolume g({3, 4, 5}, {0.7, 0.7, 2.5}, GridKind::Intensity, v);
  write_volume(g, tmp / "g.nii.gz");
  std::ifstream in(tmp / "g.nii.gz", std::ios::binary);
  unsigned char magic[2] = {};
  in.read(reinterpret_cast<char*>(magic), 2);
  EXPECT_EQ(magic[0], 0x1f);
  EXPECT_EQ(magic[1], 0x8b);
  const auto back = read_volume(tmp / "g.nii.gz", GridKind::Intensity);
  EXPECT_TRUE(std::equal(back.values().begin(), back.values().end(), g.values().begin()));
}
#endif
