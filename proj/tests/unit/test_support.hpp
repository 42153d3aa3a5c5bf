#pragma once

#include <gtest/gtest.h>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "ascvol/error.hpp"
#include "ascvol/grid.hpp"

namespace ascvol::testing {

#define EXPECT_ASCVOL_ERROR(stmt, errc)                                  \
  do {                                                                   \
    try {                                                                \
      stmt;                                                              \
      ADD_FAILURE() << "expected " << ::ascvol::to_string(errc);         \
    } catch (const ::ascvol::Error& e) {                                 \
      EXPECT_EQ(e.code(), errc) << e.what();                             \
    }                                                                    \
  } while (0)

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("ascvol_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

/// Hand-rolled NIfTI-1 writer, independent of the library codec, used as a
/// fixture source. Field offsets follow the published nifti1.h layout.
struct RawNifti {
  std::int16_t dim[8] = {3, 1, 1, 1, 1, 1, 1, 1};
  std::int16_t datatype = 16;
  std::int16_t bitpix = 32;
  float pixdim[8] = {1, 1, 1, 1, 1, 1, 1, 1};
  float vox_offset = 352;
  float scl_slope = 0;
  float scl_inter = 0;
  char magic[4] = {'n', '+', '1', '\0'};
  std::int32_t sizeof_hdr = 348;
  std::vector<std::uint8_t> data;

  template <typename T>
  void set_data(const std::vector<T>& values) {
    data.resize(values.size() * sizeof(T));
    std::memcpy(data.data(), values.data(), data.size());
  }

  std::vector<std::uint8_t> bytes() const {
    std::vector<std::uint8_t> b(static_cast<std::size_t>(vox_offset), 0);
    auto put = [&b](std::size_t off, const void* src, std::size_t n) { std::memcpy(b.data() + off, src, n); };
    put(0, &sizeof_hdr, 4);
    put(40, dim, 16);
    put(70, &datatype, 2);
    put(72, &bitpix, 2);
    put(76, pixdim, 32);
    put(108, &vox_offset, 4);
    put(112, &scl_slope, 4);
    put(116, &scl_inter, 4);
    put(344, magic, 4);
    b.insert(b.end(), data.begin(), data.end());
    return b;
  }

  void write(const std::filesystem::path& path) const {
    const auto b = bytes();
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
  }
};

inline BinaryMask random_mask(std::mt19937_64& rng, Dims dims, double p_one, VoxelSpacing sp = {}) {
  std::bernoulli_distribution bit(p_one);
  std::vector<std::uint8_t> v(dims.count());
  for (auto& x : v) x = bit(rng) ? 1 : 0;
  return BinaryMask(dims, sp, GridKind::Binary, std::move(v));
}

}  // namespace ascvol::testing
