#pragma once

// Single-file NIfTI-1 ("n+1") subset: little-endian, 3D, datatypes uint8,
// int16, float32 and float64. Gzip containers are handled through zlib when
// the library is built with ASCVOL_HAVE_ZLIB.

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <type_traits>
#include <vector>

#ifdef ASCVOL_HAVE_ZLIB
#include <zlib.h>
#endif

#include "ascvol/error.hpp"
#include "ascvol/grid.hpp"

namespace ascvol {

static_assert(std::endian::native == std::endian::little, "NIfTI codec assumes a little-endian host");

enum class Datatype : std::int16_t {
  UInt8 = 2,
  Int16 = 4,
  Float32 = 16,
  Float64 = 64,
};

constexpr int bytes_per_voxel(Datatype dt) noexcept {
  switch (dt) {
    case Datatype::UInt8: return 1;
    case Datatype::Int16: return 2;
    case Datatype::Float32: return 4;
    case Datatype::Float64: return 8;
  }
  return 0;
}

template <typename T>
constexpr Datatype default_datatype() noexcept {
  if constexpr (std::is_same_v<T, std::uint8_t>) return Datatype::UInt8;
  else if constexpr (std::is_same_v<T, std::int16_t>) return Datatype::Int16;
  else if constexpr (std::is_same_v<T, double>) return Datatype::Float64;
  else return Datatype::Float32;
}

/// The fields of the 348-byte header this codec reads or writes. Orientation
/// is parsed and carried along but plays no part in volumetry.
struct NiftiHeader {
  static constexpr std::size_t kSize = 348;
  static constexpr std::size_t kDefaultVoxOffset = 352;

  std::array<std::int16_t, 8> dim{};
  std::int16_t datatype = 0;
  std::int16_t bitpix = 0;
  std::array<float, 8> pixdim{};
  float vox_offset = kDefaultVoxOffset;
  float scl_slope = 0.0f;
  float scl_inter = 0.0f;
  std::uint8_t xyzt_units = 0;
  std::int16_t qform_code = 0;
  std::int16_t sform_code = 0;
  std::array<float, 6> quatern{};  // b, c, d, qoffset x, y, z
  std::array<float, 12> srow{};    // srow_x, srow_y, srow_z
  std::array<char, 4> magic{};
};

namespace detail {

template <typename T>
T load_le(const std::uint8_t* p) noexcept {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

template <typename T>
void store_le(std::uint8_t* p, T v) noexcept {
  std::memcpy(p, &v, sizeof(T));
}

inline bool has_gzip_magic(const std::vector<std::uint8_t>& bytes) {
  return bytes.size() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b;
}

inline bool is_gz_path(const std::filesystem::path& path) { return path.extension() == ".gz"; }

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), Errc::IoFailure, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  require(!in.bad(), Errc::IoFailure, "read error on " + path.string());
  return bytes;
}

inline std::vector<std::uint8_t> gunzip(const std::filesystem::path& path) {
#ifdef ASCVOL_HAVE_ZLIB
  gzFile f = gzopen(path.string().c_str(), "rb");
  require(f != nullptr, Errc::IoFailure, "cannot open " + path.string());
  std::vector<std::uint8_t> out;
  std::array<std::uint8_t, 1 << 16> buf{};
  for (;;) {
    const int n = gzread(f, buf.data(), static_cast<unsigned>(buf.size()));
    if (n < 0) {
      gzclose(f);
      fail(Errc::TruncatedFile, "corrupt gzip stream in " + path.string());
    }
    if (n == 0) break;
    out.insert(out.end(), buf.begin(), buf.begin() + n);
  }
  gzclose(f);
  return out;
#else
  fail(Errc::PreDecompressRequired,
       path.string() + " is gzip-compressed; decompress it first (e.g. `gunzip -k`) or build with zlib");
#endif
}

inline void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  if (is_gz_path(path)) {
#ifdef ASCVOL_HAVE_ZLIB
    gzFile f = gzopen(path.string().c_str(), "wb6");
    require(f != nullptr, Errc::IoFailure, "cannot open " + path.string() + " for writing");
    const int n = gzwrite(f, bytes.data(), static_cast<unsigned>(bytes.size()));
    const int rc = gzclose(f);
    require(n == static_cast<int>(bytes.size()) && rc == Z_OK, Errc::IoFailure, "write failed on " + path.string());
    return;
#else
    fail(Errc::PreDecompressRequired, "writing .gz requires a zlib-enabled build: " + path.string());
#endif
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), Errc::IoFailure, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  out.close();
  require(static_cast<bool>(out), Errc::IoFailure, "write failed on " + path.string());
}

inline std::vector<std::uint8_t> load_container(const std::filesystem::path& path) {
  if (is_gz_path(path)) return gunzip(path);
  auto bytes = read_file_bytes(path);
  if (has_gzip_magic(bytes)) return gunzip(path);
  return bytes;
}

inline bool supported_datatype(std::int16_t code) {
  return code == 2 || code == 4 || code == 16 || code == 64;
}

}  // namespace detail

/// Parses and validates the header at the front of `bytes`.
inline NiftiHeader parse_nifti_header(const std::vector<std::uint8_t>& bytes) {
  require(bytes.size() >= NiftiHeader::kSize, Errc::TruncatedFile, "file shorter than a NIfTI-1 header");
  const std::uint8_t* p = bytes.data();
  const auto sizeof_hdr = detail::load_le<std::int32_t>(p);
  if (sizeof_hdr != 348) {
    require(__builtin_bswap32(static_cast<std::uint32_t>(sizeof_hdr)) != 348U, Errc::UnsupportedEndianness,
            "big-endian NIfTI files are not supported");
    fail(Errc::BadMagic, "sizeof_hdr is " + std::to_string(sizeof_hdr) + ", expected 348");
  }

  NiftiHeader h;
  std::memcpy(h.magic.data(), p + 344, 4);
  require(h.magic == std::array<char, 4>{'n', '+', '1', '\0'}, Errc::BadMagic,
          "magic is not \"n+1\" (two-file \"ni1\" pairs and NIfTI-2 are unsupported)");

  for (int i = 0; i < 8; ++i) h.dim[i] = detail::load_le<std::int16_t>(p + 40 + 2 * i);
  h.datatype = detail::load_le<std::int16_t>(p + 70);
  h.bitpix = detail::load_le<std::int16_t>(p + 72);
  for (int i = 0; i < 8; ++i) h.pixdim[i] = detail::load_le<float>(p + 76 + 4 * i);
  h.vox_offset = detail::load_le<float>(p + 108);
  h.scl_slope = detail::load_le<float>(p + 112);
  h.scl_inter = detail::load_le<float>(p + 116);
  h.xyzt_units = p[123];
  h.qform_code = detail::load_le<std::int16_t>(p + 252);
  h.sform_code = detail::load_le<std::int16_t>(p + 254);
  for (int i = 0; i < 6; ++i) h.quatern[i] = detail::load_le<float>(p + 256 + 4 * i);
  for (int i = 0; i < 12; ++i) h.srow[i] = detail::load_le<float>(p + 280 + 4 * i);

  require(h.dim[0] == 3, Errc::UnsupportedDims, "dim[0] is " + std::to_string(h.dim[0]) + ", only 3D is supported");
  for (int i = 1; i <= 3; ++i) {
    require(h.dim[i] > 0, Errc::InvalidHeader, "non-positive dim[" + std::to_string(i) + "]");
    require(std::isfinite(h.pixdim[i]) && h.pixdim[i] > 0.0f, Errc::InvalidHeader,
            "pixdim[" + std::to_string(i) + "] must be positive");
  }
  require(detail::supported_datatype(h.datatype), Errc::UnsupportedDatatype,
          "datatype code " + std::to_string(h.datatype));
  require(h.bitpix == 8 * bytes_per_voxel(static_cast<Datatype>(h.datatype)), Errc::InvalidHeader,
          "bitpix does not match datatype");
  require(std::isfinite(h.vox_offset) && h.vox_offset >= static_cast<float>(NiftiHeader::kSize), Errc::InvalidHeader,
          "vox_offset must be at least 348");
  return h;
}

inline VoxelSpacing spacing_of(const NiftiHeader& h) {
  return VoxelSpacing(h.pixdim[1], h.pixdim[2], h.pixdim[3]);
}

inline Dims dims_of(const NiftiHeader& h) {
  return Dims{static_cast<std::size_t>(h.dim[1]), static_cast<std::size_t>(h.dim[2]),
              static_cast<std::size_t>(h.dim[3])};
}

/// Tolerance when snapping loaded values onto {0, 1} for binary grids.
inline constexpr double kBinaryTolerance = 1e-6;

/// Reads a volume and validates it against `expected_kind`. Stored values
/// are rescaled by scl_slope/scl_inter when the slope is nonzero.
template <typename T = float>
Grid<T> read_volume(const std::filesystem::path& path, GridKind expected_kind) {
  const auto bytes = detail::load_container(path);
  const NiftiHeader h = parse_nifti_header(bytes);
  const Dims dims = dims_of(h);
  const auto dt = static_cast<Datatype>(h.datatype);
  const std::size_t offset = static_cast<std::size_t>(h.vox_offset);
  const std::size_t count = dims.count();
  const std::size_t need = offset + count * static_cast<std::size_t>(bytes_per_voxel(dt));
  require(bytes.size() >= need, Errc::TruncatedFile,
          path.string() + ": " + std::to_string(bytes.size()) + " bytes, need " + std::to_string(need));

  const bool rescale = h.scl_slope != 0.0f && std::isfinite(h.scl_slope);
  const double slope = rescale ? h.scl_slope : 1.0;
  const double inter = rescale && std::isfinite(h.scl_inter) ? h.scl_inter : 0.0;

  const std::uint8_t* data = bytes.data() + offset;
  std::vector<T> values(count);
  for (std::size_t n = 0; n < count; ++n) {
    double raw = 0.0;
    switch (dt) {
      case Datatype::UInt8: raw = data[n]; break;
      case Datatype::Int16: raw = detail::load_le<std::int16_t>(data + 2 * n); break;
      case Datatype::Float32: raw = detail::load_le<float>(data + 4 * n); break;
      case Datatype::Float64: raw = detail::load_le<double>(data + 8 * n); break;
    }
    // Skip the arithmetic for identity scaling so float data comes back bit-exact.
    const double v = (slope == 1.0 && inter == 0.0) ? raw : raw * slope + inter;
    require(std::isfinite(v), Errc::InvalidGrid, path.string() + " contains NaN or Inf");

    if (expected_kind == GridKind::Binary) {
      if (std::abs(v) <= kBinaryTolerance) {
        values[n] = T{0};
      } else if (std::abs(v - 1.0) <= kBinaryTolerance) {
        values[n] = T{1};
      } else {
        fail(Errc::NonBinaryMask, path.string() + " holds value " + std::to_string(v) + " at offset " +
                                      std::to_string(n));
      }
      continue;
    }
    if constexpr (std::is_integral_v<T>) {
      const double r = std::round(v);
      require(r == v && r >= static_cast<double>(std::numeric_limits<T>::min()) &&
                  r <= static_cast<double>(std::numeric_limits<T>::max()),
              Errc::InvalidGrid, path.string() + " value not representable in the requested integer type");
      values[n] = static_cast<T>(r);
    } else {
      values[n] = static_cast<T>(v);
    }
  }
  return Grid<T>(dims, spacing_of(h), expected_kind, std::move(values));
}

inline BinaryMask read_mask(const std::filesystem::path& path) {
  return read_volume<std::uint8_t>(path, GridKind::Binary);
}

/// Encodes a grid as a complete single-file NIfTI-1 byte image.
template <typename T>
std::vector<std::uint8_t> encode_nifti(const Grid<T>& grid, Datatype dt = default_datatype<T>()) {
  grid.validate();
  const Dims d = grid.dims();
  constexpr auto kMaxDim = static_cast<std::size_t>(std::numeric_limits<std::int16_t>::max());
  require(d.nx <= kMaxDim && d.ny <= kMaxDim && d.nz <= kMaxDim, Errc::InvalidParameter,
          "dimension exceeds NIfTI-1 int16 limit");
  const int bpv = bytes_per_voxel(dt);
  std::vector<std::uint8_t> out(NiftiHeader::kDefaultVoxOffset + grid.size() * static_cast<std::size_t>(bpv), 0);
  std::uint8_t* p = out.data();

  detail::store_le<std::int32_t>(p, 348);
  const std::array<std::int16_t, 8> dim{3, static_cast<std::int16_t>(d.nx), static_cast<std::int16_t>(d.ny),
                                        static_cast<std::int16_t>(d.nz), 1, 1, 1, 1};
  for (int i = 0; i < 8; ++i) detail::store_le<std::int16_t>(p + 40 + 2 * i, dim[i]);
  detail::store_le<std::int16_t>(p + 70, static_cast<std::int16_t>(dt));
  detail::store_le<std::int16_t>(p + 72, static_cast<std::int16_t>(8 * bpv));
  const std::array<float, 8> pixdim{1.0f,
                                    static_cast<float>(grid.spacing().dx()),
                                    static_cast<float>(grid.spacing().dy()),
                                    static_cast<float>(grid.spacing().dz()),
                                    1.0f, 1.0f, 1.0f, 1.0f};
  for (int i = 0; i < 8; ++i) detail::store_le<float>(p + 76 + 4 * i, pixdim[i]);
  detail::store_le<float>(p + 108, static_cast<float>(NiftiHeader::kDefaultVoxOffset));
  detail::store_le<float>(p + 112, 1.0f);
  detail::store_le<float>(p + 116, 0.0f);
  p[123] = 2 | 8;  // mm, seconds
  const char descrip[] = "ascvol";
  std::memcpy(p + 148, descrip, sizeof(descrip));
  // sform: axis-aligned scaling by spacing.
  detail::store_le<std::int16_t>(p + 254, 1);
  detail::store_le<float>(p + 280, pixdim[1]);
  detail::store_le<float>(p + 300, pixdim[2]);
  detail::store_le<float>(p + 320, pixdim[3]);
  std::memcpy(p + 344, "n+1\0", 4);

  std::uint8_t* data = p + NiftiHeader::kDefaultVoxOffset;
  const auto values = grid.values();
  for (std::size_t n = 0; n < values.size(); ++n) {
    const T v = values[n];
    switch (dt) {
      case Datatype::UInt8:
      case Datatype::Int16: {
        const double r = std::round(static_cast<double>(v));
        const double lo = dt == Datatype::UInt8 ? 0.0 : -32768.0;
        const double hi = dt == Datatype::UInt8 ? 255.0 : 32767.0;
        require(r == static_cast<double>(v) && r >= lo && r <= hi, Errc::InvalidParameter,
                "value not representable in the target integer datatype");
        if (dt == Datatype::UInt8) data[n] = static_cast<std::uint8_t>(r);
        else detail::store_le<std::int16_t>(data + 2 * n, static_cast<std::int16_t>(r));
        break;
      }
      case Datatype::Float32: detail::store_le<float>(data + 4 * n, static_cast<float>(v)); break;
      case Datatype::Float64: detail::store_le<double>(data + 8 * n, static_cast<double>(v)); break;
    }
  }
  return out;
}

/// Writes `grid` to `path`; a `.gz` suffix selects a gzip container.
template <typename T>
void write_volume(const Grid<T>& grid, const std::filesystem::path& path, Datatype dt = default_datatype<T>()) {
  detail::write_file_bytes(path, encode_nifti(grid, dt));
}

}  // namespace ascvol
