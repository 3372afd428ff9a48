#pragma once

#include <zlib.h>

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "gliakit/error.hpp"
#include "gliakit/geometry.hpp"
#include "gliakit/volume.hpp"

namespace gliakit {
namespace nifti {

// NIfTI-1 datatype codes.
inline constexpr std::int16_t kDtUint8 = 2;
inline constexpr std::int16_t kDtInt16 = 4;
inline constexpr std::int16_t kDtInt32 = 8;
inline constexpr std::int16_t kDtFloat32 = 16;
inline constexpr std::int16_t kDtFloat64 = 64;

#pragma pack(push, 1)
struct Header {
  std::int32_t sizeof_hdr;
  char data_type[10];
  char db_name[18];
  std::int32_t extents;
  std::int16_t session_error;
  char regular;
  char dim_info;
  std::int16_t dim[8];
  float intent_p1, intent_p2, intent_p3;
  std::int16_t intent_code;
  std::int16_t datatype;
  std::int16_t bitpix;
  std::int16_t slice_start;
  float pixdim[8];
  float vox_offset;
  float scl_slope;
  float scl_inter;
  std::int16_t slice_end;
  char slice_code;
  char xyzt_units;
  float cal_max, cal_min;
  float slice_duration;
  float toffset;
  std::int32_t glmax, glmin;
  char descrip[80];
  char aux_file[24];
  std::int16_t qform_code;
  std::int16_t sform_code;
  float quatern_b, quatern_c, quatern_d;
  float qoffset_x, qoffset_y, qoffset_z;
  float srow_x[4], srow_y[4], srow_z[4];
  char intent_name[16];
  char magic[4];
};
#pragma pack(pop)
static_assert(sizeof(Header) == 348, "NIfTI-1 header must be 348 bytes");

namespace detail {

inline std::uint16_t bswap(std::uint16_t v) { return __builtin_bswap16(v); }
inline std::uint32_t bswap(std::uint32_t v) { return __builtin_bswap32(v); }
inline std::uint64_t bswap(std::uint64_t v) { return __builtin_bswap64(v); }

template <typename T>
inline void swap_inplace(T& v) {
  static_assert(sizeof(T) == 2 || sizeof(T) == 4 || sizeof(T) == 8);
  if constexpr (sizeof(T) == 2) {
    std::uint16_t u;
    std::memcpy(&u, &v, 2);
    u = bswap(u);
    std::memcpy(&v, &u, 2);
  } else if constexpr (sizeof(T) == 4) {
    std::uint32_t u;
    std::memcpy(&u, &v, 4);
    u = bswap(u);
    std::memcpy(&v, &u, 4);
  } else {
    std::uint64_t u;
    std::memcpy(&u, &v, 8);
    u = bswap(u);
    std::memcpy(&v, &u, 8);
  }
}

inline void swap_header(Header& h) {
  swap_inplace(h.sizeof_hdr);
  swap_inplace(h.extents);
  swap_inplace(h.session_error);
  for (auto& d : h.dim) swap_inplace(d);
  swap_inplace(h.intent_p1);
  swap_inplace(h.intent_p2);
  swap_inplace(h.intent_p3);
  swap_inplace(h.intent_code);
  swap_inplace(h.datatype);
  swap_inplace(h.bitpix);
  swap_inplace(h.slice_start);
  for (auto& p : h.pixdim) swap_inplace(p);
  swap_inplace(h.vox_offset);
  swap_inplace(h.scl_slope);
  swap_inplace(h.scl_inter);
  swap_inplace(h.slice_end);
  swap_inplace(h.cal_max);
  swap_inplace(h.cal_min);
  swap_inplace(h.slice_duration);
  swap_inplace(h.toffset);
  swap_inplace(h.glmax);
  swap_inplace(h.glmin);
  swap_inplace(h.qform_code);
  swap_inplace(h.sform_code);
  swap_inplace(h.quatern_b);
  swap_inplace(h.quatern_c);
  swap_inplace(h.quatern_d);
  swap_inplace(h.qoffset_x);
  swap_inplace(h.qoffset_y);
  swap_inplace(h.qoffset_z);
  for (auto& v : h.srow_x) swap_inplace(v);
  for (auto& v : h.srow_y) swap_inplace(v);
  for (auto& v : h.srow_z) swap_inplace(v);
}

constexpr bool host_little_endian() {
  return std::endian::native == std::endian::little;
}

/// Reads the whole file; zlib's gz layer is transparent for uncompressed input.
inline std::vector<std::uint8_t> read_all(const std::string& path) {
  gzFile f = gzopen(path.c_str(), "rb");
  if (!f) throw IoError("cannot open '" + path + "' for reading");
  std::vector<std::uint8_t> out;
  std::array<std::uint8_t, 1 << 20> chunk;
  int n = 0;
  while ((n = gzread(f, chunk.data(), static_cast<unsigned>(chunk.size()))) > 0)
    out.insert(out.end(), chunk.begin(), chunk.begin() + n);
  const bool bad = (n < 0);
  gzclose(f);
  if (bad) throw IoError("error while reading '" + path + "'");
  return out;
}

inline bool wants_gzip(const std::string& path) {
  return path.size() >= 3 && path.compare(path.size() - 3, 3, ".gz") == 0;
}

inline void write_all(const std::string& path, const std::vector<std::uint8_t>& bytes, bool gzip) {
  if (gzip) {
    gzFile f = gzopen(path.c_str(), "wb6");
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    std::size_t off = 0;
    while (off < bytes.size()) {
      const unsigned len = static_cast<unsigned>(std::min<std::size_t>(bytes.size() - off, 1u << 20));
      if (gzwrite(f, bytes.data() + off, len) != static_cast<int>(len)) {
        gzclose(f);
        throw IoError("error while writing '" + path + "'");
      }
      off += len;
    }
    if (gzclose(f) != Z_OK) throw IoError("error while closing '" + path + "'");
  } else {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("error while writing '" + path + "'");
  }
}

inline int element_size(std::int16_t datatype) {
  switch (datatype) {
    case kDtUint8: return 1;
    case kDtInt16: return 2;
    case kDtInt32: return 4;
    case kDtFloat32: return 4;
    case kDtFloat64: return 8;
    default: return 0;
  }
}

template <typename T>
inline T load_element(const std::uint8_t* p, bool swap) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  if constexpr (sizeof(T) > 1) {
    if (swap) swap_inplace(v);
  }
  return v;
}

struct Decoded {
  Header header;
  Geometry geometry;
  std::vector<double> values;  // channel-major when nt > 1
  int nt = 1;
};

inline Geometry geometry_from_header(const Header& h) {
  Geometry g;
  g.dims = {h.dim[1], h.dim[2], h.dim[3]};
  if (h.sform_code > 0) {
    const float* rows[3] = {h.srow_x, h.srow_y, h.srow_z};
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 4; ++c) g.affine_at(r, c) = rows[r][c];
    g.affine_at(3, 0) = g.affine_at(3, 1) = g.affine_at(3, 2) = 0.0;
    g.affine_at(3, 3) = 1.0;
    for (int c = 0; c < 3; ++c) {
      double n2 = 0.0;
      for (int r = 0; r < 3; ++r) n2 += g.affine_at(r, c) * g.affine_at(r, c);
      const double n = std::sqrt(n2);
      if (!(n > 0.0)) throw FormatError("nifti: degenerate sform column " + std::to_string(c));
      g.spacing[c] = n;  // keeps spacing consistent with the authoritative affine
    }
  } else if (h.qform_code > 0) {
    const double b = h.quatern_b, c = h.quatern_c, d = h.quatern_d;
    const double a2 = 1.0 - (b * b + c * c + d * d);
    const double a = a2 > 0.0 ? std::sqrt(a2) : 0.0;
    const double qfac = h.pixdim[0] < 0.0f ? -1.0 : 1.0;
    double R[3][3] = {
        {a * a + b * b - c * c - d * d, 2 * (b * c - a * d), 2 * (b * d + a * c)},
        {2 * (b * c + a * d), a * a + c * c - b * b - d * d, 2 * (c * d - a * b)},
        {2 * (b * d - a * c), 2 * (c * d + a * b), a * a + d * d - b * b - c * c}};
    const double s[3] = {std::abs(h.pixdim[1]), std::abs(h.pixdim[2]), qfac * std::abs(h.pixdim[3])};
    for (int r = 0; r < 3; ++r)
      for (int cc = 0; cc < 3; ++cc) g.affine_at(r, cc) = R[r][cc] * s[cc];
    g.affine_at(0, 3) = h.qoffset_x;
    g.affine_at(1, 3) = h.qoffset_y;
    g.affine_at(2, 3) = h.qoffset_z;
    g.affine_at(3, 3) = 1.0;
    g.spacing = {std::abs(h.pixdim[1]), std::abs(h.pixdim[2]), std::abs(h.pixdim[3])};
  } else {
    g.spacing = {std::abs(h.pixdim[1]), std::abs(h.pixdim[2]), std::abs(h.pixdim[3])};
    for (int i = 0; i < 3; ++i) {
      if (!(g.spacing[i] > 0.0)) g.spacing[i] = 1.0;
      g.affine_at(i, i) = g.spacing[i];
    }
    g.affine_at(3, 3) = 1.0;
  }
  validate_geometry(g);
  return g;
}

inline Decoded decode(const std::string& path, bool allow_4d) {
  const auto bytes = read_all(path);
  if (bytes.size() < sizeof(Header))
    throw FormatError("nifti: '" + path + "' is too small to hold a NIfTI-1 header");
  Decoded out;
  std::memcpy(&out.header, bytes.data(), sizeof(Header));
  bool swap = false;
  if (out.header.sizeof_hdr != 348) {
    swap_header(out.header);
    swap = true;
    if (out.header.sizeof_hdr != 348)
      throw FormatError("nifti: '" + path + "' has an invalid header size field");
  }
  Header& h = out.header;
  if (std::memcmp(h.magic, "n+1\0", 4) != 0) {
    if (std::memcmp(h.magic, "ni1\0", 4) == 0)
      throw UnsupportedError("nifti: '" + path + "' is a two-file (.hdr/.img) dataset, which is not supported");
    throw FormatError("nifti: '" + path + "' has bad magic (not a NIfTI-1 file)");
  }
  const int nd = h.dim[0];
  if (nd < 3 || nd > 7) throw UnsupportedError("nifti: '" + path + "' has dim[0]=" + std::to_string(nd));
  for (int i = 1; i <= 3; ++i)
    if (h.dim[i] < 1) throw FormatError("nifti: '" + path + "' has non-positive dim[" + std::to_string(i) + "]");
  out.nt = nd >= 4 ? std::max<int>(1, h.dim[4]) : 1;
  for (int i = 5; i <= nd; ++i)
    if (h.dim[i] > 1) throw UnsupportedError("nifti: '" + path + "' has more than 4 used dimensions");
  if (out.nt > 1 && !allow_4d)
    throw UnsupportedError("nifti: '" + path + "' is 4D; expected a 3D scalar image");

  const int esize = element_size(h.datatype);
  if (esize == 0)
    throw UnsupportedError("nifti: '" + path + "' uses unsupported datatype code " + std::to_string(h.datatype));

  out.geometry = geometry_from_header(h);
  const std::size_t n = out.geometry.voxel_count() * static_cast<std::size_t>(out.nt);
  const std::size_t offset = static_cast<std::size_t>(h.vox_offset);
  if (h.vox_offset < 348.0f || bytes.size() < offset + n * static_cast<std::size_t>(esize))
    throw FormatError("nifti: '" + path + "' payload is truncated");

  out.values.resize(n);
  const std::uint8_t* p = bytes.data() + offset;
  switch (h.datatype) {
    case kDtUint8:
      for (std::size_t i = 0; i < n; ++i) out.values[i] = p[i];
      break;
    case kDtInt16:
      for (std::size_t i = 0; i < n; ++i) out.values[i] = load_element<std::int16_t>(p + 2 * i, swap);
      break;
    case kDtInt32:
      for (std::size_t i = 0; i < n; ++i) out.values[i] = load_element<std::int32_t>(p + 4 * i, swap);
      break;
    case kDtFloat32:
      for (std::size_t i = 0; i < n; ++i) out.values[i] = load_element<float>(p + 4 * i, swap);
      break;
    case kDtFloat64:
      for (std::size_t i = 0; i < n; ++i) out.values[i] = load_element<double>(p + 8 * i, swap);
      break;
    default: break;
  }
  return out;
}

inline bool has_scaling(const Header& h) {
  return h.scl_slope != 0.0f && !(h.scl_slope == 1.0f && h.scl_inter == 0.0f);
}

inline Header make_header(const Geometry& g, std::int16_t datatype, int nt, const std::string& descrip) {
  Header h{};
  h.sizeof_hdr = 348;
  h.regular = 'r';
  h.dim[0] = static_cast<std::int16_t>(nt > 1 ? 4 : 3);
  h.dim[1] = static_cast<std::int16_t>(g.dims[0]);
  h.dim[2] = static_cast<std::int16_t>(g.dims[1]);
  h.dim[3] = static_cast<std::int16_t>(g.dims[2]);
  h.dim[4] = static_cast<std::int16_t>(nt > 1 ? nt : 1);
  for (int i = 5; i < 8; ++i) h.dim[i] = 1;
  h.datatype = datatype;
  h.bitpix = static_cast<std::int16_t>(8 * element_size(datatype));
  h.pixdim[0] = 1.0f;
  for (int i = 0; i < 3; ++i) h.pixdim[i + 1] = static_cast<float>(g.spacing[i]);
  h.pixdim[4] = 1.0f;
  h.vox_offset = 352.0f;
  h.scl_slope = 1.0f;
  h.scl_inter = 0.0f;
  h.xyzt_units = 2;  // millimetres
  std::snprintf(h.descrip, sizeof(h.descrip), "%s", descrip.c_str());
  h.qform_code = 0;
  h.sform_code = 1;
  const float* rows[3] = {h.srow_x, h.srow_y, h.srow_z};
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 4; ++c) const_cast<float*>(rows[r])[c] = static_cast<float>(g.affine_at(r, c));
  std::memcpy(h.magic, "n+1\0", 4);
  return h;
}

inline std::vector<std::uint8_t> encode(const Header& header, const std::uint8_t* payload, std::size_t payload_bytes) {
  Header h = header;
  if (!host_little_endian()) swap_header(h);  // files are always little-endian on disk
  std::vector<std::uint8_t> bytes(352 + payload_bytes, 0);
  std::memcpy(bytes.data(), &h, sizeof(Header));
  std::memcpy(bytes.data() + 352, payload, payload_bytes);
  return bytes;
}

template <typename T>
inline std::vector<std::uint8_t> to_le_bytes(const std::vector<T>& values) {
  std::vector<std::uint8_t> raw(values.size() * sizeof(T));
  std::memcpy(raw.data(), values.data(), raw.size());
  if constexpr (sizeof(T) > 1) {
    if (!host_little_endian()) {
      for (std::size_t i = 0; i < values.size(); ++i) {
        T v = values[i];
        swap_inplace(v);
        std::memcpy(raw.data() + i * sizeof(T), &v, sizeof(T));
      }
    }
  }
  return raw;
}

}  // namespace detail

/// Reads a 3D scalar NIfTI-1 image (.nii or .nii.gz) as a float volume.
/// Applies scl_slope/scl_inter when set; rejects non-finite intensities.
inline Volume read_volume(const std::string& path) {
  auto dec = detail::decode(path, /*allow_4d=*/false);
  Volume v(dec.geometry);
  const bool scale = detail::has_scaling(dec.header);
  const double slope = dec.header.scl_slope, inter = dec.header.scl_inter;
  for (std::size_t i = 0; i < dec.values.size(); ++i)
    v.data[i] = static_cast<float>(scale ? slope * dec.values[i] + inter : dec.values[i]);
  validate_volume(v);
  return v;
}

/// Reads a 3D label image and validates every voxel against the schema.
inline LabelMap read_labels(const std::string& path, const LabelSchema& schema) {
  auto dec = detail::decode(path, /*allow_4d=*/false);
  const auto dt = dec.header.datatype;
  if (dt != kDtUint8 && dt != kDtInt16 && dt != kDtInt32)
    throw ValidationError("nifti: '" + path + "' stores labels in a non-integral datatype");
  if (detail::has_scaling(dec.header))
    throw ValidationError("nifti: '" + path + "' applies intensity scaling to a label image");
  std::vector<Label> labels(dec.values.size());
  for (std::size_t i = 0; i < dec.values.size(); ++i) {
    const double raw = dec.values[i];
    if (raw < 0.0 || raw > 255.0)
      throw ValidationError("nifti: '" + path + "' label value " + std::to_string(raw) + " at linear index " +
                            std::to_string(i) + " does not fit in 8 bits");
    labels[i] = static_cast<Label>(raw);
  }
  return LabelMap(dec.geometry, std::move(labels), schema);  // schema membership checked here
}

/// Reads a 4D NIfTI-1 stack as a ProbMap; the 4th dimension indexes channels.
/// `channels` gives the class label per channel; defaults to 0..nt-1.
inline ProbMap read_probmap(const std::string& path, std::vector<Label> channels = {}) {
  auto dec = detail::decode(path, /*allow_4d=*/true);
  const int nt = dec.nt;
  if (channels.empty()) {
    for (int c = 0; c < nt; ++c) channels.push_back(static_cast<Label>(c));
  }
  if (static_cast<int>(channels.size()) != nt)
    throw ValidationError("nifti: '" + path + "' has " + std::to_string(nt) + " channels but " +
                          std::to_string(channels.size()) + " class labels were given");
  ProbMap p(dec.geometry, std::move(channels));
  const std::size_t n = dec.geometry.voxel_count();
  const bool scale = detail::has_scaling(dec.header);
  const double slope = dec.header.scl_slope, inter = dec.header.scl_inter;
  for (int c = 0; c < nt; ++c)
    for (std::size_t i = 0; i < n; ++i) {
      const double raw = dec.values[static_cast<std::size_t>(c) * n + i];
      p.data[static_cast<std::size_t>(c)][i] = static_cast<float>(scale ? slope * raw + inter : raw);
    }
  p.clamp01();  // absorb float rounding from storage
  p.validate();
  return p;
}

/// Writes intensities as float32. Compression follows `gzip`; by default the
/// file is compressed iff the path ends in .gz.
inline void write_volume(const Volume& v, const std::string& path) {
  validate_geometry(v.geometry);
  const auto h = detail::make_header(v.geometry, kDtFloat32, 1, "gliakit");
  const auto raw = detail::to_le_bytes(v.data);
  detail::write_all(path, detail::encode(h, raw.data(), raw.size()), detail::wants_gzip(path));
}

inline void write_volume(const Volume& v, const std::string& path, bool gzip) {
  validate_geometry(v.geometry);
  const auto h = detail::make_header(v.geometry, kDtFloat32, 1, "gliakit");
  const auto raw = detail::to_le_bytes(v.data);
  detail::write_all(path, detail::encode(h, raw.data(), raw.size()), gzip);
}

/// Writes labels as uint8.
inline void write_labels(const LabelMap& m, const std::string& path) {
  validate_geometry(m.geometry);
  const auto h = detail::make_header(m.geometry, kDtUint8, 1, "gliakit");
  detail::write_all(path, detail::encode(h, m.data.data(), m.data.size()), detail::wants_gzip(path));
}

inline void write_labels(const LabelMap& m, const std::string& path, bool gzip) {
  validate_geometry(m.geometry);
  const auto h = detail::make_header(m.geometry, kDtUint8, 1, "gliakit");
  detail::write_all(path, detail::encode(h, m.data.data(), m.data.size()), gzip);
}

/// Writes a ProbMap as a 4D float32 stack, channel labels recorded in descrip.
inline void write_probmap(const ProbMap& p, const std::string& path) {
  validate_geometry(p.geometry);
  std::string descrip = "gliakit probmap channels=";
  for (std::size_t c = 0; c < p.channels.size(); ++c) {
    if (c) descrip += ",";
    descrip += std::to_string(int(p.channels[c]));
  }
  const auto h = detail::make_header(p.geometry, kDtFloat32, static_cast<int>(p.channel_count()), descrip);
  std::vector<float> flat;
  flat.reserve(p.geometry.voxel_count() * p.channel_count());
  for (const auto& grid : p.data) flat.insert(flat.end(), grid.begin(), grid.end());
  const auto raw = detail::to_le_bytes(flat);
  detail::write_all(path, detail::encode(h, raw.data(), raw.size()), detail::wants_gzip(path));
}

/// Reads a probmap, recovering channel labels from descrip when present.
inline ProbMap read_probmap_auto(const std::string& path) {
  auto dec = detail::decode(path, /*allow_4d=*/true);
  std::vector<Label> channels;
  const std::string descrip(dec.header.descrip, strnlen(dec.header.descrip, sizeof(dec.header.descrip)));
  const std::string tag = "channels=";
  if (auto pos = descrip.find(tag); pos != std::string::npos) {
    std::string list = descrip.substr(pos + tag.size());
    std::size_t start = 0;
    while (start <= list.size()) {
      auto comma = list.find(',', start);
      const std::string tok = list.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
      if (!tok.empty()) channels.push_back(static_cast<Label>(std::stoi(tok)));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (static_cast<int>(channels.size()) != dec.nt) channels.clear();
  }
  return read_probmap(path, std::move(channels));
}

}  // namespace nifti
}  // namespace gliakit
