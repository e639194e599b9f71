#include "vcstk/nifti.hpp"

#include <cstring>
#include <fstream>

namespace vcstk {

namespace {

constexpr std::int16_t kDtUint8 = 2;
constexpr std::int16_t kDtInt16 = 4;
constexpr std::int16_t kDtFloat32 = 16;

template <typename T>
T read_scalar(const std::vector<unsigned char>& buf, std::size_t offset) {
  T v;
  std::memcpy(&v, buf.data() + offset, sizeof(T));
  return v;
}

template <typename T>
void write_scalar(unsigned char* buf, std::size_t offset, T v) {
  std::memcpy(buf + offset, &v, sizeof(T));
}

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());
  return buf;
}

struct ParsedHeader {
  Dims dims;
  Spacing spacing;
  std::int16_t datatype;
  float slope, inter;
  std::size_t data_offset;
  HeaderBlob blob;
};

ParsedHeader parse_header(const std::vector<unsigned char>& buf,
                          const std::string& name) {
  if (buf.size() < 348)
    throw TruncatedFile(name + ": file shorter than the 348-byte header");
  const auto sizeof_hdr = read_scalar<std::int32_t>(buf, 0);
  if (sizeof_hdr != 348)
    throw BadMagic(name + ": sizeof_hdr is " + std::to_string(sizeof_hdr) +
                   ", expected 348");
  char magic[4];
  std::memcpy(magic, buf.data() + 344, 4);
  if (std::memcmp(magic, "n+1\0", 4) != 0)
    throw BadMagic(name + ": magic is not \"n+1\" (single-file NIfTI-1)");

  const auto ndim = read_scalar<std::int16_t>(buf, 40);
  if (ndim < 3 || ndim > 7)
    throw NonPositiveDim(name + ": dim[0] is " + std::to_string(ndim) +
                         ", need 3 spatial dimensions");
  for (int d = 4; d <= ndim; ++d) {
    const auto extent = read_scalar<std::int16_t>(buf, 40 + 2 * d);
    if (extent > 1)
      throw NonPositiveDim(name + ": dim[" + std::to_string(d) +
                           "] > 1; only 3 spatial dimensions supported");
  }

  ParsedHeader h;
  std::int16_t n[3];
  for (int d = 0; d < 3; ++d) {
    n[d] = read_scalar<std::int16_t>(buf, 42 + 2 * d);
    if (n[d] <= 0)
      throw NonPositiveDim(name + ": dim[" + std::to_string(d + 1) + "] is " +
                           std::to_string(n[d]));
  }
  h.dims = {std::size_t(n[0]), std::size_t(n[1]), std::size_t(n[2])};

  float p[3];
  for (int d = 0; d < 3; ++d) {
    p[d] = read_scalar<float>(buf, 76 + 4 * (d + 1));
    if (!(p[d] > 0.0f) || !std::isfinite(p[d]))
      throw NonPositiveDim(name + ": pixdim[" + std::to_string(d + 1) +
                           "] is not finite and > 0");
  }
  h.spacing = {p[0], p[1], p[2]};

  h.datatype = read_scalar<std::int16_t>(buf, 70);
  if (h.datatype != kDtUint8 && h.datatype != kDtInt16 &&
      h.datatype != kDtFloat32)
    throw UnsupportedDatatype(name + ": datatype " +
                              std::to_string(h.datatype) +
                              " not in {uint8, int16, float32}");

  h.slope = read_scalar<float>(buf, 112);
  h.inter = read_scalar<float>(buf, 116);

  const float vox_offset = read_scalar<float>(buf, 108);
  if (vox_offset < 348.0f)
    throw TruncatedFile(name + ": vox_offset " + std::to_string(vox_offset) +
                        " < 348");
  h.data_offset = std::size_t(vox_offset);

  const std::size_t elem =
      h.datatype == kDtUint8 ? 1 : (h.datatype == kDtInt16 ? 2 : 4);
  if (buf.size() < h.data_offset + elem * h.dims.count())
    throw TruncatedFile(name + ": data section shorter than dim[1..3] imply");

  std::memcpy(h.blob.data(), buf.data(), 348);
  return h;
}

std::vector<double> decode_scalars(const std::vector<unsigned char>& buf,
                                   const ParsedHeader& h) {
  const std::size_t n = h.dims.count();
  std::vector<double> out(n);
  const unsigned char* src = buf.data() + h.data_offset;
  if (h.datatype == kDtFloat32) {
    for (std::size_t i = 0; i < n; ++i) {
      float v;
      std::memcpy(&v, src + 4 * i, 4);
      out[i] = v;
    }
  } else if (h.datatype == kDtInt16) {
    for (std::size_t i = 0; i < n; ++i) {
      std::int16_t v;
      std::memcpy(&v, src + 2 * i, 2);
      out[i] = v;
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) out[i] = src[i];
  }
  if (h.slope != 0.0f && (h.slope != 1.0f || h.inter != 0.0f))
    for (auto& v : out) v = v * double(h.slope) + double(h.inter);
  return out;
}

bool plain_integer_file(const ParsedHeader& h) {
  return (h.datatype == kDtUint8 || h.datatype == kDtInt16) &&
         (h.slope == 0.0f || (h.slope == 1.0f && h.inter == 0.0f));
}

LabelMap decode_labels(const std::vector<unsigned char>& buf,
                       const ParsedHeader& h, const std::string& name) {
  const std::size_t n = h.dims.count();
  std::vector<std::uint16_t> labels(n);
  const unsigned char* src = buf.data() + h.data_offset;
  if (h.datatype == kDtInt16) {
    for (std::size_t i = 0; i < n; ++i) {
      std::int16_t v;
      std::memcpy(&v, src + 2 * i, 2);
      if (v < 0)
        throw LabelOverflow(name + ": negative label " + std::to_string(v));
      labels[i] = std::uint16_t(v);
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) labels[i] = src[i];
  }
  LabelMap lm(h.dims, h.spacing, std::move(labels));
  lm.set_header_blob(h.blob);
  return lm;
}

HeaderBlob make_header(Dims dims, Spacing spacing, std::int16_t datatype,
                       std::int16_t bitpix,
                       const std::optional<HeaderBlob>& carried) {
  HeaderBlob blob{};
  if (carried) blob = *carried;
  unsigned char* b = blob.data();
  write_scalar<std::int32_t>(b, 0, 348);
  write_scalar<std::int16_t>(b, 40, 3);
  write_scalar<std::int16_t>(b, 42, std::int16_t(dims.nx));
  write_scalar<std::int16_t>(b, 44, std::int16_t(dims.ny));
  write_scalar<std::int16_t>(b, 46, std::int16_t(dims.nz));
  for (int d = 4; d <= 7; ++d) write_scalar<std::int16_t>(b, 40 + 2 * d, 1);
  write_scalar<std::int16_t>(b, 70, datatype);
  write_scalar<std::int16_t>(b, 72, bitpix);
  write_scalar<float>(b, 76, 1.0f);
  write_scalar<float>(b, 80, float(spacing.sx));
  write_scalar<float>(b, 84, float(spacing.sy));
  write_scalar<float>(b, 88, float(spacing.sz));
  write_scalar<float>(b, 108, 352.0f);
  write_scalar<float>(b, 112, 1.0f);
  write_scalar<float>(b, 116, 0.0f);
  std::memcpy(b + 344, "n+1\0", 4);
  return blob;
}

void write_file(const std::filesystem::path& path, const HeaderBlob& header,
                const std::vector<unsigned char>& payload) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for write: " + path.string());
  out.write(reinterpret_cast<const char*>(header.data()), 348);
  const char pad[4] = {0, 0, 0, 0};
  out.write(pad, 4);  // vox_offset 352
  out.write(reinterpret_cast<const char*>(payload.data()),
            std::streamsize(payload.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace

GridOrLabels read_nifti(const std::filesystem::path& path) {
  const auto buf = read_file(path);
  const auto h = parse_header(buf, path.filename().string());
  if (plain_integer_file(h)) return decode_labels(buf, h, path.string());
  VoxelGrid g(h.dims, h.spacing, decode_scalars(buf, h));
  g.set_header_blob(h.blob);
  return g;
}

VoxelGrid read_nifti_grid(const std::filesystem::path& path) {
  const auto buf = read_file(path);
  const auto h = parse_header(buf, path.filename().string());
  VoxelGrid g(h.dims, h.spacing, decode_scalars(buf, h));
  g.set_header_blob(h.blob);
  return g;
}

LabelMap read_nifti_labels(const std::filesystem::path& path) {
  const auto buf = read_file(path);
  const auto h = parse_header(buf, path.filename().string());
  if (!plain_integer_file(h))
    throw UnsupportedDatatype(path.string() +
                              ": label maps must be unscaled uint8/int16");
  return decode_labels(buf, h, path.string());
}

void save_nifti(const VoxelGrid& grid, const std::filesystem::path& path) {
  const auto header = make_header(grid.dims(), grid.spacing(), kDtFloat32, 32,
                                  grid.header_blob());
  std::vector<unsigned char> payload(4 * grid.data().size());
  for (std::size_t i = 0; i < grid.data().size(); ++i) {
    const float v = float(grid.data()[i]);
    std::memcpy(payload.data() + 4 * i, &v, 4);
  }
  write_file(path, header, payload);
}

void save_nifti(const LabelMap& labels, const std::filesystem::path& path) {
  const auto header = make_header(labels.dims(), labels.spacing(), kDtInt16,
                                  16, labels.header_blob());
  std::vector<unsigned char> payload(2 * labels.labels().size());
  for (std::size_t i = 0; i < labels.labels().size(); ++i) {
    const std::uint16_t l = labels.labels()[i];
    if (l > 32767)
      throw LabelOverflow("label " + std::to_string(l) +
                          " exceeds the int16 on-disk range");
    const std::int16_t v = std::int16_t(l);
    std::memcpy(payload.data() + 2 * i, &v, 2);
  }
  write_file(path, header, payload);
}

VoxelGrid read_raw_grid(const std::filesystem::path& path, Dims dims,
                        Spacing spacing) {
  const auto buf = read_file(path);
  if (buf.size() != 4 * dims.count())
    throw SizeMismatch(path.string() + ": " + std::to_string(buf.size()) +
                       " bytes, expected " + std::to_string(4 * dims.count()));
  std::vector<double> data(dims.count());
  for (std::size_t i = 0; i < data.size(); ++i) {
    float v;
    std::memcpy(&v, buf.data() + 4 * i, 4);
    data[i] = v;
  }
  return VoxelGrid(dims, spacing, std::move(data));
}

LabelMap read_raw_labels(const std::filesystem::path& path, Dims dims,
                         Spacing spacing) {
  const auto buf = read_file(path);
  if (buf.size() != 2 * dims.count())
    throw SizeMismatch(path.string() + ": " + std::to_string(buf.size()) +
                       " bytes, expected " + std::to_string(2 * dims.count()));
  std::vector<std::uint16_t> labels(dims.count());
  std::memcpy(labels.data(), buf.data(), buf.size());
  return LabelMap(dims, spacing, std::move(labels));
}

void save_raw_grid(const VoxelGrid& grid, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for write: " + path.string());
  for (double d : grid.data()) {
    const float v = float(d);
    out.write(reinterpret_cast<const char*>(&v), 4);
  }
  if (!out) throw IoError("write failed: " + path.string());
}

void save_raw_labels(const LabelMap& labels,
                     const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for write: " + path.string());
  out.write(reinterpret_cast<const char*>(labels.labels().data()),
            std::streamsize(2 * labels.labels().size()));
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace vcstk
