#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <vector>

#include "vcstk/errors.hpp"

namespace vcstk {

struct Dims {
  std::size_t nx = 0, ny = 0, nz = 0;

  std::size_t count() const { return nx * ny * nz; }
  bool operator==(const Dims&) const = default;
  // x-fastest linear order
  std::size_t index(std::size_t x, std::size_t y, std::size_t z) const {
    return x + nx * (y + ny * z);
  }
};

struct Spacing {
  double sx = 1.0, sy = 1.0, sz = 1.0;

  double voxel_volume() const { return sx * sy * sz; }
  bool operator==(const Spacing&) const = default;
};

// Raw NIfTI header bytes carried through a read-modify-write cycle so the
// affine/orientation fields survive untouched. Never interpreted.
using HeaderBlob = std::array<unsigned char, 348>;

// Dense 3D scalar field (image or saliency volume), x-fastest.
class VoxelGrid {
public:
  VoxelGrid(Dims dims, Spacing spacing, std::vector<double> data)
      : dims_(dims), spacing_(spacing), data_(std::move(data)) {
    validate();
  }

  static VoxelGrid filled(Dims dims, Spacing spacing, double value) {
    return VoxelGrid(dims, spacing,
                     std::vector<double>(dims.count(), value));
  }

  const Dims& dims() const { return dims_; }
  const Spacing& spacing() const { return spacing_; }
  const std::vector<double>& data() const { return data_; }
  double at(std::size_t x, std::size_t y, std::size_t z) const {
    return data_[dims_.index(x, y, z)];
  }

  // Mutation re-checks finiteness at the call site boundary.
  void set_data(std::vector<double> data) {
    data_ = std::move(data);
    validate();
  }

  const std::optional<HeaderBlob>& header_blob() const { return header_blob_; }
  void set_header_blob(const HeaderBlob& blob) { header_blob_ = blob; }

  bool operator==(const VoxelGrid& o) const {
    return dims_ == o.dims_ && spacing_ == o.spacing_ && data_ == o.data_;
  }

private:
  void validate() const {
    if (dims_.nx == 0 || dims_.ny == 0 || dims_.nz == 0)
      throw NonPositiveDim("VoxelGrid dims must be positive");
    if (!(spacing_.sx > 0) || !(spacing_.sy > 0) || !(spacing_.sz > 0) ||
        !std::isfinite(spacing_.sx) || !std::isfinite(spacing_.sy) ||
        !std::isfinite(spacing_.sz))
      throw NonPositiveDim("VoxelGrid spacing must be finite and > 0");
    if (data_.size() != dims_.count())
      throw SizeMismatch("VoxelGrid data length != nx*ny*nz");
    for (double v : data_)
      if (!std::isfinite(v))
        throw NonFiniteValue("VoxelGrid admits only finite values");
  }

  Dims dims_;
  Spacing spacing_;
  std::vector<double> data_;
  std::optional<HeaderBlob> header_blob_;
};

// Dense 3D integer field: segmentation label per voxel, 0 = background.
class LabelMap {
public:
  LabelMap(Dims dims, Spacing spacing, std::vector<std::uint16_t> labels)
      : dims_(dims), spacing_(spacing), labels_(std::move(labels)) {
    if (dims_.nx == 0 || dims_.ny == 0 || dims_.nz == 0)
      throw NonPositiveDim("LabelMap dims must be positive");
    if (!(spacing_.sx > 0) || !(spacing_.sy > 0) || !(spacing_.sz > 0))
      throw NonPositiveDim("LabelMap spacing must be finite and > 0");
    if (labels_.size() != dims_.count())
      throw SizeMismatch("LabelMap labels length != nx*ny*nz");
    std::set<std::uint16_t> ids;
    for (auto l : labels_)
      if (l != 0) ids.insert(l);
    region_ids_.assign(ids.begin(), ids.end());
  }

  const Dims& dims() const { return dims_; }
  const Spacing& spacing() const { return spacing_; }
  const std::vector<std::uint16_t>& labels() const { return labels_; }
  // Sorted distinct nonzero labels present.
  const std::vector<std::uint16_t>& region_ids() const { return region_ids_; }
  std::uint16_t at(std::size_t x, std::size_t y, std::size_t z) const {
    return labels_[dims_.index(x, y, z)];
  }

  const std::optional<HeaderBlob>& header_blob() const { return header_blob_; }
  void set_header_blob(const HeaderBlob& blob) { header_blob_ = blob; }

  bool operator==(const LabelMap& o) const {
    return dims_ == o.dims_ && spacing_ == o.spacing_ && labels_ == o.labels_;
  }

private:
  Dims dims_;
  Spacing spacing_;
  std::vector<std::uint16_t> labels_;
  std::vector<std::uint16_t> region_ids_;
  std::optional<HeaderBlob> header_blob_;
};

}  // namespace vcstk
