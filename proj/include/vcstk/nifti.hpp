#pragma once

#include <filesystem>
#include <variant>

#include "vcstk/volume.hpp"

namespace vcstk {

using GridOrLabels = std::variant<VoxelGrid, LabelMap>;

// Supported subset: single-file uncompressed little-endian NIfTI-1, magic
// "n+1\0", header size 348, datatype uint8 / int16 / float32, 3 spatial dims.
//
// Integer-typed files load as LabelMap when `as_labels` is set (the default
// resolves by datatype: uint8/int16 without scaling -> LabelMap). Scalar grids
// apply scl_slope/scl_inter when slope is nonzero.
GridOrLabels read_nifti(const std::filesystem::path& path);
VoxelGrid read_nifti_grid(const std::filesystem::path& path);
LabelMap read_nifti_labels(const std::filesystem::path& path);

// float32 on disk for VoxelGrid, int16 for LabelMap; slope=1, inter=0.
// Round-trips are bit-exact.
void save_nifti(const VoxelGrid& grid, const std::filesystem::path& path);
void save_nifti(const LabelMap& labels, const std::filesystem::path& path);

enum class RawElement { F32, U16 };

// Headerless little-endian x-fastest grid; dims/spacing supplied out-of-band.
VoxelGrid read_raw_grid(const std::filesystem::path& path, Dims dims,
                        Spacing spacing);
LabelMap read_raw_labels(const std::filesystem::path& path, Dims dims,
                         Spacing spacing);
void save_raw_grid(const VoxelGrid& grid, const std::filesystem::path& path);
void save_raw_labels(const LabelMap& labels,
                     const std::filesystem::path& path);

}  // namespace vcstk
