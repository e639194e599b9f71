#pragma once

#include <unistd.h>

#include <filesystem>

#include "vcstk/rng.hpp"
#include "vcstk/volume.hpp"

namespace vcstk::testing {

// Random grid with float32-representable values so NIfTI round trips are
// bit-exact.
inline VoxelGrid random_grid(Rng& rng, Dims dims, Spacing spacing = {1, 1, 1}) {
  std::vector<double> data(dims.count());
  for (auto& v : data) v = double(float(rng.uniform(-10.0, 10.0)));
  return VoxelGrid(dims, spacing, std::move(data));
}

inline LabelMap random_labels(Rng& rng, Dims dims, std::uint16_t max_label,
                              Spacing spacing = {1, 1, 1}) {
  std::vector<std::uint16_t> labels(dims.count());
  for (auto& l : labels)
    l = std::uint16_t(rng.uniform_int(max_label + 1));  // 0 = background
  return LabelMap(dims, spacing, std::move(labels));
}

class TempDir {
public:
  explicit TempDir(const std::string& tag) {
    dir_ = std::filesystem::temp_directory_path() /
           ("vcstk_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir_);
    std::filesystem::create_directories(dir_);
  }
  ~TempDir() { std::filesystem::remove_all(dir_); }
  const std::filesystem::path& path() const { return dir_; }

private:
  std::filesystem::path dir_;
};

}  // namespace vcstk::testing
