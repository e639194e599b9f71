#pragma once

#include "vcstk/phantom.hpp"
#include "vcstk/train.hpp"

namespace vcstk {

inline constexpr const char* kToolkitVersion = "0.1.0";

// Training scalar type; gradient-check suites instantiate the engine with
// double independently of this.
using Real = float;

// One structured config file drives every training strategy. Unknown keys
// are an error so typos fail loudly.
ad::TrainConfig parse_train_config(const std::string& json_text);
ad::TrainConfig load_train_config(const std::filesystem::path& path);
std::string train_config_json(const ad::TrainConfig& cfg);

// Baseline-session (t=0) images and labels from a cohort manifest.
ad::Dataset<Real> load_baseline_dataset(const std::vector<ManifestRow>& rows);

// |dJ/dx| at the true label; the saliency volume for one image.
VoxelGrid saliency_map(const ad::Model<Real>& model, const VoxelGrid& image,
                       int label);

// Provenance JSON written next to every CLI output.
void write_provenance(const std::filesystem::path& path,
                      const std::string& subcommand,
                      const std::string& config_json, std::uint64_t seed);

}  // namespace vcstk
