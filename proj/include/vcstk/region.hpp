#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "vcstk/volume.hpp"

namespace vcstk {

using RegionId = std::uint16_t;

// Per-region saliency for one patient: region id -> mean |gradient| inside
// the region (dimensionless under the default absolute-value convention).
struct RegionSaliency {
  std::string patient_id;
  std::map<RegionId, double> values;
};

struct RegionVolumes {
  std::map<RegionId, double> volumes_mm3;
  std::map<RegionId, std::size_t> voxel_counts;
};

// Per-region voxel counts and physical volumes (count * voxel volume).
RegionVolumes region_volumes(const LabelMap& seg);

// How gradients are combined inside a region. AbsoluteValue is the default;
// the signed sum is kept reachable because the upstream convention is unknown.
enum class SaliencyCombine { AbsoluteValue, SignedSum };

// Mean saliency per region: sum over voxels with that label, divided by the
// region's voxel count. Background (label 0) is excluded entirely.
RegionSaliency aggregate_saliency(
    const VoxelGrid& saliency, const LabelMap& seg,
    const std::string& patient_id = "",
    SaliencyCombine combine = SaliencyCombine::AbsoluteValue);

struct GroupDistribution {
  // class label -> region id -> mean S over that class's patients.
  std::map<std::string, std::map<RegionId, double>> means;
  // class label -> number of (patient, region) pairs where the region was
  // absent for the patient and 0 was substituted.
  std::map<std::string, std::size_t> substituted_zeros;
};

// Per-class arithmetic means over patients; regions missing for a patient
// contribute 0 and the substitution is counted.
GroupDistribution group_distribution(
    const std::vector<std::pair<RegionSaliency, std::string>>& cohort);

// CSV surfaces for external plotting.
std::string saliency_csv(
    const std::vector<std::pair<RegionSaliency, RegionVolumes>>& cohort);
std::string distribution_csv(const GroupDistribution& dist);

}  // namespace vcstk
