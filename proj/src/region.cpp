#include "vcstk/region.hpp"

#include <cmath>
#include <set>
#include <sstream>

#include "vcstk/errors.hpp"
#include "vcstk/io_util.hpp"

namespace vcstk {

RegionVolumes region_volumes(const LabelMap& seg) {
  RegionVolumes out;
  for (auto l : seg.labels())
    if (l != 0) ++out.voxel_counts[l];
  const double vox = seg.spacing().voxel_volume();
  for (const auto& [id, count] : out.voxel_counts)
    out.volumes_mm3[id] = double(count) * vox;
  return out;
}

RegionSaliency aggregate_saliency(const VoxelGrid& saliency,
                                  const LabelMap& seg,
                                  const std::string& patient_id,
                                  SaliencyCombine combine) {
  if (saliency.dims() != seg.dims())
    throw DimsMismatch("saliency and segmentation dims differ");
  std::map<RegionId, double> sums;
  std::map<RegionId, std::size_t> counts;
  const auto& g = saliency.data();
  const auto& labels = seg.labels();
  for (std::size_t i = 0; i < g.size(); ++i) {
    const RegionId l = labels[i];
    if (l == 0) continue;
    sums[l] += combine == SaliencyCombine::AbsoluteValue ? std::abs(g[i])
                                                         : g[i];
    ++counts[l];
  }
  RegionSaliency out;
  out.patient_id = patient_id;
  for (const auto& [id, sum] : sums) out.values[id] = sum / double(counts[id]);
  return out;
}

GroupDistribution group_distribution(
    const std::vector<std::pair<RegionSaliency, std::string>>& cohort) {
  if (cohort.empty()) throw EmptyClass("empty cohort");
  // Union of region ids per class; missing regions contribute 0.
  std::map<std::string, std::set<RegionId>> class_regions;
  std::map<std::string, std::size_t> class_counts;
  for (const auto& [sal, cls] : cohort) {
    ++class_counts[cls];
    for (const auto& [id, _] : sal.values) class_regions[cls].insert(id);
  }
  GroupDistribution out;
  for (const auto& [cls, n] : class_counts) {
    if (n == 0) throw EmptyClass("class " + cls + " has no patients");
    auto& means = out.means[cls];
    std::size_t& substituted = out.substituted_zeros[cls];
    substituted = 0;
    for (RegionId id : class_regions[cls]) {
      double sum = 0.0;
      for (const auto& [sal, c] : cohort) {
        if (c != cls) continue;
        auto it = sal.values.find(id);
        if (it == sal.values.end())
          ++substituted;
        else
          sum += it->second;
      }
      means[id] = sum / double(n);
    }
  }
  return out;
}

std::string saliency_csv(
    const std::vector<std::pair<RegionSaliency, RegionVolumes>>& cohort) {
  std::ostringstream out;
  out << "patient_id,region_id,s,voxel_count,volume_mm3\n";
  for (const auto& [sal, vol] : cohort) {
    for (const auto& [id, s] : sal.values) {
      const auto count_it = vol.voxel_counts.find(id);
      const auto mm3_it = vol.volumes_mm3.find(id);
      out << sal.patient_id << ',' << id << ',' << format_double(s) << ','
          << (count_it != vol.voxel_counts.end() ? count_it->second : 0) << ','
          << format_double(mm3_it != vol.volumes_mm3.end() ? mm3_it->second
                                                           : 0.0)
          << '\n';
    }
  }
  return out.str();
}

std::string distribution_csv(const GroupDistribution& dist) {
  std::ostringstream out;
  out << "class,region_id,mean_s\n";
  for (const auto& [cls, means] : dist.means)
    for (const auto& [id, m] : means)
      out << cls << ',' << id << ',' << format_double(m) << '\n';
  return out.str();
}

}  // namespace vcstk
