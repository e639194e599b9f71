#pragma once

#include <filesystem>

#include "vcstk/metrics.hpp"
#include "vcstk/volume.hpp"

namespace vcstk {

// Synthetic longitudinal cohort: non-overlapping ellipsoid "regions" inside a
// small volume, AD patients lose per-region volume each timepoint at planted
// rates, NC patients barely change. Region intensity is dimmed for AD in
// proportion to its atrophy rate so the classification task is learnable.
struct PhantomSpec {
  Dims dims{32, 32, 32};
  Spacing spacing{1.0, 1.0, 1.0};
  std::size_t num_regions = 12;
  // Fractional volume loss per timepoint for AD, per region; filled by
  // default_rates() when empty. Each rate must lie in [0, 0.5).
  std::map<RegionId, double> atrophy_rates;
  double nc_rate = 0.004;
  // Per-region mean intensity; filled by default_contrast() when empty.
  std::map<RegionId, double> intensity_contrast;
  // Multiplies rate to give the AD intensity dimming of a region.
  double dimming_per_rate = 0.8;
  double noise_sigma = 0.05;
  double background_intensity = 0.0;
  double csf_intensity = 0.1;  // vacated voxels after shrinkage
  int timepoints = 3;          // sessions t = 0 .. timepoints-1
  std::uint64_t seed = 0;

  void fill_defaults();
  void validate() const;
};

struct PhantomSession {
  int timepoint = 0;
  VoxelGrid image;
  LabelMap labels;
};

struct PhantomPatient {
  std::string id;
  int label = 0;  // 1 = AD, 0 = NC
  std::vector<PhantomSession> sessions;
  LongitudinalRecord volumes;  // voxelized, from the label maps
  // Analytic ellipsoid volumes at t=0 and the planted per-timepoint rates.
  std::map<RegionId, double> analytic_volume_t0;
  std::map<RegionId, double> planted_rates;
};

struct PhantomCohort {
  PhantomSpec spec;
  std::vector<PhantomPatient> patients;
};

PhantomCohort generate_cohort(const PhantomSpec& spec, std::size_t n_ad,
                              std::size_t n_nc);

// Writes one NIfTI image + label map per session plus manifest.csv and
// volumes.csv under `dir`.
void write_cohort(const PhantomCohort& cohort,
                  const std::filesystem::path& dir);

struct ManifestRow {
  std::string patient_id;
  std::string cls;  // "AD" | "NC"
  int timepoint = 0;
  std::filesystem::path image;
  std::filesystem::path labels;
};

std::vector<ManifestRow> read_manifest(const std::filesystem::path& path);

}  // namespace vcstk
