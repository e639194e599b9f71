#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vcstk/region.hpp"

namespace vcstk {

// One patient's longitudinal region volumes V_n^t (mm^3).
struct LongitudinalRecord {
  std::string patient_id;
  std::vector<int> timepoints;  // ascending, first = 0
  std::map<std::pair<RegionId, int>, double> volumes;

  void validate() const;
};

// Volume change per region between first and last visit. Positive means
// shrinkage: dV = V(t=0) - V(t=T).
std::map<RegionId, double> delta_volumes(const LongitudinalRecord& rec);

// Standard Pearson r, double accumulation, clamped to [-1, 1].
double pearson(std::span<const double> a, std::span<const double> b);

struct SkippedPatient {
  std::string patient_id;
  std::string reason;
};

struct ScatterPair {
  RegionId region_id;
  double s;
  double delta_v;
};

struct VcsReport {
  std::map<std::string, double> per_patient;  // P_i, in [-1, 1]
  double vcs = 0.0;                           // mean of per_patient
  std::map<std::string, std::vector<ScatterPair>> pairs;
  std::vector<SkippedPatient> skipped;
};

struct VcsOptions {
  // A patient whose saliency/delta-V region sets overlap on less than this
  // fraction of their union is treated as a data problem, not silently
  // intersected away.
  double max_region_mismatch_fraction = 0.2;
};

using PatientDeltas = std::pair<RegionSaliency, std::map<RegionId, double>>;

// Per-patient Pearson over the region-id intersection (ascending ids), then
// the cohort mean. Patients with undefined correlation are skipped with a
// recorded reason.
VcsReport vcs(const std::vector<PatientDeltas>& cohort,
              const VcsOptions& options = {});

struct ClassificationMetrics {
  double accuracy = 0.0;
  std::optional<double> sensitivity;  // undefined when no true positives exist
  std::optional<double> specificity;  // undefined when no true negatives exist
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
};

// Binary task: AD = positive (label 1), NC = negative (label 0).
ClassificationMetrics classification_metrics(
    const std::vector<std::pair<int, int>>& predicted_true);

std::string scatter_csv(const VcsReport& report);
std::string boxplot_csv(
    const std::vector<std::pair<std::string, VcsReport>>& reports);
std::string report_json(const VcsReport& report);

// Longitudinal-volumes CSV: patient_id,region_id,timepoint,volume_mm3.
std::vector<LongitudinalRecord> read_volumes_csv(
    const std::filesystem::path& path);
std::string volumes_csv(const std::vector<LongitudinalRecord>& records);

// RegionSaliency CSV as emitted by saliency_csv().
std::vector<RegionSaliency> read_saliency_csv(
    const std::filesystem::path& path);

}  // namespace vcstk
