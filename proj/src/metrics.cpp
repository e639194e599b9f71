#include "vcstk/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "vcstk/errors.hpp"
#include "vcstk/io_util.hpp"

namespace vcstk {

void LongitudinalRecord::validate() const {
  if (timepoints.size() < 2)
    throw MissingTimepoint(patient_id + ": need at least two timepoints");
  if (!std::is_sorted(timepoints.begin(), timepoints.end()))
    throw MissingTimepoint(patient_id + ": timepoints must be ascending");
  const int t0 = timepoints.front();
  const int tT = timepoints.back();
  std::set<RegionId> first, last;
  for (const auto& [key, v] : volumes) {
    if (!(v > 0.0) || !std::isfinite(v))
      throw NonFiniteValue(patient_id + ": volumes must be finite and > 0");
    if (key.second == t0) first.insert(key.first);
    if (key.second == tT) last.insert(key.first);
  }
  if (first.empty())
    throw MissingTimepoint(patient_id + ": no volumes at t=0");
  if (first != last)
    throw RegionMismatch(patient_id +
                         ": region sets differ between t=0 and t=T");
}

std::map<RegionId, double> delta_volumes(const LongitudinalRecord& rec) {
  rec.validate();
  const int t0 = rec.timepoints.front();
  const int tT = rec.timepoints.back();
  std::map<RegionId, double> out;
  for (const auto& [key, v0] : rec.volumes) {
    if (key.second != t0) continue;
    const auto last = rec.volumes.find({key.first, tT});
    if (last == rec.volumes.end())
      throw MissingTimepoint(rec.patient_id + ": region " +
                             std::to_string(key.first) + " missing at t=T");
    out[key.first] = v0 - last->second;
  }
  return out;
}

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw LengthMismatch("pearson: vectors of length " +
                         std::to_string(a.size()) + " and " +
                         std::to_string(b.size()));
  const std::size_t n = a.size();
  if (n < 2) throw TooShort("pearson: need at least 2 samples");
  double mean_a = 0.0, mean_b = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mean_a += a[i];
    mean_b += b[i];
  }
  mean_a /= double(n);
  mean_b /= double(n);
  double saa = 0.0, sbb = 0.0, sab = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = a[i] - mean_a;
    const double db = b[i] - mean_b;
    saa += da * da;
    sbb += db * db;
    sab += da * db;
  }
  if (saa == 0.0 || sbb == 0.0)
    throw ZeroVariance("pearson: constant input vector");
  // sqrt(saa*sbb) rather than sqrt(saa)*sqrt(sbb): for identical inputs
  // sab == saa == sbb and IEEE sqrt(x*x) == x, so r is exactly 1.
  const double r = sab / std::sqrt(saa * sbb);
  return std::clamp(r, -1.0, 1.0);
}

VcsReport vcs(const std::vector<PatientDeltas>& cohort,
              const VcsOptions& options) {
  if (cohort.empty()) throw EmptyCohort("vcs: no patients");
  VcsReport report;
  double sum = 0.0;
  std::size_t kept = 0;
  for (const auto& [sal, deltas] : cohort) {
    const std::string& pid = sal.patient_id;
    std::vector<RegionId> common;
    std::size_t union_size = deltas.size();
    for (const auto& [id, _] : sal.values) {
      if (deltas.count(id))
        common.push_back(id);
      else
        ++union_size;
    }
    // map iteration is ascending, so `common` is already sorted
    if (union_size > 0) {
      const double mismatch =
          1.0 - double(common.size()) / double(union_size);
      if (mismatch > options.max_region_mismatch_fraction)
        throw RegionMismatch(pid + ": saliency/volume region sets overlap on " +
                             std::to_string(common.size()) + " of " +
                             std::to_string(union_size) + " regions");
    }
    if (common.size() < 2) {
      report.skipped.push_back({pid, "TooShort"});
      continue;
    }
    std::vector<double> s, dv;
    auto& pairs = report.pairs[pid];
    for (RegionId id : common) {
      s.push_back(sal.values.at(id));
      dv.push_back(deltas.at(id));
      pairs.push_back({id, sal.values.at(id), deltas.at(id)});
    }
    try {
      const double r = pearson(s, dv);
      report.per_patient[pid] = r;
      sum += r;
      ++kept;
    } catch (const ZeroVariance&) {
      report.pairs.erase(pid);
      report.skipped.push_back({pid, "ZeroVariance"});
    }
  }
  if (kept == 0) throw AllPatientsSkipped("vcs: every patient was skipped");
  report.vcs = sum / double(kept);
  return report;
}

ClassificationMetrics classification_metrics(
    const std::vector<std::pair<int, int>>& predicted_true) {
  ClassificationMetrics m;
  for (const auto& [pred, truth] : predicted_true) {
    if (truth == 1)
      pred == 1 ? ++m.tp : ++m.fn;
    else
      pred == 0 ? ++m.tn : ++m.fp;
  }
  const std::size_t total = predicted_true.size();
  if (total == 0) throw EmptyCohort("classification_metrics: no predictions");
  m.accuracy = double(m.tp + m.tn) / double(total);
  if (m.tp + m.fn > 0) m.sensitivity = double(m.tp) / double(m.tp + m.fn);
  if (m.tn + m.fp > 0) m.specificity = double(m.tn) / double(m.tn + m.fp);
  return m;
}

std::string scatter_csv(const VcsReport& report) {
  std::ostringstream out;
  out << "patient_id,region_id,delta_v,s\n";
  for (const auto& [pid, pairs] : report.pairs)
    for (const auto& p : pairs)
      out << pid << ',' << p.region_id << ',' << format_double(p.delta_v)
          << ',' << format_double(p.s) << '\n';
  return out.str();
}

std::string boxplot_csv(
    const std::vector<std::pair<std::string, VcsReport>>& reports) {
  std::ostringstream out;
  out << "model_name,patient_id,p_i\n";
  for (const auto& [name, report] : reports)
    for (const auto& [pid, r] : report.per_patient)
      out << name << ',' << pid << ',' << format_double(r) << '\n';
  return out.str();
}

std::string report_json(const VcsReport& report) {
  std::ostringstream out;
  out << "{\n  \"vcs\": " << format_double(report.vcs)
      << ",\n  \"delta_v_convention\": \"V(t=0) - V(t=T), shrinkage positive\""
      << ",\n  \"per_patient\": {";
  bool first = true;
  for (const auto& [pid, r] : report.per_patient) {
    out << (first ? "" : ",") << "\n    \"" << pid
        << "\": " << format_double(r);
    first = false;
  }
  out << "\n  },\n  \"skipped\": [";
  first = true;
  for (const auto& s : report.skipped) {
    out << (first ? "" : ",") << "\n    {\"patient_id\": \"" << s.patient_id
        << "\", \"reason\": \"" << s.reason << "\"}";
    first = false;
  }
  out << "\n  ]\n}\n";
  return out.str();
}

std::vector<LongitudinalRecord> read_volumes_csv(
    const std::filesystem::path& path) {
  const auto rows = read_csv(path);
  if (rows.empty() || rows[0].size() != 4)
    throw IoError(path.string() +
                  ": expected header patient_id,region_id,timepoint,volume_mm3");
  std::map<std::string, LongitudinalRecord> by_patient;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (row.size() != 4)
      throw IoError(path.string() + ": row " + std::to_string(i) +
                    " has " + std::to_string(row.size()) + " fields");
    auto& rec = by_patient[row[0]];
    rec.patient_id = row[0];
    const RegionId region = RegionId(std::stoul(row[1]));
    const int t = std::stoi(row[2]);
    rec.volumes[{region, t}] = std::stod(row[3]);
    if (std::find(rec.timepoints.begin(), rec.timepoints.end(), t) ==
        rec.timepoints.end())
      rec.timepoints.push_back(t);
  }
  std::vector<LongitudinalRecord> out;
  for (auto& [_, rec] : by_patient) {
    std::sort(rec.timepoints.begin(), rec.timepoints.end());
    rec.validate();
    out.push_back(std::move(rec));
  }
  return out;
}

std::string volumes_csv(const std::vector<LongitudinalRecord>& records) {
  std::ostringstream out;
  out << "patient_id,region_id,timepoint,volume_mm3\n";
  for (const auto& rec : records)
    for (const auto& [key, v] : rec.volumes)
      out << rec.patient_id << ',' << key.first << ',' << key.second << ','
          << format_double(v) << '\n';
  return out.str();
}

std::vector<RegionSaliency> read_saliency_csv(
    const std::filesystem::path& path) {
  const auto rows = read_csv(path);
  if (rows.empty() || rows[0].size() < 3)
    throw IoError(path.string() + ": expected header patient_id,region_id,s,...");
  std::map<std::string, RegionSaliency> by_patient;
  std::vector<std::string> order;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    auto it = by_patient.find(row[0]);
    if (it == by_patient.end()) {
      order.push_back(row[0]);
      it = by_patient.emplace(row[0], RegionSaliency{row[0], {}}).first;
    }
    it->second.values[RegionId(std::stoul(row[1]))] = std::stod(row[2]);
  }
  std::vector<RegionSaliency> out;
  for (const auto& pid : order) out.push_back(by_patient.at(pid));
  return out;
}

}  // namespace vcstk
