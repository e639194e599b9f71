#include "vcstk/phantom.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

#include "vcstk/io_util.hpp"
#include "vcstk/nifti.hpp"
#include "vcstk/rng.hpp"

namespace vcstk {

namespace {

struct Ellipsoid {
  double cx, cy, cz;
  double rx, ry, rz;

  bool contains(double x, double y, double z) const {
    const double dx = (x - cx) / rx;
    const double dy = (y - cy) / ry;
    const double dz = (z - cz) / rz;
    return dx * dx + dy * dy + dz * dz <= 1.0;
  }
  double volume(const Spacing& sp) const {
    return 4.0 / 3.0 * M_PI * rx * ry * rz * sp.voxel_volume();
  }
};

// Lattice of cells, one region per cell; radii below the half-extent keep
// regions disjoint by construction.
struct Layout {
  std::size_t lx, ly, lz;
  double cell_x, cell_y, cell_z;
};

Layout make_layout(const PhantomSpec& spec) {
  const std::size_t n = spec.num_regions;
  std::size_t lx = std::size_t(std::ceil(std::cbrt(double(n))));
  std::size_t ly = std::size_t(
      std::ceil(std::sqrt(double(n) / double(lx))));
  std::size_t lz = (n + lx * ly - 1) / (lx * ly);
  return {lx, ly, lz, double(spec.dims.nx) / double(lx),
          double(spec.dims.ny) / double(ly), double(spec.dims.nz) / double(lz)};
}

}  // namespace

void PhantomSpec::fill_defaults() {
  if (atrophy_rates.empty())
    for (std::size_t k = 1; k <= num_regions; ++k)
      atrophy_rates[RegionId(k)] =
          num_regions > 1 ? 0.25 * double(k - 1) / double(num_regions - 1)
                          : 0.15;
  if (intensity_contrast.empty())
    for (std::size_t k = 1; k <= num_regions; ++k)
      intensity_contrast[RegionId(k)] =
          num_regions > 1
              ? 0.45 + 0.45 * double(k - 1) / double(num_regions - 1)
              : 0.7;
}

void PhantomSpec::validate() const {
  if (num_regions == 0 || num_regions > 95)
    throw ConfigError("phantom num_regions must be in [1, 95]");
  if (timepoints < 2) throw ConfigError("phantom timepoints must be >= 2");
  if (!(noise_sigma >= 0.0)) throw ConfigError("noise_sigma must be >= 0");
  for (const auto& [id, r] : atrophy_rates)
    if (!(r >= 0.0) || !(r < 0.5))
      throw ConfigError("atrophy rate for region " + std::to_string(id) +
                        " outside [0, 0.5)");
  if (!(nc_rate >= 0.0) || !(nc_rate < 0.5))
    throw ConfigError("nc_rate outside [0, 0.5)");
}

PhantomCohort generate_cohort(const PhantomSpec& spec_in, std::size_t n_ad,
                              std::size_t n_nc) {
  PhantomSpec spec = spec_in;
  spec.fill_defaults();
  spec.validate();
  const Layout layout = make_layout(spec);
  const Dims dims = spec.dims;

  PhantomCohort cohort;
  cohort.spec = spec;
  const std::size_t total = n_ad + n_nc;
  for (std::size_t pi = 0; pi < total; ++pi) {
    PhantomPatient patient;
    patient.label = pi < n_ad ? 1 : 0;
    {
      std::ostringstream id;
      id << (patient.label ? "AD" : "NC") << std::setw(4) << std::setfill('0')
         << (patient.label ? pi : pi - n_ad);
      patient.id = id.str();
    }
    Rng geom_rng = Rng::derive(spec.seed, 1, pi);

    // Baseline geometry, jittered per patient.
    std::vector<Ellipsoid> base(spec.num_regions);
    for (std::size_t k = 0; k < spec.num_regions; ++k) {
      const std::size_t ix = k % layout.lx;
      const std::size_t iy = (k / layout.lx) % layout.ly;
      const std::size_t iz = k / (layout.lx * layout.ly);
      Ellipsoid& e = base[k];
      const double jx = geom_rng.uniform(-0.05, 0.05) * layout.cell_x;
      const double jy = geom_rng.uniform(-0.05, 0.05) * layout.cell_y;
      const double jz = geom_rng.uniform(-0.05, 0.05) * layout.cell_z;
      e.cx = (double(ix) + 0.5) * layout.cell_x + jx;
      e.cy = (double(iy) + 0.5) * layout.cell_y + jy;
      e.cz = (double(iz) + 0.5) * layout.cell_z + jz;
      e.rx = geom_rng.uniform(0.55, 0.75) * (layout.cell_x / 2.0 - 0.5);
      e.ry = geom_rng.uniform(0.55, 0.75) * (layout.cell_y / 2.0 - 0.5);
      e.rz = geom_rng.uniform(0.55, 0.75) * (layout.cell_z / 2.0 - 0.5);
      if (e.rx < 1.0 || e.ry < 1.0 || e.rz < 1.0)
        throw RegionOutOfBounds("region " + std::to_string(k + 1) +
                                ": cell too small for an ellipsoid");
      if (e.rx + std::abs(jx) > layout.cell_x / 2.0 ||
          e.ry + std::abs(jy) > layout.cell_y / 2.0 ||
          e.rz + std::abs(jz) > layout.cell_z / 2.0)
        throw RegionsOverlap("region " + std::to_string(k + 1) +
                             " escapes its lattice cell");
      if (e.cx - e.rx < 0 || e.cx + e.rx > double(dims.nx) ||
          e.cy - e.ry < 0 || e.cy + e.ry > double(dims.ny) ||
          e.cz - e.rz < 0 || e.cz + e.rz > double(dims.nz))
        throw RegionOutOfBounds("region " + std::to_string(k + 1) +
                                " outside the volume");
    }

    patient.volumes.patient_id = patient.id;
    for (std::size_t k = 0; k < spec.num_regions; ++k) {
      const RegionId id = RegionId(k + 1);
      const double rate = patient.label ? spec.atrophy_rates.at(id)
                                        : spec.nc_rate;
      patient.planted_rates[id] = rate;
      patient.analytic_volume_t0[id] = base[k].volume(spec.spacing);
    }

    for (int t = 0; t < spec.timepoints; ++t) {
      patient.volumes.timepoints.push_back(t);
      Rng noise_rng = Rng::derive(spec.seed, 2, pi, std::uint64_t(t));

      std::vector<Ellipsoid> current = base;
      for (std::size_t k = 0; k < spec.num_regions; ++k) {
        // Volume scales by (1-rate)^t, so each radius scales by the cube root.
        const double f =
            std::pow(1.0 - patient.planted_rates[RegionId(k + 1)],
                     double(t) / 3.0);
        current[k].rx *= f;
        current[k].ry *= f;
        current[k].rz *= f;
      }

      std::vector<std::uint16_t> labels(dims.count(), 0);
      std::vector<double> image(dims.count(), spec.background_intensity);
      for (std::size_t z = 0; z < dims.nz; ++z)
        for (std::size_t y = 0; y < dims.ny; ++y)
          for (std::size_t x = 0; x < dims.nx; ++x) {
            const double px = double(x) + 0.5, py = double(y) + 0.5,
                         pz = double(z) + 0.5;
            const std::size_t vi = dims.index(x, y, z);
            for (std::size_t k = 0; k < spec.num_regions; ++k) {
              if (current[k].contains(px, py, pz)) {
                const RegionId id = RegionId(k + 1);
                labels[vi] = id;
                double mean = spec.intensity_contrast.at(id);
                if (patient.label)
                  mean *= 1.0 - spec.dimming_per_rate *
                                    patient.planted_rates.at(id);
                image[vi] = mean;
                break;
              }
              if (base[k].contains(px, py, pz)) {
                image[vi] = spec.csf_intensity;  // vacated by shrinkage
                break;
              }
            }
          }
      if (spec.noise_sigma > 0.0)
        for (auto& v : image) v += noise_rng.normal(0.0, spec.noise_sigma);

      LabelMap lm(dims, spec.spacing, std::move(labels));
      const auto vols = region_volumes(lm);
      for (std::size_t k = 0; k < spec.num_regions; ++k) {
        const RegionId id = RegionId(k + 1);
        const auto it = vols.volumes_mm3.find(id);
        if (it == vols.volumes_mm3.end())
          throw RegionOutOfBounds("region " + std::to_string(id) +
                                  " voxelized to nothing at t=" +
                                  std::to_string(t));
        patient.volumes.volumes[{id, t}] = it->second;
      }
      patient.sessions.push_back(
          {t, VoxelGrid(dims, spec.spacing, std::move(image)), std::move(lm)});
    }
    patient.volumes.validate();
    cohort.patients.push_back(std::move(patient));
  }
  return cohort;
}

void write_cohort(const PhantomCohort& cohort,
                  const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ostringstream manifest;
  manifest << "patient_id,class,timepoint,image,labels\n";
  std::vector<LongitudinalRecord> records;
  for (const auto& p : cohort.patients) {
    for (const auto& s : p.sessions) {
      const std::string stem = p.id + "_t" + std::to_string(s.timepoint);
      const auto image_path = dir / (stem + "_img.nii");
      const auto labels_path = dir / (stem + "_seg.nii");
      save_nifti(s.image, image_path);
      save_nifti(s.labels, labels_path);
      manifest << p.id << ',' << (p.label ? "AD" : "NC") << ','
               << s.timepoint << ',' << image_path.filename().string() << ','
               << labels_path.filename().string() << '\n';
    }
    records.push_back(p.volumes);
  }
  write_file_atomic(dir / "manifest.csv", manifest.str());
  write_file_atomic(dir / "volumes.csv", volumes_csv(records));
}

std::vector<ManifestRow> read_manifest(const std::filesystem::path& path) {
  const auto rows = read_csv(path);
  if (rows.empty() || rows[0].size() != 5)
    throw ManifestError(path.string() +
                        ": expected patient_id,class,timepoint,image,labels");
  const auto base = path.parent_path();
  std::vector<ManifestRow> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.size() != 5)
      throw ManifestError(path.string() + ": row " + std::to_string(i) +
                          " has " + std::to_string(r.size()) + " fields");
    if (r[1] != "AD" && r[1] != "NC")
      throw ManifestError(path.string() + ": class must be AD or NC, got " +
                          r[1]);
    ManifestRow row{r[0], r[1], std::stoi(r[2]), base / r[3], base / r[4]};
    if (!std::filesystem::exists(row.image))
      throw ManifestError("missing image file " + row.image.string());
    if (!std::filesystem::exists(row.labels))
      throw ManifestError("missing labels file " + row.labels.string());
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace vcstk
