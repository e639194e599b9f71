#include <CLI11.hpp>
#include <iostream>
#include <nlohmann/json.hpp>

#include "vcstk/io_util.hpp"
#include "vcstk/nifti.hpp"
#include "vcstk/pipeline.hpp"

namespace {

using namespace vcstk;
using json = nlohmann::json;

void save_nifti_atomic(const VoxelGrid& g, const std::filesystem::path& path) {
  const auto tmp = path.string() + ".tmp";
  save_nifti(g, tmp);
  std::filesystem::rename(tmp, path);
}

void save_nifti_atomic(const LabelMap& l, const std::filesystem::path& path) {
  const auto tmp = path.string() + ".tmp";
  save_nifti(l, tmp);
  std::filesystem::rename(tmp, path);
}

std::map<std::string, int> manifest_class_labels(
    const std::vector<ManifestRow>& rows) {
  std::map<std::string, int> out;
  for (const auto& r : rows) out[r.patient_id] = r.cls == "AD" ? 1 : 0;
  return out;
}

int cmd_synth(const std::filesystem::path& out_dir, std::uint64_t seed,
              std::size_t edge, std::size_t regions, std::size_t n_ad,
              std::size_t n_nc, int timepoints, double noise_sigma) {
  PhantomSpec spec;
  spec.dims = {edge, edge, edge};
  spec.num_regions = regions;
  spec.timepoints = timepoints;
  spec.noise_sigma = noise_sigma;
  spec.seed = seed;
  const auto cohort = generate_cohort(spec, n_ad, n_nc);
  write_cohort(cohort, out_dir);
  json cfg{{"dims", edge},       {"regions", regions},
           {"n_ad", n_ad},       {"n_nc", n_nc},
           {"timepoints", timepoints}, {"noise_sigma", noise_sigma}};
  write_provenance(out_dir / "synth.provenance.json", "synth", cfg.dump(),
                   seed);
  std::cout << "wrote cohort with " << cohort.patients.size()
            << " patients to " << out_dir.string() << "\n";
  return 0;
}

int cmd_train(const std::filesystem::path& manifest_path,
              const std::filesystem::path& config_path,
              const std::string& strategy, std::optional<std::uint64_t> seed,
              std::optional<int> epochs,
              const std::filesystem::path& checkpoint_path,
              const std::filesystem::path& log_path) {
  ad::TrainConfig cfg = config_path.empty()
                            ? ad::TrainConfig{}
                            : load_train_config(config_path);
  if (!strategy.empty()) cfg.strategy = ad::parse_strategy(strategy);
  if (seed) cfg.seed = *seed;
  if (epochs) cfg.epochs = *epochs;
  cfg.validate();

  const auto rows = read_manifest(manifest_path);
  const auto data = load_baseline_dataset(rows);
  auto model = ad::Model<Real>::initialized(
      ad::default_architecture(data.dims), data.dims, cfg.seed);
  const auto log = ad::train(model, data, cfg);

  ad::save_checkpoint(model, checkpoint_path.string() + ".tmp");
  std::filesystem::rename(checkpoint_path.string() + ".tmp", checkpoint_path);
  if (!log_path.empty()) write_file_atomic(log_path, ad::train_log_csv(log));
  write_provenance(checkpoint_path.string() + ".provenance.json", "train",
                   train_config_json(cfg), cfg.seed);
  if (!log.empty())
    std::cout << "final train loss " << log.back().loss << ", acc "
              << log.back().accuracy << "\n";
  std::cout << "checkpoint written to " << checkpoint_path.string() << "\n";
  return 0;
}

int cmd_saliency(const std::filesystem::path& checkpoint_path,
                 const std::filesystem::path& manifest_path,
                 const std::filesystem::path& out_dir) {
  const auto model = ad::load_checkpoint<Real>(checkpoint_path);
  const auto rows = read_manifest(manifest_path);
  std::filesystem::create_directories(out_dir);
  std::size_t n = 0;
  for (const auto& row : rows) {
    if (row.timepoint != 0) continue;
    const auto image = read_nifti_grid(row.image);
    const auto sal = saliency_map(model, image, row.cls == "AD" ? 1 : 0);
    save_nifti_atomic(sal, out_dir / (row.patient_id + "_saliency.nii"));
    ++n;
  }
  json cfg{{"checkpoint", checkpoint_path.string()},
           {"manifest", manifest_path.string()}};
  write_provenance(out_dir / "saliency.provenance.json", "saliency",
                   cfg.dump(), model.seed);
  std::cout << "wrote " << n << " saliency volumes to " << out_dir.string()
            << "\n";
  return 0;
}

int cmd_aggregate(const std::filesystem::path& manifest_path,
                  const std::filesystem::path& saliency_dir,
                  const std::filesystem::path& out_csv, bool signed_sum) {
  const auto rows = read_manifest(manifest_path);
  std::vector<std::pair<RegionSaliency, RegionVolumes>> cohort;
  for (const auto& row : rows) {
    if (row.timepoint != 0) continue;
    const auto sal_path = saliency_dir / (row.patient_id + "_saliency.nii");
    const auto sal = read_nifti_grid(sal_path);
    const auto seg = read_nifti_labels(row.labels);
    const auto combine = signed_sum ? SaliencyCombine::SignedSum
                                    : SaliencyCombine::AbsoluteValue;
    cohort.emplace_back(
        aggregate_saliency(sal, seg, row.patient_id, combine),
        region_volumes(seg));
  }
  write_file_atomic(out_csv, saliency_csv(cohort));
  json cfg{{"manifest", manifest_path.string()},
           {"saliency_dir", saliency_dir.string()},
           {"signed_sum", signed_sum}};
  write_provenance(out_csv.string() + ".provenance.json", "aggregate",
                   cfg.dump(), 0);
  std::cout << "wrote region saliency for " << cohort.size()
            << " patients to " << out_csv.string() << "\n";
  return 0;
}

int cmd_distribution(const std::filesystem::path& saliency_csv_path,
                     const std::filesystem::path& manifest_path,
                     const std::filesystem::path& out_csv) {
  const auto saliencies = read_saliency_csv(saliency_csv_path);
  const auto classes = manifest_class_labels(read_manifest(manifest_path));
  std::vector<std::pair<RegionSaliency, std::string>> cohort;
  for (const auto& s : saliencies) {
    const auto it = classes.find(s.patient_id);
    if (it == classes.end())
      throw ManifestError("patient " + s.patient_id + " not in manifest");
    cohort.emplace_back(s, it->second ? "AD" : "NC");
  }
  const auto dist = group_distribution(cohort);
  write_file_atomic(out_csv, distribution_csv(dist));
  for (const auto& [cls, n] : dist.substituted_zeros)
    if (n > 0)
      std::cout << "note: " << n << " absent-region zeros substituted for "
                << cls << "\n";
  json cfg{{"saliency", saliency_csv_path.string()},
           {"manifest", manifest_path.string()}};
  write_provenance(out_csv.string() + ".provenance.json", "distribution",
                   cfg.dump(), 0);
  std::cout << "wrote group distributions to " << out_csv.string() << "\n";
  return 0;
}

int cmd_vcs(const std::filesystem::path& saliency_csv_path,
            const std::filesystem::path& volumes_csv_path,
            const std::filesystem::path& out_json,
            const std::filesystem::path& scatter_path,
            const std::vector<std::string>& extra_reports,
            const std::filesystem::path& boxplot_path) {
  const auto saliencies = read_saliency_csv(saliency_csv_path);
  const auto records = read_volumes_csv(volumes_csv_path);
  std::map<std::string, std::map<RegionId, double>> deltas;
  for (const auto& rec : records) deltas[rec.patient_id] = delta_volumes(rec);
  std::vector<PatientDeltas> cohort;
  for (const auto& s : saliencies) {
    const auto it = deltas.find(s.patient_id);
    if (it == deltas.end())
      throw ManifestError("patient " + s.patient_id +
                          " has no longitudinal volumes");
    cohort.emplace_back(s, it->second);
  }
  const auto report = vcs(cohort);
  write_file_atomic(out_json, report_json(report));
  if (!scatter_path.empty())
    write_file_atomic(scatter_path, scatter_csv(report));
  if (!boxplot_path.empty()) {
    std::vector<std::pair<std::string, VcsReport>> reports;
    for (const auto& spec : extra_reports) {
      const auto eq = spec.find('=');
      if (eq == std::string::npos)
        throw ConfigError("--report expects name=path, got " + spec);
      VcsReport other;
      const auto j = json::parse(read_text_file(spec.substr(eq + 1)));
      for (const auto& [pid, r] : j.at("per_patient").items())
        other.per_patient[pid] = r;
      reports.emplace_back(spec.substr(0, eq), other);
    }
    reports.emplace_back("current", report);
    write_file_atomic(boxplot_path, boxplot_csv(reports));
  }
  json cfg{{"saliency", saliency_csv_path.string()},
           {"volumes", volumes_csv_path.string()}};
  write_provenance(out_json.string() + ".provenance.json", "vcs", cfg.dump(),
                   0);
  std::cout << "VCS = " << report.vcs << " over " << report.per_patient.size()
            << " patients (" << report.skipped.size() << " skipped)\n";
  return 0;
}

int cmd_attack(const std::filesystem::path& checkpoint_path,
               const std::filesystem::path& image_path, int label,
               double alpha, double epsilon, int steps,
               const std::string& mode, const std::filesystem::path& out) {
  const auto model = ad::load_checkpoint<Real>(checkpoint_path);
  const auto image = read_nifti_grid(image_path);
  if (image.dims() != model.input_dims)
    throw DimsMismatch("image dims do not match the model's input dims");
  ad::FgsmConfig cfg;
  cfg.alpha = alpha;
  cfg.epsilon = epsilon;
  cfg.steps = steps;
  cfg.target_mode = mode == "ascend-true-label"
                        ? ad::FgsmTargetMode::AscendTrueLabel
                        : ad::FgsmTargetMode::DescendAdverseLabel;
  const Dims d = image.dims();
  std::vector<Real> x(image.data().begin(), image.data().end());
  const ad::Shape shape{1, 1, d.nx, d.ny, d.nz};
  const auto adv = ad::fgsm_attack(model, x, shape, {label}, cfg);
  const int pred_before =
      ad::predict(model, ad::Tensor<Real>::from(shape, x))[0];
  const int pred_after =
      ad::predict(model, ad::Tensor<Real>::from(shape, adv))[0];
  VoxelGrid adv_grid(d, image.spacing(),
                     std::vector<double>(adv.begin(), adv.end()));
  save_nifti_atomic(adv_grid, out);
  json cfgj{{"alpha", alpha},   {"epsilon", epsilon}, {"steps", steps},
            {"mode", mode},     {"label", label},
            {"image", image_path.string()}};
  write_provenance(out.string() + ".provenance.json", "attack", cfgj.dump(),
                   model.seed);
  std::cout << "prediction before: " << (pred_before ? "AD" : "NC")
            << ", after: " << (pred_after ? "AD" : "NC") << "\n";
  return 0;
}

int cmd_metrics(const std::filesystem::path& checkpoint_path,
                const std::filesystem::path& manifest_path,
                const std::filesystem::path& out_json) {
  const auto model = ad::load_checkpoint<Real>(checkpoint_path);
  const auto data = load_baseline_dataset(read_manifest(manifest_path));
  const auto eval = ad::evaluate(model, data);
  std::vector<std::pair<int, int>> pred_true;
  for (std::size_t i = 0; i < data.size(); ++i)
    pred_true.emplace_back(eval.predictions[i], data.labels[i]);
  const auto m = classification_metrics(pred_true);
  json j{{"acc", m.accuracy},
         {"tp", m.tp},
         {"fp", m.fp},
         {"tn", m.tn},
         {"fn", m.fn}};
  j["sen"] = m.sensitivity ? json(*m.sensitivity) : json();
  j["spe"] = m.specificity ? json(*m.specificity) : json();
  if (!out_json.empty()) write_file_atomic(out_json, j.dump(2) + "\n");
  std::cout << j.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Saliency-map evaluation toolkit for volumetric classifiers"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic cohort");
  std::filesystem::path synth_out;
  std::uint64_t synth_seed = 0;
  std::size_t synth_edge = 32, synth_regions = 12, synth_ad = 20,
              synth_nc = 20;
  int synth_timepoints = 3;
  double synth_noise = 0.05;
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--seed", synth_seed, "rng seed");
  synth->add_option("--dims", synth_edge, "cube edge in voxels");
  synth->add_option("--regions", synth_regions, "number of regions");
  synth->add_option("--ad", synth_ad, "AD patient count");
  synth->add_option("--nc", synth_nc, "NC patient count");
  synth->add_option("--timepoints", synth_timepoints, "sessions per patient");
  synth->add_option("--noise", synth_noise, "intensity noise sigma");

  // train
  auto* train = app.add_subcommand("train", "train a classifier");
  std::filesystem::path train_manifest, train_config, train_ckpt, train_log;
  std::string train_strategy;
  std::optional<std::uint64_t> train_seed;
  std::optional<int> train_epochs;
  train->add_option("--manifest", train_manifest, "cohort manifest.csv")
      ->required();
  train->add_option("--config", train_config, "training config JSON");
  train->add_option("--strategy", train_strategy,
                    "base | fgsm | fgsm+mask (overrides config)");
  train->add_option("--seed", train_seed, "seed (overrides config)");
  train->add_option("--epochs", train_epochs, "epochs (overrides config)");
  train->add_option("--out", train_ckpt, "checkpoint output path")->required();
  train->add_option("--log", train_log, "training log CSV path");

  // saliency
  auto* saliency = app.add_subcommand("saliency",
                                      "per-patient saliency volumes");
  std::filesystem::path sal_ckpt, sal_manifest, sal_out;
  saliency->add_option("--checkpoint", sal_ckpt, "model checkpoint")
      ->required();
  saliency->add_option("--manifest", sal_manifest, "cohort manifest.csv")
      ->required();
  saliency->add_option("--out", sal_out, "output directory")->required();

  // aggregate
  auto* aggregate = app.add_subcommand(
      "aggregate", "overlap saliency volumes with segmentations");
  std::filesystem::path agg_manifest, agg_dir, agg_out;
  bool agg_signed = false;
  aggregate->add_option("--manifest", agg_manifest, "cohort manifest.csv")
      ->required();
  aggregate->add_option("--saliency-dir", agg_dir,
                        "directory from `saliency`")
      ->required();
  aggregate->add_option("--out", agg_out, "region saliency CSV")->required();
  aggregate->add_flag("--signed-sum", agg_signed,
                      "sum signed gradients instead of |gradient|");

  // distribution
  auto* distribution = app.add_subcommand(
      "distribution", "group-averaged region saliency per class");
  std::filesystem::path dist_saliency, dist_manifest, dist_out;
  distribution->add_option("--saliency", dist_saliency, "region saliency CSV")
      ->required();
  distribution->add_option("--manifest", dist_manifest, "cohort manifest.csv")
      ->required();
  distribution->add_option("--out", dist_out, "distribution CSV")->required();

  // vcs
  auto* vcs_cmd = app.add_subcommand("vcs", "volume change score report");
  std::filesystem::path vcs_saliency, vcs_volumes, vcs_out, vcs_scatter,
      vcs_box;
  std::vector<std::string> vcs_reports;
  vcs_cmd->add_option("--saliency", vcs_saliency, "region saliency CSV")
      ->required();
  vcs_cmd->add_option("--volumes", vcs_volumes, "longitudinal volumes CSV")
      ->required();
  vcs_cmd->add_option("--out", vcs_out, "report JSON path")->required();
  vcs_cmd->add_option("--scatter", vcs_scatter, "scatter CSV path");
  vcs_cmd->add_option("--boxplot", vcs_box, "box-plot CSV path");
  vcs_cmd->add_option("--report", vcs_reports,
                      "name=report.json, extra models for --boxplot");

  // attack
  auto* attack = app.add_subcommand("attack", "iterated FGSM on one image");
  std::filesystem::path atk_ckpt, atk_image, atk_out;
  int atk_label = 0, atk_steps = 1;
  double atk_alpha = 0.01, atk_eps = 0.05;
  std::string atk_mode = "descend-adverse-label";
  attack->add_option("--checkpoint", atk_ckpt, "model checkpoint")
      ->required();
  attack->add_option("--image", atk_image, "input NIfTI image")->required();
  attack->add_option("--label", atk_label, "true label (1=AD, 0=NC)")
      ->required();
  attack->add_option("--alpha", atk_alpha, "step size");
  attack->add_option("--epsilon", atk_eps, "infinity-norm ball radius");
  attack->add_option("--steps", atk_steps, "iterations");
  attack->add_option("--mode", atk_mode,
                     "descend-adverse-label | ascend-true-label");
  attack->add_option("--out", atk_out, "adversarial NIfTI path")->required();

  // metrics
  auto* metrics = app.add_subcommand("metrics",
                                     "ACC/SEN/SPE on a cohort manifest");
  std::filesystem::path met_ckpt, met_manifest, met_out;
  metrics->add_option("--checkpoint", met_ckpt, "model checkpoint")
      ->required();
  metrics->add_option("--manifest", met_manifest, "cohort manifest.csv")
      ->required();
  metrics->add_option("--out", met_out, "metrics JSON path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed())
      return cmd_synth(synth_out, synth_seed, synth_edge, synth_regions,
                       synth_ad, synth_nc, synth_timepoints, synth_noise);
    if (train->parsed())
      return cmd_train(train_manifest, train_config, train_strategy,
                       train_seed, train_epochs, train_ckpt, train_log);
    if (saliency->parsed())
      return cmd_saliency(sal_ckpt, sal_manifest, sal_out);
    if (aggregate->parsed())
      return cmd_aggregate(agg_manifest, agg_dir, agg_out, agg_signed);
    if (distribution->parsed())
      return cmd_distribution(dist_saliency, dist_manifest, dist_out);
    if (vcs_cmd->parsed())
      return cmd_vcs(vcs_saliency, vcs_volumes, vcs_out, vcs_scatter,
                     vcs_reports, vcs_box);
    if (attack->parsed())
      return cmd_attack(atk_ckpt, atk_image, atk_label, atk_alpha, atk_eps,
                        atk_steps, atk_mode, atk_out);
    if (metrics->parsed()) return cmd_metrics(met_ckpt, met_manifest, met_out);
  } catch (const vcstk::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
