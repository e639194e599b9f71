#include "vcstk/pipeline.hpp"

#include <nlohmann/json.hpp>

#include "vcstk/io_util.hpp"
#include "vcstk/nifti.hpp"

namespace vcstk {

using nlohmann::json;

ad::TrainConfig parse_train_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  ad::TrainConfig cfg;
  const std::map<std::string, std::function<void(const json&)>> fields = {
      {"strategy",
       [&](const json& v) { cfg.strategy = ad::parse_strategy(v); }},
      {"epochs", [&](const json& v) { cfg.epochs = v; }},
      {"batch_size", [&](const json& v) { cfg.batch_size = v; }},
      {"lr", [&](const json& v) { cfg.lr = v; }},
      {"momentum", [&](const json& v) { cfg.momentum = v; }},
      {"seed", [&](const json& v) { cfg.seed = v; }},
      {"alpha", [&](const json& v) { cfg.fgsm.alpha = v; }},
      {"epsilon", [&](const json& v) { cfg.fgsm.epsilon = v; }},
      {"steps", [&](const json& v) { cfg.fgsm.steps = v; }},
      {"target_mode",
       [&](const json& v) {
         const std::string mode = v;
         if (mode == "descend-adverse-label")
           cfg.fgsm.target_mode = ad::FgsmTargetMode::DescendAdverseLabel;
         else if (mode == "ascend-true-label")
           cfg.fgsm.target_mode = ad::FgsmTargetMode::AscendTrueLabel;
         else
           throw ConfigError("target_mode must be descend-adverse-label or "
                             "ascend-true-label, got " + mode);
       }},
      {"lambda", [&](const json& v) { cfg.consistency.lambda = v; }},
      {"block_edge", [&](const json& v) { cfg.mask.block_edge = v; }},
      {"p_range",
       [&](const json& v) {
         if (!v.is_array() || v.size() != 2)
           throw ConfigError("p_range must be [p_min, p_max]");
         cfg.mask.p_min = v[0];
         cfg.mask.p_max = v[1];
       }},
      {"tau", [&](const json& v) { cfg.mask.tau = v; }},
      {"activation_epoch_fraction",
       [&](const json& v) { cfg.mask.activation_epoch_fraction = v; }},
      {"fill_value", [&](const json& v) { cfg.mask.fill_value = v; }},
  };
  for (const auto& [key, value] : j.items()) {
    const auto it = fields.find(key);
    if (it == fields.end())
      throw ConfigError("unknown config field \"" + key + "\"");
    try {
      it->second(value);
    } catch (const json::exception& e) {
      throw ConfigError("config field \"" + key + "\": " + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

ad::TrainConfig load_train_config(const std::filesystem::path& path) {
  return parse_train_config(read_text_file(path));
}

std::string train_config_json(const ad::TrainConfig& cfg) {
  json j;
  j["strategy"] = ad::strategy_name(cfg.strategy);
  j["epochs"] = cfg.epochs;
  j["batch_size"] = cfg.batch_size;
  j["lr"] = cfg.lr;
  j["momentum"] = cfg.momentum;
  j["seed"] = cfg.seed;
  j["alpha"] = cfg.fgsm.alpha;
  j["epsilon"] = cfg.fgsm.epsilon;
  j["steps"] = cfg.fgsm.steps;
  j["target_mode"] =
      cfg.fgsm.target_mode == ad::FgsmTargetMode::DescendAdverseLabel
          ? "descend-adverse-label"
          : "ascend-true-label";
  j["lambda"] = cfg.consistency.lambda;
  j["block_edge"] = cfg.mask.block_edge;
  j["p_range"] = {cfg.mask.p_min, cfg.mask.p_max};
  j["tau"] = cfg.mask.tau;
  j["activation_epoch_fraction"] = cfg.mask.activation_epoch_fraction;
  j["fill_value"] = cfg.mask.fill_value;
  return j.dump(2) + "\n";
}

ad::Dataset<Real> load_baseline_dataset(const std::vector<ManifestRow>& rows) {
  ad::Dataset<Real> data;
  bool first = true;
  for (const auto& row : rows) {
    if (row.timepoint != 0) continue;
    const auto grid = read_nifti_grid(row.image);
    if (first) {
      data.dims = grid.dims();
      first = false;
    } else if (grid.dims() != data.dims) {
      throw DimsMismatch("manifest images have mixed dims (patient " +
                         row.patient_id + ")");
    }
    std::vector<Real> img(grid.data().begin(), grid.data().end());
    data.images.push_back(std::move(img));
    data.labels.push_back(row.cls == "AD" ? 1 : 0);
    data.ids.push_back(row.patient_id);
  }
  if (data.images.empty())
    throw ManifestError("manifest has no t=0 sessions");
  return data;
}

VoxelGrid saliency_map(const ad::Model<Real>& model, const VoxelGrid& image,
                       int label) {
  if (image.dims() != model.input_dims)
    throw DimsMismatch("image dims do not match the model's input dims");
  std::vector<Real> x(image.data().begin(), image.data().end());
  const auto grad = ad::input_gradient(
      model.detached(), x,
      {1, 1, image.dims().nx, image.dims().ny, image.dims().nz}, {label});
  std::vector<double> g(grad.size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = std::abs(double(grad[i]));
  return VoxelGrid(image.dims(), image.spacing(), std::move(g));
}

void write_provenance(const std::filesystem::path& path,
                      const std::string& subcommand,
                      const std::string& config_json, std::uint64_t seed) {
  json j;
  j["toolkit_version"] = kToolkitVersion;
  j["subcommand"] = subcommand;
  j["seed"] = seed;
  j["config"] = json::parse(config_json);
  write_file_atomic(path, j.dump(2) + "\n");
}

}  // namespace vcstk
