#pragma once

#include <sstream>

#include "vcstk/attack.hpp"
#include "vcstk/mask.hpp"

namespace vcstk::ad {

enum class Strategy { Base, Fgsm, FgsmMask };

inline std::string strategy_name(Strategy s) {
  switch (s) {
    case Strategy::Base: return "base";
    case Strategy::Fgsm: return "fgsm";
    default: return "fgsm+mask";
  }
}

inline Strategy parse_strategy(const std::string& s) {
  if (s == "base") return Strategy::Base;
  if (s == "fgsm") return Strategy::Fgsm;
  if (s == "fgsm+mask" || s == "fgsm_mask") return Strategy::FgsmMask;
  throw ConfigError("unknown strategy \"" + s +
                    "\" (expected base | fgsm | fgsm+mask)");
}

template <typename T>
struct Dataset {
  Dims dims;
  std::vector<std::vector<T>> images;  // one volume each, x-fastest
  std::vector<int> labels;             // 1 = AD, 0 = NC
  std::vector<std::string> ids;

  std::size_t size() const { return images.size(); }
};

struct TrainConfig {
  Strategy strategy = Strategy::Base;
  int epochs = 20;
  std::size_t batch_size = 8;
  double lr = 1e-2;
  double momentum = 0.9;
  std::uint64_t seed = 0;
  FgsmConfig fgsm;
  ConsistencyConfig consistency;
  MaskSpec mask;

  void validate() const {
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(lr > 0)) throw ConfigError("lr must be > 0");
    if (!(momentum >= 0) || !(momentum < 1))
      throw ConfigError("momentum must be in [0, 1)");
    fgsm.validate();
    consistency.validate();
    mask.validate();
  }
};

struct TrainLogRow {
  int epoch;
  std::string split;
  double loss;
  double accuracy;
};

using TrainLog = std::vector<TrainLogRow>;

inline std::string train_log_csv(const TrainLog& log) {
  std::ostringstream out;
  out << "epoch,split,loss,acc\n";
  for (const auto& row : log)
    out << row.epoch << ',' << row.split << ',' << row.loss << ','
        << row.accuracy << '\n';
  return out.str();
}

template <typename T>
struct EvalResult {
  double loss = 0.0;
  double accuracy = 0.0;
  std::vector<int> predictions;
};

template <typename T>
EvalResult<T> evaluate(const Model<T>& model, const Dataset<T>& data,
                       std::size_t batch_size = 8) {
  EvalResult<T> res;
  const std::size_t voxels = data.dims.count();
  std::size_t correct = 0;
  double loss_sum = 0.0;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    const std::size_t B = std::min(batch_size, data.size() - start);
    std::vector<T> batch(B * voxels);
    std::vector<int> labels(B);
    for (std::size_t b = 0; b < B; ++b) {
      std::copy(data.images[start + b].begin(), data.images[start + b].end(),
                batch.begin() + b * voxels);
      labels[b] = data.labels[start + b];
    }
    auto x = Tensor<T>::from({B, 1, data.dims.nx, data.dims.ny, data.dims.nz},
                             std::move(batch));
    auto logits = forward(model, x);
    loss_sum +=
        double(softmax_cross_entropy(logits, labels).scalar()) * double(B);
    const std::size_t C = logits.shape()[1];
    for (std::size_t b = 0; b < B; ++b) {
      const T* row = logits.values().data() + b * C;
      int best = 0;
      for (std::size_t c = 1; c < C; ++c)
        if (row[c] > row[best]) best = int(c);
      res.predictions.push_back(best);
      if (best == labels[b]) ++correct;
    }
  }
  res.loss = data.size() ? loss_sum / double(data.size()) : 0.0;
  res.accuracy = data.size() ? double(correct) / double(data.size()) : 0.0;
  return res;
}

// SGD with momentum over whatever gradients have been accumulated.
template <typename T>
class SgdOptimizer {
public:
  SgdOptimizer(double lr, double momentum) : lr_(lr), momentum_(momentum) {}

  void step(Model<T>& model) {
    if (velocity_.empty()) {
      for (const auto& p : model.params)
        velocity_.emplace_back(p.size(), T(0));
    }
    for (std::size_t pi = 0; pi < model.params.size(); ++pi) {
      auto& p = model.params[pi];
      const auto& g = p.grad();
      auto& v = velocity_[pi];
      auto& w = p.values_mut();
      for (std::size_t i = 0; i < w.size(); ++i) {
        v[i] = T(momentum_) * v[i] + g[i];
        w[i] -= T(lr_) * v[i];
      }
    }
  }

private:
  double lr_, momentum_;
  std::vector<std::vector<T>> velocity_;
};

// Trains in place and returns the per-epoch log. Per-epoch data order and
// per-image mask streams depend only on (seed, epoch, image index), never on
// the strategy, so strategies see identical data given identical seeds.
template <typename T>
TrainLog train(Model<T>& model, const Dataset<T>& data,
               const TrainConfig& cfg) {
  cfg.validate();
  if (data.size() == 0) throw SingleClassDataset("empty dataset");
  bool has_pos = false, has_neg = false;
  for (int y : data.labels) (y == 1 ? has_pos : has_neg) = true;
  if (!has_pos || !has_neg)
    throw SingleClassDataset("dataset must contain both AD and NC");

  const Dims dims = data.dims;
  const std::size_t voxels = dims.count();
  const auto blocks = partition_blocks(dims, cfg.mask.block_edge);
  SgdOptimizer<T> opt(cfg.lr, cfg.momentum);
  TrainLog log;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<std::size_t> order(data.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffle_rng = Rng::derive(cfg.seed, 100, std::uint64_t(epoch));
    shuffle_rng.shuffle(order);

    const bool masking =
        cfg.strategy == Strategy::FgsmMask &&
        double(epoch) >= cfg.mask.activation_epoch_fraction * cfg.epochs;

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size();
         start += cfg.batch_size) {
      const std::size_t B = std::min(cfg.batch_size, order.size() - start);
      const Shape shape{B, 1, dims.nx, dims.ny, dims.nz};
      std::vector<T> batch(B * voxels);
      std::vector<int> labels(B);
      for (std::size_t b = 0; b < B; ++b) {
        const std::size_t idx = order[start + b];
        std::copy(data.images[idx].begin(), data.images[idx].end(),
                  batch.begin() + b * voxels);
        labels[b] = data.labels[idx];
      }

      if (masking) {
        const Model<T> frozen =
            cfg.mask.tau < 1.0 ? model.detached() : Model<T>{};
        for (std::size_t b = 0; b < B; ++b) {
          const std::size_t idx = order[start + b];
          Rng mask_rng =
              Rng::derive(cfg.seed, 3, std::uint64_t(epoch), idx);
          std::vector<double> grad;
          if (cfg.mask.tau < 1.0) {
            // Greedy scores come from the current model's input gradient on
            // the unmasked image.
            const auto g = input_gradient(
                frozen, data.images[idx],
                {1, 1, dims.nx, dims.ny, dims.nz}, {data.labels[idx]});
            grad.assign(g.begin(), g.end());
          }
          const auto sel = select_mask(dims, grad, cfg.mask, mask_rng);
          std::vector<T> img(batch.begin() + b * voxels,
                             batch.begin() + (b + 1) * voxels);
          apply_mask(img, dims, blocks, sel.block_ids, T(cfg.mask.fill_value));
          std::copy(img.begin(), img.end(), batch.begin() + b * voxels);
        }
      }

      model.zero_grads();
      double batch_loss;
      if (cfg.strategy == Strategy::Base) {
        auto loss =
            loss_xent(model, Tensor<T>::from(shape, batch), labels);
        backward(loss);
        batch_loss = double(loss.scalar());
      } else {
        const auto adv = fgsm_attack(model, batch, shape, labels, cfg.fgsm);
        batch_loss = accumulate_consistency_gradients(
            model, batch, adv, shape, labels, cfg.consistency);
      }
      opt.step(model);
      loss_sum += batch_loss * double(B);
    }

    const auto eval = evaluate(model, data, cfg.batch_size);
    log.push_back({epoch, "train", loss_sum / double(data.size()),
                   eval.accuracy});
  }
  return log;
}

}  // namespace vcstk::ad
