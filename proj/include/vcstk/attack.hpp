#pragma once

#include "vcstk/net.hpp"

namespace vcstk::ad {

enum class FgsmTargetMode {
  // x += alpha * sign(grad_x J(theta, x, y)): untargeted loss ascent.
  AscendTrueLabel,
  // x -= alpha * sign(grad_x J(theta, x, 1-y)): targeted step toward the
  // adverse class. Default; matches the misclassification outcome the
  // attack is meant to produce.
  DescendAdverseLabel,
};

struct FgsmConfig {
  double alpha = 0.01;
  double epsilon = 0.05;
  int steps = 1;
  FgsmTargetMode target_mode = FgsmTargetMode::DescendAdverseLabel;

  void validate() const {
    if (!(alpha >= 0) || !std::isfinite(alpha))
      throw ConfigError("fgsm alpha must be finite and >= 0");
    if (!(epsilon > 0) || !std::isfinite(epsilon))
      throw ConfigError("fgsm epsilon must be finite and > 0");
    if (steps < 1) throw ConfigError("fgsm steps must be >= 1");
  }
};

template <typename T>
inline T sign_of(T v) {
  return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0));
}

// Iterated FGSM on a batch. Each step moves every voxel by alpha in the
// gradient-sign direction (zero-gradient voxels stay put), then the result is
// clamped into the infinity-norm epsilon ball around the original batch.
template <typename T>
std::vector<T> fgsm_attack(const Model<T>& model,
                           const std::vector<T>& batch_values,
                           const Shape& shape, const std::vector<int>& labels,
                           const FgsmConfig& cfg) {
  cfg.validate();
  std::vector<int> attack_labels = labels;
  if (cfg.target_mode == FgsmTargetMode::DescendAdverseLabel)
    for (auto& y : attack_labels) y = 1 - y;
  const T step = cfg.target_mode == FgsmTargetMode::AscendTrueLabel
                     ? T(cfg.alpha)
                     : T(-cfg.alpha);
  // The attack must not leak gradients into the model's parameters.
  const Model<T> frozen = model.detached();
  std::vector<T> adv = batch_values;
  for (int t = 0; t < cfg.steps; ++t) {
    const auto grad = input_gradient(frozen, adv, shape, attack_labels);
    for (std::size_t i = 0; i < adv.size(); ++i) {
      adv[i] += step * sign_of(grad[i]);
      const T lo = batch_values[i] - T(cfg.epsilon);
      const T hi = batch_values[i] + T(cfg.epsilon);
      adv[i] = std::clamp(adv[i], lo, hi);
    }
  }
  return adv;
}

struct ConsistencyConfig {
  double lambda = 1.0;
  // Step for the central-difference surrogate used for the parameter
  // gradient of the gradient-difference penalty (see
  // accumulate_consistency_gradients).
  double fd_step = 1e-3;

  void validate() const {
    if (!(lambda >= 0) || !std::isfinite(lambda))
      throw ConfigError("consistency lambda must be finite and >= 0");
  }
};

// L_con = J(x) + J(x') + lambda * ||grad_x J(x) - grad_x' J(x')||_2^2.
template <typename T>
double consistency_loss_value(const Model<T>& model, const std::vector<T>& x,
                              const std::vector<T>& x_adv, const Shape& shape,
                              const std::vector<int>& labels,
                              const ConsistencyConfig& cfg) {
  cfg.validate();
  if (x.size() != x_adv.size())
    throw ShapeMismatch("consistency loss: x and x_adv sizes differ");
  const Model<T> frozen = model.detached();  // pure evaluation
  const double j_clean =
      double(loss_xent(frozen, Tensor<T>::from(shape, x), labels).scalar());
  const double j_adv =
      double(loss_xent(frozen, Tensor<T>::from(shape, x_adv), labels)
                 .scalar());
  const auto g_clean = input_gradient(frozen, x, shape, labels);
  const auto g_adv = input_gradient(frozen, x_adv, shape, labels);
  double penalty = 0.0;
  for (std::size_t i = 0; i < g_clean.size(); ++i) {
    const double d = double(g_clean[i]) - double(g_adv[i]);
    penalty += d * d;
  }
  return j_clean + j_adv + cfg.lambda * penalty;
}

// Accumulates d L_con / d theta into the model's parameter grads and returns
// the loss value. The cross-entropy terms are differentiated exactly on the
// tape. The penalty term needs d/d theta of input gradients (a double
// backward); here it is replaced by a central-difference surrogate:
//   d/d theta (v^T grad_x J(theta, z))
//     ~ [grad_theta J(theta, z + r v) - grad_theta J(theta, z - r v)] / (2 r)
// with v = grad_x J(x) - grad_x J(x'), which costs four extra tape sweeps.
template <typename T>
double accumulate_consistency_gradients(Model<T>& model,
                                        const std::vector<T>& x,
                                        const std::vector<T>& x_adv,
                                        const Shape& shape,
                                        const std::vector<int>& labels,
                                        const ConsistencyConfig& cfg) {
  cfg.validate();
  if (x.size() != x_adv.size())
    throw ShapeMismatch("consistency loss: x and x_adv sizes differ");

  auto xt = Tensor<T>::from(shape, x, true);
  auto loss_clean = loss_xent(model, xt, labels);
  backward(loss_clean);
  const auto g_clean = xt.grad();

  auto at = Tensor<T>::from(shape, x_adv, true);
  auto loss_adv = loss_xent(model, at, labels);
  backward(loss_adv);
  const auto g_adv = at.grad();

  std::vector<T> v(g_clean.size());
  double penalty = 0.0;
  T vmax = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] = g_clean[i] - g_adv[i];
    penalty += double(v[i]) * double(v[i]);
    vmax = std::max(vmax, std::abs(v[i]));
  }
  const double total =
      double(loss_clean.scalar()) + double(loss_adv.scalar()) +
      cfg.lambda * penalty;

  if (cfg.lambda > 0.0 && vmax > T(0)) {
    const double r = cfg.fd_step / double(vmax);
    auto sweep = [&](const std::vector<T>& z, double shift_dir,
                     double weight_dir) {
      // grads of J at z + shift_dir*r*v, scaled by weight_dir*lambda/r
      std::vector<T> shifted(z.size());
      for (std::size_t i = 0; i < z.size(); ++i)
        shifted[i] = z[i] + T(shift_dir * r) * v[i];
      auto loss = loss_xent(model, Tensor<T>::from(shape, shifted), labels);
      backward(scale(loss, T(weight_dir * cfg.lambda / r)));
    };
    sweep(x, +1.0, +1.0);
    sweep(x, -1.0, -1.0);
    sweep(x_adv, +1.0, -1.0);
    sweep(x_adv, -1.0, +1.0);
  }
  return total;
}

}  // namespace vcstk::ad
