#include <doctest.h>

#include "helpers.hpp"
#include "vcstk/attack.hpp"

using namespace vcstk;
using namespace vcstk::ad;

namespace {

using T64 = Tensor<double>;

std::vector<double> random_values(Rng& rng, std::size_t n, double scale = 1) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal(0.0, scale);
  return v;
}

// Logistic model over d inputs: logits are (w.x, 0), so the input gradient
// has a closed form and the FGSM step direction is sign(w) exactly.
Model<double> logistic_model(const std::vector<double>& w) {
  Model<double> m;
  const std::size_t d = w.size();
  m.arch = {FlattenSpec{}, DenseSpec{d, 2}};
  m.input_dims = {d, 1, 1};
  std::vector<double> rows(2 * d, 0.0);
  std::copy(w.begin(), w.end(), rows.begin());
  m.params.push_back(T64::from({2, d}, rows, true));
  m.params.push_back(T64::zeros({2}, true));
  return m;
}

double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

}  // namespace

TEST_CASE("fgsm with alpha zero returns the input unchanged") {
  Rng rng(21);
  const Dims dims{10, 10, 10};
  auto model = Model<double>::initialized(default_architecture(dims), dims, 1);
  const auto x = random_values(rng, dims.count());
  FgsmConfig cfg;
  cfg.alpha = 0.0;
  cfg.epsilon = 0.1;
  cfg.steps = 4;
  const auto adv =
      fgsm_attack(model, x, {1, 1, dims.nx, dims.ny, dims.nz}, {0}, cfg);
  CHECK(adv == x);
}

TEST_CASE("fgsm config validation") {
  FgsmConfig cfg;
  cfg.alpha = -0.1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.alpha = 0.01;
  cfg.epsilon = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.epsilon = 0.05;
  cfg.steps = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.steps = 1;
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("fgsm closed-form displacement on the logistic model") {
  Rng rng(22);
  const std::size_t d = 12;
  auto w = random_values(rng, d);
  w[3] = 0.0;  // zero-gradient voxel must stay put
  auto model = logistic_model(w);
  const auto x = random_values(rng, d);
  const Shape shape{1, 1, d, 1, 1};

  SUBCASE("clip dominates: alpha 0.3, epsilon 0.1, one step") {
    FgsmConfig cfg;
    cfg.alpha = 0.3;
    cfg.epsilon = 0.1;
    cfg.steps = 1;
    // descend toward label 1 from true label 0: x_i -= alpha * sign(w_i),
    // clipped to +-epsilon
    const auto adv = fgsm_attack(model, x, shape, {0}, cfg);
    for (std::size_t i = 0; i < d; ++i)
      CHECK(adv[i] - x[i] ==
            doctest::Approx(-0.1 * sign_of(w[i])).epsilon(1e-12));
  }
  SUBCASE("iterated steps accumulate to min(steps*alpha, epsilon)") {
    FgsmConfig cfg;
    cfg.alpha = 0.02;
    cfg.epsilon = 0.05;
    cfg.steps = 4;
    const auto adv = fgsm_attack(model, x, shape, {0}, cfg);
    for (std::size_t i = 0; i < d; ++i)
      CHECK(adv[i] - x[i] ==
            doctest::Approx(-0.05 * sign_of(w[i])).epsilon(1e-12));
  }
  SUBCASE("ascend-true-label mode steps along sign(grad J(x, y))") {
    FgsmConfig cfg;
    cfg.alpha = 0.03;
    cfg.epsilon = 1.0;
    cfg.steps = 1;
    cfg.target_mode = FgsmTargetMode::AscendTrueLabel;
    // grad_x J(x, y=0) = -sigmoid(-w.x) * w, so the step is -alpha*sign(w)
    const auto adv = fgsm_attack(model, x, shape, {0}, cfg);
    for (std::size_t i = 0; i < d; ++i)
      CHECK(adv[i] - x[i] ==
            doctest::Approx(-0.03 * sign_of(w[i])).epsilon(1e-12));
  }
}

TEST_CASE("fgsm output stays inside the epsilon ball and raises the loss") {
  Rng rng(23);
  const Dims dims{12, 11, 10};
  auto model = Model<double>::initialized(default_architecture(dims), dims, 7);
  const Shape shape{2, 1, dims.nx, dims.ny, dims.nz};
  const auto x = random_values(rng, 2 * dims.count());
  const std::vector<int> labels{0, 1};
  FgsmConfig cfg;
  cfg.alpha = 0.01;
  cfg.epsilon = 0.03;
  cfg.steps = 5;
  cfg.target_mode = FgsmTargetMode::AscendTrueLabel;
  const auto before = model.params[0].values();
  const auto adv = fgsm_attack(model, x, shape, labels, cfg);
  CHECK(model.params[0].values() == before);  // attack never updates theta
  double linf = 0;
  for (std::size_t i = 0; i < x.size(); ++i)
    linf = std::max(linf, std::abs(adv[i] - x[i]));
  CHECK(linf <= cfg.epsilon + 1e-12);
  CHECK(linf > 0.0);
  const double j0 = loss_xent(model, T64::from(shape, x), labels).scalar();
  const double j1 = loss_xent(model, T64::from(shape, adv), labels).scalar();
  CHECK(j1 >= j0);
}

TEST_CASE("consistency loss identities") {
  Rng rng(24);
  const Dims dims{10, 10, 10};
  auto model = Model<double>::initialized(default_architecture(dims), dims, 9);
  const Shape shape{1, 1, 10, 10, 10};
  const auto x = random_values(rng, dims.count());
  const std::vector<int> labels{1};
  const double j = loss_xent(model, T64::from(shape, x), labels).scalar();

  SUBCASE("at x' = x the penalty vanishes: L_con = 2 J(x)") {
    ConsistencyConfig cfg;
    CHECK(consistency_loss_value(model, x, x, shape, labels, cfg) ==
          doctest::Approx(2 * j).epsilon(1e-12));
  }
  SUBCASE("lambda = 0 drops the penalty") {
    ConsistencyConfig cfg;
    cfg.lambda = 0.0;
    auto x2 = x;
    for (auto& v : x2) v += 0.05;
    const double j2 = loss_xent(model, T64::from(shape, x2), labels).scalar();
    CHECK(consistency_loss_value(model, x, x2, shape, labels, cfg) ==
          doctest::Approx(j + j2).epsilon(1e-12));
  }
  SUBCASE("composition from parts matches") {
    ConsistencyConfig cfg;
    cfg.lambda = 2.5;
    auto x2 = x;
    for (std::size_t i = 0; i < x2.size(); ++i) x2[i] += (i % 3 == 0) * 0.08;
    const double j2 = loss_xent(model, T64::from(shape, x2), labels).scalar();
    const auto g1 = input_gradient(model, x, shape, labels);
    const auto g2 = input_gradient(model, x2, shape, labels);
    double pen = 0;
    for (std::size_t i = 0; i < g1.size(); ++i)
      pen += (g1[i] - g2[i]) * (g1[i] - g2[i]);
    CHECK(consistency_loss_value(model, x, x2, shape, labels, cfg) ==
          doctest::Approx(j + j2 + 2.5 * pen).epsilon(1e-12));
  }
}

TEST_CASE("consistency penalty closed form on the logistic model") {
  Rng rng(25);
  const std::size_t d = 6;
  const auto w = random_values(rng, d);
  auto model = logistic_model(w);
  const Shape shape{1, 1, d, 1, 1};
  const auto x = random_values(rng, d);
  auto x2 = x;
  for (auto& v : x2) v -= 0.07;
  double wx = 0, wx2 = 0, wnorm2 = 0;
  for (std::size_t i = 0; i < d; ++i) {
    wx += w[i] * x[i];
    wx2 += w[i] * x2[i];
    wnorm2 += w[i] * w[i];
  }
  // For label 0: J = log(1 + exp(-w.x)), grad_x J = -sigmoid(-w.x) w.
  const double j1 = std::log1p(std::exp(-wx));
  const double j2 = std::log1p(std::exp(-wx2));
  const double diff = sigmoid(-wx) - sigmoid(-wx2);
  ConsistencyConfig cfg;
  cfg.lambda = 1.5;
  CHECK(consistency_loss_value(model, x, x2, shape, {0}, cfg) ==
        doctest::Approx(j1 + j2 + 1.5 * diff * diff * wnorm2).epsilon(1e-10));
}

TEST_CASE("consistency parameter gradients match finite differences") {
  Rng rng(26);
  // Small dense net so the numeric sweep stays cheap.
  Model<double> model;
  const std::size_t d = 5, h = 4;
  model.arch = {FlattenSpec{}, DenseSpec{d, h}, ReluSpec{}, DenseSpec{h, 2}};
  model.input_dims = {d, 1, 1};
  model.params.push_back(T64::from({h, d}, random_values(rng, h * d), true));
  model.params.push_back(T64::from({h}, random_values(rng, h, 0.1), true));
  model.params.push_back(T64::from({2, h}, random_values(rng, 2 * h), true));
  model.params.push_back(T64::from({2}, random_values(rng, 2, 0.1), true));
  const Shape shape{2, 1, d, 1, 1};
  const auto x = random_values(rng, 2 * d);
  auto x2 = x;
  for (auto& v : x2) v += 0.1;
  const std::vector<int> labels{0, 1};
  ConsistencyConfig cfg;
  cfg.lambda = 0.8;
  cfg.fd_step = 1e-4;

  model.zero_grads();
  const double total =
      accumulate_consistency_gradients(model, x, x2, shape, labels, cfg);
  CHECK(total ==
        doctest::Approx(consistency_loss_value(model, x, x2, shape, labels,
                                               cfg))
            .epsilon(1e-12));

  for (std::size_t p = 0; p < model.params.size(); ++p) {
    auto& vals = model.params[p].values_mut();
    for (int rep = 0; rep < 3; ++rep) {
      const std::size_t i = rng.uniform_int(vals.size());
      const double keep = vals[i];
      const double step = 1e-5;
      vals[i] = keep + step;
      const double hi =
          consistency_loss_value(model, x, x2, shape, labels, cfg);
      vals[i] = keep - step;
      const double lo =
          consistency_loss_value(model, x, x2, shape, labels, cfg);
      vals[i] = keep;
      const double want = (hi - lo) / (2 * step);
      const double got = model.params[p].grad()[i];
      const double scale = std::max({std::abs(want), std::abs(got), 1e-4});
      CHECK(std::abs(got - want) / scale < 2e-3);
    }
  }
}
