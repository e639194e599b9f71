#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "vcstk/errors.hpp"

namespace vcstk::ad {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t(1),
                         std::multiplies<>());
}

inline std::string shape_str(const Shape& s) {
  std::string out = "(";
  for (std::size_t i = 0; i < s.size(); ++i)
    out += (i ? "," : "") + std::to_string(s[i]);
  return out + ")";
}

// One tape node. `backward` scatters this node's grad into its parents'.
template <typename T>
struct Node {
  std::uint64_t id = 0;
  Shape shape;
  std::vector<T> values;
  std::vector<T> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  void ensure_grad() {
    if (grad.empty()) grad.assign(values.size(), T(0));
  }
};

// Value-semantic handle over a shared tape node.
template <typename T>
class Tensor {
public:
  Tensor() = default;

  static Tensor from(Shape shape, std::vector<T> values,
                     bool requires_grad = false) {
    if (values.size() != numel(shape))
      throw ShapeMismatch("tensor data length " +
                          std::to_string(values.size()) + " != numel" +
                          shape_str(shape));
    Tensor t;
    t.node_ = std::make_shared<Node<T>>();
    t.node_->id = next_id();
    t.node_->shape = std::move(shape);
    t.node_->values = std::move(values);
    t.node_->requires_grad = requires_grad;
    t.check_finite("tensor literal");
    return t;
  }

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    std::vector<T> v(numel(shape), T(0));
    return from(std::move(shape), std::move(v), requires_grad);
  }

  bool valid() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t size() const { return node_->values.size(); }
  const std::vector<T>& values() const { return node_->values; }
  std::vector<T>& values_mut() { return node_->values; }
  const std::vector<T>& grad() const {
    if (node_->grad.empty())
      throw NoTape("gradient not populated; call backward() first");
    return node_->grad;
  }
  bool requires_grad() const { return node_->requires_grad; }
  void zero_grad() { node_->grad.clear(); }

  std::shared_ptr<Node<T>> node() const { return node_; }

  T scalar() const {
    if (size() != 1) throw ShapeMismatch("scalar() on non-scalar tensor");
    return node_->values[0];
  }

  void check_finite(const std::string& op) const {
    for (const T v : node_->values)
      if (!std::isfinite(double(v)))
        throw NonFiniteValue("non-finite value produced by " + op);
  }

  static std::uint64_t next_id() {
    static std::uint64_t counter = 0;
    return ++counter;
  }

  // Internal: create a result node wired to its parents.
  static Tensor make_op(Shape shape, std::vector<T> values,
                        std::vector<Tensor> parents,
                        std::function<void(Node<T>&)> backward,
                        const std::string& op_name) {
    Tensor t = from(std::move(shape), std::move(values), false);
    for (const auto& p : parents) {
      t.node_->parents.push_back(p.node_);
      t.node_->requires_grad |= p.node_->requires_grad;
    }
    if (t.node_->requires_grad) t.node_->backward = std::move(backward);
    t.check_finite(op_name);
    return t;
  }

private:
  std::shared_ptr<Node<T>> node_;
};

// Reverse-mode sweep from a scalar loss. Deterministic ordering: nodes are
// visited in strictly decreasing creation id.
template <typename T>
void backward(const Tensor<T>& loss) {
  if (!loss.valid() || loss.size() != 1)
    throw NoTape("backward() expects a scalar loss tensor");
  if (!loss.node()->requires_grad)
    throw NoTape("loss does not depend on any tensor with requires_grad");
  // Collect the reachable subgraph.
  std::vector<std::shared_ptr<Node<T>>> nodes;
  std::vector<std::shared_ptr<Node<T>>> stack{loss.node()};
  std::vector<std::uint64_t> seen;
  auto mark = [&seen](std::uint64_t id) {
    auto it = std::lower_bound(seen.begin(), seen.end(), id);
    if (it != seen.end() && *it == id) return false;
    seen.insert(it, id);
    return true;
  };
  mark(loss.node()->id);
  while (!stack.empty()) {
    auto n = stack.back();
    stack.pop_back();
    nodes.push_back(n);
    for (auto& p : n->parents)
      if (p->requires_grad && mark(p->id)) stack.push_back(p);
  }
  std::sort(nodes.begin(), nodes.end(),
            [](const auto& a, const auto& b) { return a->id > b->id; });
  loss.node()->ensure_grad();
  loss.node()->grad[0] = T(1);
  for (auto& n : nodes)
    if (n->backward) n->backward(*n);
}

// ---- elementwise / reduction ops ----

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape())
    throw ShapeMismatch("add: " + shape_str(a.shape()) + " vs " +
                        shape_str(b.shape()));
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = a.values()[i] + b.values()[i];
  auto an = a.node();
  auto bn = b.node();
  return Tensor<T>::make_op(
      a.shape(), std::move(out), {a, b},
      [an, bn](Node<T>& n) {
        if (an->requires_grad) {
          an->ensure_grad();
          for (std::size_t i = 0; i < n.grad.size(); ++i)
            an->grad[i] += n.grad[i];
        }
        if (bn->requires_grad) {
          bn->ensure_grad();
          for (std::size_t i = 0; i < n.grad.size(); ++i)
            bn->grad[i] += n.grad[i];
        }
      },
      "add");
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T c) {
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = c * a.values()[i];
  auto an = a.node();
  return Tensor<T>::make_op(
      a.shape(), std::move(out), {a},
      [an, c](Node<T>& n) {
        if (!an->requires_grad) return;
        an->ensure_grad();
        for (std::size_t i = 0; i < n.grad.size(); ++i)
          an->grad[i] += c * n.grad[i];
      },
      "scale");
}

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  T s = 0;
  for (const T v : a.values()) s += v;
  auto an = a.node();
  return Tensor<T>::make_op(
      Shape{1}, {s}, {a},
      [an](Node<T>& n) {
        if (!an->requires_grad) return;
        an->ensure_grad();
        for (auto& g : an->grad) g += n.grad[0];
      },
      "sum");
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape())
    throw ShapeMismatch("mul: " + shape_str(a.shape()) + " vs " +
                        shape_str(b.shape()));
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = a.values()[i] * b.values()[i];
  auto an = a.node();
  auto bn = b.node();
  return Tensor<T>::make_op(
      a.shape(), std::move(out), {a, b},
      [an, bn](Node<T>& n) {
        if (an->requires_grad) {
          an->ensure_grad();
          for (std::size_t i = 0; i < n.grad.size(); ++i)
            an->grad[i] += bn->values[i] * n.grad[i];
        }
        if (bn->requires_grad) {
          bn->ensure_grad();
          for (std::size_t i = 0; i < n.grad.size(); ++i)
            bn->grad[i] += an->values[i] * n.grad[i];
        }
      },
      "mul");
}

template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = a.values()[i] > T(0) ? a.values()[i] : T(0);
  auto an = a.node();
  return Tensor<T>::make_op(
      a.shape(), std::move(out), {a},
      [an](Node<T>& n) {
        if (!an->requires_grad) return;
        an->ensure_grad();
        for (std::size_t i = 0; i < n.grad.size(); ++i)
          if (an->values[i] > T(0)) an->grad[i] += n.grad[i];
      },
      "relu");
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
  if (numel(shape) != a.size())
    throw ShapeMismatch("reshape to incompatible " + shape_str(shape));
  auto an = a.node();
  return Tensor<T>::make_op(
      std::move(shape), a.values(), {a},
      [an](Node<T>& n) {
        if (!an->requires_grad) return;
        an->ensure_grad();
        for (std::size_t i = 0; i < n.grad.size(); ++i)
          an->grad[i] += n.grad[i];
      },
      "reshape");
}

// ---- layers ----

// x: [B, C, X, Y, Z]; w: [O, C, K, K, K]; b: [O]. Valid convolution,
// stride 1, output [B, O, X-K+1, Y-K+1, Z-K+1].
template <typename T>
Tensor<T> conv3d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  const auto& xs = x.shape();
  const auto& ws = w.shape();
  if (xs.size() != 5 || ws.size() != 5 || ws[2] != ws[3] || ws[3] != ws[4])
    throw ShapeMismatch("conv3d: expected x[B,C,X,Y,Z], w[O,C,K,K,K]");
  if (xs[1] != ws[1])
    throw ShapeMismatch("conv3d: input channels " + std::to_string(xs[1]) +
                        " != kernel channels " + std::to_string(ws[1]));
  const std::size_t B = xs[0], C = xs[1], X = xs[2], Y = xs[3], Z = xs[4];
  const std::size_t O = ws[0], K = ws[2];
  if (X < K || Y < K || Z < K)
    throw ShapeMismatch("conv3d: input smaller than kernel");
  if (b.shape() != Shape{O}) throw ShapeMismatch("conv3d: bias must be [O]");
  const std::size_t OX = X - K + 1, OY = Y - K + 1, OZ = Z - K + 1;

  std::vector<T> out(B * O * OX * OY * OZ);
  const T* xv = x.values().data();
  const T* wv = w.values().data();
  const T* bv = b.values().data();
  for (std::size_t bb = 0; bb < B; ++bb)
    for (std::size_t o = 0; o < O; ++o) {
      T* op = out.data() + ((bb * O + o) * OZ) * OY * OX;
      for (std::size_t i = 0; i < OX * OY * OZ; ++i) op[i] = bv[o];
      for (std::size_t c = 0; c < C; ++c) {
        const T* xc = xv + ((bb * C + c) * Z) * Y * X;
        const T* wc = wv + ((o * C + c) * K) * K * K;
        for (std::size_t kz = 0; kz < K; ++kz)
          for (std::size_t ky = 0; ky < K; ++ky)
            for (std::size_t kx = 0; kx < K; ++kx) {
              const T wk = wc[(kz * K + ky) * K + kx];
              for (std::size_t oz = 0; oz < OZ; ++oz)
                for (std::size_t oy = 0; oy < OY; ++oy) {
                  const T* xin =
                      xc + ((oz + kz) * Y + (oy + ky)) * X + kx;
                  T* orow = op + (oz * OY + oy) * OX;
                  for (std::size_t ox = 0; ox < OX; ++ox)
                    orow[ox] += wk * xin[ox];
                }
            }
      }
    }

  auto xn = x.node();
  auto wn = w.node();
  auto bn = b.node();
  auto backward = [xn, wn, bn, B, C, X, Y, Z, O, K, OX, OY, OZ](Node<T>& n) {
    const T* gy = n.grad.data();
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (std::size_t bb = 0; bb < B; ++bb)
        for (std::size_t o = 0; o < O; ++o) {
          const T* gp = gy + ((bb * O + o) * OZ) * OY * OX;
          T acc = 0;
          for (std::size_t i = 0; i < OX * OY * OZ; ++i) acc += gp[i];
          bn->grad[o] += acc;
        }
    }
    if (wn->requires_grad) {
      wn->ensure_grad();
      for (std::size_t bb = 0; bb < B; ++bb)
        for (std::size_t o = 0; o < O; ++o) {
          const T* gp = gy + ((bb * O + o) * OZ) * OY * OX;
          for (std::size_t c = 0; c < C; ++c) {
            const T* xc = xn->values.data() + ((bb * C + c) * Z) * Y * X;
            T* wg = wn->grad.data() + ((o * C + c) * K) * K * K;
            for (std::size_t kz = 0; kz < K; ++kz)
              for (std::size_t ky = 0; ky < K; ++ky)
                for (std::size_t kx = 0; kx < K; ++kx) {
                  T acc = 0;
                  for (std::size_t oz = 0; oz < OZ; ++oz)
                    for (std::size_t oy = 0; oy < OY; ++oy) {
                      const T* xin =
                          xc + ((oz + kz) * Y + (oy + ky)) * X + kx;
                      const T* grow = gp + (oz * OY + oy) * OX;
                      for (std::size_t ox = 0; ox < OX; ++ox)
                        acc += grow[ox] * xin[ox];
                    }
                  wg[(kz * K + ky) * K + kx] += acc;
                }
          }
        }
    }
    if (xn->requires_grad) {
      xn->ensure_grad();
      for (std::size_t bb = 0; bb < B; ++bb)
        for (std::size_t o = 0; o < O; ++o) {
          const T* gp = gy + ((bb * O + o) * OZ) * OY * OX;
          for (std::size_t c = 0; c < C; ++c) {
            T* xg = xn->grad.data() + ((bb * C + c) * Z) * Y * X;
            const T* wc = wn->values.data() + ((o * C + c) * K) * K * K;
            for (std::size_t kz = 0; kz < K; ++kz)
              for (std::size_t ky = 0; ky < K; ++ky)
                for (std::size_t kx = 0; kx < K; ++kx) {
                  const T wk = wc[(kz * K + ky) * K + kx];
                  for (std::size_t oz = 0; oz < OZ; ++oz)
                    for (std::size_t oy = 0; oy < OY; ++oy) {
                      T* xrow =
                          xg + ((oz + kz) * Y + (oy + ky)) * X + kx;
                      const T* grow = gp + (oz * OY + oy) * OX;
                      for (std::size_t ox = 0; ox < OX; ++ox)
                        xrow[ox] += wk * grow[ox];
                    }
                }
          }
        }
    }
  };
  return Tensor<T>::make_op(Shape{B, O, OX, OY, OZ}, std::move(out),
                            {x, w, b}, std::move(backward), "conv3d");
}

// 2x2x2 max pooling, stride 2, floor semantics (trailing odd slices dropped).
template <typename T>
Tensor<T> maxpool3d(const Tensor<T>& x) {
  const auto& xs = x.shape();
  if (xs.size() != 5) throw ShapeMismatch("maxpool3d: expected [B,C,X,Y,Z]");
  const std::size_t B = xs[0], C = xs[1], X = xs[2], Y = xs[3], Z = xs[4];
  const std::size_t OX = X / 2, OY = Y / 2, OZ = Z / 2;
  if (OX == 0 || OY == 0 || OZ == 0)
    throw ShapeMismatch("maxpool3d: dimension smaller than window");
  std::vector<T> out(B * C * OX * OY * OZ);
  auto argmax = std::make_shared<std::vector<std::size_t>>(out.size());
  const T* xv = x.values().data();
  std::size_t oi = 0;
  for (std::size_t bc = 0; bc < B * C; ++bc) {
    const T* xc = xv + bc * Z * Y * X;
    for (std::size_t oz = 0; oz < OZ; ++oz)
      for (std::size_t oy = 0; oy < OY; ++oy)
        for (std::size_t ox = 0; ox < OX; ++ox, ++oi) {
          T best = -std::numeric_limits<T>::infinity();
          std::size_t best_idx = 0;
          for (std::size_t dz = 0; dz < 2; ++dz)
            for (std::size_t dy = 0; dy < 2; ++dy)
              for (std::size_t dx = 0; dx < 2; ++dx) {
                const std::size_t idx =
                    ((2 * oz + dz) * Y + (2 * oy + dy)) * X + (2 * ox + dx);
                if (xc[idx] > best) {
                  best = xc[idx];
                  best_idx = bc * Z * Y * X + idx;
                }
              }
          out[oi] = best;
          (*argmax)[oi] = best_idx;
        }
  }
  auto xn = x.node();
  return Tensor<T>::make_op(
      Shape{B, C, OX, OY, OZ}, std::move(out), {x},
      [xn, argmax](Node<T>& n) {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        for (std::size_t i = 0; i < n.grad.size(); ++i)
          xn->grad[(*argmax)[i]] += n.grad[i];
      },
      "maxpool3d");
}

// x: [B, N]; w: [M, N]; b: [M] -> [B, M].
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  const auto& xs = x.shape();
  const auto& ws = w.shape();
  if (xs.size() != 2 || ws.size() != 2 || xs[1] != ws[1])
    throw ShapeMismatch("linear: x" + shape_str(xs) + " w" + shape_str(ws));
  const std::size_t B = xs[0], N = xs[1], M = ws[0];
  if (b.shape() != Shape{M}) throw ShapeMismatch("linear: bias must be [M]");
  std::vector<T> out(B * M);
  for (std::size_t bb = 0; bb < B; ++bb)
    for (std::size_t m = 0; m < M; ++m) {
      const T* xr = x.values().data() + bb * N;
      const T* wr = w.values().data() + m * N;
      T acc = b.values()[m];
      for (std::size_t i = 0; i < N; ++i) acc += xr[i] * wr[i];
      out[bb * M + m] = acc;
    }
  auto xn = x.node();
  auto wn = w.node();
  auto bn = b.node();
  return Tensor<T>::make_op(
      Shape{B, M}, std::move(out), {x, w, b},
      [xn, wn, bn, B, N, M](Node<T>& n) {
        const T* gy = n.grad.data();
        if (bn->requires_grad) {
          bn->ensure_grad();
          for (std::size_t bb = 0; bb < B; ++bb)
            for (std::size_t m = 0; m < M; ++m)
              bn->grad[m] += gy[bb * M + m];
        }
        if (wn->requires_grad) {
          wn->ensure_grad();
          for (std::size_t bb = 0; bb < B; ++bb)
            for (std::size_t m = 0; m < M; ++m) {
              const T g = gy[bb * M + m];
              const T* xr = xn->values.data() + bb * N;
              T* wg = wn->grad.data() + m * N;
              for (std::size_t i = 0; i < N; ++i) wg[i] += g * xr[i];
            }
        }
        if (xn->requires_grad) {
          xn->ensure_grad();
          for (std::size_t bb = 0; bb < B; ++bb)
            for (std::size_t m = 0; m < M; ++m) {
              const T g = gy[bb * M + m];
              const T* wr = wn->values.data() + m * N;
              T* xg = xn->grad.data() + bb * N;
              for (std::size_t i = 0; i < N; ++i) xg[i] += g * wr[i];
            }
        }
      },
      "linear");
}

// Numerically stable softmax row probabilities (no tape).
template <typename T>
std::vector<T> softmax_rows(const Tensor<T>& logits) {
  const auto& s = logits.shape();
  if (s.size() != 2) throw ShapeMismatch("softmax: expected [B, classes]");
  const std::size_t B = s[0], C = s[1];
  std::vector<T> p(B * C);
  for (std::size_t b = 0; b < B; ++b) {
    const T* row = logits.values().data() + b * C;
    T mx = row[0];
    for (std::size_t c = 1; c < C; ++c) mx = std::max(mx, row[c]);
    T denom = 0;
    for (std::size_t c = 0; c < C; ++c) denom += std::exp(row[c] - mx);
    for (std::size_t c = 0; c < C; ++c)
      p[b * C + c] = std::exp(row[c] - mx) / denom;
  }
  return p;
}

// Mean over the batch of -log softmax(logits)[label].
template <typename T>
Tensor<T> softmax_cross_entropy(const Tensor<T>& logits,
                                const std::vector<int>& labels) {
  const auto& s = logits.shape();
  if (s.size() != 2) throw ShapeMismatch("xent: expected [B, classes]");
  const std::size_t B = s[0], C = s[1];
  if (labels.size() != B)
    throw ShapeMismatch("xent: " + std::to_string(labels.size()) +
                        " labels for batch of " + std::to_string(B));
  for (int y : labels)
    if (y < 0 || std::size_t(y) >= C)
      throw ShapeMismatch("xent: label out of range");
  auto probs = std::make_shared<std::vector<T>>(softmax_rows(logits));
  T loss = 0;
  for (std::size_t b = 0; b < B; ++b) {
    const T* row = logits.values().data() + b * C;
    T mx = row[0];
    for (std::size_t c = 1; c < C; ++c) mx = std::max(mx, row[c]);
    T lse = 0;
    for (std::size_t c = 0; c < C; ++c) lse += std::exp(row[c] - mx);
    loss += std::log(lse) + mx - row[labels[b]];
  }
  loss /= T(B);
  auto ln = logits.node();
  auto labels_copy = std::make_shared<std::vector<int>>(labels);
  return Tensor<T>::make_op(
      Shape{1}, {loss}, {logits},
      [ln, probs, labels_copy, B, C](Node<T>& n) {
        if (!ln->requires_grad) return;
        ln->ensure_grad();
        const T g = n.grad[0] / T(B);
        for (std::size_t b = 0; b < B; ++b)
          for (std::size_t c = 0; c < C; ++c) {
            T d = (*probs)[b * C + c];
            if (int(c) == (*labels_copy)[b]) d -= T(1);
            ln->grad[b * C + c] += g * d;
          }
      },
      "softmax_cross_entropy");
}

}  // namespace vcstk::ad
