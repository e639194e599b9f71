#pragma once

#include <cstring>
#include <filesystem>
#include <fstream>
#include <variant>

#include "vcstk/rng.hpp"
#include "vcstk/tensor.hpp"
#include "vcstk/volume.hpp"

namespace vcstk::ad {

struct Conv3dSpec {
  std::size_t in_channels, out_channels, kernel;
};
struct ReluSpec {};
struct MaxPoolSpec {};
struct FlattenSpec {};
struct DenseSpec {
  std::size_t in, out;
};

using LayerSpec =
    std::variant<Conv3dSpec, ReluSpec, MaxPoolSpec, FlattenSpec, DenseSpec>;

using Architecture = std::vector<LayerSpec>;

// Output spatial shape after one layer; used to size dense layers and to
// validate inputs before running.
inline Shape layer_output_shape(const LayerSpec& spec, const Shape& in) {
  if (auto c = std::get_if<Conv3dSpec>(&spec)) {
    if (in.size() != 5 || in[1] != c->in_channels || in[2] < c->kernel ||
        in[3] < c->kernel || in[4] < c->kernel)
      throw ShapeMismatch("conv3d spec incompatible with input " +
                          shape_str(in));
    return {in[0], c->out_channels, in[2] - c->kernel + 1,
            in[3] - c->kernel + 1, in[4] - c->kernel + 1};
  }
  if (std::get_if<ReluSpec>(&spec)) return in;
  if (std::get_if<MaxPoolSpec>(&spec)) {
    if (in.size() != 5 || in[2] < 2 || in[3] < 2 || in[4] < 2)
      throw ShapeMismatch("maxpool spec incompatible with input " +
                          shape_str(in));
    return {in[0], in[1], in[2] / 2, in[3] / 2, in[4] / 2};
  }
  if (std::get_if<FlattenSpec>(&spec)) {
    std::size_t rest = 1;
    for (std::size_t i = 1; i < in.size(); ++i) rest *= in[i];
    return {in[0], rest};
  }
  const auto& d = std::get<DenseSpec>(spec);
  if (in.size() != 2 || in[1] != d.in)
    throw ShapeMismatch("dense spec expects [B," + std::to_string(d.in) +
                        "], got " + shape_str(in));
  return {in[0], d.out};
}

// conv(8,3) relu pool conv(16,3) relu pool flatten dense(64) relu dense(2)
inline Architecture default_architecture(const Dims& input) {
  Architecture arch;
  Shape s{1, 1, input.nx, input.ny, input.nz};
  arch.push_back(Conv3dSpec{1, 8, 3});
  s = layer_output_shape(arch.back(), s);
  arch.push_back(ReluSpec{});
  arch.push_back(MaxPoolSpec{});
  s = layer_output_shape(arch.back(), s);
  arch.push_back(Conv3dSpec{8, 16, 3});
  s = layer_output_shape(arch.back(), s);
  arch.push_back(ReluSpec{});
  arch.push_back(MaxPoolSpec{});
  s = layer_output_shape(arch.back(), s);
  arch.push_back(FlattenSpec{});
  s = layer_output_shape(arch.back(), s);
  arch.push_back(DenseSpec{s[1], 64});
  arch.push_back(ReluSpec{});
  arch.push_back(DenseSpec{64, 2});
  return arch;
}

// The classifier: architecture plus its parameter tensors (w, b per
// parametric layer, in layer order) and the init seed.
template <typename T>
struct Model {
  Architecture arch;
  Dims input_dims;
  std::uint64_t seed = 0;
  std::vector<Tensor<T>> params;

  static Model initialized(Architecture arch, Dims input_dims,
                           std::uint64_t seed) {
    Model m;
    m.arch = std::move(arch);
    m.input_dims = input_dims;
    m.seed = seed;
    Rng rng(seed);
    for (const auto& spec : m.arch) {
      if (auto c = std::get_if<Conv3dSpec>(&spec)) {
        const std::size_t fan_in =
            c->in_channels * c->kernel * c->kernel * c->kernel;
        m.params.push_back(init_uniform(
            {c->out_channels, c->in_channels, c->kernel, c->kernel, c->kernel},
            fan_in, rng));
        m.params.push_back(Tensor<T>::zeros({c->out_channels}, true));
      } else if (auto d = std::get_if<DenseSpec>(&spec)) {
        m.params.push_back(init_uniform({d->out, d->in}, d->in, rng));
        m.params.push_back(Tensor<T>::zeros({d->out}, true));
      }
    }
    return m;
  }

  static Tensor<T> init_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(double(fan_in));
    std::vector<T> v(numel(shape));
    for (auto& x : v) x = T(rng.uniform(-bound, bound));
    return Tensor<T>::from(std::move(shape), std::move(v), true);
  }

  void zero_grads() {
    for (auto& p : params) p.zero_grad();
  }

  // Same parameter values with requires_grad off: backward passes through a
  // detached model never touch this model's gradients. Used wherever an
  // input gradient is wanted without accumulating parameter gradients
  // (attacks, saliency, greedy mask scoring).
  Model detached() const {
    Model m;
    m.arch = arch;
    m.input_dims = input_dims;
    m.seed = seed;
    for (const auto& p : params)
      m.params.push_back(Tensor<T>::from(p.shape(), p.values(), false));
    return m;
  }

  // Fresh handles over copies of the parameter values (detached tape).
  Model clone() const {
    Model m;
    m.arch = arch;
    m.input_dims = input_dims;
    m.seed = seed;
    for (const auto& p : params)
      m.params.push_back(Tensor<T>::from(p.shape(), p.values(), true));
    return m;
  }
};

template <typename T>
Tensor<T> forward(const Model<T>& model, const Tensor<T>& batch) {
  Tensor<T> h = batch;
  std::size_t pi = 0;
  for (const auto& spec : model.arch) {
    if (std::get_if<Conv3dSpec>(&spec)) {
      const auto& w = model.params[pi];
      const auto& b = model.params[pi + 1];
      pi += 2;
      h = conv3d(h, w, b);
    } else if (std::get_if<ReluSpec>(&spec)) {
      h = relu(h);
    } else if (std::get_if<MaxPoolSpec>(&spec)) {
      h = maxpool3d(h);
    } else if (std::get_if<FlattenSpec>(&spec)) {
      std::size_t rest = 1;
      for (std::size_t i = 1; i < h.shape().size(); ++i) rest *= h.shape()[i];
      h = reshape(h, {h.shape()[0], rest});
    } else {
      const auto& w = model.params[pi];
      const auto& b = model.params[pi + 1];
      pi += 2;
      h = linear(h, w, b);
    }
  }
  return h;
}

template <typename T>
Tensor<T> loss_xent(const Model<T>& model, const Tensor<T>& batch,
                    const std::vector<int>& labels) {
  return softmax_cross_entropy(forward(model, batch), labels);
}

// dJ/dx for a batch; returns a tensor-sized gradient vector.
template <typename T>
std::vector<T> input_gradient(const Model<T>& model,
                              const std::vector<T>& batch_values, Shape shape,
                              const std::vector<int>& labels) {
  auto x = Tensor<T>::from(std::move(shape), batch_values, true);
  auto loss = loss_xent(model, x, labels);
  backward(loss);
  return x.grad();
}

template <typename T>
std::vector<int> predict(const Model<T>& model, const Tensor<T>& batch) {
  auto logits = forward(model, batch);
  const std::size_t B = logits.shape()[0], C = logits.shape()[1];
  std::vector<int> out(B);
  for (std::size_t b = 0; b < B; ++b) {
    const T* row = logits.values().data() + b * C;
    int best = 0;
    for (std::size_t c = 1; c < C; ++c)
      if (row[c] > row[best]) best = int(c);
    out[b] = best;
  }
  return out;
}

// ---- checkpoint format ----
// "VCTK" | u32 version | u8 dtype | u64 seed | 3x u64 input dims |
// u32 layer count | layers | u32 param count | params (f64 payload).

namespace detail {
constexpr char kCheckpointMagic[4] = {'V', 'C', 'T', 'K'};
constexpr std::uint32_t kCheckpointVersion = 1;

inline void put_bytes(std::string& out, const void* p, std::size_t n) {
  out.append(reinterpret_cast<const char*>(p), n);
}
template <typename V>
void put(std::string& out, V v) {
  put_bytes(out, &v, sizeof(V));
}

struct Reader {
  const std::string& buf;
  std::size_t pos = 0;
  void take(void* p, std::size_t n) {
    if (pos + n > buf.size())
      throw CorruptCheckpoint("checkpoint truncated at byte " +
                              std::to_string(pos));
    std::memcpy(p, buf.data() + pos, n);
    pos += n;
  }
  template <typename V>
  V get() {
    V v;
    take(&v, sizeof(V));
    return v;
  }
};
}  // namespace detail

template <typename T>
std::string serialize_checkpoint(const Model<T>& model) {
  using namespace detail;
  std::string out;
  put_bytes(out, kCheckpointMagic, 4);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint8_t>(out, sizeof(T));
  put<std::uint64_t>(out, model.seed);
  put<std::uint64_t>(out, model.input_dims.nx);
  put<std::uint64_t>(out, model.input_dims.ny);
  put<std::uint64_t>(out, model.input_dims.nz);
  put<std::uint32_t>(out, std::uint32_t(model.arch.size()));
  for (const auto& spec : model.arch) {
    if (auto c = std::get_if<Conv3dSpec>(&spec)) {
      put<std::uint8_t>(out, 0);
      put<std::uint64_t>(out, c->in_channels);
      put<std::uint64_t>(out, c->out_channels);
      put<std::uint64_t>(out, c->kernel);
    } else if (std::get_if<ReluSpec>(&spec)) {
      put<std::uint8_t>(out, 1);
    } else if (std::get_if<MaxPoolSpec>(&spec)) {
      put<std::uint8_t>(out, 2);
    } else if (std::get_if<FlattenSpec>(&spec)) {
      put<std::uint8_t>(out, 3);
    } else {
      const auto& d = std::get<DenseSpec>(spec);
      put<std::uint8_t>(out, 4);
      put<std::uint64_t>(out, d.in);
      put<std::uint64_t>(out, d.out);
    }
  }
  put<std::uint32_t>(out, std::uint32_t(model.params.size()));
  for (const auto& p : model.params) {
    put<std::uint32_t>(out, std::uint32_t(p.shape().size()));
    for (auto d : p.shape()) put<std::uint64_t>(out, d);
    for (T v : p.values()) put<double>(out, double(v));
  }
  return out;
}

template <typename T>
Model<T> deserialize_checkpoint(const std::string& buf) {
  using namespace detail;
  Reader r{buf};
  char magic[4];
  r.take(magic, 4);
  if (std::memcmp(magic, kCheckpointMagic, 4) != 0)
    throw CorruptCheckpoint("bad checkpoint magic");
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw VersionMismatch("checkpoint version " + std::to_string(version) +
                          ", expected " + std::to_string(kCheckpointVersion));
  const auto dtype = r.get<std::uint8_t>();
  if (dtype != sizeof(T))
    throw VersionMismatch("checkpoint scalar width " + std::to_string(dtype) +
                          ", expected " + std::to_string(sizeof(T)));
  Model<T> m;
  m.seed = r.get<std::uint64_t>();
  m.input_dims.nx = r.get<std::uint64_t>();
  m.input_dims.ny = r.get<std::uint64_t>();
  m.input_dims.nz = r.get<std::uint64_t>();
  const auto layers = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < layers; ++i) {
    switch (r.get<std::uint8_t>()) {
      case 0: {
        Conv3dSpec c;
        c.in_channels = r.get<std::uint64_t>();
        c.out_channels = r.get<std::uint64_t>();
        c.kernel = r.get<std::uint64_t>();
        m.arch.push_back(c);
        break;
      }
      case 1:
        m.arch.push_back(ReluSpec{});
        break;
      case 2:
        m.arch.push_back(MaxPoolSpec{});
        break;
      case 3:
        m.arch.push_back(FlattenSpec{});
        break;
      case 4: {
        DenseSpec d;
        d.in = r.get<std::uint64_t>();
        d.out = r.get<std::uint64_t>();
        m.arch.push_back(d);
        break;
      }
      default:
        throw CorruptCheckpoint("unknown layer kind");
    }
  }
  const auto nparams = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < nparams; ++i) {
    const auto ndim = r.get<std::uint32_t>();
    if (ndim > 8) throw CorruptCheckpoint("implausible tensor rank");
    Shape shape(ndim);
    for (auto& d : shape) d = r.get<std::uint64_t>();
    std::vector<T> values(numel(shape));
    for (auto& v : values) v = T(r.get<double>());
    m.params.push_back(Tensor<T>::from(std::move(shape), std::move(values),
                                       true));
  }
  if (r.pos != buf.size())
    throw CorruptCheckpoint("trailing bytes after checkpoint payload");
  return m;
}

template <typename T>
void save_checkpoint(const Model<T>& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for write: " + path.string());
  const auto buf = serialize_checkpoint(model);
  out.write(buf.data(), std::streamsize(buf.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

template <typename T>
Model<T> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string buf((std::istreambuf_iterator<char>(in)),
                  std::istreambuf_iterator<char>());
  return deserialize_checkpoint<T>(buf);
}

}  // namespace vcstk::ad
