#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "edtk/ops.hpp"
#include "edtk/rng.hpp"
#include "edtk/tensor.hpp"

namespace edtk {

/// Named reference to a stored numeric tensor. `fused` marks tensors that only
/// exist in the inference (fused) form of a reparameterized block.
struct ParamRef {
  std::string path;
  const Tensor* tensor = nullptr;
  bool fused = false;
};

using ParamList = std::vector<ParamRef>;

inline std::size_t count_elements(const ParamList& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.tensor->size();
  return n;
}

/// Zero-mean uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)], seeded by path.
inline Tensor uniform_init(Shape shape, std::size_t fan_in, std::uint64_t seed, const std::string& path) {
  Tensor t(shape);
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Rng rng(derive_seed(seed, path));
  rng.fill_uniform(t, -bound, bound);
  return t;
}

/// Dense 1x1 convolution, optional per-channel bias, optional ReLU.
class PointwiseConv {
 public:
  PointwiseConv() = default;
  PointwiseConv(std::size_t in_channels, std::size_t out_channels, bool bias, bool relu, std::uint64_t seed,
                const std::string& path)
      : weight_(uniform_init(Shape{out_channels, in_channels, 1, 1}, in_channels, seed, path + ".weight")),
        relu_(relu) {
    if (bias) bias_ = Tensor(Shape{out_channels});
  }

  std::size_t in_channels() const { return weight_.shape()[1]; }
  std::size_t out_channels() const { return weight_.shape()[0]; }
  bool has_relu() const { return relu_; }

  const Tensor& weight() const { return weight_; }
  const std::optional<Tensor>& bias() const { return bias_; }
  Tensor& weight() { return weight_; }
  std::optional<Tensor>& bias() { return bias_; }

  Tensor forward(const Tensor& x) const {
    Tensor y = conv2d(x, weight_, Conv2dParams{});
    if (bias_) y = add_channel_bias(y, bias_->data());
    return relu_ ? relu(y) : y;
  }

  /// Multiply-adds for an H x W input.
  std::uint64_t macs(std::size_t h, std::size_t w) const {
    return static_cast<std::uint64_t>(out_channels()) * in_channels() * h * w;
  }

  void collect(const std::string& prefix, ParamList& out) const {
    out.push_back({prefix + ".weight", &weight_, false});
    if (bias_) out.push_back({prefix + ".bias", &*bias_, false});
  }

 private:
  Tensor weight_;
  std::optional<Tensor> bias_;
  bool relu_ = false;
};

}  // namespace edtk
