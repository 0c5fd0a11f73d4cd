#include "edtk/reference_blocks.hpp"

#include <string>

#include "edtk/errors.hpp"
#include "edtk/layers.hpp"
#include "edtk/ops.hpp"

namespace edtk {

RepVggBlock::RepVggBlock(std::size_t channels, std::uint64_t seed) : channels_(channels) {
  for (int i = 0; i < 3; ++i)
    kernels_[i] =
        uniform_init(Shape{channels, channels, 3, 3}, channels * 9, seed, "repvgg.branch" + std::to_string(i));
}

Tensor RepVggBlock::forward_training(const Tensor& x, Trace* trace) const {
  CountDelta d_branches;
  Tensor b0 = conv2d(x, kernels_[0], 1, 1, 1);
  Tensor b1 = conv2d(x, kernels_[1], 1, 1, 1);
  Tensor b2 = conv2d(x, kernels_[2], 1, 1, 1);
  const OpCounts branches = d_branches.read();

  CountDelta d_merge;
  Tensor sum = add(add(b0, b1), b2);
  const OpCounts merge = d_merge.read();

  CountDelta d_residual;
  Tensor out = add(sum, x);
  const OpCounts residual = d_residual.read();

  if (trace) *trace = Trace{branches, merge, residual};
  return out;
}

Tensor RepVggBlock::fused_kernel() const {
  Tensor k(kernels_[0].shape());
  for (std::size_t i = 0; i < k.size(); ++i) k[i] = kernels_[0][i] + kernels_[1][i] + kernels_[2][i];
  for (std::size_t c = 0; c < channels_; ++c) k.at(c, c, 1, 1) += 1.0f;
  return k;
}

Tensor RepVggBlock::forward_inference(const Tensor& x) const { return conv2d(x, fused_kernel(), 1, 1, 1); }

NonLocalBlock::NonLocalBlock(std::size_t channels, std::uint64_t seed)
    : channels_(channels),
      theta_(uniform_init(Shape{channels}, 1, seed, "nonlocal.theta")),
      phi_(uniform_init(Shape{channels}, 1, seed, "nonlocal.phi")),
      g_(uniform_init(Shape{channels}, 1, seed, "nonlocal.g")),
      out_(uniform_init(Shape{channels}, 1, seed, "nonlocal.out")) {}

Tensor NonLocalBlock::forward(const Tensor& a, const Tensor& b, Trace* trace) const {
  require_rank3(a.shape(), "NonLocalBlock a");
  require_rank3(b.shape(), "NonLocalBlock b");
  if (a.channels() != channels_ || b.channels() != channels_) throw ShapeError("NonLocalBlock: channel mismatch");
  const std::size_t c = channels_, na = a.height() * a.width(), nb = b.height() * b.width();

  CountDelta d_embed;
  const Tensor q = scale_channels(a, theta_.data());
  const Tensor k = scale_channels(b, phi_.data());
  const Tensor v = scale_channels(b, g_.data());
  const OpCounts embed = d_embed.read();

  CountDelta d_weights;
  Tensor logits(Shape{na, nb});
  for (std::size_t i = 0; i < na; ++i)
    for (std::size_t j = 0; j < nb; ++j) {
      float acc = 0.0f;
      for (std::size_t ch = 0; ch < c; ++ch) acc += q[ch * na + i] * k[ch * nb + j];
      logits[i * nb + j] = acc;
    }
  active_counter().add_multiply_adds(na * nb * c);
  const OpCounts weights = d_weights.read();

  CountDelta d_softmax;
  const Tensor attn = softmax(logits, nb);
  const OpCounts soft = d_softmax.read();

  CountDelta d_apply;
  Tensor y(a.shape());
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < na; ++i) {
      float acc = 0.0f;
      for (std::size_t j = 0; j < nb; ++j) acc += attn[i * nb + j] * v[ch * nb + j];
      y[ch * na + i] = acc;
    }
  active_counter().add_multiply_adds(na * nb * c);
  const OpCounts apply = d_apply.read();

  CountDelta d_proj;
  const Tensor z = scale_channels(y, out_.data());
  const OpCounts projection = d_proj.read();

  CountDelta d_res;
  Tensor out = add(z, a);
  const OpCounts residual = d_res.read();

  if (trace) *trace = Trace{embed, weights, soft, apply, projection, residual};
  return out;
}

}  // namespace edtk
