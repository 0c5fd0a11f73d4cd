#include "edtk/attention.hpp"

#include <cmath>

#include "edtk/errors.hpp"
#include "edtk/ops.hpp"

namespace edtk {

ScaModule::ScaModule(std::size_t pool_k) : pool_k_(pool_k) {
  if (pool_k_ == 0 || pool_k_ % 2 == 0)
    throw ShapeError("ScaModule: pooling window must be odd and positive, got " + std::to_string(pool_k_));
}

Tensor sca_tokens(const ScaModule& module, const Tensor& x) {
  require_rank3(x.shape(), "sca_tokens");
  const std::size_t k = module.pool_k();
  const Tensor p_max = pool_spatial(x, PoolKind::max, k, 1, k / 2);
  const Tensor p_avg = pool_spatial(x, PoolKind::avg, k, 1, k / 2);
  const Tensor f = concat_channels<float>({p_max, p_avg});
  const Tensor t_h = pool_directional(f, PoolAxis::horizontal);
  const Tensor t_v = pool_directional(f, PoolAxis::vertical);

  const std::size_t c2 = f.channels(), h = f.height(), w = f.width();
  Tensor tokens(Shape{h + w, c2});
  for (std::size_t ch = 0; ch < c2; ++ch) {
    for (std::size_t y = 0; y < h; ++y) tokens[y * c2 + ch] = t_h.at(ch, y, 0);
    for (std::size_t xx = 0; xx < w; ++xx) tokens[(h + xx) * c2 + ch] = t_v.at(ch, 0, xx);
  }
  return tokens;
}

AttentionResult token_attention(const Tensor& keys, const Tensor& queries, ScaStageCounts* counts) {
  if (keys.rank() != 2 || queries.rank() != 2 || keys.shape()[1] != queries.shape()[1])
    throw ShapeError("token_attention: token matrices " + keys.shape().to_string() + " and " +
                     queries.shape().to_string() + " are incompatible");
  const std::size_t nk = keys.shape()[0], nq = queries.shape()[0], d = keys.shape()[1];

  CountDelta d_weights;
  Tensor logits(Shape{nq, nk});
  for (std::size_t j = 0; j < nq; ++j)
    for (std::size_t i = 0; i < nk; ++i) {
      float acc = 0.0f;
      for (std::size_t e = 0; e < d; ++e) acc += queries[j * d + e] * keys[i * d + e];
      logits[j * nk + i] = acc;
    }
  active_counter().add_multiply_adds(nq * nk * d);
  const OpCounts weight_cost = d_weights.read();

  CountDelta d_softmax;
  Tensor attn = softmax(logits, nk);
  const OpCounts softmax_cost = d_softmax.read();

  CountDelta d_apply;
  Tensor enhanced(Shape{nq, d});
  for (std::size_t j = 0; j < nq; ++j)
    for (std::size_t i = 0; i < nk; ++i) {
      const float a = attn[j * nk + i];
      for (std::size_t e = 0; e < d; ++e) enhanced[j * d + e] += a * keys[i * d + e];
    }
  active_counter().add_multiply_adds(nq * nk * d);
  const OpCounts apply_cost = d_apply.read();

  if (counts) {
    counts->weights = weight_cost;
    counts->softmax = softmax_cost;
    counts->apply = apply_cost;
  }
  return AttentionResult{std::move(attn), std::move(enhanced)};
}

Tensor sca_forward(const ScaModule& module, const Tensor& a, const Tensor& b, ScaTrace* trace) {
  require_rank3(a.shape(), "sca_forward a");
  require_rank3(b.shape(), "sca_forward b");
  if (a.channels() != b.channels())
    throw ShapeError("sca_forward: channel mismatch, a has " + std::to_string(a.channels()) + ", b has " +
                     std::to_string(b.channels()));
  const std::size_t c = b.channels(), h = b.height(), w = b.width();
  ScaStageCounts counts;

  CountDelta d_pre;
  Tensor tokens_a = sca_tokens(module, a);
  Tensor tokens_b = sca_tokens(module, b);
  counts.pre = d_pre.read();

  AttentionResult att = token_attention(tokens_a, tokens_b, &counts);

  // Expansion: row token y fills row y, column token x fills column x.
  CountDelta d_post;
  const std::size_t c2 = 2 * c;
  Tensor f_h(Shape{c2, h, w});
  Tensor f_v(Shape{c2, h, w});
  for (std::size_t ch = 0; ch < c2; ++ch)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        f_h.at(ch, y, x) = att.enhanced[y * c2 + ch];
        f_v.at(ch, y, x) = att.enhanced[(h + x) * c2 + ch];
      }
  active_counter().add_memory_moves(f_h.size() + f_v.size());
  const Tensor summed = add(f_h, f_v);
  counts.post = d_post.read();

  CountDelta d_fold;
  Tensor out(Shape{c, h, w});
  const std::size_t plane = h * w;
  for (std::size_t ch = 0; ch < c; ++ch) {
    const auto from_max = summed.channel(ch);
    const auto from_avg = summed.channel(c + ch);
    auto dst = out.channel(ch);
    for (std::size_t i = 0; i < plane; ++i) dst[i] = 0.5f * (from_max[i] + from_avg[i]);
  }
  active_counter().add_additions(out.size());
  active_counter().add_multiply_adds(out.size());
  counts.fold = d_fold.read();

  if (trace) {
    trace->tokens_a = std::move(tokens_a);
    trace->tokens_b = std::move(tokens_b);
    trace->attention = std::move(att.attention);
    trace->enhanced = std::move(att.enhanced);
    trace->counts = counts;
  }
  return out;
}

// ---------------------------------------------------------------------------

std::size_t eca_kernel_size(std::size_t channels) {
  if (channels == 0) throw ShapeError("eca_kernel_size: channels must be positive");
  const double t = std::fabs((std::log2(static_cast<double>(channels)) + 1.0) / 2.0);
  std::size_t k = static_cast<std::size_t>(t);
  if (k % 2 == 0) k += 1;
  return std::max<std::size_t>(k, 3);
}

EcaModule::EcaModule(std::size_t channels, std::uint64_t seed, const std::string& path) {
  const std::size_t k = eca_kernel_size(channels);
  kernel_ = uniform_init(Shape{k}, k, seed, path + ".kernel");
}

EcaModule::EcaModule(Tensor kernel) : kernel_(std::move(kernel)) {
  if (kernel_.rank() != 1 || kernel_.size() < 3 || kernel_.size() % 2 == 0)
    throw ShapeError("EcaModule: kernel must be 1-D with odd length >= 3, got " + kernel_.shape().to_string());
}

std::vector<float> eca_gates(const EcaModule& module, const Tensor& x) {
  require_rank3(x.shape(), "eca_forward");
  const std::size_t c = x.channels(), k = module.k();
  if (c < k)
    throw ShapeError("eca_forward: " + std::to_string(c) + " channels is fewer than kernel size " + std::to_string(k));
  const std::vector<float> pooled = global_avg_pool(x);
  const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(k / 2);
  std::vector<float> gates(c);
  for (std::size_t ch = 0; ch < c; ++ch) {
    float acc = 0.0f;
    for (std::size_t t = 0; t < k; ++t) {
      const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(ch + t) - half;
      if (src >= 0 && src < static_cast<std::ptrdiff_t>(c))
        acc += module.kernel()[t] * pooled[static_cast<std::size_t>(src)];
    }
    gates[ch] = sigmoid(acc);
  }
  active_counter().add_multiply_adds(c * k);
  active_counter().add_transcendentals(c);
  return gates;
}

Tensor eca_forward(const EcaModule& module, const Tensor& x) {
  const std::vector<float> gates = eca_gates(module, x);
  return scale_channels<float>(x, gates);
}

Tensor joint_forward(const JointModule& module, const Tensor& a, const Tensor& b) {
  const Tensor gated = eca_forward(module.eca(), b);
  return add(sca_forward(module.sca(), a, gated), b);
}

}  // namespace edtk
