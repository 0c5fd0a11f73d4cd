#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "edtk/layers.hpp"
#include "edtk/op_counter.hpp"
#include "edtk/tensor.hpp"

namespace edtk {

// ---------------------------------------------------------------------------
// Sparse cross-attention
//
// Both inputs are reduced to directional tokens: per-channel k x k max and
// average pooling give a 2C-channel map F, whose row means (H tokens) and
// column means (W tokens) form a (H+W) x 2C token matrix. Each token of the
// upstream map B attends over all tokens of A; the enhanced row tokens are
// broadcast along width, the column tokens along height, summed, and the
// max/avg halves are averaged back to C channels.

/// Parameter-free; only the pooling window is configurable.
class ScaModule {
 public:
  explicit ScaModule(std::size_t pool_k = 3);

  std::size_t pool_k() const { return pool_k_; }
  std::size_t parameter_count() const { return 0; }
  void collect(const std::string&, ParamList&) const {}

 private:
  std::size_t pool_k_;
};

/// Cost of each stage of one sca_forward call.
struct ScaStageCounts {
  OpCounts pre;      // spatial + directional pooling of both inputs
  OpCounts weights;  // token dot products
  OpCounts softmax;
  OpCounts apply;  // weighted token sums
  OpCounts post;   // expansion + pixel-wise addition
  OpCounts fold;   // 2C -> C

  OpCounts attention_stage() const { return weights + apply; }
  OpCounts total() const { return pre + weights + softmax + apply + post + fold; }
};

struct ScaTrace {
  Tensor tokens_a;   // (H+W) x 2C
  Tensor tokens_b;   // (h+w) x 2C
  Tensor attention;  // (h+w) x (H+W), rows sum to 1
  Tensor enhanced;   // (h+w) x 2C
  ScaStageCounts counts;
};

/// Token matrix of a C x H x W map: rows 0..H-1 are row tokens, rows H..H+W-1
/// column tokens; each row holds the max-pooled channels then the avg-pooled ones.
Tensor sca_tokens(const ScaModule& module, const Tensor& x);

struct AttentionResult {
  Tensor attention;  // rows: query tokens, columns: key tokens
  Tensor enhanced;   // attention * keys
};

/// Softmax(queries . keys^T) over keys, then the weighted sum of keys.
AttentionResult token_attention(const Tensor& keys, const Tensor& queries, ScaStageCounts* counts = nullptr);

/// Returns B' with b's shape.
Tensor sca_forward(const ScaModule& module, const Tensor& a, const Tensor& b, ScaTrace* trace = nullptr);

// ---------------------------------------------------------------------------
// Efficient channel attention

class EcaModule {
 public:
  EcaModule() = default;
  /// Kernel size chosen by eca_kernel_size(channels), uniform init.
  EcaModule(std::size_t channels, std::uint64_t seed, const std::string& path);
  explicit EcaModule(Tensor kernel);

  std::size_t k() const { return kernel_.size(); }
  const Tensor& kernel() const { return kernel_; }
  std::size_t parameter_count() const { return kernel_.size(); }
  void collect(const std::string& prefix, ParamList& out) const {
    out.push_back({prefix + ".kernel", &kernel_, false});
  }

 private:
  Tensor kernel_{Shape{3}};
};

/// Odd kernel size nearest to (log2(C) + 1) / 2, at least 3.
std::size_t eca_kernel_size(std::size_t channels);

/// sigmoid(conv1d(global_avg_pool(x))) per channel; conv1d is zero padded.
std::vector<float> eca_gates(const EcaModule& module, const Tensor& x);

Tensor eca_forward(const EcaModule& module, const Tensor& x);

// ---------------------------------------------------------------------------
// Joint module: channel attention on the upstream map, then sparse
// cross-attention against this module's features, added back to the upstream map.

class JointModule {
 public:
  JointModule() = default;
  JointModule(EcaModule eca, ScaModule sca) : eca_(std::move(eca)), sca_(sca) {}

  const EcaModule& eca() const { return eca_; }
  const ScaModule& sca() const { return sca_; }
  std::size_t parameter_count() const { return eca_.parameter_count(); }
  void collect(const std::string& prefix, ParamList& out) const { eca_.collect(prefix + ".eca", out); }

 private:
  EcaModule eca_;
  ScaModule sca_;
};

/// sca_forward(a, eca_forward(b)) + b.
Tensor joint_forward(const JointModule& module, const Tensor& a, const Tensor& b);

}  // namespace edtk
