#pragma once

// Baseline blocks used as measured references for the cost model. They are
// forward-only and exist to be counted, not deployed.

#include <cstdint>

#include "edtk/op_counter.hpp"
#include "edtk/tensor.hpp"

namespace edtk {

/// Three dense 3x3 branches plus an identity branch (C_in = C_out), and the
/// equivalent single 3x3 kernel after fusion.
class RepVggBlock {
 public:
  RepVggBlock(std::size_t channels, std::uint64_t seed);

  std::size_t channels() const { return channels_; }

  struct Trace {
    OpCounts branches;
    OpCounts merge;  // summing the three branch outputs
    OpCounts residual;
  };

  Tensor forward_training(const Tensor& x, Trace* trace = nullptr) const;
  /// Single dense 3x3 kernel equal to the sum of the branches plus identity.
  Tensor fused_kernel() const;
  Tensor forward_inference(const Tensor& x) const;

 private:
  std::size_t channels_;
  Tensor kernels_[3];  // each (C, C, 3, 3)
};

/// Cross-attention Non-local block: queries from A, keys and values from B,
/// each embedded by a per-position 1x1 (per-channel) map; the attended values
/// are projected and added to A. Output has A's shape.
class NonLocalBlock {
 public:
  NonLocalBlock(std::size_t channels, std::uint64_t seed);

  struct Trace {
    OpCounts embed;
    OpCounts weights;
    OpCounts softmax;
    OpCounts apply;
    OpCounts projection;
    OpCounts residual;

    OpCounts attention_stage() const { return weights + apply; }
    OpCounts total() const { return embed + weights + softmax + apply + projection + residual; }
  };

  Tensor forward(const Tensor& a, const Tensor& b, Trace* trace = nullptr) const;

 private:
  std::size_t channels_;
  Tensor theta_, phi_, g_, out_;  // per-channel embeddings, (C)
};

}  // namespace edtk
