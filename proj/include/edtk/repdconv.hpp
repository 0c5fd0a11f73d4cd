#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "edtk/layers.hpp"
#include "edtk/op_counter.hpp"
#include "edtk/tensor.hpp"

namespace edtk {

enum class BlockKind { basic, downsampling };

/// Where the nonlinearity sits in the training-form block.
///
/// per_branch follows the original description: sigma after every branch
/// convolution and again after the branch weighting. That block is not
/// linear, so it cannot be fused. post_block applies one activation after the
/// channel shuffle; the branch path is linear and fuses exactly.
enum class BranchActivation { per_branch, post_block };

enum class Activation { relu, identity };

struct RepDConvConfig {
  std::size_t channels = 3;
  std::size_t shuffle_groups = 3;
  BlockKind kind = BlockKind::basic;
  BranchActivation form = BranchActivation::post_block;
  Activation activation = Activation::relu;
};

/// Training-form weights. Channels are split into three equal groups: group 0
/// takes the 1x3 (horizontal) kernel, group 1 the 3x1 (vertical), group 2 the
/// 3x3 (square). Each depthwise kernel is followed by a per-channel scale.
struct BranchWeights {
  Tensor kernel_h;   // (C/3, 1, 1, 3)
  Tensor kernel_v;   // (C/3, 1, 3, 1)
  Tensor kernel_sq;  // (C/3, 1, 3, 3)
  Tensor scale_h;    // (C/3)
  Tensor scale_v;    // (C/3)
  Tensor scale_sq;   // (C/3)
};

/// Inference-form weights: one depthwise 3x3 kernel per channel. The shuffle is
/// kept as a permutation derived from the group count.
struct FusedWeights {
  Tensor kernel;  // (C, 1, 3, 3)
};

/// Per-stage cost breakdown of a training-form forward.
struct RepDConvTrace {
  OpCounts branches;
  OpCounts weighting;
  OpCounts residual;
  OpCounts shuffle;
  OpCounts activation;
};

class RepDConvBlock {
 public:
  static constexpr std::size_t kBranchGroups = 3;

  RepDConvBlock(const RepDConvConfig& config, BranchWeights weights);
  RepDConvBlock(const RepDConvConfig& config, FusedWeights weights);

  /// Fresh training-form block: kernels uniform in +-1/sqrt(fan-in), scales 1.
  static RepDConvBlock initialized(const RepDConvConfig& config, std::uint64_t seed, const std::string& path);

  const RepDConvConfig& config() const { return config_; }
  std::size_t channels() const { return config_.channels; }
  std::size_t group_channels() const { return config_.channels / kBranchGroups; }
  std::size_t stride() const { return config_.kind == BlockKind::downsampling ? 2 : 1; }
  bool is_fused() const { return std::holds_alternative<FusedWeights>(weights_); }
  bool is_fusible() const { return config_.form == BranchActivation::post_block; }

  const BranchWeights& branches() const;
  const FusedWeights& fused_weights() const;
  const std::vector<std::size_t>& permutation() const { return permutation_; }

  /// Stored numeric elements.
  std::size_t parameter_count() const;
  /// Stored numeric tensors (kernels + scale vectors, or the single fused kernel).
  std::size_t tensor_count() const { return is_fused() ? 1 : 6; }

  /// Training-form or inference-form forward depending on the block's mode.
  Tensor forward(const Tensor& x) const;

  void collect(const std::string& prefix, ParamList& out) const;

  /// Output spatial size for an input dimension.
  std::size_t out_dim(std::size_t in) const { return (in - 1) / stride() + 1; }

 private:
  void validate();

  RepDConvConfig config_;
  std::variant<BranchWeights, FusedWeights> weights_;
  std::vector<std::size_t> permutation_;
};

/// Multi-branch forward: split, branch convolutions, per-channel weighting,
/// concat, residual (basic blocks), channel shuffle.
Tensor forward_training(const RepDConvBlock& block, const Tensor& x, RepDConvTrace* trace = nullptr);

/// Collapses the branches, scales and residual into one depthwise 3x3 kernel
/// per channel. Throws StateError for per-branch-activation blocks.
RepDConvBlock fuse(const RepDConvBlock& block);

/// Single depthwise 3x3 convolution followed by the stored permutation.
Tensor forward_inference(const RepDConvBlock& block, const Tensor& x);

/// Places a 1x3 or 3x1 kernel row/column into the middle of a 3x3 kernel.
Tensor embed_in_3x3(const Tensor& kernel);

// ---------------------------------------------------------------------------
// Backbone

struct StageSpec {
  std::size_t channels = 3;
  std::size_t depth = 1;
  std::size_t stride = 2;
  std::optional<BranchActivation> form;  // overrides the backbone default
};

struct BackboneStage {
  std::optional<PointwiseConv> transition;  // present when channels change
  std::vector<RepDConvBlock> blocks;
};

/// Stacked Rep-DConvNet stages. Each stage: optional 1x1 transition to the
/// stage width, a downsampling block when the stage stride is 2 (basic
/// otherwise), then depth-1 basic blocks.
class Backbone {
 public:
  Backbone() = default;
  Backbone(std::size_t input_channels, std::vector<BackboneStage> stages);

  static Backbone build(std::size_t input_channels, const std::vector<StageSpec>& stages, std::size_t shuffle_groups,
                        BranchActivation form, Activation activation, std::uint64_t seed,
                        const std::string& prefix = "backbone");

  const std::vector<BackboneStage>& stages() const { return stages_; }
  std::size_t input_channels() const { return input_channels_; }

  /// Output of every stage, in order.
  std::vector<Tensor> forward(const Tensor& x) const;

  bool is_fused() const;
  /// Paths of blocks that cannot be fused.
  std::vector<std::string> unfusible_blocks(const std::string& prefix = "backbone") const;
  Backbone fused() const;

  void collect(const std::string& prefix, ParamList& out) const;

  static std::string block_path(const std::string& prefix, std::size_t stage, std::size_t block);

 private:
  std::size_t input_channels_ = 3;
  std::vector<BackboneStage> stages_;
};

}  // namespace edtk
