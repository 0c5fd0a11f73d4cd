#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "edtk/layers.hpp"
#include "edtk/tensor.hpp"

namespace edtk {

/// Ghost convolution block: a dense 1x1 primary conv makes half the output
/// channels, a depthwise 3x3 over those makes the other half. ReLU after each.
class GhostBlock {
 public:
  GhostBlock(std::size_t in_channels, std::size_t out_channels, std::uint64_t seed, const std::string& path);
  GhostBlock(Tensor primary, Tensor cheap);

  std::size_t in_channels() const { return primary_.shape()[1]; }
  std::size_t out_channels() const { return 2 * primary_.shape()[0]; }
  const Tensor& primary() const { return primary_; }
  const Tensor& cheap() const { return cheap_; }

  Tensor forward(const Tensor& x) const;
  std::size_t parameter_count() const { return primary_.size() + cheap_.size(); }
  std::uint64_t macs(std::size_t h, std::size_t w) const;
  void collect(const std::string& prefix, ParamList& out) const;

 private:
  Tensor primary_;  // (C_out/2, C_in, 1, 1)
  Tensor cheap_;    // (C_out/2, 1, 3, 3)
};

/// Parameters of a dense 3x3 convolution with the same channel counts.
inline std::size_t dense3x3_parameter_count(std::size_t in_channels, std::size_t out_channels) {
  return in_channels * out_channels * 9;
}

struct HeadScaleSpec {
  std::size_t stride = 4;
  std::size_t in_channels = 3;
};

/// One GhostBlock trunk plus one 1x1 prediction conv per scale. Prediction
/// channels: num_classes raw logits, then 4 non-negative ltrb distances in
/// units of the scale's stride.
class EfficientHead {
 public:
  EfficientHead() = default;
  EfficientHead(const std::vector<HeadScaleSpec>& scales, std::size_t num_classes, std::size_t width, std::size_t depth,
                std::uint64_t seed, const std::string& prefix = "head");

  std::size_t num_classes() const { return num_classes_; }
  const std::vector<HeadScaleSpec>& scales() const { return scales_; }
  std::vector<std::size_t> strides() const;
  const std::vector<std::vector<GhostBlock>>& trunks() const { return trunks_; }
  const std::vector<PointwiseConv>& predictors() const { return predictors_; }

  std::vector<Tensor> forward(const std::vector<Tensor>& features) const;
  /// Prediction map of one scale.
  Tensor forward_scale(std::size_t scale, const Tensor& feature) const;
  void collect(const std::string& prefix, ParamList& out) const;

  static constexpr std::size_t kScales = 4;

 private:
  std::vector<HeadScaleSpec> scales_;
  std::size_t num_classes_ = 0;
  std::vector<std::vector<GhostBlock>> trunks_;
  std::vector<PointwiseConv> predictors_;
};

struct Detection {
  int class_id = 0;
  float score = 0.0f;
  float x1 = 0, y1 = 0, x2 = 0, y2 = 0;
  // Origin cell, for deterministic tie-breaking.
  std::size_t scale = 0, row = 0, col = 0;
};

float iou(const Detection& a, const Detection& b);

/// Score descending, then scale, row, column, class.
bool detection_order(const Detection& a, const Detection& b);

/// Greedy per-class suppression of boxes whose IoU with a kept box exceeds iou_thresh.
std::vector<Detection> nms(std::vector<Detection> dets, float iou_thresh);

/// Anchor-free decode: best class per cell, sigmoid score above conf_thresh,
/// box = cell centre -/+ ltrb * stride, then nms.
std::vector<Detection> decode_detections(const std::vector<Tensor>& preds, const std::vector<std::size_t>& strides,
                                         float conf_thresh, float iou_thresh);

/// "class_id score x1 y1 x2 y2" with four decimals.
std::string format_detection(const Detection& d);

}  // namespace edtk
