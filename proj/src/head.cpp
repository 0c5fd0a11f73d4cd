#include "edtk/head.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "edtk/errors.hpp"
#include "edtk/ops.hpp"

namespace edtk {

GhostBlock::GhostBlock(std::size_t in_channels, std::size_t out_channels, std::uint64_t seed, const std::string& path) {
  if (out_channels == 0 || out_channels % 2 != 0)
    throw ShapeError(path + ": ghost block output channels must be even, got " + std::to_string(out_channels));
  const std::size_t half = out_channels / 2;
  primary_ = uniform_init(Shape{half, in_channels, 1, 1}, in_channels, seed, path + ".primary");
  cheap_ = uniform_init(Shape{half, 1, 3, 3}, 9, seed, path + ".cheap");
}

GhostBlock::GhostBlock(Tensor primary, Tensor cheap) : primary_(std::move(primary)), cheap_(std::move(cheap)) {
  if (primary_.rank() != 4 || primary_.shape()[2] != 1 || primary_.shape()[3] != 1)
    throw ShapeError("GhostBlock: primary kernel must be (C_out/2, C_in, 1, 1)");
  if (!(cheap_.shape() == Shape{primary_.shape()[0], 1, 3, 3}))
    throw ShapeError("GhostBlock: cheap kernel must be (C_out/2, 1, 3, 3)");
}

Tensor GhostBlock::forward(const Tensor& x) const {
  require_rank3(x.shape(), "GhostBlock");
  if (x.channels() != in_channels())
    throw ShapeError("GhostBlock: input has " + std::to_string(x.channels()) + " channels, expected " +
                     std::to_string(in_channels()));
  const Tensor p = relu(conv2d(x, primary_, Conv2dParams{}));
  const Tensor q = relu(conv2d(p, cheap_, Conv2dParams{1, 1, 1, p.channels()}));
  return concat_channels<float>({p, q});
}

std::uint64_t GhostBlock::macs(std::size_t h, std::size_t w) const {
  const std::uint64_t half = primary_.shape()[0];
  return half * in_channels() * h * w + half * 9 * h * w;
}

void GhostBlock::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".primary", &primary_, false});
  out.push_back({prefix + ".cheap", &cheap_, false});
}

EfficientHead::EfficientHead(const std::vector<HeadScaleSpec>& scales, std::size_t num_classes, std::size_t width,
                             std::size_t depth, std::uint64_t seed, const std::string& prefix)
    : scales_(scales), num_classes_(num_classes) {
  if (scales_.size() != kScales)
    throw ShapeError("EfficientHead: expected 4 scales, got " + std::to_string(scales_.size()));
  if (num_classes_ == 0) throw ShapeError("EfficientHead: num_classes must be positive");
  if (depth == 0) throw ShapeError("EfficientHead: trunk depth must be at least 1");
  for (std::size_t s = 0; s < scales_.size(); ++s) {
    const std::string sp = prefix + ".scale" + std::to_string(s);
    std::vector<GhostBlock> trunk;
    std::size_t c = scales_[s].in_channels;
    for (std::size_t d = 0; d < depth; ++d) {
      trunk.emplace_back(c, width, seed, sp + ".ghost" + std::to_string(d));
      c = width;
    }
    trunks_.push_back(std::move(trunk));
    predictors_.emplace_back(width, num_classes_ + 4, true, false, seed, sp + ".pred");
  }
}

std::vector<std::size_t> EfficientHead::strides() const {
  std::vector<std::size_t> out;
  for (const auto& s : scales_) out.push_back(s.stride);
  return out;
}

std::vector<Tensor> EfficientHead::forward(const std::vector<Tensor>& features) const {
  if (features.size() != scales_.size())
    throw ShapeError("EfficientHead: expected " + std::to_string(scales_.size()) + " feature maps, got " +
                     std::to_string(features.size()));
  std::vector<Tensor> preds;
  for (std::size_t s = 0; s < features.size(); ++s) preds.push_back(forward_scale(s, features[s]));
  return preds;
}

Tensor EfficientHead::forward_scale(std::size_t s, const Tensor& feature) const {
  if (s >= scales_.size()) throw ShapeError("EfficientHead: scale index " + std::to_string(s) + " out of range");
  require_rank3(feature.shape(), "EfficientHead feature");
  if (feature.channels() != scales_[s].in_channels)
    throw ShapeError("EfficientHead: scale " + std::to_string(s) + " feature has " +
                     std::to_string(feature.channels()) + " channels, expected " +
                     std::to_string(scales_[s].in_channels));
  Tensor x = feature;
  for (const auto& g : trunks_[s]) x = g.forward(x);
  Tensor p = predictors_[s].forward(x);
  // Box distances are non-negative.
  const Tensor boxes = relu(slice_channels(p, num_classes_, 4));
  std::copy(boxes.data().begin(), boxes.data().end(),
            p.data().begin() + static_cast<std::ptrdiff_t>(num_classes_ * p.height() * p.width()));
  return p;
}

void EfficientHead::collect(const std::string& prefix, ParamList& out) const {
  for (std::size_t s = 0; s < trunks_.size(); ++s) {
    const std::string sp = prefix + ".scale" + std::to_string(s);
    for (std::size_t d = 0; d < trunks_[s].size(); ++d) trunks_[s][d].collect(sp + ".ghost" + std::to_string(d), out);
    predictors_[s].collect(sp + ".pred", out);
  }
}

// ---------------------------------------------------------------------------

float iou(const Detection& a, const Detection& b) {
  const float iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const float ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  const float inter = (iw > 0 && ih > 0) ? iw * ih : 0.0f;
  const float uni = (a.x2 - a.x1) * (a.y2 - a.y1) + (b.x2 - b.x1) * (b.y2 - b.y1) - inter;
  if (uni <= 0.0f) return (a.x1 == b.x1 && a.y1 == b.y1 && a.x2 == b.x2 && a.y2 == b.y2) ? 1.0f : 0.0f;
  return inter / uni;
}

bool detection_order(const Detection& a, const Detection& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.scale != b.scale) return a.scale < b.scale;
  if (a.row != b.row) return a.row < b.row;
  if (a.col != b.col) return a.col < b.col;
  return a.class_id < b.class_id;
}

std::vector<Detection> nms(std::vector<Detection> dets, float iou_thresh) {
  std::sort(dets.begin(), dets.end(), detection_order);
  std::vector<Detection> kept;
  for (const auto& d : dets) {
    bool suppressed = false;
    for (const auto& k : kept)
      if (k.class_id == d.class_id && iou(k, d) > iou_thresh) {
        suppressed = true;
        break;
      }
    if (!suppressed) kept.push_back(d);
  }
  return kept;
}

std::vector<Detection> decode_detections(const std::vector<Tensor>& preds, const std::vector<std::size_t>& strides,
                                         float conf_thresh, float iou_thresh) {
  if (!(conf_thresh > 0.0f && conf_thresh < 1.0f))
    throw std::invalid_argument("decode: conf threshold must be in (0,1)");
  if (!(iou_thresh > 0.0f && iou_thresh < 1.0f)) throw std::invalid_argument("decode: IoU threshold must be in (0,1)");
  if (preds.size() != strides.size()) throw ShapeError("decode: one stride per prediction map is required");

  std::vector<Detection> cands;
  for (std::size_t s = 0; s < preds.size(); ++s) {
    const Tensor& p = preds[s];
    require_rank3(p.shape(), "decode prediction");
    if (p.channels() < 5) throw ShapeError("decode: prediction maps need at least one class plus 4 box channels");
    const std::size_t nc = p.channels() - 4;
    const float stride = static_cast<float>(strides[s]);
    for (std::size_t y = 0; y < p.height(); ++y)
      for (std::size_t x = 0; x < p.width(); ++x) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < nc; ++c)
          if (p.at(c, y, x) > p.at(best, y, x)) best = c;
        const float score = sigmoid(p.at(best, y, x));
        if (!(score > conf_thresh)) continue;
        const float cx = (static_cast<float>(x) + 0.5f) * stride;
        const float cy = (static_cast<float>(y) + 0.5f) * stride;
        Detection d;
        d.class_id = static_cast<int>(best);
        d.score = score;
        d.x1 = cx - p.at(nc + 0, y, x) * stride;
        d.y1 = cy - p.at(nc + 1, y, x) * stride;
        d.x2 = cx + p.at(nc + 2, y, x) * stride;
        d.y2 = cy + p.at(nc + 3, y, x) * stride;
        d.scale = s;
        d.row = y;
        d.col = x;
        cands.push_back(d);
      }
  }
  return nms(std::move(cands), iou_thresh);
}

std::string format_detection(const Detection& d) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%d %.4f %.4f %.4f %.4f %.4f", d.class_id, static_cast<double>(d.score),
                static_cast<double>(d.x1), static_cast<double>(d.y1), static_cast<double>(d.x2),
                static_cast<double>(d.y2));
  return buf;
}

}  // namespace edtk
