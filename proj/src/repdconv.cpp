#include "edtk/repdconv.hpp"

#include <sstream>

#include "edtk/errors.hpp"
#include "edtk/ops.hpp"

namespace edtk {

namespace {

void expect_shape(const Tensor& t, const Shape& s, const char* name) {
  if (!(t.shape() == s))
    throw ShapeError(std::string("RepDConvBlock: ") + name + " has shape " + t.shape().to_string() + ", expected " +
                     s.to_string());
}

Tensor apply_activation(const Tensor& x, Activation a) { return a == Activation::relu ? relu(x) : x; }

}  // namespace

Tensor embed_in_3x3(const Tensor& kernel) {
  if (kernel.rank() != 4) throw ShapeError("embed_in_3x3: kernel must be rank 4");
  const std::size_t out = kernel.shape()[0], in = kernel.shape()[1];
  const std::size_t kh = kernel.shape()[2], kw = kernel.shape()[3];
  if (kh > 3 || kw > 3 || kh % 2 == 0 || kw % 2 == 0)
    throw ShapeError("embed_in_3x3: kernel " + kernel.shape().to_string() + " is not 1x3, 3x1 or 3x3");
  const std::size_t oy = (3 - kh) / 2, ox = (3 - kw) / 2;
  Tensor k3(Shape{out, in, 3, 3});
  for (std::size_t o = 0; o < out; ++o)
    for (std::size_t i = 0; i < in; ++i)
      for (std::size_t y = 0; y < kh; ++y)
        for (std::size_t x = 0; x < kw; ++x) k3.at(o, i, y + oy, x + ox) = kernel.at(o, i, y, x);
  return k3;
}

RepDConvBlock::RepDConvBlock(const RepDConvConfig& config, BranchWeights weights)
    : config_(config), weights_(std::move(weights)) {
  validate();
}

RepDConvBlock::RepDConvBlock(const RepDConvConfig& config, FusedWeights weights)
    : config_(config), weights_(std::move(weights)) {
  if (config_.form != BranchActivation::post_block)
    throw StateError("RepDConvBlock: a fused block must use the post-block activation form");
  validate();
}

void RepDConvBlock::validate() {
  const std::size_t c = config_.channels;
  if (c == 0 || c % kBranchGroups != 0)
    throw ShapeError("RepDConvBlock: channels " + std::to_string(c) + " not divisible by 3 branch groups");
  if (config_.shuffle_groups == 0 || c % config_.shuffle_groups != 0)
    throw ShapeError("RepDConvBlock: channels " + std::to_string(c) + " not divisible by shuffle groups " +
                     std::to_string(config_.shuffle_groups));
  const std::size_t g = c / kBranchGroups;
  if (const auto* b = std::get_if<BranchWeights>(&weights_)) {
    expect_shape(b->kernel_h, Shape{g, 1, 1, 3}, "kernel_h");
    expect_shape(b->kernel_v, Shape{g, 1, 3, 1}, "kernel_v");
    expect_shape(b->kernel_sq, Shape{g, 1, 3, 3}, "kernel_sq");
    expect_shape(b->scale_h, Shape{g}, "scale_h");
    expect_shape(b->scale_v, Shape{g}, "scale_v");
    expect_shape(b->scale_sq, Shape{g}, "scale_sq");
  } else {
    expect_shape(std::get<FusedWeights>(weights_).kernel, Shape{c, 1, 3, 3}, "fused kernel");
  }
  permutation_ = shuffle_permutation(c, config_.shuffle_groups);
}

RepDConvBlock RepDConvBlock::initialized(const RepDConvConfig& config, std::uint64_t seed, const std::string& path) {
  if (config.channels == 0 || config.channels % kBranchGroups != 0)
    throw ShapeError("RepDConvBlock: channels " + std::to_string(config.channels) +
                     " not divisible by 3 branch groups");
  const std::size_t g = config.channels / kBranchGroups;
  BranchWeights w{
      uniform_init(Shape{g, 1, 1, 3}, 3, seed, path + ".kernel_h"),
      uniform_init(Shape{g, 1, 3, 1}, 3, seed, path + ".kernel_v"),
      uniform_init(Shape{g, 1, 3, 3}, 9, seed, path + ".kernel_sq"),
      Tensor(Shape{g}, 1.0f),
      Tensor(Shape{g}, 1.0f),
      Tensor(Shape{g}, 1.0f),
  };
  return RepDConvBlock(config, std::move(w));
}

const BranchWeights& RepDConvBlock::branches() const {
  if (const auto* b = std::get_if<BranchWeights>(&weights_)) return *b;
  throw StateError("RepDConvBlock: block is fused; branch weights no longer exist");
}

const FusedWeights& RepDConvBlock::fused_weights() const {
  if (const auto* f = std::get_if<FusedWeights>(&weights_)) return *f;
  throw StateError("RepDConvBlock: block is in training form; call fuse() first");
}

std::size_t RepDConvBlock::parameter_count() const {
  ParamList params;
  collect("", params);
  return count_elements(params);
}

void RepDConvBlock::collect(const std::string& prefix, ParamList& out) const {
  if (const auto* b = std::get_if<BranchWeights>(&weights_)) {
    out.push_back({prefix + ".kernel_h", &b->kernel_h, false});
    out.push_back({prefix + ".kernel_v", &b->kernel_v, false});
    out.push_back({prefix + ".kernel_sq", &b->kernel_sq, false});
    out.push_back({prefix + ".scale_h", &b->scale_h, false});
    out.push_back({prefix + ".scale_v", &b->scale_v, false});
    out.push_back({prefix + ".scale_sq", &b->scale_sq, false});
  } else {
    out.push_back({prefix + ".fused_kernel", &std::get<FusedWeights>(weights_).kernel, true});
  }
}

Tensor RepDConvBlock::forward(const Tensor& x) const {
  return is_fused() ? forward_inference(*this, x) : forward_training(*this, x);
}

Tensor forward_training(const RepDConvBlock& block, const Tensor& x, RepDConvTrace* trace) {
  require_rank3(x.shape(), "RepDConvBlock forward");
  if (block.is_fused()) throw StateError("forward_training: block is fused; use forward_inference");
  if (x.channels() != block.channels())
    throw ShapeError("forward_training: input has " + std::to_string(x.channels()) + " channels, block expects " +
                     std::to_string(block.channels()));

  const auto& w = block.branches();
  const std::size_t g = block.group_channels();
  const bool literal = block.config().form == BranchActivation::per_branch;
  const Conv2dParams conv{block.stride(), 1, 1, g};

  // Every branch runs as a 3x3 depthwise convolution; the 1x3 and 3x1 kernels
  // are zero-embedded so all three groups share geometry and stride alignment.
  const Tensor* kernels[3] = {&w.kernel_h, &w.kernel_v, &w.kernel_sq};
  const Tensor* scales[3] = {&w.scale_h, &w.scale_v, &w.scale_sq};

  std::vector<Tensor> branch_out;
  branch_out.reserve(3);
  OpCounts branch_cost, weight_cost;
  for (std::size_t i = 0; i < 3; ++i) {
    const Tensor xi = slice_channels(x, i * g, g);
    CountDelta d_branch;
    Tensor y = conv2d(xi, embed_in_3x3(*kernels[i]), conv);
    if (literal) y = relu(y);
    branch_cost += d_branch.read();

    CountDelta d_weight;
    Tensor z = scale_channels(y, scales[i]->data());
    if (literal) z = relu(z);
    weight_cost += d_weight.read();
    branch_out.push_back(std::move(z));
  }
  Tensor concat = concat_channels(branch_out);

  CountDelta d_residual;
  if (block.config().kind == BlockKind::basic) concat = add(concat, x);
  const OpCounts residual_cost = d_residual.read();

  CountDelta d_shuffle;
  Tensor out = permute_channels(concat, block.permutation());
  const OpCounts shuffle_cost = d_shuffle.read();

  CountDelta d_act;
  if (!literal) out = apply_activation(out, block.config().activation);
  const OpCounts act_cost = d_act.read();

  if (trace) *trace = RepDConvTrace{branch_cost, weight_cost, residual_cost, shuffle_cost, act_cost};
  return out;
}

RepDConvBlock fuse(const RepDConvBlock& block) {
  if (block.is_fused()) return block;
  if (!block.is_fusible())
    throw StateError(
        "fuse: block applies an activation inside each branch and after each weighting; the branch sum "
        "is not linear in the input, so no single kernel reproduces it. Use the post-block activation form.");

  const auto& w = block.branches();
  const std::size_t g = block.group_channels();
  const Tensor* kernels[3] = {&w.kernel_h, &w.kernel_v, &w.kernel_sq};
  const Tensor* scales[3] = {&w.scale_h, &w.scale_v, &w.scale_sq};

  Tensor fused(Shape{block.channels(), 1, 3, 3});
  for (std::size_t i = 0; i < 3; ++i) {
    const Tensor k3 = embed_in_3x3(*kernels[i]);
    for (std::size_t c = 0; c < g; ++c) {
      const float s = (*scales[i])[c];
      for (std::size_t y = 0; y < 3; ++y)
        for (std::size_t x = 0; x < 3; ++x) fused.at(i * g + c, 0, y, x) = s * k3.at(c, 0, y, x);
    }
  }
  if (block.config().kind == BlockKind::basic)
    for (std::size_t c = 0; c < block.channels(); ++c) fused.at(c, 0, 1, 1) += 1.0f;

  return RepDConvBlock(block.config(), FusedWeights{std::move(fused)});
}

Tensor forward_inference(const RepDConvBlock& block, const Tensor& x) {
  require_rank3(x.shape(), "RepDConvBlock forward");
  if (!block.is_fused()) throw StateError("forward_inference: block is in training form; call fuse() first");
  if (x.channels() != block.channels())
    throw ShapeError("forward_inference: input has " + std::to_string(x.channels()) + " channels, block expects " +
                     std::to_string(block.channels()));
  Tensor y = conv2d(x, block.fused_weights().kernel, Conv2dParams{block.stride(), 1, 1, block.channels()});
  y = permute_channels(y, block.permutation());
  return apply_activation(y, block.config().activation);
}

// ---------------------------------------------------------------------------

Backbone::Backbone(std::size_t input_channels, std::vector<BackboneStage> stages)
    : input_channels_(input_channels), stages_(std::move(stages)) {}

std::string Backbone::block_path(const std::string& prefix, std::size_t stage, std::size_t block) {
  return prefix + ".stage" + std::to_string(stage) + ".block" + std::to_string(block);
}

Backbone Backbone::build(std::size_t input_channels, const std::vector<StageSpec>& stages, std::size_t shuffle_groups,
                         BranchActivation form, Activation activation, std::uint64_t seed, const std::string& prefix) {
  if (stages.empty()) throw ShapeError("build_backbone: at least one stage is required");
  std::vector<BackboneStage> built;
  std::size_t prev = input_channels;
  for (std::size_t s = 0; s < stages.size(); ++s) {
    const StageSpec& spec = stages[s];
    const std::string stage_path = prefix + ".stage" + std::to_string(s);
    if (spec.channels % RepDConvBlock::kBranchGroups != 0)
      throw ShapeError(stage_path + ": channels " + std::to_string(spec.channels) + " not divisible by 3");
    if (shuffle_groups == 0 || spec.channels % shuffle_groups != 0)
      throw ShapeError(stage_path + ": channels " + std::to_string(spec.channels) +
                       " not divisible by shuffle groups " + std::to_string(shuffle_groups));
    if (spec.depth == 0) throw ShapeError(stage_path + ": depth must be at least 1");
    if (spec.stride != 1 && spec.stride != 2) throw ShapeError(stage_path + ": stride must be 1 or 2");

    BackboneStage stage;
    if (spec.channels != prev)
      stage.transition = PointwiseConv(prev, spec.channels, false, true, seed, stage_path + ".transition");
    for (std::size_t b = 0; b < spec.depth; ++b) {
      RepDConvConfig cfg;
      cfg.channels = spec.channels;
      cfg.shuffle_groups = shuffle_groups;
      cfg.kind = (b == 0 && spec.stride == 2) ? BlockKind::downsampling : BlockKind::basic;
      cfg.form = spec.form.value_or(form);
      cfg.activation = activation;
      stage.blocks.push_back(RepDConvBlock::initialized(cfg, seed, block_path(prefix, s, b)));
    }
    built.push_back(std::move(stage));
    prev = spec.channels;
  }
  return Backbone(input_channels, std::move(built));
}

std::vector<Tensor> Backbone::forward(const Tensor& x) const {
  require_rank3(x.shape(), "backbone input");
  if (x.channels() != input_channels_)
    throw ShapeError("backbone: input has " + std::to_string(x.channels()) + " channels, expected " +
                     std::to_string(input_channels_));
  std::vector<Tensor> outputs;
  Tensor cur = x;
  for (const auto& stage : stages_) {
    if (stage.transition) cur = stage.transition->forward(cur);
    for (const auto& block : stage.blocks) cur = block.forward(cur);
    outputs.push_back(cur);
  }
  return outputs;
}

bool Backbone::is_fused() const {
  for (const auto& st : stages_)
    for (const auto& b : st.blocks)
      if (!b.is_fused()) return false;
  return true;
}

std::vector<std::string> Backbone::unfusible_blocks(const std::string& prefix) const {
  std::vector<std::string> bad;
  for (std::size_t s = 0; s < stages_.size(); ++s)
    for (std::size_t b = 0; b < stages_[s].blocks.size(); ++b)
      if (!stages_[s].blocks[b].is_fusible()) bad.push_back(block_path(prefix, s, b));
  return bad;
}

Backbone Backbone::fused() const {
  const auto bad = unfusible_blocks();
  if (!bad.empty()) {
    std::ostringstream os;
    os << "fuse_network: " << bad.size() << " block(s) use per-branch activations and cannot be fused:";
    for (const auto& p : bad) os << ' ' << p;
    throw StateError(os.str());
  }
  Backbone out = *this;
  for (auto& st : out.stages_)
    for (auto& b : st.blocks) b = fuse(b);
  return out;
}

void Backbone::collect(const std::string& prefix, ParamList& out) const {
  for (std::size_t s = 0; s < stages_.size(); ++s) {
    const auto& st = stages_[s];
    if (st.transition) st.transition->collect(prefix + ".stage" + std::to_string(s) + ".transition", out);
    for (std::size_t b = 0; b < st.blocks.size(); ++b) st.blocks[b].collect(block_path(prefix, s, b), out);
  }
}

}  // namespace edtk
