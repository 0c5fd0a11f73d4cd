#include "edtk/network.hpp"

#include <set>

#include "edtk/costmodel.hpp"
#include "edtk/errors.hpp"
#include "edtk/ops.hpp"

namespace edtk {

namespace {

std::string lateral_path(std::size_t k) { return "neck.lateral" + std::to_string(k); }
std::string joint_path(std::size_t k) { return "neck.joint" + std::to_string(k); }
std::string scale_path(std::size_t k) { return "head.scale" + std::to_string(k); }

class Recorder {
 public:
  explicit Recorder(ForwardTrace* trace) : trace_(trace) {}

  template <typename F>
  Tensor run(const std::string& path, F&& f) {
    if (!trace_) return f();
    CountDelta delta;
    Tensor out = f();
    trace_->modules.emplace_back(path, delta.read());
    trace_->module_shapes.push_back(out.shape());
    return out;
  }

 private:
  ForwardTrace* trace_;
};

}  // namespace

Network Network::assemble(const NetworkSpec& spec, std::uint64_t seed) {
  spec.validate();
  Network net;
  net.spec_ = spec;
  net.backbone_ = Backbone::build(spec.in_channels, spec.stages, spec.shuffle_groups, spec.block_form, Activation::relu,
                                  seed, "backbone");
  const std::size_t first = spec.stages.size() - 4;
  std::vector<HeadScaleSpec> scales;
  for (std::size_t k = 0; k < 4; ++k) {
    net.laterals_.emplace_back(spec.stages[first + k].channels, spec.neck_width, false, true, seed, lateral_path(k));
    scales.push_back(HeadScaleSpec{spec.head_strides[k], spec.neck_width});
  }
  for (std::size_t k = 0; k < 3; ++k)
    net.joints_.emplace_back(EcaModule(spec.neck_width, seed, joint_path(k) + ".eca"), ScaModule(spec.pool_k));
  net.head_ = EfficientHead(scales, spec.num_classes, spec.head_width, spec.head_depth, seed, "head");
  return net;
}

std::vector<Tensor> Network::forward(const Tensor& image, ForwardTrace* trace) const {
  require_rank3(image.shape(), "Network input");
  const Shape expected{spec_.in_channels, spec_.height, spec_.width};
  if (!(image.shape() == expected))
    throw ShapeError("Network: input is " + image.shape().to_string() + ", config expects " + expected.to_string());
  Recorder rec(trace);

  std::vector<Tensor> stage_out;
  Tensor cur = image;
  const auto& stages = backbone_.stages();
  for (std::size_t s = 0; s < stages.size(); ++s) {
    if (stages[s].transition)
      cur = rec.run("backbone.stage" + std::to_string(s) + ".transition",
                    [&] { return stages[s].transition->forward(cur); });
    for (std::size_t b = 0; b < stages[s].blocks.size(); ++b)
      cur = rec.run(Backbone::block_path("backbone", s, b), [&] { return stages[s].blocks[b].forward(cur); });
    stage_out.push_back(cur);
  }

  const std::size_t first = stage_out.size() - 4;
  std::vector<Tensor> lat(4);
  for (std::size_t k = 0; k < 4; ++k)
    lat[k] = rec.run(lateral_path(k), [&] { return laterals_[k].forward(stage_out[first + k]); });

  std::vector<Tensor> neck(4);
  neck[3] = lat[3];
  for (std::size_t k = 3; k-- > 0;)
    neck[k] = rec.run(joint_path(k), [&] {
      const Tensor up = upsample_nearest(neck[k + 1], 2);
      return add(lat[k], joint_forward(joints_[k], lat[k], up));
    });

  std::vector<Tensor> preds;
  for (std::size_t k = 0; k < 4; ++k)
    preds.push_back(rec.run(scale_path(k), [&] { return head_.forward_scale(k, neck[k]); }));
  return preds;
}

ParamList Network::parameters() const {
  ParamList out;
  backbone_.collect("backbone", out);
  for (std::size_t k = 0; k < laterals_.size(); ++k) laterals_[k].collect(lateral_path(k), out);
  for (std::size_t k = 0; k < joints_.size(); ++k) joints_[k].collect(joint_path(k), out);
  head_.collect("head", out);
  return out;
}

Network fuse_network(const Network& net) {
  if (net.is_fused()) return net;
  Network out = net;
  out.backbone_ = net.backbone_.fused();
  return out;
}

Tensor& parameter_at(Network& net, const std::string& path) {
  for (const auto& p : net.parameters())
    // The network is non-const, so the referenced tensor is too.
    if (p.path == path) return const_cast<Tensor&>(*p.tensor);
  throw ArchiveError("no parameter at path '" + path + "'");
}

std::vector<ModuleCost> module_costs(const Network& training_form) {
  const bool fusible = training_form.backbone().unfusible_blocks().empty();
  const Network fused = fusible ? fuse_network(training_form) : training_form;
  const NetworkSpec& spec = training_form.spec();
  const Tensor blank(Shape{spec.in_channels, spec.height, spec.width});

  ForwardTrace t_train, t_fused;
  {
    OpCounter ctr;
    CounterScope scope(ctr);
    (void)training_form.forward(blank, &t_train);
  }
  if (fusible) {
    OpCounter ctr;
    CounterScope scope(ctr);
    (void)fused.forward(blank, &t_fused);
  }

  auto params_under = [](const ParamList& all, const std::string& prefix) {
    std::size_t n = 0;
    for (const auto& p : all)
      if (p.path.compare(0, prefix.size() + 1, prefix + ".") == 0) n += p.tensor->size();
    return n;
  };
  const ParamList p_train = training_form.parameters();
  const ParamList p_fused = fused.parameters();

  std::set<std::string> down_blocks;
  const auto& stages = training_form.backbone().stages();
  for (std::size_t s = 0; s < stages.size(); ++s)
    for (std::size_t b = 0; b < stages[s].blocks.size(); ++b)
      if (stages[s].blocks[b].config().kind == BlockKind::downsampling)
        down_blocks.insert(Backbone::block_path("backbone", s, b));

  std::vector<ModuleCost> rows;
  for (std::size_t i = 0; i < t_train.modules.size(); ++i) {
    ModuleCost r;
    r.path = t_train.modules[i].first;
    r.out_shape = t_train.module_shapes[i];
    r.params_train = params_under(p_train, r.path);
    r.macs_train = t_train.modules[i].second.multiply_adds;
    r.fusible = fusible;
    if (fusible) {
      r.params_fused = params_under(p_fused, r.path);
      r.macs_fused = t_fused.modules[i].second.multiply_adds;
    }
    const std::size_t c = r.out_shape[0], h = r.out_shape[1], w = r.out_shape[2];

    if (r.path.find(".block") != std::string::npos) {
      r.kind = down_blocks.count(r.path) ? "repdconv_down" : "repdconv";
      const cost::ConvCostInputs in{c, c, h, w, 1.0};
      r.analytic_train = cost::repdconv_train(in);
      const cost::InferPair pair = cost::infer_pair(in);
      r.analytic_infer = pair.repdconv;
      r.baseline_infer = pair.repvgg;
      r.lambda_infer = cost::ratio_infer(in, false);
    } else if (r.path.find(".transition") != std::string::npos) {
      r.kind = "transition";
    } else if (r.path.find("lateral") != std::string::npos) {
      r.kind = "lateral";
    } else if (r.path.find("joint") != std::string::npos) {
      r.kind = "joint";
      const cost::AttnCostInputs in{c, h, w, h, w};
      r.analytic_train = r.analytic_infer = cost::sca(in).total();
      r.baseline_infer = cost::nonlocal(in).total();
      r.lambda_infer = cost::ratio_sca(in, false);
    } else {
      r.kind = "head_scale";
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace edtk
