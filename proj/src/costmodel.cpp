#include "edtk/costmodel.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "edtk/attention.hpp"
#include "edtk/ops.hpp"
#include "edtk/reference_blocks.hpp"
#include "edtk/repdconv.hpp"
#include "edtk/rng.hpp"

namespace edtk::cost {

namespace {

double d(std::uint64_t v) { return static_cast<double>(v); }

Tensor random_map(std::size_t c, std::size_t h, std::size_t w, std::uint64_t seed) {
  Tensor t(Shape{c, h, w});
  Rng rng(seed);
  rng.fill_uniform(t, -1.0, 1.0);
  return t;
}

}  // namespace

void ConvCostInputs::validate() const {
  if (c_in == 0 || c_out == 0 || h == 0 || w == 0)
    throw std::invalid_argument("cost model: channel counts and spatial dims must be positive");
  if (!(c >= 0.0) || !std::isfinite(c))
    throw std::invalid_argument("cost model: shuffle cost c must be finite and >= 0");
}

void AttnCostInputs::validate() const {
  if (c == 0 || h_a == 0 || w_a == 0 || h_b == 0 || w_b == 0)
    throw std::invalid_argument("cost model: channel count and spatial dims must be positive");
}

double repvgg_train(const ConvCostInputs& in) {
  in.validate();
  return d(in.c_out) * d(in.h) * d(in.w) * (27.0 * d(in.c_in) + 1.0);
}

double repdconv_train(const ConvCostInputs& in) {
  in.validate();
  const double hw = d(in.h) * d(in.w);
  return 9.0 * d(in.c_in) * hw + 4.0 * d(in.c_out) * hw + in.c * d(in.c_out);
}

double ratio_train(const ConvCostInputs& in, bool simplified) {
  in.validate();
  if (simplified) return 13.0 / (27.0 * d(in.c_in) + 1.0);
  return repdconv_train(in) / repvgg_train(in);
}

InferPair infer_pair(const ConvCostInputs& in) {
  in.validate();
  const double hw = d(in.h) * d(in.w);
  return InferPair{9.0 * d(in.c_in) * d(in.c_out) * hw,
                   9.0 * d(in.c_in) * hw + 3.0 * d(in.c_out) * hw + in.c * d(in.c_out)};
}

double ratio_infer(const ConvCostInputs& in, bool simplified) {
  in.validate();
  if (simplified) return 4.0 / (3.0 * d(in.c_in));
  const InferPair p = infer_pair(in);
  return p.repdconv / p.repvgg;
}

ScaCost sca(const AttnCostInputs& in) {
  in.validate();
  const double c = d(in.c), hw_a = d(in.h_a) * d(in.w_a), hw_b = d(in.h_b) * d(in.w_b);
  ScaCost out;
  out.pre = 4.0 * c * hw_a + 4.0 * c * hw_b;
  out.attention = 2.0 * (d(in.h_a) + d(in.w_a)) * (d(in.h_b) + d(in.w_b)) * (2.0 * c);
  out.post = 6.0 * hw_a * c;
  return out;
}

NonLocalCost nonlocal(const AttnCostInputs& in) {
  in.validate();
  const double c = d(in.c), hw_a = d(in.h_a) * d(in.w_a), hw_b = d(in.h_b) * d(in.w_b);
  NonLocalCost out;
  out.embed = 3.0 * c * hw_a + c * hw_b;
  out.attention = 2.0 * c * hw_a * hw_b;
  out.projection = c * hw_a;
  out.stated_total = 4.0 * c * hw_a + 3.0 * c * hw_b + out.attention;
  return out;
}

double ratio_sca(const AttnCostInputs& in, bool simplified) {
  in.validate();
  if (simplified) {
    const double h = d(in.h_a);
    return 30.0 / (7.0 + 2.0 * h * h);
  }
  return sca(in).total() / nonlocal(in).total();
}

double ratio_sca_closed_form(const AttnCostInputs& in) {
  in.validate();
  const double H = d(in.h_a), W = d(in.w_a), h = d(in.h_b), w = d(in.w_b);
  const double num = 10.0 * H * W + 4.0 * h * w + 4.0 * (H + W) * (h + w);
  const double den = 4.0 * H * W + 3.0 * h * w + 2.0 * H * W * h * w;
  return num / den;
}

// ---------------------------------------------------------------------------

bool CostComparison::pass() const {
  if (tolerance < 0) return true;
  if (tolerance == 0) return measured == analytic;
  if (quotient) {
    const double lo = (1.0 - tolerance) / (1.0 + tolerance), hi = (1.0 + tolerance) / (1.0 - tolerance);
    return ratio() >= lo && ratio() <= hi;
  }
  return std::fabs(ratio() - 1.0) <= tolerance;
}

bool CostReport::all_pass() const {
  for (const auto& r : rows)
    if (!r.pass()) return false;
  return true;
}

std::string describe(const ConvCostInputs& in) {
  std::ostringstream os;
  os << "C_in=" << in.c_in << " C_out=" << in.c_out << " H=" << in.h << " W=" << in.w << " c=" << in.c;
  return os.str();
}

std::string describe(const AttnCostInputs& in) {
  std::ostringstream os;
  os << "C=" << in.c << " H=" << in.h_a << " W=" << in.w_a << " h=" << in.h_b << " w=" << in.w_b;
  return os.str();
}

CostReport compare_conv(const ConvCostInputs& in, std::size_t shuffle_groups, std::uint64_t seed) {
  in.validate();
  if (in.c_in != in.c_out)
    throw std::invalid_argument("compare_conv: measured blocks need C_in == C_out (residual branch)");
  const std::size_t c = in.c_in, h = in.h, w = in.w;
  const std::string params = describe(in);
  const Tensor x = random_map(c, h, w, derive_seed(seed, "compare_conv.input"));

  RepDConvConfig cfg;
  cfg.channels = c;
  cfg.shuffle_groups = shuffle_groups;
  const RepDConvBlock block = RepDConvBlock::initialized(cfg, seed, "compare.repdconv");
  const RepDConvBlock fused = fuse(block);
  const RepVggBlock vgg(c, seed);

  RepDConvTrace rep_trace;
  OpCounter train_ctr;
  {
    CounterScope scope(train_ctr);
    (void)forward_training(block, x, &rep_trace);
  }
  OpCounter infer_ctr;
  {
    CounterScope scope(infer_ctr);
    (void)forward_inference(fused, x);
  }
  RepVggBlock::Trace vgg_trace;
  OpCounter vgg_train_ctr;
  {
    CounterScope scope(vgg_train_ctr);
    (void)vgg.forward_training(x, &vgg_trace);
  }
  OpCounter vgg_infer_ctr;
  {
    CounterScope scope(vgg_infer_ctr);
    (void)vgg.forward_inference(x);
  }

  const double hw = d(h) * d(w);
  const double rep_train_measured = d(train_ctr.snapshot().total());
  const double rep_infer_measured = d(infer_ctr.snapshot().total());
  const double vgg_train_measured = d(vgg_train_ctr.snapshot().total());
  const double vgg_infer_measured = d(vgg_infer_ctr.snapshot().total());
  const InferPair pair = infer_pair(in);

  CostReport r;
  r.rows.push_back({"repdconv_train.branch_term", params, 9.0 * d(c) * hw, d(rep_trace.branches.multiply_adds), 0.0,
                    "3x3 depthwise over each channel group"});
  r.rows.push_back({"repdconv_train.total", params, repdconv_train(in), rep_train_measured, 0.25,
                    "weighting measured as one multiply per element (closed form charges 3 per output "
                    "element with the residual); trailing ReLU comparisons included"});
  r.rows.push_back({"repdconv_infer.branch_term", params, 9.0 * d(c) * hw, d(infer_ctr.snapshot().multiply_adds), 0.0,
                    "single fused depthwise 3x3"});
  r.rows.push_back({"repdconv_infer.total", params, pair.repdconv, rep_infer_measured, 0.25,
                    "weighting folded into the kernel (closed form keeps 3*C_out*H*W); ReLU comparisons included"});
  r.rows.push_back({"repvgg_train.conv_term", params, 27.0 * d(c) * d(c) * hw, d(vgg_trace.branches.multiply_adds), 0.0,
                    "three dense 3x3 branches"});
  r.rows.push_back({"repvgg_train.total", params, repvgg_train(in), vgg_train_measured, 0.25,
                    "branch-sum additions (2*C_out*H*W) not in closed form"});
  r.rows.push_back({"repvgg_infer.total", params, pair.repvgg, vgg_infer_measured, 0.0, "single dense 3x3"});
  r.rows.push_back({"lambda_train", params, ratio_train(in, false), rep_train_measured / vgg_train_measured, 0.25,
                    "quotient of the measured totals above", true});
  r.rows.push_back({"lambda_infer", params, ratio_infer(in, false), rep_infer_measured / vgg_infer_measured, 0.25,
                    "quotient of the measured totals above", true});
  return r;
}

CostReport compare_attention(const AttnCostInputs& in, std::size_t pool_k, std::uint64_t seed) {
  in.validate();
  const std::string params = describe(in);
  const Tensor a = random_map(in.c, in.h_a, in.w_a, derive_seed(seed, "compare_attention.a"));
  const Tensor b = random_map(in.c, in.h_b, in.w_b, derive_seed(seed, "compare_attention.b"));

  const ScaModule module(pool_k);
  ScaTrace sca_trace;
  {
    OpCounter ctr;
    CounterScope scope(ctr);
    (void)sca_forward(module, a, b, &sca_trace);
  }
  const NonLocalBlock nl(in.c, seed);
  NonLocalBlock::Trace nl_trace;
  {
    OpCounter ctr;
    CounterScope scope(ctr);
    (void)nl.forward(a, b, &nl_trace);
  }

  const ScaCost sc = sca(in);
  const NonLocalCost nc = nonlocal(in);
  const auto& counts = sca_trace.counts;
  const bool same_dims = in.h_a == in.h_b && in.w_a == in.w_b;
  const double sca_total = d(counts.total().total());
  const double nl_total = d(nl_trace.total().total());

  CostReport r;
  r.rows.push_back({"sca.pre_stage", params, sc.pre, d(counts.pre.total()), -1.0,
                    "informational: directional pooling reads the 2C-channel map twice (4 ops per element "
                    "of each input vs 2 in the closed form)"});
  r.rows.push_back({"sca.attention_stage", params, sc.attention, d(counts.attention_stage().multiply_adds), 0.0,
                    "token dot products plus weighted token sums"});
  r.rows.push_back({"sca.post_stage", params, sc.post, d(counts.post.total()), same_dims ? 0.0 : -1.0,
                    same_dims ? "expansion moves plus pixel-wise addition"
                              : "informational: closed form uses A's dims, expansion runs on B's"});
  r.rows.push_back({"sca.total", params, sc.total(), sca_total, 0.25,
                    "closed form omits softmax (" + std::to_string(counts.softmax.total()) + " ops), the 2C->C fold (" +
                        std::to_string(counts.fold.total()) + " ops) and half of the directional pooling"});
  r.rows.push_back({"nonlocal.attention_stage", params, nc.attention, d(nl_trace.attention_stage().multiply_adds), 0.0,
                    "pairwise dot products plus weighted value sums"});
  r.rows.push_back(
      {"nonlocal.total", params, nc.total(), nl_total, 0.25,
       "closed form omits softmax (" + std::to_string(nl_trace.softmax.total()) + " ops) and the residual addition"});
  r.rows.push_back({"lambda_sca", params, ratio_sca(in, false), sca_total / nl_total, 0.25,
                    "quotient of the measured totals above", true});
  return r;
}

}  // namespace edtk::cost
