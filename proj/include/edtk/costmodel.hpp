#pragma once

// Closed-form complexity of the reparameterized depthwise block against a
// RepVGG-style block, and of sparse cross-attention against a Non-local block,
// plus comparisons of those forms with counts measured by the tensor core.
//
// Units: one multiply-add = 1. Costs are returned as double; every value used
// here is an integer below 2^53, so it is exact.

#include <cstdint>
#include <string>
#include <vector>

#include "edtk/op_counter.hpp"

namespace edtk::cost {

struct ConvCostInputs {
  std::uint64_t c_in = 1;
  std::uint64_t c_out = 1;
  std::uint64_t h = 1;
  std::uint64_t w = 1;
  double c = 1.0;  // per-channel shuffle cost

  void validate() const;
};

/// Dims of the module's own map A (h_a x w_a) and the upstream map B (h_b x w_b).
struct AttnCostInputs {
  std::uint64_t c = 1;
  std::uint64_t h_a = 1;
  std::uint64_t w_a = 1;
  std::uint64_t h_b = 1;
  std::uint64_t w_b = 1;

  void validate() const;
};

/// RepVGG training form: three 3x3 branches plus identity. C_out*H*W*(27*C_in + 1).
double repvgg_train(const ConvCostInputs& in);

/// Rep-DConvNet training form: 9*C_in*H*W + 4*C_out*H*W + c*C_out.
double repdconv_train(const ConvCostInputs& in);

/// Full quotient of the two training costs, or 13/(27*C_in + 1) when
/// `simplified` (shuffle term dropped, C_in = C_out).
double ratio_train(const ConvCostInputs& in, bool simplified);

struct InferPair {
  double repvgg;    // 9*C_in*C_out*H*W
  double repdconv;  // 9*C_in*H*W + 3*C_out*H*W + c*C_out
};
InferPair infer_pair(const ConvCostInputs& in);

/// Full quotient of the inference costs, or 4/(3*C_in) when `simplified`.
double ratio_infer(const ConvCostInputs& in, bool simplified);

struct ScaCost {
  double pre = 0;        // 4*C*H*W + 4*C*h*w
  double attention = 0;  // 2*(H+W)*(h+w)*2C
  double post = 0;       // 6*H*W*C
  double total() const { return pre + attention + post; }
};
ScaCost sca(const AttnCostInputs& in);

/// Stage terms as derived, and the stated total 4CHW + 3Chw + 2C(HW)(hw).
/// The stage terms sum to 2Chw less than the stated total; the stated total is
/// the one the ratio forms use.
struct NonLocalCost {
  double embed = 0;       // 3*C*H*W + C*h*w
  double attention = 0;   // 2*C*(H*W)*(h*w)
  double projection = 0;  // C*H*W
  double stated_total = 0;
  double total() const { return stated_total; }
  double stage_sum() const { return embed + attention + projection; }
};
NonLocalCost nonlocal(const AttnCostInputs& in);

/// Staged SC-A total over Non-local total, or 30/(7 + 2*H^2) when `simplified`
/// (H = h, W = w, H = W).
double ratio_sca(const AttnCostInputs& in, bool simplified);

/// The printed closed form of the same quotient with C cancelled:
/// (10HW + 4hw + 4(H+W)(h+w)) / (4HW + 3hw + 2HWhw).
double ratio_sca_closed_form(const AttnCostInputs& in);

// ---------------------------------------------------------------------------
// Measured comparisons

struct CostComparison {
  std::string quantity;
  std::string params;
  double analytic = 0;
  double measured = 0;
  double tolerance = 0;  // relative; 0 means exact
  std::string note;      // what the analytic form leaves out
  // Quotient of two rows that each carry `tolerance`; the band compounds to
  // [(1-t)/(1+t), (1+t)/(1-t)].
  bool quotient = false;

  double ratio() const { return analytic != 0 ? measured / analytic : 0.0; }
  bool pass() const;
};

struct CostReport {
  std::vector<CostComparison> rows;

  bool all_pass() const;
  void append(const CostReport& other) { rows.insert(rows.end(), other.rows.begin(), other.rows.end()); }
};

/// Runs training-form and fused Rep-DConvNet blocks and a RepVGG-style block on
/// C_in = C_out channels (C_in divisible by 3 and by shuffle_groups) and
/// compares counts with the closed forms.
CostReport compare_conv(const ConvCostInputs& in, std::size_t shuffle_groups, std::uint64_t seed);

/// Runs sca_forward and the reference Non-local block.
CostReport compare_attention(const AttnCostInputs& in, std::size_t pool_k, std::uint64_t seed);

std::string describe(const ConvCostInputs& in);
std::string describe(const AttnCostInputs& in);

}  // namespace edtk::cost
