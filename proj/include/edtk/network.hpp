#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "edtk/attention.hpp"
#include "edtk/head.hpp"
#include "edtk/network_spec.hpp"
#include "edtk/op_counter.hpp"
#include "edtk/repdconv.hpp"

namespace edtk {

/// Measured counts per module path, in execution order.
struct ForwardTrace {
  std::vector<std::pair<std::string, OpCounts>> modules;
  std::vector<Shape> module_shapes;  // output shape of each entry
};

/// Backbone of Rep-DConvNet stages, a top-down neck, and the efficient head.
///
/// Neck: the last four backbone outputs P0..P3 (strides 4..32) go through a
/// 1x1 lateral conv to the neck width, giving L0..L3. N3 = L3 and for finer
/// scales N_s = L_s + joint_s(L_s, upsample2(N_{s+1})). The head reads N0..N3.
class Network {
 public:
  static Network assemble(const NetworkSpec& spec, std::uint64_t seed);

  const NetworkSpec& spec() const { return spec_; }
  const Backbone& backbone() const { return backbone_; }
  const std::vector<PointwiseConv>& laterals() const { return laterals_; }
  const std::vector<JointModule>& joints() const { return joints_; }
  const EfficientHead& head() const { return head_; }

  /// Four prediction maps, finest first. Thread-safe.
  std::vector<Tensor> forward(const Tensor& image, ForwardTrace* trace = nullptr) const;

  /// Every stored tensor with its path, in a fixed order.
  ParamList parameters() const;
  std::size_t parameter_count() const { return count_elements(parameters()); }
  std::size_t tensor_count() const { return parameters().size(); }

  bool is_fused() const { return backbone_.is_fused(); }

 private:
  friend Network fuse_network(const Network& net);

  NetworkSpec spec_;
  Backbone backbone_;
  std::vector<PointwiseConv> laterals_;
  std::vector<JointModule> joints_;
  EfficientHead head_;
};

/// Fuses every backbone block. Throws StateError listing the block paths that
/// cannot be fused. A fused network is returned unchanged.
Network fuse_network(const Network& net);

/// Mutable access to the tensor stored at `path`, for loading and fault
/// injection. Throws ArchiveError when no such tensor exists.
Tensor& parameter_at(Network& net, const std::string& path);

/// One row of the per-module cost table.
struct ModuleCost {
  std::string path;
  std::string kind;
  Shape out_shape;
  std::size_t params_train = 0;
  std::size_t params_fused = 0;
  std::uint64_t macs_train = 0;  // measured multiply-adds, training form
  std::uint64_t macs_fused = 0;  // measured multiply-adds, fused form
  bool fusible = true;           // false: fused columns are not available
  // Closed-form costs for modules the cost model covers; negative when not applicable.
  double analytic_train = -1;
  double analytic_infer = -1;
  double baseline_infer = -1;
  double lambda_infer = -1;
};

/// Per-module costs of the configured network, from one counted forward of each
/// form on a blank input. When some block cannot be fused, the fused columns
/// are left empty and `fusible` is false on every row.
std::vector<ModuleCost> module_costs(const Network& training_form);

}  // namespace edtk
