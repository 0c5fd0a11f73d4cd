#include "cli.hpp"

#include <CLI11.hpp>
#include <cstdio>
#include <cstring>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

#include "edtk/costmodel.hpp"
#include "edtk/errors.hpp"
#include "edtk/network.hpp"
#include "edtk/ppm.hpp"
#include "edtk/weight_archive.hpp"

namespace edtk::cli {

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

std::string opt_num(double v) { return v < 0 ? "" : num(v); }

Network build_network(const std::string& spec_path, std::uint64_t seed, const std::string& weights) {
  Network net = Network::assemble(load_spec_file(spec_path), seed);
  if (!weights.empty()) {
    const auto bytes = read_file(weights);
    // Fused archives load into the fused form of the network.
    bool fused = false;
    for (const auto& e : decode_archive(bytes)) fused = fused || e.fused;
    if (fused) net = fuse_network(net);
    load_weights(net, bytes);
  }
  return net;
}

bool bit_equal(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() && std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(float)) == 0;
}

// ---------------------------------------------------------------------------
// describe

struct DescribeArgs {
  std::string spec;
  std::uint64_t seed = 1;
  bool csv = false;
  std::string out;
};

void write_describe_csv(std::ostream& os, const std::vector<ModuleCost>& rows) {
  os << "path,kind,out_shape,params_train,params_fused,macs_train,macs_fused,analytic_train,analytic_infer,"
        "baseline_infer,lambda_infer\n";
  for (const auto& r : rows) {
    os << r.path << ',' << r.kind << ',' << r.out_shape.to_string() << ',' << r.params_train << ','
       << (r.fusible ? std::to_string(r.params_fused) : "") << ',' << r.macs_train << ','
       << (r.fusible ? std::to_string(r.macs_fused) : "") << ',' << opt_num(r.analytic_train) << ','
       << opt_num(r.analytic_infer) << ',' << opt_num(r.baseline_infer) << ',' << opt_num(r.lambda_infer) << '\n';
  }
}

int cmd_describe(const DescribeArgs& a, std::ostream& out) {
  const Network net = Network::assemble(load_spec_file(a.spec), a.seed);
  const auto rows = module_costs(net);
  if (!a.out.empty()) {
    std::ostringstream csv;
    write_describe_csv(csv, rows);
    const std::string s = csv.str();
    write_file(a.out, std::vector<std::uint8_t>(s.begin(), s.end()));
  }
  if (a.csv) {
    write_describe_csv(out, rows);
    return kOk;
  }
  std::size_t pw = 5;
  for (const auto& r : rows) pw = std::max(pw, r.path.size());
  auto line = [&](const std::string& path, const std::string& kind, const std::string& shape, const std::string& pt,
                  const std::string& pf, const std::string& mt, const std::string& mf) {
    out << std::left << std::setw(static_cast<int>(pw) + 2) << path << std::setw(15) << kind << std::setw(14) << shape
        << std::right << std::setw(12) << pt << std::setw(14) << pf << std::setw(14) << mt << std::setw(14) << mf
        << '\n';
  };
  line("path", "kind", "out_shape", "params", "params_fused", "macs", "macs_fused");
  std::size_t pt = 0, pf = 0;
  std::uint64_t mt = 0, mf = 0;
  bool fusible = true;
  for (const auto& r : rows) {
    line(r.path, r.kind, r.out_shape.to_string(), std::to_string(r.params_train),
         r.fusible ? std::to_string(r.params_fused) : "-", std::to_string(r.macs_train),
         r.fusible ? std::to_string(r.macs_fused) : "-");
    pt += r.params_train;
    pf += r.params_fused;
    mt += r.macs_train;
    mf += r.macs_fused;
    fusible = r.fusible;
  }
  line("total", "", "", std::to_string(pt), fusible ? std::to_string(pf) : "-", std::to_string(mt),
       fusible ? std::to_string(mf) : "-");
  if (!fusible) out << "note: the config contains per-branch activation blocks; no fused form exists\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// fuse

struct FuseArgs {
  std::string spec;
  std::string weights;
  std::uint64_t seed = 1;
  std::string out;
};

int cmd_fuse(const FuseArgs& a, std::ostream& out) {
  const Network net = build_network(a.spec, a.seed, a.weights);
  const Network fused = fuse_network(net);
  write_file(a.out, save_weights(fused));
  out << "tensors " << net.tensor_count() << " -> " << fused.tensor_count() << "\n";
  out << "parameters " << net.parameter_count() << " -> " << fused.parameter_count() << "\n";
  out << "wrote " << a.out << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// verify

struct VerifyArgs {
  std::string spec;
  std::string weights;
  std::uint64_t seed = 1;
  int trials = 5;
  std::string perturb;
};

class Report {
 public:
  explicit Report(std::ostream& out) : out_(out) {}
  void check(bool ok, const std::string& name, const std::string& detail) {
    out_ << (ok ? "PASS " : "FAIL ") << name << ' ' << detail << '\n';
    ++total_;
    if (!ok) ++failed_;
  }
  int failed() const { return failed_; }
  int total() const { return total_; }

 private:
  std::ostream& out_;
  int total_ = 0;
  int failed_ = 0;
};

Tensor random_tensor(Shape shape, Rng& rng, double lo, double hi) {
  Tensor t(shape);
  rng.fill_uniform(t, lo, hi);
  return t;
}

RepDConvBlock perturbed(const RepDConvBlock& fused_block) {
  Tensor k = fused_block.fused_weights().kernel;
  k[0] += 0.05f;
  return RepDConvBlock(fused_block.config(), FusedWeights{std::move(k)});
}

int cmd_verify(const VerifyArgs& a, std::ostream& out) {
  if (a.trials <= 0) throw UsageError("--trials must be at least 1");
  const NetworkSpec spec = load_spec_file(a.spec);
  Network net = Network::assemble(spec, a.seed);
  if (!a.weights.empty()) load_weights(net, read_file(a.weights));
  if (net.is_fused()) throw UsageError("verify needs training-form weights");
  const auto unfusible = net.backbone().unfusible_blocks();
  if (!unfusible.empty()) fuse_network(net);  // throws StateError naming the blocks

  const auto& stages = net.backbone().stages();
  if (!a.perturb.empty()) {
    bool found = false;
    for (std::size_t s = 0; s < stages.size(); ++s)
      for (std::size_t b = 0; b < stages[s].blocks.size(); ++b)
        found = found || Backbone::block_path("backbone", s, b) == a.perturb;
    if (!found) throw UsageError("--perturb: no block at path '" + a.perturb + "'");
  }

  Report rep(out);
  Rng rng(derive_seed(a.seed, "verify"));

  {
    const Network first = Network::assemble(spec, a.seed), again = Network::assemble(spec, a.seed);
    const ParamList p1 = first.parameters(), p2 = again.parameters();
    bool same = p1.size() == p2.size();
    for (std::size_t i = 0; same && i < p1.size(); ++i) same = bit_equal(*p1[i].tensor, *p2[i].tensor);
    rep.check(same, "determinism", "tensors=" + std::to_string(p1.size()));
  }
  {
    Network fresh = Network::assemble(spec, a.seed + 1);
    load_weights(fresh, save_weights(net));
    const ParamList p1 = net.parameters(), p2 = fresh.parameters();
    bool same = true;
    for (std::size_t i = 0; same && i < p1.size(); ++i) same = bit_equal(*p1[i].tensor, *p2[i].tensor);
    rep.check(same, "archive_roundtrip", "bytes=" + std::to_string(save_weights(net).size()));
  }

  std::set<std::pair<std::size_t, std::size_t>> shuffles;
  for (std::size_t s = 0; s < stages.size(); ++s)
    for (std::size_t b = 0; b < stages[s].blocks.size(); ++b) {
      const std::string path = Backbone::block_path("backbone", s, b);
      const RepDConvBlock& block = stages[s].blocks[b];
      shuffles.insert({block.channels(), block.config().shuffle_groups});
      RepDConvBlock fused = fuse(block);
      if (path == a.perturb) fused = perturbed(fused);
      double worst = 0;
      for (int t = 0; t < a.trials; ++t) {
        const std::size_t h = 4 + rng.next() % 13, w = 4 + rng.next() % 13;
        const Tensor x = random_tensor(Shape{block.channels(), h, w}, rng, -1, 1);
        worst =
            std::max(worst, static_cast<double>(max_abs_diff(forward_training(block, x), forward_inference(fused, x))));
      }
      rep.check(worst < 1e-5, "fusion " + path, "max_dev=" + num(worst));
    }

  {
    Network fused = fuse_network(net);
    if (!a.perturb.empty()) parameter_at(fused, a.perturb + ".fused_kernel")[0] += 0.05f;
    double worst = 0;
    for (int t = 0; t < a.trials; ++t) {
      const Tensor img = random_tensor(Shape{spec.in_channels, spec.height, spec.width}, rng, 0, 1);
      const auto p = net.forward(img), q = fused.forward(img);
      for (std::size_t k = 0; k < p.size(); ++k) worst = std::max(worst, static_cast<double>(max_abs_diff(p[k], q[k])));
    }
    rep.check(worst < 1e-4, "fusion network", "trials=" + std::to_string(a.trials) + " max_dev=" + num(worst));
    rep.check(fused.tensor_count() < net.tensor_count(), "fusion tensor_count",
              std::to_string(net.tensor_count()) + "->" + std::to_string(fused.tensor_count()));
  }

  for (const auto& [c, g] : shuffles) {
    const auto perm = shuffle_permutation(c, g);
    const auto inv = invert_permutation(perm);
    bool ok = true;
    for (std::size_t i = 0; i < c; ++i) ok = ok && inv[perm[i]] == i && perm[i] == (c / g) * (i % g) + i / g;
    rep.check(ok, "shuffle", "C=" + std::to_string(c) + " G=" + std::to_string(g));
  }

  const auto cum = spec.cumulative_strides();
  for (std::size_t k = 0; k < net.joints().size(); ++k) {
    const std::size_t h = spec.height / spec.head_strides[k], w = spec.width / spec.head_strides[k];
    double worst = 0;
    for (int t = 0; t < a.trials; ++t) {
      const Tensor x = random_tensor(Shape{spec.neck_width, h, w}, rng, -2, 2);
      const Tensor y = random_tensor(Shape{spec.neck_width, h, w}, rng, -2, 2);
      ScaTrace tr;
      (void)sca_forward(net.joints()[k].sca(), x, y, &tr);
      const std::size_t cols = tr.attention.shape()[1];
      for (std::size_t r = 0; r < tr.attention.shape()[0]; ++r) {
        double sum = 0;
        for (std::size_t j = 0; j < cols; ++j) sum += tr.attention[r * cols + j];
        worst = std::max(worst, std::fabs(sum - 1.0));
      }
    }
    rep.check(worst <= 1e-6, "softmax neck.joint" + std::to_string(k), "max_row_error=" + num(worst));
  }

  std::set<std::tuple<std::size_t, std::size_t, std::size_t>> conv_sizes;
  for (std::size_t s = 0; s < stages.size(); ++s)
    conv_sizes.insert({stages[s].blocks[0].channels(), spec.height / cum[s], spec.width / cum[s]});
  cost::CostReport costs;
  for (const auto& [c, h, w] : conv_sizes)
    costs.append(cost::compare_conv({c, c, h, w, 1.0}, spec.shuffle_groups, a.seed));
  // Joint modules sit at the three finer scales.
  for (std::size_t k = 0; k < 3; ++k) {
    const std::size_t h = spec.height / spec.head_strides[k], w = spec.width / spec.head_strides[k];
    costs.append(cost::compare_attention({spec.neck_width, h, w, h, w}, spec.pool_k, a.seed));
  }
  for (const auto& r : costs.rows)
    if (r.tolerance >= 0)
      rep.check(r.pass(), "cost " + r.quantity,
                "[" + r.params + "] analytic=" + num(r.analytic) + " measured=" + num(r.measured) +
                    " ratio=" + num(r.ratio()));

  out << "verify: " << rep.total() << " checks, " << rep.failed() << " failed\n";
  return rep.failed() == 0 ? kOk : kVerifyFailed;
}

// ---------------------------------------------------------------------------
// complexity

struct ComplexityArgs {
  std::string sweep;
  std::uint64_t c_in = 64;
  std::optional<std::uint64_t> c_out;
  std::uint64_t height = 56;
  std::optional<std::uint64_t> width;
  std::optional<std::uint64_t> h_b, w_b;
  double shuffle_cost = 1.0;
  bool equal_channels = false;
  bool square = false;
  bool measure = false;
  bool compare = false;
  std::size_t groups = 3;
  std::size_t pool_k = 3;
  std::uint64_t seed = 1;
};

struct Sweep {
  std::string name;
  std::uint64_t from = 0, to = 0;
};

Sweep parse_sweep(const std::string& s) {
  const auto eq = s.find('='), dots = s.find("..");
  if (eq == std::string::npos || dots == std::string::npos || dots < eq)
    throw UsageError("--sweep expects NAME=FROM..TO, got '" + s + "'");
  Sweep sw;
  sw.name = s.substr(0, eq);
  if (sw.name != "lambda_train" && sw.name != "lambda_infer" && sw.name != "lambda_sca")
    throw UsageError("--sweep: unknown quantity '" + sw.name + "' (lambda_train, lambda_infer, lambda_sca)");
  try {
    std::size_t used = 0;
    const std::string a = s.substr(eq + 1, dots - eq - 1), b = s.substr(dots + 2);
    sw.from = std::stoull(a, &used);
    if (used != a.size()) throw std::invalid_argument(a);
    sw.to = std::stoull(b, &used);
    if (used != b.size()) throw std::invalid_argument(b);
  } catch (const std::exception&) {
    throw UsageError("--sweep: bounds must be non-negative integers, got '" + s + "'");
  }
  if (sw.from == 0 || sw.from > sw.to) throw UsageError("--sweep: need 1 <= FROM <= TO, got '" + s + "'");
  return sw;
}

std::string flags_of(const ComplexityArgs& a) {
  std::string f;
  if (a.equal_channels) f += "equal_channels";
  if (a.square) f += std::string(f.empty() ? "" : ";") + "square";
  return f.empty() ? "none" : f;
}

struct Row {
  std::string quantity;
  std::uint64_t c_in, c_out, h, w, hb, wb;
  double c;
  double analytic;
  std::optional<double> measured;
  std::string status;
};

Row conv_row(const ComplexityArgs& a, const std::string& q, std::uint64_t c_in) {
  const std::uint64_t c_out = a.c_out.value_or(c_in);
  const std::uint64_t w = a.width.value_or(a.height);
  const cost::ConvCostInputs in{c_in, c_out, a.height, w, a.shuffle_cost};
  Row r{q, c_in, c_out, a.height, w, 0, 0, a.shuffle_cost, 0, std::nullopt, "ok"};
  r.analytic = q == "lambda_train" ? cost::ratio_train(in, a.equal_channels) : cost::ratio_infer(in, a.equal_channels);
  if (a.measure) {
    if (c_in != c_out || c_in % 3 != 0 || c_in % a.groups != 0) {
      r.status = "not_measurable";
    } else {
      const auto rep = cost::compare_conv(in, a.groups, a.seed);
      for (const auto& row : rep.rows)
        if (row.quantity == q) {
          r.measured = row.measured;
          r.status = row.pass() ? "pass" : "fail";
        }
    }
  }
  return r;
}

Row sca_row(const ComplexityArgs& a, std::uint64_t h) {
  const std::uint64_t w = a.square ? h : a.width.value_or(h);
  const std::uint64_t hb = a.square ? h : a.h_b.value_or(h);
  const std::uint64_t wb = a.square ? h : a.w_b.value_or(w);
  const cost::AttnCostInputs in{a.c_in, h, w, hb, wb};
  Row r{"lambda_sca", a.c_in, a.c_in, h, w, hb, wb, 0, cost::ratio_sca(in, a.square), std::nullopt, "ok"};
  if (a.measure) {
    const auto rep = cost::compare_attention(in, a.pool_k, a.seed);
    for (const auto& row : rep.rows)
      if (row.quantity == "lambda_sca") {
        r.measured = row.measured;
        r.status = row.pass() ? "pass" : "fail";
      }
  }
  return r;
}

int cmd_complexity(const ComplexityArgs& a, std::ostream& out) {
  if (a.equal_channels && a.c_out && *a.c_out != a.c_in)
    throw UsageError("--assume-equal-channels conflicts with --c-out " + std::to_string(*a.c_out) + " != --c-in " +
                     std::to_string(a.c_in));
  if (a.square && ((a.width && *a.width != a.height) || (a.h_b && *a.h_b != a.height) || (a.w_b && *a.w_b != a.height)))
    throw UsageError("--assume-square conflicts with the given non-square sizes");
  if (a.c_in == 0 || a.height == 0 || (a.c_out && *a.c_out == 0) || (a.width && *a.width == 0) ||
      (a.h_b && *a.h_b == 0) || (a.w_b && *a.w_b == 0))
    throw UsageError("sizes must be positive");

  if (a.compare) {
    const std::uint64_t w = a.width.value_or(a.height);
    cost::CostReport rep = cost::compare_conv({a.c_in, a.c_in, a.height, w, a.shuffle_cost}, a.groups, a.seed);
    rep.append(
        cost::compare_attention({a.c_in, a.height, w, a.h_b.value_or(a.height), a.w_b.value_or(w)}, a.pool_k, a.seed));
    out << "quantity,params,analytic,measured,ratio,tolerance,status,note\n";
    for (const auto& r : rep.rows) {
      const std::string tol = r.tolerance < 0    ? "info"
                              : r.tolerance == 0 ? "exact"
                              : r.quotient       ? num(r.tolerance) + " compounded"
                                                 : num(r.tolerance);
      const std::string status = r.tolerance < 0 ? "info" : r.pass() ? "pass" : "fail";
      out << r.quantity << ",\"" << r.params << "\"," << num(r.analytic) << ',' << num(r.measured) << ','
          << num(r.ratio()) << ',' << tol << ',' << status << ",\"" << r.note << "\"\n";
    }
    return rep.all_pass() ? kOk : kVerifyFailed;
  }

  std::vector<Row> rows;
  if (a.sweep.empty()) {
    rows.push_back(conv_row(a, "lambda_train", a.c_in));
    rows.push_back(conv_row(a, "lambda_infer", a.c_in));
    rows.push_back(sca_row(a, a.height));
  } else {
    const Sweep sw = parse_sweep(a.sweep);
    for (std::uint64_t v = sw.from; v <= sw.to; ++v)
      rows.push_back(sw.name == "lambda_sca" ? sca_row(a, v) : conv_row(a, sw.name, v));
  }

  out << "quantity,C_in,C_out,H,W,h,w,c,analytic,measured,ratio,assumption_flags,status\n";
  bool ok = true;
  for (const auto& r : rows) {
    const bool attn = r.quantity == "lambda_sca";
    out << r.quantity << ',' << r.c_in << ',' << r.c_out << ',' << r.h << ',' << r.w << ','
        << (attn ? std::to_string(r.hb) : "") << ',' << (attn ? std::to_string(r.wb) : "") << ','
        << (attn ? "" : num(r.c)) << ',' << num(r.analytic) << ',' << (r.measured ? num(*r.measured) : "") << ','
        << (r.measured ? num(*r.measured / r.analytic) : "") << ',' << flags_of(a) << ',' << r.status << '\n';
    ok = ok && r.status != "fail";
  }
  return ok ? kOk : kVerifyFailed;
}

// ---------------------------------------------------------------------------
// infer

struct InferArgs {
  std::string spec;
  std::string weights;
  std::string image;
  std::uint64_t seed = 1;
  bool fused = false;
  float conf = 0.5f;
  float iou = 0.5f;
  bool count = false;
};

int cmd_infer(const InferArgs& a, std::ostream& out) {
  if (!(a.conf > 0 && a.conf < 1)) throw UsageError("--conf must be in (0, 1)");
  if (!(a.iou > 0 && a.iou < 1)) throw UsageError("--iou must be in (0, 1)");
  Network net = build_network(a.spec, a.seed, a.weights);
  if (a.fused) net = fuse_network(net);
  const Tensor img = read_ppm(a.image);
  const NetworkSpec& spec = net.spec();
  if (!(img.shape() == Shape{spec.in_channels, spec.height, spec.width}))
    throw UsageError("image is " + std::to_string(img.width()) + "x" + std::to_string(img.height()) +
                     ", the config expects " + std::to_string(spec.width) + "x" + std::to_string(spec.height));
  OpCounter counter;
  std::vector<Tensor> preds;
  {
    CounterScope scope(counter);
    preds = net.forward(img);
  }
  for (const auto& d : decode_detections(preds, net.head().strides(), a.conf, a.iou))
    out << format_detection(d) << '\n';
  if (a.count) out << "# flops=" << counter.snapshot().multiply_adds << '\n';
  return kOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Reparameterized depthwise detector toolkit"};
  app.name("edtk");
  app.require_subcommand(1);

  DescribeArgs da;
  auto* describe = app.add_subcommand("describe", "Per-module parameters and multiply-adds");
  describe->add_option("--spec", da.spec, "Network config file")->required();
  describe->add_option("--seed", da.seed, "Initialization seed");
  describe->add_flag("--csv", da.csv, "Print CSV instead of the aligned table");
  describe->add_option("--out", da.out, "Also write the CSV to this file");

  FuseArgs fa;
  auto* fuse_cmd = app.add_subcommand("fuse", "Fuse every block and write the inference weights");
  fuse_cmd->add_option("--spec", fa.spec, "Network config file")->required();
  fuse_cmd->add_option("--weights", fa.weights, "Training-form weight archive (default: seeded init)");
  fuse_cmd->add_option("--seed", fa.seed, "Initialization seed");
  fuse_cmd->add_option("--out", fa.out, "Output archive")->required();

  VerifyArgs va;
  auto* verify = app.add_subcommand("verify", "Run the invariant and cost-model suites");
  verify->add_option("--spec", va.spec, "Network config file")->required();
  verify->add_option("--weights", va.weights, "Training-form weight archive");
  verify->add_option("--seed", va.seed, "Initialization seed");
  verify->add_option("--trials", va.trials, "Random inputs per check");
  verify->add_option("--perturb", va.perturb, "Corrupt this block's fused kernel (fault injection)");

  ComplexityArgs ca;
  auto* complexity = app.add_subcommand("complexity", "Closed-form cost ratios as CSV");
  complexity->add_option("--sweep", ca.sweep, "NAME=FROM..TO over C_in (lambda_train, lambda_infer) or H (lambda_sca)");
  complexity->add_option("--c-in", ca.c_in, "Input channels (attention: C)");
  complexity->add_option("--c-out", ca.c_out, "Output channels (default: C_in)");
  complexity->add_option("--height", ca.height, "H");
  complexity->add_option("--width", ca.width, "W (default: H)");
  complexity->add_option("--h-b", ca.h_b, "Upstream map height (default: H)");
  complexity->add_option("--w-b", ca.w_b, "Upstream map width (default: W)");
  complexity->add_option("--shuffle-cost", ca.shuffle_cost, "Per-channel shuffle cost c");
  complexity->add_flag("--assume-equal-channels", ca.equal_channels, "Use the C_in = C_out simplified forms");
  complexity->add_flag("--assume-square", ca.square, "Use the H = W = h = w simplified form");
  complexity->add_flag("--measure", ca.measure, "Add measured ratios from counted forwards");
  complexity->add_flag("--compare", ca.compare, "Itemized analytic-vs-measured report at the given sizes");
  complexity->add_option("--groups", ca.groups, "Shuffle groups for measured blocks");
  complexity->add_option("--pool-k", ca.pool_k, "Pooling window for measured attention");
  complexity->add_option("--seed", ca.seed, "Seed for measured runs");

  InferArgs ia;
  auto* infer = app.add_subcommand("infer", "Detect objects in a PPM image");
  infer->add_option("--spec", ia.spec, "Network config file")->required();
  infer->add_option("--weights", ia.weights, "Weight archive (default: seeded init)");
  infer->add_option("--image", ia.image, "P6 PPM image")->required();
  infer->add_option("--seed", ia.seed, "Initialization seed");
  infer->add_flag("--fused", ia.fused, "Fuse before running");
  infer->add_option("--conf", ia.conf, "Score threshold in (0,1)");
  infer->add_option("--iou", ia.iou, "NMS IoU threshold in (0,1)");
  infer->add_flag("--count", ia.count, "Append '# flops=<multiply-adds>'");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*describe) return cmd_describe(da, out);
    if (*fuse_cmd) return cmd_fuse(fa, out);
    if (*verify) return cmd_verify(va, out);
    if (*complexity) return cmd_complexity(ca, out);
    if (*infer) return cmd_infer(ia, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kUsage;
  } catch (const ArchiveError& e) {
    err << "weights error: " << e.what() << '\n';
    return kUsage;
  } catch (const StateError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }
  return kUsage;
}

}  // namespace edtk::cli
