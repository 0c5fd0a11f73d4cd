#include <gtest/gtest.h>

#include <cstring>
#include <thread>

#include "edtk/errors.hpp"
#include "edtk/network.hpp"
#include "edtk/network_spec.hpp"
#include "edtk/ppm.hpp"
#include "edtk/weight_archive.hpp"
#include "test_util.hpp"

using namespace edtk;
using edtk::testing::random_tensor;

namespace {

const std::string kMinimal = R"(
input: [3, 64, 64]
shuffle_groups: 3
backbone:
  block_form: post_block
  stages:
    - {channels: 12, depth: 1, stride: 2}
    - {channels: 12, depth: 1, stride: 2}
    - {channels: 12, depth: 1, stride: 2}
    - {channels: 12, depth: 1, stride: 2}
    - {channels: 12, depth: 1, stride: 2}
neck:
  width: 12
  pool_k: 3
head:
  num_classes: 2
  width: 8
  depth: 1
  strides: [4, 8, 16, 32]
)";

std::string replace(std::string s, const std::string& from, const std::string& to) {
  const auto pos = s.find(from);
  if (pos == std::string::npos) throw std::logic_error("pattern not found: " + from);
  return s.replace(pos, from.size(), to);
}

std::string config_path(const std::string& name) { return std::string(EDTK_CONFIG_DIR) + "/" + name; }

std::string config_error(const std::string& text) {
  try {
    (void)parse_spec(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

bool same_bits(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() && std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(float)) == 0;
}

double max_dev(const std::vector<Tensor>& a, const std::vector<Tensor>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, max_abs_diff(a[i], b[i]));
  return m;
}

std::uint64_t counted_macs(const Network& net, const Tensor& x) {
  OpCounter ctr;
  CounterScope scope(ctr);
  (void)net.forward(x);
  return ctr.snapshot().multiply_adds;
}

}  // namespace

TEST(ParseSpec, MinimalSpec) {
  const NetworkSpec s = parse_spec(kMinimal);
  EXPECT_EQ(s.stages.size(), 5u);
  EXPECT_EQ(s.stages[0].channels, 12u);
  EXPECT_EQ(s.head_strides, (std::vector<std::size_t>{4, 8, 16, 32}));
  EXPECT_EQ(s.cumulative_strides().back(), 32u);
}

TEST(ParseSpec, DivisibilityErrorNamesKey) {
  const std::string msg = config_error(replace(kMinimal, "{channels: 12, depth: 1, stride: 2}\n    - {channels: 12",
                                               "{channels: 10, depth: 1, stride: 2}\n    - {channels: 12"));
  EXPECT_NE(msg.find("backbone.stages[0].channels"), std::string::npos) << msg;
  EXPECT_NE(msg.find("divisible by 3"), std::string::npos) << msg;

  const std::string g = config_error(replace(kMinimal, "shuffle_groups: 3", "shuffle_groups: 5"));
  EXPECT_NE(g.find("shuffle_groups"), std::string::npos) << g;
}

TEST(ParseSpec, UnknownAndMissingKeysNamed) {
  const std::string typo = config_error(replace(kMinimal, "pool_k: 3", "poolk: 3"));
  EXPECT_NE(typo.find("neck.poolk"), std::string::npos) << typo;
  const std::string nested =
      config_error(replace(kMinimal, "{channels: 12, depth: 1, stride: 2}", "{channels: 12, depht: 1, stride: 2}"));
  EXPECT_NE(nested.find("backbone.stages[0].depht"), std::string::npos) << nested;
  const std::string missing = config_error(replace(kMinimal, "  num_classes: 2\n", ""));
  EXPECT_NE(missing.find("head.num_classes"), std::string::npos) << missing;
}

TEST(ParseSpec, StructuralConstraints) {
  EXPECT_NE(config_error(replace(kMinimal, "strides: [4, 8, 16, 32]", "strides: [8, 16, 32, 64]")).find("head.strides"),
            std::string::npos);
  EXPECT_NE(config_error(replace(kMinimal, "input: [3, 64, 64]", "input: [3, 64, 48]")).find("input"),
            std::string::npos);
  EXPECT_NE(config_error(replace(kMinimal, "pool_k: 3", "pool_k: 4")).find("neck.pool_k"), std::string::npos);
  EXPECT_NE(config_error(replace(kMinimal, "width: 8", "width: 7")).find("head.width"), std::string::npos);
  EXPECT_NE(config_error("input: [3, 64"), "");
  // Four head scales need four stage outputs.
  NetworkSpec one = parse_spec(kMinimal);
  one.stages.resize(1);
  EXPECT_THROW(one.validate(), ConfigError);
}

TEST(ParseSpec, EmitParseRoundTrip) {
  for (const std::string& text : {kMinimal, edtk::testing::read_text(config_path("toy.yaml"))}) {
    const NetworkSpec s = parse_spec(text);
    const std::string canon = emit_spec(s);
    EXPECT_TRUE(parse_spec(canon) == s);
    EXPECT_EQ(emit_spec(parse_spec(canon)), canon);
  }
  NetworkSpec mixed = parse_spec(kMinimal);
  mixed.stages[2].form = BranchActivation::per_branch;
  EXPECT_TRUE(parse_spec(emit_spec(mixed)) == mixed);
}

TEST(Assemble, SameSeedSameWeights) {
  const NetworkSpec spec = load_spec_file(config_path("toy64.yaml"));
  const Network a = Network::assemble(spec, 42), b = Network::assemble(spec, 42), c = Network::assemble(spec, 43);
  const ParamList pa = a.parameters(), pb = b.parameters(), pc = c.parameters();
  ASSERT_EQ(pa.size(), pb.size());
  bool any_diff = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    EXPECT_EQ(pa[i].path, pb[i].path);
    EXPECT_TRUE(same_bits(*pa[i].tensor, *pb[i].tensor)) << pa[i].path;
    any_diff = any_diff || !same_bits(*pa[i].tensor, *pc[i].tensor);
  }
  EXPECT_TRUE(any_diff);
  Rng rng(1);
  const Tensor x = random_tensor(Shape{3, 64, 64}, rng, 0, 1);
  const auto ya = a.forward(x), yb = b.forward(x);
  for (std::size_t i = 0; i < ya.size(); ++i) EXPECT_TRUE(same_bits(ya[i], yb[i]));
}

TEST(Assemble, ToyForwardShapes) {
  const NetworkSpec spec = load_spec_file(config_path("toy.yaml"));
  const Network net = Network::assemble(spec, 7);
  const auto preds = net.forward(Tensor(Shape{3, 256, 256}, 0.5f));
  ASSERT_EQ(preds.size(), 4u);
  const std::size_t sides[4] = {64, 32, 16, 8};
  for (std::size_t k = 0; k < 4; ++k) EXPECT_EQ(preds[k].shape(), (Shape{spec.num_classes + 4, sides[k], sides[k]}));
  EXPECT_THROW(net.forward(Tensor(Shape{3, 128, 128})), ShapeError);
}

TEST(Assemble, ParameterCountIsSumOfModules) {
  const Network net = Network::assemble(load_spec_file(config_path("toy.yaml")), 7);
  std::size_t sum = 0;
  for (const auto& stage : net.backbone().stages()) {
    if (stage.transition) sum += stage.transition->weight().size();
    for (const auto& b : stage.blocks) sum += b.parameter_count();
  }
  for (const auto& l : net.laterals()) sum += l.weight().size() + (l.bias() ? l.bias()->size() : 0);
  for (const auto& j : net.joints()) sum += j.parameter_count();
  for (std::size_t s = 0; s < 4; ++s) {
    for (const auto& g : net.head().trunks()[s]) sum += g.parameter_count();
    const auto& p = net.head().predictors()[s];
    sum += p.weight().size() + (p.bias() ? p.bias()->size() : 0);
  }
  EXPECT_EQ(net.parameter_count(), sum);

  std::size_t from_costs = 0;
  for (const auto& m : module_costs(net)) from_costs += m.params_train;
  EXPECT_EQ(from_costs, sum);
}

TEST(Archive, RoundTripIsBitExact) {
  const NetworkSpec spec = load_spec_file(config_path("toy64.yaml"));
  const Network a = Network::assemble(spec, 3);
  const auto bytes = save_weights(a);
  Network b = Network::assemble(spec, 99);
  load_weights(b, bytes);
  EXPECT_EQ(save_weights(b), bytes);
  const ParamList pa = a.parameters(), pb = b.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_TRUE(same_bits(*pa[i].tensor, *pb[i].tensor));

  const Network fa = fuse_network(a);
  Network fb = fuse_network(Network::assemble(spec, 5));
  load_weights(fb, save_weights(fa));
  EXPECT_EQ(save_weights(fb), save_weights(fa));
}

TEST(Archive, CorruptionRejected) {
  const Network net = Network::assemble(load_spec_file(config_path("toy64.yaml")), 3);
  const auto bytes = save_weights(net);
  Network target = Network::assemble(net.spec(), 4);
  const auto before = save_weights(target);
  for (std::size_t pos : {bytes.size() - 1, bytes.size() / 2, std::size_t{5}}) {
    auto bad = bytes;
    bad[pos] ^= 0x01;
    EXPECT_THROW(load_weights(target, bad), ArchiveError) << pos;
  }
  auto truncated = bytes;
  truncated.resize(bytes.size() - 9);
  EXPECT_THROW(load_weights(target, truncated), ArchiveError);
  EXPECT_THROW(decode_archive({'N', 'O', 'P', 'E', 0, 0, 0, 0, 0, 0, 0, 0, 0, 0}), ArchiveError);
  EXPECT_EQ(save_weights(target), before);
}

TEST(Archive, ModeAndPathMismatchRejected) {
  const NetworkSpec spec = load_spec_file(config_path("toy64.yaml"));
  const Network net = Network::assemble(spec, 3);
  Network training = Network::assemble(spec, 4);
  try {
    load_weights(training, save_weights(fuse_network(net)));
    FAIL() << "fused archive loaded into a training-form network";
  } catch (const ArchiveError& e) {
    EXPECT_NE(std::string(e.what()).find("fused"), std::string::npos);
  }
  Network fused = fuse_network(training);
  EXPECT_THROW(load_weights(fused, save_weights(net)), ArchiveError);

  auto entries = decode_archive(save_weights(net));
  const std::string renamed = entries[3].path;
  entries[3].path += "_x";
  try {
    load_weights(training, encode_archive(entries));
    FAIL() << "renamed path accepted";
  } catch (const ArchiveError& e) {
    EXPECT_NE(std::string(e.what()).find(renamed), std::string::npos) << e.what();
  }

  entries = decode_archive(save_weights(net));
  entries[5].tensor = Tensor(Shape{entries[5].tensor.size() + 1});
  try {
    load_weights(training, encode_archive(entries));
    FAIL() << "wrong shape accepted";
  } catch (const ArchiveError& e) {
    EXPECT_NE(std::string(e.what()).find(entries[5].path), std::string::npos) << e.what();
  }

  entries = decode_archive(save_weights(net));
  entries.push_back(entries.back());
  EXPECT_THROW(load_weights(training, encode_archive(entries)), ArchiveError);
}

TEST(FuseNetwork, TwentyImagesWithinTolerance) {
  const Network net = Network::assemble(load_spec_file(config_path("toy.yaml")), 11);
  const Network fused = fuse_network(net);
  EXPECT_TRUE(fused.is_fused());
  Rng rng(12);
  for (int i = 0; i < 20; ++i) {
    const Tensor x = random_tensor(Shape{3, 256, 256}, rng, 0, 1);
    EXPECT_LT(max_dev(net.forward(x), fused.forward(x)), 1e-4) << "image " << i;
  }
}

TEST(FuseNetwork, IdempotentAndRejectsPerBranch) {
  const NetworkSpec spec = load_spec_file(config_path("toy64.yaml"));
  const Network fused = fuse_network(Network::assemble(spec, 1));
  EXPECT_EQ(save_weights(fuse_network(fused)), save_weights(fused));

  NetworkSpec literal = spec;
  literal.stages[2].form = BranchActivation::per_branch;
  const Network net = Network::assemble(literal, 1);
  try {
    (void)fuse_network(net);
    FAIL() << "per-branch network fused";
  } catch (const StateError& e) {
    EXPECT_NE(std::string(e.what()).find("backbone.stage2.block0"), std::string::npos) << e.what();
  }
}

TEST(FuseNetwork, ReducesTensorsAndMacsOnFiveSpecs) {
  NetworkSpec base = parse_spec(kMinimal);
  std::vector<NetworkSpec> specs;
  specs.push_back(base);
  specs.push_back(load_spec_file(config_path("toy64.yaml")));
  NetworkSpec deep = base;
  for (auto& st : deep.stages) st.depth = 3;
  specs.push_back(deep);
  NetworkSpec wide = base;
  wide.shuffle_groups = 6;
  for (std::size_t i = 0; i < wide.stages.size(); ++i) wide.stages[i].channels = 18 * (i + 1);
  specs.push_back(wide);
  NetworkSpec flat = base;
  flat.stages.insert(flat.stages.begin(), StageSpec{24, 2, 1, std::nullopt});
  flat.height = flat.width = 96;
  specs.push_back(flat);
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const Network net = Network::assemble(specs[i], 2);
    const Network fused = fuse_network(net);
    EXPECT_LT(fused.tensor_count(), net.tensor_count()) << "spec " << i;
    const Tensor x(Shape{3, specs[i].height, specs[i].width}, 0.25f);
    EXPECT_LT(counted_macs(fused, x), counted_macs(net, x)) << "spec " << i;
  }
}

TEST(ModuleCosts, RowsCoverEveryModule) {
  const Network net = Network::assemble(load_spec_file(config_path("toy64.yaml")), 7);
  const auto rows = module_costs(net);
  ForwardTrace trace;
  (void)net.forward(Tensor(Shape{3, 64, 64}), &trace);
  ASSERT_EQ(rows.size(), trace.modules.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i].path, trace.modules[i].first);
    if (rows[i].kind == "repdconv" || rows[i].kind == "repdconv_down") {
      EXPECT_LT(rows[i].macs_fused, rows[i].macs_train) << rows[i].path;
      EXPECT_LT(rows[i].analytic_infer, rows[i].baseline_infer) << rows[i].path;
    } else {
      EXPECT_EQ(rows[i].macs_fused, rows[i].macs_train) << rows[i].path;
    }
  }
}

TEST(Ppm, RoundTrip) {
  Rng rng(13);
  Tensor img(Shape{3, 5, 7});
  for (auto& v : img.data()) v = static_cast<float>(rng.next() % 256) / 255.0f;
  const auto bytes = encode_ppm(img);
  const Tensor back = decode_ppm(bytes);
  EXPECT_EQ(back.shape(), img.shape());
  EXPECT_LT(max_abs_diff(back, img), 1e-7);
  EXPECT_EQ(encode_ppm(back), bytes);

  const std::string commented = "P6\n# made by hand\n2 1\n255\n";
  std::vector<std::uint8_t> c(commented.begin(), commented.end());
  for (std::uint8_t v : {255, 0, 51, 0, 0, 0}) c.push_back(v);
  const Tensor t = decode_ppm(c);
  EXPECT_EQ(t.shape(), (Shape{3, 1, 2}));
  EXPECT_FLOAT_EQ(t.at(0, 0, 0), 1.0f);
  EXPECT_FLOAT_EQ(t.at(2, 0, 0), 0.2f);

  const std::string p3 = "P3\n1 1\n255\n0 0 0\n";
  EXPECT_THROW(decode_ppm(std::vector<std::uint8_t>(p3.begin(), p3.end())), ShapeError);
  auto short_data = bytes;
  short_data.pop_back();
  EXPECT_THROW(decode_ppm(short_data), ShapeError);
}

TEST(Forward, ThreadSafeWithPerThreadCounters) {
  const Network net = Network::assemble(load_spec_file(config_path("toy64.yaml")), 21);
  Rng rng(22);
  std::vector<Tensor> images;
  for (int i = 0; i < 4; ++i) images.push_back(random_tensor(Shape{3, 64, 64}, rng, 0, 1));
  std::vector<std::vector<Tensor>> serial;
  std::vector<OpCounts> serial_counts;
  for (const auto& x : images) {
    OpCounter ctr;
    CounterScope scope(ctr);
    serial.push_back(net.forward(x));
    serial_counts.push_back(ctr.snapshot());
  }
  std::vector<std::vector<Tensor>> parallel(images.size());
  std::vector<OpCounts> parallel_counts(images.size());
  std::vector<std::thread> workers;
  for (std::size_t i = 0; i < images.size(); ++i)
    workers.emplace_back([&, i] {
      OpCounter ctr;
      CounterScope scope(ctr);
      parallel[i] = net.forward(images[i]);
      parallel_counts[i] = ctr.snapshot();
    });
  for (auto& w : workers) w.join();
  for (std::size_t i = 0; i < images.size(); ++i) {
    EXPECT_EQ(parallel_counts[i], serial_counts[i]);
    for (std::size_t k = 0; k < 4; ++k) EXPECT_TRUE(same_bits(parallel[i][k], serial[i][k]));
  }
}
