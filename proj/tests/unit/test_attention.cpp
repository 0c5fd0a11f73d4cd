#include <gtest/gtest.h>

#include <cmath>

#include "edtk/attention.hpp"
#include "edtk/errors.hpp"
#include "edtk/ops.hpp"
#include "edtk/reference_blocks.hpp"
#include "test_util.hpp"

using namespace edtk;
using edtk::testing::random_tensor;

namespace {

// Token matrix written out from the definition: k x k same-padded max and avg
// pooling, stacked as 2C channels, then row and column means.
std::vector<std::vector<double>> ref_tokens(const Tensor& x, std::size_t k) {
  const long c = static_cast<long>(x.channels()), h = static_cast<long>(x.height()), w = static_cast<long>(x.width());
  const long r = static_cast<long>(k / 2);
  std::vector<std::vector<double>> f(2 * c, std::vector<double>(h * w));
  for (long ch = 0; ch < c; ++ch)
    for (long y = 0; y < h; ++y)
      for (long xx = 0; xx < w; ++xx) {
        double mx = -1e300, sum = 0;
        int n = 0;
        for (long dy = -r; dy <= r; ++dy)
          for (long dx = -r; dx <= r; ++dx) {
            const long yy = y + dy, xs = xx + dx;
            if (yy < 0 || xs < 0 || yy >= h || xs >= w) continue;
            const double v = x.at(ch, yy, xs);
            mx = std::max(mx, v);
            sum += v;
            ++n;
          }
        f[ch][y * w + xx] = mx;
        f[c + ch][y * w + xx] = sum / n;
      }
  std::vector<std::vector<double>> tokens(h + w, std::vector<double>(2 * c));
  for (long ch = 0; ch < 2 * c; ++ch) {
    for (long y = 0; y < h; ++y) {
      double s = 0;
      for (long xx = 0; xx < w; ++xx) s += f[ch][y * w + xx];
      tokens[y][ch] = s / w;
    }
    for (long xx = 0; xx < w; ++xx) {
      double s = 0;
      for (long y = 0; y < h; ++y) s += f[ch][y * w + xx];
      tokens[h + xx][ch] = s / h;
    }
  }
  return tokens;
}

TensorD ref_sca(const Tensor& a, const Tensor& b, std::size_t k) {
  const auto ta = ref_tokens(a, k), tb = ref_tokens(b, k);
  const std::size_t c = b.channels(), h = b.height(), w = b.width(), d = 2 * c;
  std::vector<std::vector<double>> enhanced(tb.size(), std::vector<double>(d, 0.0));
  for (std::size_t j = 0; j < tb.size(); ++j) {
    std::vector<double> logits(ta.size());
    double mx = -1e300;
    for (std::size_t i = 0; i < ta.size(); ++i) {
      double dot = 0;
      for (std::size_t e = 0; e < d; ++e) dot += tb[j][e] * ta[i][e];
      logits[i] = dot;
      mx = std::max(mx, dot);
    }
    double z = 0;
    for (auto& l : logits) z += (l = std::exp(l - mx));
    for (std::size_t i = 0; i < ta.size(); ++i)
      for (std::size_t e = 0; e < d; ++e) enhanced[j][e] += logits[i] / z * ta[i][e];
  }
  TensorD out(Shape{c, h, w});
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t xx = 0; xx < w; ++xx) {
        const double from_max = enhanced[y][ch] + enhanced[h + xx][ch];
        const double from_avg = enhanced[y][c + ch] + enhanced[h + xx][c + ch];
        out.at(ch, y, xx) = 0.5 * (from_max + from_avg);
      }
  return out;
}

std::vector<double> ref_eca_gates(const Tensor& x, const Tensor& kernel) {
  const std::size_t c = x.channels(), k = kernel.size(), plane = x.height() * x.width();
  std::vector<double> gap(c, 0.0), gates(c);
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t i = 0; i < plane; ++i) gap[ch] += x.channel(ch)[i];
    gap[ch] /= static_cast<double>(plane);
  }
  for (std::size_t ch = 0; ch < c; ++ch) {
    double acc = 0;
    for (std::size_t t = 0; t < k; ++t) {
      const long src = static_cast<long>(ch + t) - static_cast<long>(k / 2);
      if (src >= 0 && src < static_cast<long>(c)) acc += kernel[t] * gap[src];
    }
    gates[ch] = 1.0 / (1.0 + std::exp(-acc));
  }
  return gates;
}

}  // namespace

TEST(ScaTokens, HandComputedIdentityPooling) {
  const Tensor x(Shape{1, 2, 2}, {1, 2, 3, 4});
  const Tensor t = sca_tokens(ScaModule(1), x);
  ASSERT_EQ(t.shape(), (Shape{4, 2}));
  const float expect[4][2] = {{1.5f, 1.5f}, {3.5f, 3.5f}, {2, 2}, {3, 3}};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 2; ++j) EXPECT_FLOAT_EQ(t[i * 2 + j], expect[i][j]);
}

TEST(ScaTokens, ConstantFieldAndTokenCount) {
  const Tensor t = sca_tokens(ScaModule(3), Tensor(Shape{3, 5, 7}, 2.5f));
  EXPECT_EQ(t.shape(), (Shape{12, 6}));
  for (float v : t.data()) EXPECT_FLOAT_EQ(v, 2.5f);
}

TEST(ScaForward, MatchesStraightLineReference) {
  Rng rng(21);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t c = 1 + rng.next() % 5, k = (rng.next() % 2) ? 3 : 1;
    const Tensor a = random_tensor(Shape{c, 1 + rng.next() % 7, 1 + rng.next() % 7}, rng);
    const Tensor b = random_tensor(Shape{c, 1 + rng.next() % 7, 1 + rng.next() % 7}, rng);
    const Tensor y = sca_forward(ScaModule(k), a, b);
    EXPECT_EQ(y.shape(), b.shape());
    EXPECT_LT(max_abs_diff(y, ref_sca(a, b, k)), 1e-5);
  }
}

TEST(ScaForward, TwoTokenClosedForm) {
  // One pixel per map: both of A's tokens equal (a, a), so attention is uniform
  // and every output is row + column expansion of a.
  for (float av : {-1.5f, 0.25f, 3.0f}) {
    ScaTrace tr;
    const Tensor y = sca_forward(ScaModule(3), Tensor(Shape{1, 1, 1}, av), Tensor(Shape{1, 1, 1}, 0.7f), &tr);
    EXPECT_EQ(tr.attention.shape(), (Shape{2, 2}));
    for (float p : tr.attention.data()) EXPECT_FLOAT_EQ(p, 0.5f);
    EXPECT_FLOAT_EQ(y[0], 2.0f * av);
  }
  // Distinct tokens: A = [[1, 3]] gives row token 2 and column tokens 1, 3; with
  // B a single pixel of value 1 the weights are softmax(2*[2, 1, 3]).
  ScaTrace tr;
  const Tensor y = sca_forward(ScaModule(1), Tensor(Shape{1, 1, 2}, {1, 3}), Tensor(Shape{1, 1, 1}, 1.0f), &tr);
  const double e2 = std::exp(4.0), e1 = std::exp(2.0), e3 = std::exp(6.0), z = e1 + e2 + e3;
  const double m = (2 * e2 + 1 * e1 + 3 * e3) / z;
  EXPECT_NEAR(tr.attention[0], e2 / z, 1e-6);
  EXPECT_NEAR(y[0], 2 * m, 1e-5);
}

TEST(ScaForward, ConstantAGivesConstantOutput) {
  Rng rng(22);
  for (int t = 0; t < 10; ++t) {
    const Tensor a(Shape{4, 6, 5}, 1.25f);
    const Tensor b = random_tensor(Shape{4, 3 + rng.next() % 5, 3 + rng.next() % 5}, rng);
    ScaTrace tr;
    const Tensor y = sca_forward(ScaModule(3), a, b, &tr);
    const float first = tr.attention[0];
    for (float p : tr.attention.data()) EXPECT_NEAR(p, first, 1e-6);
    for (float v : y.data()) EXPECT_NEAR(v, 2.5, 1e-6);
  }
}

TEST(ScaForward, AttentionRowsAreProbabilityVectors) {
  Rng rng(23);
  for (int t = 0; t < 200; ++t) {
    const std::size_t c = 1 + rng.next() % 8;
    ScaTrace tr;
    (void)sca_forward(ScaModule(3), random_tensor(Shape{c, 1 + rng.next() % 9, 1 + rng.next() % 9}, rng, -3, 3),
                      random_tensor(Shape{c, 1 + rng.next() % 9, 1 + rng.next() % 9}, rng, -3, 3), &tr);
    const std::size_t cols = tr.attention.shape()[1];
    for (std::size_t r = 0; r < tr.attention.shape()[0]; ++r) {
      double s = 0;
      for (std::size_t j = 0; j < cols; ++j) {
        EXPECT_GE(tr.attention[r * cols + j], 0.0f);
        s += tr.attention[r * cols + j];
      }
      EXPECT_NEAR(s, 1.0, 1e-6);
    }
  }
}

TEST(ScaForward, KeyPermutationEquivariance) {
  Rng rng(24);
  const Tensor keys = random_tensor(Shape{9, 6}, rng), queries = random_tensor(Shape{5, 6}, rng);
  const std::vector<std::size_t> perm{3, 0, 8, 1, 7, 2, 6, 4, 5};
  Tensor permuted(keys.shape());
  for (std::size_t i = 0; i < 9; ++i)
    for (std::size_t e = 0; e < 6; ++e) permuted[i * 6 + e] = keys[perm[i] * 6 + e];
  const AttentionResult r0 = token_attention(keys, queries), r1 = token_attention(permuted, queries);
  for (std::size_t j = 0; j < 5; ++j)
    for (std::size_t i = 0; i < 9; ++i) EXPECT_NEAR(r1.attention[j * 9 + i], r0.attention[j * 9 + perm[i]], 1e-6);
  EXPECT_LT(max_abs_diff(r0.enhanced, r1.enhanced), 1e-6);
}

TEST(ScaForward, ChannelMismatchRejected) {
  EXPECT_THROW(sca_forward(ScaModule(3), Tensor(Shape{2, 3, 3}), Tensor(Shape{3, 3, 3})), ShapeError);
  EXPECT_THROW(ScaModule(2), ShapeError);
}

TEST(ScaModule, HasNoWeights) {
  const ScaModule m(5);
  ParamList p;
  m.collect("neck.joint0.sca", p);
  EXPECT_TRUE(p.empty());
  EXPECT_EQ(m.parameter_count(), 0u);
}

TEST(ScaForward, CostScalesWithTokenCountNotPixelCount) {
  auto sca_attn = [](std::size_t s) {
    ScaTrace tr;
    (void)sca_forward(ScaModule(3), Tensor(Shape{4, s, s}, 0.5f), Tensor(Shape{4, s, s}, 0.5f), &tr);
    return static_cast<double>(tr.counts.attention_stage().multiply_adds);
  };
  auto nl_attn = [](std::size_t s) {
    NonLocalBlock::Trace tr;
    (void)NonLocalBlock(4, 1).forward(Tensor(Shape{4, s, s}, 0.5f), Tensor(Shape{4, s, s}, 0.5f), &tr);
    return static_cast<double>(tr.attention_stage().multiply_adds);
  };
  // Doubling the side doubles (H+W)(h+w) four-fold but (HW)(hw) sixteen-fold.
  EXPECT_DOUBLE_EQ(sca_attn(8) / sca_attn(4), 4.0);
  EXPECT_DOUBLE_EQ(nl_attn(8) / nl_attn(4), 16.0);
}

TEST(Eca, KernelSizeRule) {
  EXPECT_EQ(eca_kernel_size(1), 3u);
  EXPECT_EQ(eca_kernel_size(16), 3u);
  EXPECT_EQ(eca_kernel_size(64), 3u);
  EXPECT_EQ(eca_kernel_size(256), 5u);
  EXPECT_EQ(eca_kernel_size(512), 5u);
  EXPECT_EQ(eca_kernel_size(4096), 7u);
  for (std::size_t c = 1; c < 5000; c += 37) {
    EXPECT_EQ(eca_kernel_size(c) % 2, 1u);
    EXPECT_GE(eca_kernel_size(c), 3u);
  }
}

TEST(Eca, ZeroKernelHalvesInput) {
  Rng rng(25);
  const Tensor x = random_tensor(Shape{6, 4, 4}, rng);
  const Tensor y = eca_forward(EcaModule(Tensor(Shape{3})), x);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_FLOAT_EQ(y[i], 0.5f * x[i]);
}

TEST(Eca, ConstantInputGivesEqualInteriorGates) {
  const EcaModule m(Tensor(Shape{3}, {0.3f, -0.2f, 0.7f}));
  const auto g = eca_gates(m, Tensor(Shape{8, 3, 3}, 1.0f));
  // Zero padding changes the two edge channels; interior gates are equal.
  for (std::size_t c = 1; c + 1 < g.size(); ++c) EXPECT_FLOAT_EQ(g[c], g[1]);
  for (float v : g) {
    EXPECT_GT(v, 0.0f);
    EXPECT_LT(v, 1.0f);
  }
}

TEST(Eca, GatesMatchBruteForceConv1d) {
  Rng rng(26);
  for (int t = 0; t < 20; ++t) {
    const Tensor kernel = random_tensor(Shape{3}, rng);
    const Tensor x = random_tensor(Shape{8, 3, 4}, rng);
    const auto g = eca_gates(EcaModule(kernel), x);
    const auto r = ref_eca_gates(x, kernel);
    for (std::size_t c = 0; c < 8; ++c) EXPECT_NEAR(g[c], r[c], 1e-6);
  }
}

TEST(Eca, RejectsTooFewChannels) {
  EXPECT_THROW(eca_forward(EcaModule(Tensor(Shape{5})), Tensor(Shape{4, 2, 2})), ShapeError);
  EXPECT_THROW(EcaModule(Tensor(Shape{4})), ShapeError);
}

TEST(Joint, ZeroKernelComposition) {
  Rng rng(27);
  const JointModule j(EcaModule(Tensor(Shape{3})), ScaModule(3));
  const Tensor a = random_tensor(Shape{4, 5, 5}, rng), b = random_tensor(Shape{4, 3, 6}, rng);
  Tensor half = b;
  for (auto& v : half.data()) v *= 0.5f;
  EXPECT_LT(max_abs_diff(joint_forward(j, a, b), add(sca_forward(ScaModule(3), a, half), b)), 1e-6);

  const Tensor z = joint_forward(j, Tensor(Shape{4, 5, 5}), Tensor(Shape{4, 3, 6}));
  for (float v : z.data()) EXPECT_EQ(v, 0.0f);
}

TEST(Joint, OutputShapeFollowsUpstream) {
  Rng rng(28);
  const JointModule j(EcaModule(6, 3, "j"), ScaModule(3));
  for (int t = 0; t < 20; ++t) {
    const Tensor b = random_tensor(Shape{6, 1 + rng.next() % 9, 1 + rng.next() % 9}, rng);
    EXPECT_EQ(joint_forward(j, random_tensor(Shape{6, 1 + rng.next() % 9, 1 + rng.next() % 9}, rng), b).shape(),
              b.shape());
  }
}

TEST(Joint, MatchesStraightLineReference) {
  Rng rng(29);
  for (int t = 0; t < 10; ++t) {
    const Tensor kernel = random_tensor(Shape{3}, rng);
    const std::size_t c = t < 5 ? 3 : 5;
    const Tensor a = random_tensor(Shape{c, 2, 2}, rng), b = random_tensor(Shape{c, 2, 2}, rng);
    const auto gates = ref_eca_gates(b, kernel);
    Tensor gated = b;
    for (std::size_t ch = 0; ch < c; ++ch)
      for (auto& v : gated.channel(ch)) v = static_cast<float>(v * gates[ch]);
    const TensorD s = ref_sca(a, gated, 3);
    const Tensor y = joint_forward(JointModule(EcaModule(kernel), ScaModule(3)), a, b);
    for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y[i], s[i] + b[i], 1e-5);
  }
}

TEST(Joint, ParameterCountIsEcaKernel) {
  const JointModule j(EcaModule(48, 1, "j"), ScaModule(3));
  EXPECT_EQ(j.parameter_count(), 3u);
  ParamList p;
  j.collect("neck.joint0", p);
  ASSERT_EQ(p.size(), 1u);
  EXPECT_EQ(p[0].path, "neck.joint0.eca.kernel");
}
