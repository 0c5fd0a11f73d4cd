#pragma once

// Tensor-core primitives. All functions are pure: they return new tensors and
// report their cost to active_counter().
//
// Cost convention: a multiply-add is one unit. Pooling (spatial or
// directional) costs one comparison (max) or one addition (avg/mean) per input
// element, independent of the window size. Channel permutation costs one memory
// move per channel.

#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "edtk/errors.hpp"
#include "edtk/op_counter.hpp"
#include "edtk/tensor.hpp"

namespace edtk {

struct Conv2dParams {
  std::size_t stride = 1;
  std::size_t pad_h = 0;
  std::size_t pad_w = 0;
  std::size_t groups = 1;
};

inline std::size_t conv_out_dim(std::size_t in, std::size_t pad, std::size_t k, std::size_t stride) {
  return (in + 2 * pad - k) / stride + 1;
}

/// Grouped 2-D convolution with zero padding.
///
/// input is C_in x H x W, kernel is C_out x (C_in/groups) x kh x kw.
/// Counts out_C * out_H * out_W * (C_in/groups) * kh * kw multiply-adds.
template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& kernel, const Conv2dParams& p) {
  require_rank3(input.shape(), "conv2d input");
  if (kernel.rank() != 4) throw ShapeError("conv2d: kernel must be rank 4, got " + kernel.shape().to_string());
  if (p.stride != 1 && p.stride != 2)
    throw ShapeError("conv2d: stride must be 1 or 2, got " + std::to_string(p.stride));
  if (p.groups == 0) throw ShapeError("conv2d: groups must be positive");

  const std::size_t c_in = input.channels(), h_in = input.height(), w_in = input.width();
  const std::size_t c_out = kernel.shape()[0], kh = kernel.shape()[2], kw = kernel.shape()[3];
  if (c_in % p.groups != 0 || c_out % p.groups != 0)
    throw ShapeError("conv2d: groups " + std::to_string(p.groups) + " must divide input channels " +
                     std::to_string(c_in) + " and output channels " + std::to_string(c_out));
  const std::size_t in_per_group = c_in / p.groups;
  const std::size_t out_per_group = c_out / p.groups;
  if (kernel.shape()[1] != in_per_group)
    throw ShapeError("conv2d: kernel expects " + std::to_string(kernel.shape()[1]) +
                     " input channels per group, input provides " + std::to_string(in_per_group));
  if (kh > h_in + 2 * p.pad_h || kw > w_in + 2 * p.pad_w)
    throw ShapeError("conv2d: kernel " + std::to_string(kh) + "x" + std::to_string(kw) + " larger than padded input " +
                     std::to_string(h_in + 2 * p.pad_h) + "x" + std::to_string(w_in + 2 * p.pad_w));

  const std::size_t h_out = conv_out_dim(h_in, p.pad_h, kh, p.stride);
  const std::size_t w_out = conv_out_dim(w_in, p.pad_w, kw, p.stride);
  BasicTensor<T> out(Shape{c_out, h_out, w_out});

  for (std::size_t oc = 0; oc < c_out; ++oc) {
    const std::size_t group = oc / out_per_group;
    for (std::size_t oy = 0; oy < h_out; ++oy) {
      for (std::size_t ox = 0; ox < w_out; ++ox) {
        T acc{};
        for (std::size_t ic = 0; ic < in_per_group; ++ic) {
          const std::size_t src_c = group * in_per_group + ic;
          for (std::size_t ky = 0; ky < kh; ++ky) {
            const std::ptrdiff_t y =
                static_cast<std::ptrdiff_t>(oy * p.stride + ky) - static_cast<std::ptrdiff_t>(p.pad_h);
            if (y < 0 || y >= static_cast<std::ptrdiff_t>(h_in)) continue;
            for (std::size_t kx = 0; kx < kw; ++kx) {
              const std::ptrdiff_t x =
                  static_cast<std::ptrdiff_t>(ox * p.stride + kx) - static_cast<std::ptrdiff_t>(p.pad_w);
              if (x < 0 || x >= static_cast<std::ptrdiff_t>(w_in)) continue;
              acc +=
                  input.at(src_c, static_cast<std::size_t>(y), static_cast<std::size_t>(x)) * kernel.at(oc, ic, ky, kx);
            }
          }
        }
        out.at(oc, oy, ox) = acc;
      }
    }
  }
  active_counter().add_multiply_adds(c_out * h_out * w_out * in_per_group * kh * kw);
  return out;
}

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& kernel, std::size_t stride,
                      std::size_t padding, std::size_t groups) {
  return conv2d(input, kernel, Conv2dParams{stride, padding, padding, groups});
}

enum class PoolKind { max, avg };

/// Per-channel k x k window pooling. Padding is excluded from both the max and
/// the average (avg divides by the in-bounds count).
template <typename T>
BasicTensor<T> pool_spatial(const BasicTensor<T>& input, PoolKind kind, std::size_t k, std::size_t stride,
                            std::size_t padding) {
  require_rank3(input.shape(), "pool_spatial");
  if (k == 0 || stride == 0) throw ShapeError("pool_spatial: window and stride must be positive");
  const std::size_t c = input.channels(), h = input.height(), w = input.width();
  if (k > h + 2 * padding || k > w + 2 * padding)
    throw ShapeError("pool_spatial: window " + std::to_string(k) + " larger than padded input");
  if (padding >= k) throw ShapeError("pool_spatial: padding must be smaller than the window");

  const std::size_t h_out = conv_out_dim(h, padding, k, stride);
  const std::size_t w_out = conv_out_dim(w, padding, k, stride);
  BasicTensor<T> out(Shape{c, h_out, w_out});
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t oy = 0; oy < h_out; ++oy) {
      const std::ptrdiff_t y0 = static_cast<std::ptrdiff_t>(oy * stride) - static_cast<std::ptrdiff_t>(padding);
      const std::size_t ylo = static_cast<std::size_t>(std::max<std::ptrdiff_t>(y0, 0));
      const std::size_t yhi = std::min<std::size_t>(static_cast<std::size_t>(y0 + static_cast<std::ptrdiff_t>(k)), h);
      for (std::size_t ox = 0; ox < w_out; ++ox) {
        const std::ptrdiff_t x0 = static_cast<std::ptrdiff_t>(ox * stride) - static_cast<std::ptrdiff_t>(padding);
        const std::size_t xlo = static_cast<std::size_t>(std::max<std::ptrdiff_t>(x0, 0));
        const std::size_t xhi = std::min<std::size_t>(static_cast<std::size_t>(x0 + static_cast<std::ptrdiff_t>(k)), w);
        T acc = kind == PoolKind::max ? -std::numeric_limits<T>::infinity() : T{};
        for (std::size_t y = ylo; y < yhi; ++y) {
          for (std::size_t x = xlo; x < xhi; ++x) {
            const T v = input.at(ch, y, x);
            if (kind == PoolKind::max) {
              if (v > acc) acc = v;
            } else {
              acc += v;
            }
          }
        }
        if (kind == PoolKind::avg) acc /= static_cast<T>((yhi - ylo) * (xhi - xlo));
        out.at(ch, oy, ox) = acc;
      }
    }
  }
  if (kind == PoolKind::max)
    active_counter().add_comparisons(input.size());
  else
    active_counter().add_additions(input.size());
  return out;
}

enum class PoolAxis { horizontal, vertical };

/// Directional mean pooling.
///
/// horizontal reduces over width and returns C x H x 1 (H tokens of C values);
/// vertical reduces over height and returns C x 1 x W (W tokens of C values).
template <typename T>
BasicTensor<T> pool_directional(const BasicTensor<T>& input, PoolAxis axis) {
  require_rank3(input.shape(), "pool_directional");
  const std::size_t c = input.channels(), h = input.height(), w = input.width();
  if (axis == PoolAxis::horizontal) {
    BasicTensor<T> out(Shape{c, h, 1});
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t y = 0; y < h; ++y) {
        T acc{};
        for (std::size_t x = 0; x < w; ++x) acc += input.at(ch, y, x);
        out.at(ch, y, 0) = acc / static_cast<T>(w);
      }
    active_counter().add_additions(input.size());
    return out;
  }
  BasicTensor<T> out(Shape{c, 1, w});
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t x = 0; x < w; ++x) {
      T acc{};
      for (std::size_t y = 0; y < h; ++y) acc += input.at(ch, y, x);
      out.at(ch, 0, x) = acc / static_cast<T>(h);
    }
  active_counter().add_additions(input.size());
  return out;
}

/// Source channel for each output channel of a G-group shuffle: viewing the
/// channels as a G x (C/G) matrix, the output is its transpose flattened, i.e.
/// out[c] = in[(C/G) * (c mod G) + floor(c / G)].
inline std::vector<std::size_t> shuffle_permutation(std::size_t channels, std::size_t groups) {
  if (groups == 0 || channels % groups != 0)
    throw ShapeError("channel_shuffle: " + std::to_string(channels) + " channels not divisible by " +
                     std::to_string(groups) + " groups");
  const std::size_t per_group = channels / groups;
  std::vector<std::size_t> src(channels);
  for (std::size_t c = 0; c < channels; ++c) src[c] = per_group * (c % groups) + c / groups;
  return src;
}

inline std::vector<std::size_t> invert_permutation(const std::vector<std::size_t>& perm) {
  std::vector<std::size_t> inv(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) inv[perm[i]] = i;
  return inv;
}

/// out channel c = input channel src[c]. Counts one memory move per channel.
template <typename T>
BasicTensor<T> permute_channels(const BasicTensor<T>& input, const std::vector<std::size_t>& src) {
  require_rank3(input.shape(), "permute_channels");
  if (src.size() != input.channels()) throw ShapeError("permute_channels: permutation length mismatch");
  BasicTensor<T> out(input.shape());
  for (std::size_t c = 0; c < src.size(); ++c) {
    if (src[c] >= input.channels()) throw ShapeError("permute_channels: index out of range");
    const auto from = input.channel(src[c]);
    std::copy(from.begin(), from.end(), out.channel(c).begin());
  }
  active_counter().add_memory_moves(src.size());
  return out;
}

template <typename T>
BasicTensor<T> channel_shuffle(const BasicTensor<T>& input, std::size_t groups) {
  require_rank3(input.shape(), "channel_shuffle");
  return permute_channels(input, shuffle_permutation(input.channels(), groups));
}

/// Softmax over consecutive rows of length n, with max subtraction.
template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& input, std::size_t n) {
  if (n == 0 || input.size() % n != 0)
    throw ShapeError("softmax: axis length " + std::to_string(n) + " does not divide " + std::to_string(input.size()) +
                     " elements");
  BasicTensor<T> out(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i)
    if (std::isnan(input[i])) throw NumericError("softmax: NaN input at element " + std::to_string(i));
  for (std::size_t row = 0; row < input.size(); row += n) {
    T m = input[row];
    for (std::size_t i = 1; i < n; ++i) m = std::max(m, input[row + i]);
    T sum{};
    for (std::size_t i = 0; i < n; ++i) {
      out[row + i] = std::exp(input[row + i] - m);
      sum += out[row + i];
    }
    for (std::size_t i = 0; i < n; ++i) out[row + i] /= sum;
  }
  auto& ctr = active_counter();
  ctr.add_comparisons(input.size());
  ctr.add_transcendentals(input.size());
  ctr.add_additions(input.size());
  ctr.add_multiply_adds(input.size());
  return out;
}

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (!(a.shape() == b.shape()))
    throw ShapeError("add: shape " + a.shape().to_string() + " vs " + b.shape().to_string());
  BasicTensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  active_counter().add_additions(a.size());
  return out;
}

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& x) {
  BasicTensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > T{} ? x[i] : T{};
  active_counter().add_comparisons(x.size());
  return out;
}

template <typename T>
T sigmoid(T v) {
  return T{1} / (T{1} + std::exp(-v));
}

template <typename T>
BasicTensor<T> sigmoid(const BasicTensor<T>& x) {
  BasicTensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = sigmoid(x[i]);
  active_counter().add_transcendentals(x.size());
  return out;
}

/// Multiplies every element of channel c by scales[c].
template <typename T>
BasicTensor<T> scale_channels(const BasicTensor<T>& x, std::span<const T> scales) {
  require_rank3(x.shape(), "scale_channels");
  if (scales.size() != x.channels()) throw ShapeError("scale_channels: scale count mismatch");
  BasicTensor<T> out(x.shape());
  for (std::size_t c = 0; c < x.channels(); ++c) {
    const auto src = x.channel(c);
    auto dst = out.channel(c);
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] * scales[c];
  }
  active_counter().add_multiply_adds(x.size());
  return out;
}

/// Adds bias[c] to every element of channel c.
template <typename T>
BasicTensor<T> add_channel_bias(const BasicTensor<T>& x, std::span<const T> bias) {
  require_rank3(x.shape(), "add_channel_bias");
  if (bias.size() != x.channels()) throw ShapeError("add_channel_bias: bias count mismatch");
  BasicTensor<T> out(x.shape());
  for (std::size_t c = 0; c < x.channels(); ++c) {
    const auto src = x.channel(c);
    auto dst = out.channel(c);
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] + bias[c];
  }
  active_counter().add_additions(x.size());
  return out;
}

/// Channels [first, first + count) of x. Uncounted (a view in any real engine).
template <typename T>
BasicTensor<T> slice_channels(const BasicTensor<T>& x, std::size_t first, std::size_t count) {
  require_rank3(x.shape(), "slice_channels");
  if (count == 0 || first + count > x.channels()) throw ShapeError("slice_channels: range out of bounds");
  const std::size_t plane = x.height() * x.width();
  std::vector<T> data(x.data().begin() + static_cast<std::ptrdiff_t>(first * plane),
                      x.data().begin() + static_cast<std::ptrdiff_t>((first + count) * plane));
  return BasicTensor<T>(Shape{count, x.height(), x.width()}, std::move(data));
}

/// Channel concatenation. Uncounted.
template <typename T>
BasicTensor<T> concat_channels(const std::vector<BasicTensor<T>>& parts) {
  if (parts.empty()) throw ShapeError("concat_channels: nothing to concatenate");
  std::size_t c = 0;
  for (const auto& p : parts) {
    require_rank3(p.shape(), "concat_channels");
    if (p.height() != parts[0].height() || p.width() != parts[0].width())
      throw ShapeError("concat_channels: spatial size mismatch");
    c += p.channels();
  }
  std::vector<T> data;
  data.reserve(c * parts[0].height() * parts[0].width());
  for (const auto& p : parts) data.insert(data.end(), p.data().begin(), p.data().end());
  return BasicTensor<T>(Shape{c, parts[0].height(), parts[0].width()}, std::move(data));
}

/// Nearest-neighbour upsampling by an integer factor. One move per output element.
template <typename T>
BasicTensor<T> upsample_nearest(const BasicTensor<T>& x, std::size_t factor) {
  require_rank3(x.shape(), "upsample_nearest");
  if (factor == 0) throw ShapeError("upsample_nearest: factor must be positive");
  BasicTensor<T> out(Shape{x.channels(), x.height() * factor, x.width() * factor});
  for (std::size_t c = 0; c < x.channels(); ++c)
    for (std::size_t y = 0; y < out.height(); ++y)
      for (std::size_t xx = 0; xx < out.width(); ++xx) out.at(c, y, xx) = x.at(c, y / factor, xx / factor);
  active_counter().add_memory_moves(out.size());
  return out;
}

/// Per-channel spatial mean.
template <typename T>
std::vector<T> global_avg_pool(const BasicTensor<T>& x) {
  require_rank3(x.shape(), "global_avg_pool");
  std::vector<T> out(x.channels());
  for (std::size_t c = 0; c < x.channels(); ++c) {
    T acc{};
    for (T v : x.channel(c)) acc += v;
    out[c] = acc / static_cast<T>(x.height() * x.width());
  }
  active_counter().add_additions(x.size());
  return out;
}

}  // namespace edtk
