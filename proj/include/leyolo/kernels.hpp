//
//   Copyright 2026 The leyolo-cpp Authors
//
//   Licensed under the Apache License, Version 2.0 (the "License");
//   you may not use this file except in compliance with the License.
//   You may obtain a copy of the License at
//
//       http://www.apache.org/licenses/LICENSE-2.0
//
//   Unless required by applicable law or agreed to in writing, software
//   distributed under the License is distributed on an "AS IS" BASIS,
//   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
//   See the License for the specific language governing permissions and
//   limitations under the License.
//
#pragma once

// NCHW float kernels. All of them are pure functions of their inputs.
//
// Convolution accumulation order is fixed: for each output element the sum
// starts at +0.0f and adds w * x term by term, input channel outermost, then
// kernel row, then kernel column. Terms that fall in the zero padding are
// skipped. Bias (if any) is added once after the sum. Work is split across
// workers by output plane only, so results are bitwise identical for any
// LEYOLO_THREADS value. Builds must not contract w * x + acc into FMA
// (see -ffp-contract=off in CMakeLists.txt).

#include "leyolo/error.hpp"
#include "leyolo/parallel.hpp"
#include "leyolo/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace leyolo {

struct ConvParams
{
  std::size_t                stride{1};
  std::optional<std::size_t> padding;  // defaults to k / 2 ("same" for odd k at stride 1)
  std::size_t                groups{1};
};

inline std::size_t conv_out_extent(std::size_t in, std::size_t k, std::size_t stride, std::size_t pad)
{
  return (in + 2 * pad - k) / stride + 1;
}

namespace detail {

inline std::string layer_tag(std::string_view layer)
{
  return layer.empty() ? std::string("conv2d") : std::string(layer);
}

}  // namespace detail

/// Direct convolution. Supports standard (groups = 1), depthwise (groups = C) and
/// pointwise (k = 1) cases. BN stored in `w` is not applied here.
inline Tensor conv2d(Tensor const &x, ConvWeights const &w, ConvParams params = {}, std::string_view layer = {})
{
  auto const &in = x.shape();
  auto const  g  = params.groups;
  if (g == 0 || in.c % g != 0 || w.out_ch % g != 0)
  {
    throw ConfigError(detail::layer_tag(layer) + ": groups=" + std::to_string(g) + " must divide in_ch=" +
                      std::to_string(in.c) + " and out_ch=" + std::to_string(w.out_ch));
  }
  if (w.in_per_group * g != in.c)
  {
    throw ShapeError(detail::layer_tag(layer) + ": kernel expects " + std::to_string(w.in_per_group * g) +
                     " input channels, tensor has " + std::to_string(in.c));
  }
  if (w.k == 0 || w.kernel.size() != w.kernel_count())
  {
    throw ShapeError(detail::layer_tag(layer) + ": kernel buffer has " + std::to_string(w.kernel.size()) +
                     " values, expected " + std::to_string(w.kernel_count()));
  }
  if (!w.bias.empty() && w.bias.size() != w.out_ch)
  {
    throw ShapeError(detail::layer_tag(layer) + ": bias length " + std::to_string(w.bias.size()) +
                     " != out_ch " + std::to_string(w.out_ch));
  }
  if (params.stride == 0)
  {
    throw ConfigError(detail::layer_tag(layer) + ": stride must be >= 1");
  }

  std::size_t const k   = w.k;
  std::size_t const pad = params.padding.value_or(k / 2);
  if (in.h + 2 * pad < k || in.w + 2 * pad < k)
  {
    throw ShapeError(detail::layer_tag(layer) + ": input " + to_string(in) + " smaller than kernel " +
                     std::to_string(k));
  }
  std::size_t const s  = params.stride;
  std::size_t const oh = conv_out_extent(in.h, k, s, pad);
  std::size_t const ow = conv_out_extent(in.w, k, s, pad);

  Tensor            y(Shape{in.n, w.out_ch, oh, ow});
  std::size_t const out_per_group = w.out_ch / g;
  std::size_t const ipg           = w.in_per_group;

  parallel_for(in.n * w.out_ch, [&](std::size_t task) {
    std::size_t const n     = task / w.out_ch;
    std::size_t const oc    = task % w.out_ch;
    std::size_t const group = oc / out_per_group;
    auto              out   = y.plane(n, oc);

    for (std::size_t icg = 0; icg < ipg; ++icg)
    {
      auto const src = x.plane(n, group * ipg + icg);
      for (std::size_t ky = 0; ky < k; ++ky)
      {
        for (std::size_t kx = 0; kx < k; ++kx)
        {
          float const wv = w.at(oc, icg, ky, kx);
          // Valid output columns: 0 <= ox * s + kx - pad < in.w
          std::size_t ox_begin = 0;
          if (kx < pad)
          {
            ox_begin = (pad - kx + s - 1) / s;
          }
          std::size_t ox_end = 0;
          if (in.w + pad > kx)
          {
            ox_end = std::min(ow, (in.w + pad - kx - 1) / s + 1);
          }
          for (std::size_t oy = 0; oy < oh; ++oy)
          {
            std::size_t const iy_pad = oy * s + ky;
            if (iy_pad < pad || iy_pad - pad >= in.h)
            {
              continue;
            }
            float const *row  = src.data() + (iy_pad - pad) * in.w;
            float       *orow = out.data() + oy * ow;
            if (s == 1)
            {
              float const *src_row = row + (ox_begin + kx - pad);
              float       *dst_row = orow + ox_begin;
              std::size_t  len     = ox_end > ox_begin ? ox_end - ox_begin : 0;
              for (std::size_t j = 0; j < len; ++j)
              {
                dst_row[j] += wv * src_row[j];
              }
            }
            else
            {
              for (std::size_t ox = ox_begin; ox < ox_end; ++ox)
              {
                orow[ox] += wv * row[ox * s + kx - pad];
              }
            }
          }
        }
      }
    }
    if (!w.bias.empty())
    {
      float const b = w.bias[oc];
      for (auto &v : out)
      {
        v += b;
      }
    }
  });
  return y;
}

/// Elementwise x * sigmoid(x).
inline Tensor silu(Tensor x)
{
  for (auto &v : x.data())
  {
    v = v * (1.0f / (1.0f + std::exp(-v)));
  }
  return x;
}

inline float sigmoid(float v)
{
  return 1.0f / (1.0f + std::exp(-v));
}

/// y_c = gamma_c * (x_c - mean_c) / sqrt(var_c + eps) + beta_c
inline Tensor batchnorm_infer(Tensor x, BatchNormParams const &bn, std::string_view layer = {})
{
  auto const c = x.shape().c;
  if (bn.gamma.size() != c || bn.beta.size() != c || bn.mean.size() != c || bn.var.size() != c)
  {
    throw ShapeError(detail::layer_tag(layer) + ": batch-norm statistics do not match " + std::to_string(c) +
                     " channels");
  }
  for (std::size_t n = 0; n < x.shape().n; ++n)
  {
    for (std::size_t ch = 0; ch < c; ++ch)
    {
      float const scale = bn.gamma[ch] / std::sqrt(bn.var[ch] + bn.eps);
      float const mean  = bn.mean[ch];
      float const beta  = bn.beta[ch];
      for (auto &v : x.plane(n, ch))
      {
        v = (v - mean) * scale + beta;
      }
    }
  }
  return x;
}

/// Applies the BN stored in `w` (no-op when absent).
inline Tensor batchnorm_infer(Tensor x, ConvWeights const &w, std::string_view layer = {})
{
  if (!w.bn)
  {
    return x;
  }
  return batchnorm_infer(std::move(x), *w.bn, layer);
}

/// Folds BN into the kernel and bias: w' = gamma * w / sqrt(var + eps), b' = beta + (b - mean) * gamma / sqrt(var + eps).
inline ConvWeights fold_batchnorm(ConvWeights w)
{
  if (!w.bn)
  {
    return w;
  }
  auto const       &bn    = *w.bn;
  std::size_t const per_oc = w.in_per_group * w.k * w.k;
  if (w.bias.empty())
  {
    w.bias.assign(w.out_ch, 0.0f);
  }
  for (std::size_t oc = 0; oc < w.out_ch; ++oc)
  {
    float const scale = bn.gamma[oc] / std::sqrt(bn.var[oc] + bn.eps);
    for (std::size_t i = 0; i < per_oc; ++i)
    {
      w.kernel[oc * per_oc + i] *= scale;
    }
    w.bias[oc] = (w.bias[oc] - bn.mean[oc]) * scale + bn.beta[oc];
  }
  w.bn.reset();
  return w;
}

/// Nearest-neighbour 2x upsampling: each pixel becomes a 2x2 block.
inline Tensor upsample_nearest2x(Tensor const &x)
{
  auto const &s = x.shape();
  Tensor      y(Shape{s.n, s.c, 2 * s.h, 2 * s.w});
  for (std::size_t n = 0; n < s.n; ++n)
  {
    for (std::size_t c = 0; c < s.c; ++c)
    {
      auto const src = x.plane(n, c);
      auto       dst = y.plane(n, c);
      for (std::size_t yy = 0; yy < 2 * s.h; ++yy)
      {
        float const *row = src.data() + (yy / 2) * s.w;
        float       *out = dst.data() + yy * 2 * s.w;
        for (std::size_t xx = 0; xx < 2 * s.w; ++xx)
        {
          out[xx] = row[xx / 2];
        }
      }
    }
  }
  return y;
}

/// Channel concatenation; a's channels come first.
inline Tensor concat_channels(Tensor const &a, Tensor const &b, std::string_view layer = {})
{
  auto const &sa = a.shape();
  auto const &sb = b.shape();
  if (sa.n != sb.n || sa.h != sb.h || sa.w != sb.w)
  {
    throw ShapeError((layer.empty() ? std::string("concat") : std::string(layer)) + ": cannot concatenate " +
                     to_string(sa) + " with " + to_string(sb));
  }
  Tensor y(Shape{sa.n, sa.c + sb.c, sa.h, sa.w});
  for (std::size_t n = 0; n < sa.n; ++n)
  {
    for (std::size_t c = 0; c < sa.c; ++c)
    {
      std::ranges::copy(a.plane(n, c), y.plane(n, c).begin());
    }
    for (std::size_t c = 0; c < sb.c; ++c)
    {
      std::ranges::copy(b.plane(n, c), y.plane(n, sa.c + c).begin());
    }
  }
  return y;
}

/// Elementwise a + b for identical shapes.
inline Tensor add_residual(Tensor const &a, Tensor const &b, std::string_view layer = {})
{
  if (a.shape() != b.shape())
  {
    throw ShapeError((layer.empty() ? std::string("add") : std::string(layer)) + ": shape " +
                     to_string(a.shape()) + " != " + to_string(b.shape()));
  }
  Tensor y     = a;
  auto   out   = y.data();
  auto   other = b.data();
  for (std::size_t i = 0; i < out.size(); ++i)
  {
    out[i] += other[i];
  }
  return y;
}

}  // namespace leyolo
