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

#include "leyolo/error.hpp"
#include "leyolo/kernels.hpp"
#include "leyolo/tensor.hpp"

#include <algorithm>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace leyolo {

/// Largest allowed expand width relative to the wider of the block's two boundary widths.
inline constexpr std::size_t kMaxExpansionRatio = 6;

/// Inverted bottleneck geometry.
///
/// Three evaluation cases, selected by (expand_ch, in_ch, use_first_pw):
///   (a) expand_ch != in_ch          : pw expand -> SiLU -> dw -> SiLU -> pw project
///   (b) expand_ch == in_ch, with W1 : same chain as (a)
///   (c) expand_ch == in_ch, no W1   : dw -> SiLU -> pw project
/// Every convolution carries BN. The projection has no activation. When
/// `residual` is set the block input is added to the projection output.
///
/// A fusion block (first block after a concat) sets in_ch to the concatenated
/// width; when that width already equals expand_ch, case (c) applies.
struct BottleneckConfig
{
  std::size_t in_ch{0};
  std::size_t expand_ch{0};
  std::size_t out_ch{0};
  std::size_t kernel{3};
  std::size_t stride{1};
  bool        use_first_pw{true};
  bool        residual{false};

  friend bool operator==(BottleneckConfig const &, BottleneckConfig const &) = default;

  /// Number of convolutions the block executes.
  std::size_t conv_count() const noexcept
  {
    return use_first_pw ? 3 : 2;
  }

  /// Residual rule used by the builders: on whenever the skip is shape-compatible.
  static bool residual_allowed(std::size_t in, std::size_t out, std::size_t stride) noexcept
  {
    return stride == 1 && in == out;
  }
};

/// Every rule `cfg` breaks, as human-readable strings. Empty when valid.
inline std::vector<std::string> violations(BottleneckConfig const &cfg)
{
  std::vector<std::string> out;
  if (cfg.in_ch == 0 || cfg.expand_ch == 0 || cfg.out_ch == 0)
  {
    out.emplace_back("channel counts must be >= 1");
    return out;
  }
  if (cfg.kernel % 2 == 0)
  {
    out.push_back("kernel " + std::to_string(cfg.kernel) + " must be odd");
  }
  if (cfg.stride != 1 && cfg.stride != 2)
  {
    out.push_back("stride " + std::to_string(cfg.stride) + " must be 1 or 2");
  }
  if (cfg.expand_ch < cfg.in_ch)
  {
    out.push_back("expand_ch " + std::to_string(cfg.expand_ch) + " < in_ch " + std::to_string(cfg.in_ch));
  }
  if (cfg.expand_ch > kMaxExpansionRatio * std::max(cfg.in_ch, cfg.out_ch))
  {
    out.push_back("ratio-6: expand_ch " + std::to_string(cfg.expand_ch) + " > 6 * max(in_ch " +
                  std::to_string(cfg.in_ch) + ", out_ch " + std::to_string(cfg.out_ch) + ")");
  }
  if (!cfg.use_first_pw && cfg.expand_ch != cfg.in_ch)
  {
    out.push_back("first pointwise removed but in_ch " + std::to_string(cfg.in_ch) + " != expand_ch " +
                  std::to_string(cfg.expand_ch));
  }
  if (cfg.residual && !BottleneckConfig::residual_allowed(cfg.in_ch, cfg.out_ch, cfg.stride))
  {
    out.emplace_back("residual requires stride 1 and in_ch == out_ch");
  }
  return out;
}

inline void check(BottleneckConfig const &cfg, std::string_view layer = {})
{
  auto const problems = violations(cfg);
  if (!problems.empty())
  {
    std::string msg = std::string(layer.empty() ? "bottleneck" : layer) + ": invalid configuration";
    for (auto const &p : problems)
    {
      msg += "; " + p;
    }
    throw ConfigError(msg);
  }
}

struct BottleneckWeights
{
  std::optional<ConvWeights> expand;  // W1, (expand_ch, in_ch, 1, 1)
  ConvWeights                depthwise;  // W2, (expand_ch, 1, k, k)
  ConvWeights                project;  // W3, (out_ch, expand_ch, 1, 1)
};

/// Counts convolutions as blocks execute them.
struct ConvTrace
{
  std::size_t              convs{0};
  std::vector<std::string> executed;

  void record(std::string_view name)
  {
    ++convs;
    executed.emplace_back(name);
  }
};

namespace detail {

inline void expect_conv(ConvWeights const &w, std::size_t out_ch, std::size_t in_per_group, std::size_t k,
                        std::string const &name)
{
  if (w.out_ch != out_ch || w.in_per_group != in_per_group || w.k != k)
  {
    throw ShapeError(name + ": expected kernel (" + std::to_string(out_ch) + "," + std::to_string(in_per_group) +
                     "," + std::to_string(k) + "," + std::to_string(k) + "), got (" + std::to_string(w.out_ch) +
                     "," + std::to_string(w.in_per_group) + "," + std::to_string(w.k) + "," +
                     std::to_string(w.k) + ")");
  }
}

inline Tensor conv_bn(Tensor const &x, ConvWeights const &w, ConvParams p, std::string const &name,
                      ConvTrace *trace)
{
  if (trace != nullptr)
  {
    trace->record(name);
  }
  return batchnorm_infer(conv2d(x, w, p, name), w, name);
}

}  // namespace detail

/// conv2d -> batchnorm_infer -> silu, with "same" padding.
inline Tensor conv_bn_silu(Tensor const &x, std::size_t k, std::size_t stride, std::size_t out_ch,
                           ConvWeights const &w, std::size_t groups = 1, ConvTrace *trace = nullptr,
                           std::string_view layer = {})
{
  std::string const name = layer.empty() ? std::string("conv_bn_silu") : std::string(layer);
  if (groups == 0 || x.shape().c % groups != 0)
  {
    throw ConfigError(name + ": groups " + std::to_string(groups) + " do not divide " +
                      std::to_string(x.shape().c) + " input channels");
  }
  detail::expect_conv(w, out_ch, x.shape().c / groups, k, name);
  return silu(detail::conv_bn(x, w, ConvParams{stride, std::nullopt, groups}, name, trace));
}

/// Inverted bottleneck forward pass.
inline Tensor inverted_bottleneck(Tensor const &x, BottleneckConfig const &cfg, BottleneckWeights const &w,
                                  ConvTrace *trace = nullptr, std::string_view layer = {})
{
  std::string const name = layer.empty() ? std::string("bottleneck") : std::string(layer);
  check(cfg, name);
  if (x.shape().c != cfg.in_ch)
  {
    throw ShapeError(name + ": input has " + std::to_string(x.shape().c) + " channels, block expects " +
                     std::to_string(cfg.in_ch));
  }
  if (cfg.use_first_pw != w.expand.has_value())
  {
    throw ConfigError(name + ": first pointwise weights " + (w.expand ? "present" : "missing") +
                      " but use_first_pw=" + (cfg.use_first_pw ? "true" : "false"));
  }

  Tensor const *dw_input = &x;
  Tensor        expanded;
  if (cfg.use_first_pw)
  {
    detail::expect_conv(*w.expand, cfg.expand_ch, cfg.in_ch, 1, name + ".expand");
    expanded = silu(detail::conv_bn(x, *w.expand, ConvParams{1, 0, 1}, name + ".expand", trace));
    dw_input = &expanded;
  }

  detail::expect_conv(w.depthwise, cfg.expand_ch, 1, cfg.kernel, name + ".dw");
  Tensor hidden = silu(detail::conv_bn(*dw_input, w.depthwise, ConvParams{cfg.stride, std::nullopt, cfg.expand_ch},
                                       name + ".dw", trace));
  expanded      = Tensor{};

  detail::expect_conv(w.project, cfg.out_ch, cfg.expand_ch, 1, name + ".project");
  Tensor y = detail::conv_bn(hidden, w.project, ConvParams{1, 0, 1}, name + ".project", trace);
  if (cfg.residual)
  {
    y = add_residual(y, x, name);
  }
  return y;
}

}  // namespace leyolo
