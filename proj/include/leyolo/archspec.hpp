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

// Declarative LeYOLO graphs: backbone, LeNeck, detection head, variant
// scaling and ablation transforms.
//
// Layer ids follow "<section>.<stage>.<index>" for repeated stages
// (e.g. "backbone.p4.3", "neck.td4.0") and "<section>.<name>" for
// singletons ("neck.lat5", "head.p3"). The network input is "input".

#include "leyolo/blocks.hpp"
#include "leyolo/error.hpp"
#include "leyolo/kernels.hpp"
#include "leyolo/tensor.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

namespace leyolo {

inline constexpr std::string_view kInputId = "input";

enum class Section
{
  backbone,
  neck,
  head,
};

inline std::string_view to_string(Section s)
{
  switch (s)
  {
  case Section::backbone:
    return "backbone";
  case Section::neck:
    return "neck";
  case Section::head:
    return "head";
  }
  return "?";
}

enum class LayerKind
{
  conv_bn_silu,
  inverted_bottleneck,
  upsample2x,
  concat,
  head_branch,
};

inline std::string_view to_string(LayerKind k)
{
  switch (k)
  {
  case LayerKind::conv_bn_silu:
    return "conv_bn_silu";
  case LayerKind::inverted_bottleneck:
    return "inverted_bottleneck";
  case LayerKind::upsample2x:
    return "upsample2x";
  case LayerKind::concat:
    return "concat";
  case LayerKind::head_branch:
    return "head_branch";
  }
  return "?";
}

struct ConvLayerConfig
{
  std::size_t in_ch{0};
  std::size_t out_ch{0};
  std::size_t kernel{1};
  std::size_t stride{1};
  std::size_t groups{1};

  friend bool operator==(ConvLayerConfig const &, ConvLayerConfig const &) = default;
};

struct UpsampleConfig
{
  friend bool operator==(UpsampleConfig const &, UpsampleConfig const &) = default;
};

struct ConcatConfig
{
  friend bool operator==(ConcatConfig const &, ConcatConfig const &) = default;
};

/// Per-level detection head: depthwise-separable stem (in_ch -> hidden_ch), then
/// decoupled box and class branches, each one depthwise-separable conv_bn_silu
/// followed by a biased 1x1 predictor. Output channels: 4 box distances, then
/// num_classes logits.
struct HeadConfig
{
  std::size_t in_ch{0};
  std::size_t hidden_ch{64};
  std::size_t num_classes{80};
  std::size_t kernel{3};

  std::size_t out_ch() const noexcept
  {
    return 4 + num_classes;
  }

  friend bool operator==(HeadConfig const &, HeadConfig const &) = default;
};

using LayerConfig = std::variant<ConvLayerConfig, BottleneckConfig, UpsampleConfig, ConcatConfig, HeadConfig>;

struct LayerSpec
{
  std::string              id;
  std::vector<std::string> inputs;
  int                      level{0};  // output resolution is input / 2^level
  Section                  section{Section::backbone};
  std::string              stage;  // repetition group, empty for singletons
  std::size_t              expansion_ratio{0};  // bottlenecks with expand_ch tied to out_ch; 0 = free
  LayerConfig              config;

  LayerKind kind() const noexcept
  {
    return static_cast<LayerKind>(config.index());
  }

  template <typename T>
  T const *as() const noexcept
  {
    return std::get_if<T>(&config);
  }

  template <typename T>
  T *as() noexcept
  {
    return std::get_if<T>(&config);
  }

  friend bool operator==(LayerSpec const &, LayerSpec const &) = default;
};

struct VariantConfig
{
  std::string name;
  double      channel_ratio{1.0};
  double      layer_ratio{1.0};
  std::size_t train_size{640};

  static VariantConfig nano()
  {
    return {"nano", 1.0, 1.0, 640};
  }
  static VariantConfig small()
  {
    return {"small", 1.33, 1.0, 640};
  }
  static VariantConfig medium()
  {
    return {"medium", 1.33, 1.33, 640};
  }
  static VariantConfig large()
  {
    return {"large", 1.33, 1.33, 768};
  }

  static std::array<VariantConfig, 4> all()
  {
    return {nano(), small(), medium(), large()};
  }

  static VariantConfig by_name(std::string_view name)
  {
    for (auto const &v : all())
    {
      if (v.name == name)
      {
        return v;
      }
    }
    throw ConfigError("unknown variant '" + std::string(name) + "' (expected nano, small, medium or large)");
  }

  friend bool operator==(VariantConfig const &, VariantConfig const &) = default;
};

struct ArchitectureSpec
{
  std::string              variant{"nano"};
  std::size_t              input_channels{3};
  std::size_t              num_classes{80};
  std::vector<LayerSpec>   layers;
  std::vector<std::string> outputs;

  std::optional<std::size_t> index_of(std::string_view id) const
  {
    for (std::size_t i = 0; i < layers.size(); ++i)
    {
      if (layers[i].id == id)
      {
        return i;
      }
    }
    return std::nullopt;
  }

  LayerSpec const *find(std::string_view id) const
  {
    auto i = index_of(id);
    return i ? &layers[*i] : nullptr;
  }

  LayerSpec *find(std::string_view id)
  {
    auto i = index_of(id);
    return i ? &layers[*i] : nullptr;
  }

  friend bool operator==(ArchitectureSpec const &, ArchitectureSpec const &) = default;
};

// ---------------------------------------------------------------------------
// Scaling rules

/// round(c * ratio / 8) * 8, never below 8.
inline std::size_t scale_channels(std::size_t c, double ratio)
{
  auto const v = static_cast<std::size_t>(std::llround(static_cast<double>(c) * ratio / 8.0)) * 8;
  return std::max<std::size_t>(8, v);
}

/// ceil(r * ratio); repetitions never drop below the base count.
inline std::size_t scale_depth(std::size_t r, double ratio)
{
  return static_cast<std::size_t>(std::ceil(static_cast<double>(r) * ratio - 1e-9));
}

// ---------------------------------------------------------------------------
// Graph helpers

/// Output channel count of every layer, in layer order.
inline std::vector<std::size_t> layer_channels(ArchitectureSpec const &spec)
{
  std::unordered_map<std::string, std::size_t> by_id;
  by_id.emplace(std::string(kInputId), spec.input_channels);
  std::vector<std::size_t> out;
  out.reserve(spec.layers.size());
  auto lookup = [&](std::string const &id) -> std::size_t {
    auto it = by_id.find(id);
    return it == by_id.end() ? 0 : it->second;
  };
  for (auto const &layer : spec.layers)
  {
    std::size_t c = 0;
    std::visit(
        [&](auto const &cfg) {
          using T = std::decay_t<decltype(cfg)>;
          if constexpr (std::is_same_v<T, ConvLayerConfig> || std::is_same_v<T, BottleneckConfig>)
          {
            c = cfg.out_ch;
          }
          else if constexpr (std::is_same_v<T, HeadConfig>)
          {
            c = cfg.out_ch();
          }
          else if constexpr (std::is_same_v<T, UpsampleConfig>)
          {
            c = layer.inputs.empty() ? 0 : lookup(layer.inputs.front());
          }
          else
          {
            for (auto const &in : layer.inputs)
            {
              c += lookup(in);
            }
          }
        },
        layer.config);
    by_id[layer.id] = c;
    out.push_back(c);
  }
  return out;
}

/// Static shape of every layer output for a batch-1 input of size (height, width).
inline std::vector<Shape> propagate_shapes(ArchitectureSpec const &spec, std::size_t height, std::size_t width)
{
  std::unordered_map<std::string, Shape> by_id;
  by_id.emplace(std::string(kInputId), Shape{1, spec.input_channels, height, width});
  std::vector<Shape> out;
  out.reserve(spec.layers.size());
  auto const channels = layer_channels(spec);

  for (std::size_t i = 0; i < spec.layers.size(); ++i)
  {
    auto const &layer = spec.layers[i];
    if (layer.inputs.empty())
    {
      throw ShapeError(layer.id + ": layer has no inputs");
    }
    auto it = by_id.find(layer.inputs.front());
    if (it == by_id.end())
    {
      throw ShapeError(layer.id + ": unknown input '" + layer.inputs.front() + "'");
    }
    Shape const in = it->second;
    Shape       s{1, channels[i], in.h, in.w};
    switch (layer.kind())
    {
    case LayerKind::conv_bn_silu: {
      auto const &c = *layer.as<ConvLayerConfig>();
      s.h           = conv_out_extent(in.h, c.kernel, c.stride, c.kernel / 2);
      s.w           = conv_out_extent(in.w, c.kernel, c.stride, c.kernel / 2);
      break;
    }
    case LayerKind::inverted_bottleneck: {
      auto const &b = *layer.as<BottleneckConfig>();
      s.h           = conv_out_extent(in.h, b.kernel, b.stride, b.kernel / 2);
      s.w           = conv_out_extent(in.w, b.kernel, b.stride, b.kernel / 2);
      break;
    }
    case LayerKind::upsample2x:
      s.h = 2 * in.h;
      s.w = 2 * in.w;
      break;
    case LayerKind::concat:
      for (auto const &other : layer.inputs)
      {
        auto jt = by_id.find(other);
        if (jt == by_id.end() || jt->second.h != in.h || jt->second.w != in.w)
        {
          throw ShapeError(layer.id + ": concat inputs disagree on spatial size");
        }
      }
      break;
    case LayerKind::head_branch:
      break;
    }
    by_id[layer.id] = s;
    out.push_back(s);
  }
  return out;
}

/// Index of the last layer consuming each layer's output (or its own index when unused).
/// Spec outputs are pinned to the end of the schedule.
inline std::vector<std::size_t> last_use(ArchitectureSpec const &spec)
{
  std::vector<std::size_t>                     last(spec.layers.size());
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < spec.layers.size(); ++i)
  {
    last[i]                     = i;
    index[spec.layers[i].id] = i;
  }
  for (std::size_t i = 0; i < spec.layers.size(); ++i)
  {
    for (auto const &in : spec.layers[i].inputs)
    {
      auto it = index.find(in);
      if (it != index.end())
      {
        last[it->second] = std::max(last[it->second], i);
      }
    }
  }
  for (auto const &o : spec.outputs)
  {
    auto it = index.find(o);
    if (it != index.end())
    {
      last[it->second] = spec.layers.size();
    }
  }
  return last;
}

// ---------------------------------------------------------------------------
// Builders

namespace detail {

class SpecWriter
{
public:
  explicit SpecWriter(ArchitectureSpec &spec)
    : spec_(spec)
  {}

  std::string conv(std::string id, std::string input, std::size_t in, std::size_t out, std::size_t k,
                   std::size_t stride, int level, Section section, std::string stage = {})
  {
    return push(LayerSpec{std::move(id), {std::move(input)}, level, section, std::move(stage), 0,
                          ConvLayerConfig{in, out, k, stride, 1}});
  }

  std::string bneck(std::string id, std::string input, BottleneckConfig cfg, int level, Section section,
                    std::string stage, std::size_t expansion_ratio = 0)
  {
    return push(LayerSpec{std::move(id), {std::move(input)}, level, section, std::move(stage), expansion_ratio,
                          cfg});
  }

  std::string upsample(std::string id, std::string input, int level, Section section)
  {
    return push(LayerSpec{std::move(id), {std::move(input)}, level, section, {}, 0, UpsampleConfig{}});
  }

  std::string concat(std::string id, std::string a, std::string b, int level, Section section)
  {
    return push(LayerSpec{std::move(id), {std::move(a), std::move(b)}, level, section, {}, 0, ConcatConfig{}});
  }

  std::string push(LayerSpec layer)
  {
    spec_.layers.push_back(std::move(layer));
    return spec_.layers.back().id;
  }

private:
  ArchitectureSpec &spec_;
};

inline BottleneckConfig make_bneck(std::size_t in, std::size_t expand, std::size_t out, std::size_t k,
                                   std::size_t stride, bool first_pw = true)
{
  return BottleneckConfig{in,     expand,   out, k, stride, first_pw,
                          BottleneckConfig::residual_allowed(in, out, stride)};
}

/// One strided transition block followed by `repeats` stride-1 blocks.
inline std::string backbone_stage(SpecWriter &w, std::string input, std::string const &stage, int level,
                                  BottleneckConfig transition, std::size_t expand, std::size_t repeats)
{
  std::size_t idx  = 0;
  std::string last = w.bneck(stage + "." + std::to_string(idx++), std::move(input), transition, level,
                             Section::backbone, stage);
  for (std::size_t r = 0; r < repeats; ++r)
  {
    last = w.bneck(stage + "." + std::to_string(idx++), last,
                   make_bneck(transition.out_ch, expand, transition.out_ch, transition.kernel, 1), level,
                   Section::backbone, stage);
  }
  return last;
}

/// `count` neck bottlenecks of width c and expand ratio*c; the first consumes
/// a fused input of width fused_in and drops its first pointwise when fused_in == ratio*c.
inline std::string neck_stage(SpecWriter &w, std::string input, std::string const &stage, int level,
                              std::size_t fused_in, std::size_t c, std::size_t ratio, std::size_t k,
                              std::size_t count)
{
  std::size_t const d    = ratio * c;
  std::string       last = std::move(input);
  for (std::size_t i = 0; i < count; ++i)
  {
    std::size_t const in = i == 0 ? fused_in : c;
    last = w.bneck(stage + "." + std::to_string(i), last, make_bneck(in, d, c, k, 1, in != d), level, Section::neck,
                   stage, ratio);
  }
  return last;
}

}  // namespace detail

/// Backbone layers for `variant`. Outputs are the P3, P4 and P5 taps.
///
/// Nano rows: P0 conv3x3 s2 ->16; P1 conv1x1 16->16; bneck3x3 pw-free d=16 s2 ->16;
/// bneck3x3 d=96 s2 ->32; bneck3x3 d=96; bneck5x5 d=96 s2 ->64; 4x bneck5x5 d=192;
/// bneck5x5 d=576 s2 ->96; 4x bneck5x5 d=576.
inline ArchitectureSpec build_backbone(VariantConfig const &variant)
{
  ArchitectureSpec spec;
  spec.variant = variant.name;
  detail::SpecWriter w(spec);
  auto c = [&](std::size_t base) { return scale_channels(base, variant.channel_ratio); };
  auto r = [&](std::size_t base) { return scale_depth(base, variant.layer_ratio); };

  auto x = w.conv("backbone.stem.0", std::string(kInputId), spec.input_channels, c(16), 3, 2, 1, Section::backbone,
                  "backbone.stem");
  x = w.conv("backbone.stem.1", x, c(16), c(16), 1, 1, 1, Section::backbone, "backbone.stem");
  x = w.bneck("backbone.p2.0", x, detail::make_bneck(c(16), c(16), c(16), 3, 2, false), 2, Section::backbone,
              "backbone.p2");
  auto p3 = detail::backbone_stage(w, x, "backbone.p3", 3, detail::make_bneck(c(16), c(96), c(32), 3, 2), c(96),
                                   r(1));
  auto p4 = detail::backbone_stage(w, p3, "backbone.p4", 4, detail::make_bneck(c(32), c(96), c(64), 5, 2), c(192),
                                   r(4));
  auto p5 = detail::backbone_stage(w, p4, "backbone.p5", 5, detail::make_bneck(c(64), c(576), c(96), 5, 2),
                                   c(576), r(4));
  spec.outputs = {p3, p4, p5};
  return spec;
}

/// Appends LeNeck to a backbone spec whose outputs are the P3/P4/P5 taps.
///
/// Top-down: lat5 (1x1 P5->C4), upsample, concat with P4 tap, l bottlenecks at P4;
/// lat4 (1x1 ->C3), upsample, concat with P3 tap, l bottlenecks at P3 -> P3'.
/// Bottom-up: conv3x3 s2 P3'->C4, concat with the top-down P4 result, l bottlenecks -> P4';
/// conv3x3 s2 P4'->C5, concat with the P5 tap, l bottlenecks -> P5'.
/// Every neck bottleneck uses expand = 2 * width; the first block after each concat
/// drops its first pointwise because the concat already has that width.
inline ArchitectureSpec build_leneck(ArchitectureSpec spec, VariantConfig const &variant)
{
  if (spec.outputs.size() != 3)
  {
    throw ConfigError("build_leneck: expected three backbone taps, got " + std::to_string(spec.outputs.size()));
  }
  auto const channels = layer_channels(spec);
  auto       tap_ch   = [&](std::string const &id) {
    auto i = spec.index_of(id);
    if (!i)
    {
      throw ConfigError("build_leneck: unknown tap '" + id + "'");
    }
    return channels[*i];
  };
  std::string const p3 = spec.outputs[0];
  std::string const p4 = spec.outputs[1];
  std::string const p5 = spec.outputs[2];
  std::size_t const c3 = tap_ch(p3);
  std::size_t const c4 = tap_ch(p4);
  std::size_t const c5 = tap_ch(p5);

  constexpr std::size_t kRatio  = 2;
  constexpr std::size_t kKernel = 5;
  std::size_t const     l       = scale_depth(3, variant.layer_ratio);

  detail::SpecWriter w(spec);
  auto x   = w.conv("neck.lat5", p5, c5, c4, 1, 1, 5, Section::neck);
  x        = w.upsample("neck.up5", x, 4, Section::neck);
  x        = w.concat("neck.cat4", x, p4, 4, Section::neck);
  auto td4 = detail::neck_stage(w, x, "neck.td4", 4, 2 * c4, c4, kRatio, kKernel, l);

  x        = w.conv("neck.lat4", td4, c4, c3, 1, 1, 4, Section::neck);
  x        = w.upsample("neck.up4", x, 3, Section::neck);
  x        = w.concat("neck.cat3", x, p3, 3, Section::neck);
  auto out3 = detail::neck_stage(w, x, "neck.p3", 3, 2 * c3, c3, kRatio, kKernel, l);

  x         = w.conv("neck.down3", out3, c3, c4, 3, 2, 4, Section::neck);
  x         = w.concat("neck.cat4b", x, td4, 4, Section::neck);
  auto out4 = detail::neck_stage(w, x, "neck.bu4", 4, 2 * c4, c4, kRatio, kKernel, l);

  x         = w.conv("neck.down4", out4, c4, c5, 3, 2, 5, Section::neck);
  x         = w.concat("neck.cat5", x, p5, 5, Section::neck);
  auto out5 = detail::neck_stage(w, x, "neck.bu5", 5, 2 * c5, c5, kRatio, kKernel, l);

  spec.outputs = {out3, out4, out5};
  return spec;
}

inline constexpr std::size_t kHeadHiddenChannels = 64;

/// Appends one head branch per pyramid output; the head outputs become the spec outputs.
inline ArchitectureSpec build_head(ArchitectureSpec spec, std::size_t num_classes)
{
  if (spec.outputs.size() != 3)
  {
    throw ConfigError("build_head: expected three pyramid outputs, got " + std::to_string(spec.outputs.size()));
  }
  if (num_classes == 0)
  {
    throw ConfigError("build_head: num_classes must be >= 1");
  }
  spec.num_classes    = num_classes;
  auto const channels = layer_channels(spec);
  std::vector<std::string> heads;
  for (auto const &out : spec.outputs)
  {
    auto const  i     = *spec.index_of(out);
    int const   level = spec.layers[i].level;
    std::string id    = "head.p" + std::to_string(level);
    spec.layers.push_back(LayerSpec{id, {out}, level, Section::head, {}, 0,
                                    HeadConfig{channels[i], kHeadHiddenChannels, num_classes, 3}});
    heads.push_back(std::move(id));
  }
  spec.outputs = std::move(heads);
  return spec;
}

/// Full detector (backbone + LeNeck + head) for a variant.
inline ArchitectureSpec build_model_spec(VariantConfig const &variant, std::size_t num_classes = 80)
{
  return build_head(build_leneck(build_backbone(variant), variant), num_classes);
}

// ---------------------------------------------------------------------------
// Variant scaling

/// Scales a base (nano) spec: every internal channel count c -> round8(c * channel_ratio)
/// (tied neck expansions follow their block width), every stage's stride-1 repetition
/// count r -> ceil(r * layer_ratio). Transition and singleton layers are never duplicated.
/// Always scale from the base spec; scaling an already-scaled spec compounds the ratios.
inline ArchitectureSpec apply_variant(ArchitectureSpec const &base, VariantConfig const &variant)
{
  ArchitectureSpec spec = base;
  spec.variant          = variant.name;

  // Depth: append copies of each stage's last stride-1 bottleneck.
  std::vector<std::string> stages;
  for (auto const &layer : spec.layers)
  {
    if (!layer.stage.empty() && layer.kind() == LayerKind::inverted_bottleneck &&
        std::ranges::find(stages, layer.stage) == stages.end())
    {
      stages.push_back(layer.stage);
    }
  }
  for (auto const &stage : stages)
  {
    std::size_t                members   = 0;
    std::size_t                repeats   = 0;
    std::optional<std::size_t> last_pos;
    std::optional<std::size_t> last_repeat;
    for (std::size_t i = 0; i < spec.layers.size(); ++i)
    {
      auto const &layer = spec.layers[i];
      if (layer.stage != stage)
      {
        continue;
      }
      ++members;
      last_pos = i;
      if (auto const *b = layer.as<BottleneckConfig>(); b != nullptr && b->stride == 1)
      {
        ++repeats;
        last_repeat = i;
      }
    }
    std::size_t const target = scale_depth(repeats, variant.layer_ratio);
    if (target <= repeats || !last_repeat)
    {
      continue;
    }
    std::string const old_last = spec.layers[*last_pos].id;
    LayerSpec const   proto    = spec.layers[*last_repeat];
    std::string       prev     = old_last;
    std::vector<LayerSpec> copies;
    for (std::size_t r = repeats; r < target; ++r)
    {
      LayerSpec copy = proto;
      copy.id        = stage + "." + std::to_string(members++);
      copy.inputs    = {prev};
      prev           = copy.id;
      copies.push_back(std::move(copy));
    }
    for (auto &layer : spec.layers)
    {
      for (auto &in : layer.inputs)
      {
        if (in == old_last)
        {
          in = prev;
        }
      }
    }
    for (auto &o : spec.outputs)
    {
      if (o == old_last)
      {
        o = prev;
      }
    }
    spec.layers.insert(spec.layers.begin() + static_cast<std::ptrdiff_t>(*last_pos + 1), copies.begin(),
                       copies.end());
  }

  // Width: rescale outputs, re-derive inputs from producers.
  std::unordered_map<std::string, std::size_t> produced;
  produced.emplace(std::string(kInputId), spec.input_channels);
  auto producer = [&](LayerSpec const &layer, std::size_t which = 0) {
    auto it = produced.find(layer.inputs.at(which));
    if (it == produced.end())
    {
      throw ConfigError(layer.id + ": unknown input '" + layer.inputs.at(which) + "'");
    }
    return it->second;
  };
  for (auto &layer : spec.layers)
  {
    std::size_t out = 0;
    std::visit(
        [&](auto &cfg) {
          using T = std::decay_t<decltype(cfg)>;
          if constexpr (std::is_same_v<T, ConvLayerConfig>)
          {
            bool const depthwise = cfg.groups > 1 && cfg.groups == cfg.in_ch;
            cfg.in_ch            = producer(layer);
            cfg.out_ch           = scale_channels(cfg.out_ch, variant.channel_ratio);
            if (depthwise)
            {
              cfg.groups = cfg.in_ch;
            }
            out = cfg.out_ch;
          }
          else if constexpr (std::is_same_v<T, BottleneckConfig>)
          {
            cfg.in_ch     = producer(layer);
            cfg.out_ch    = scale_channels(cfg.out_ch, variant.channel_ratio);
            cfg.expand_ch = layer.expansion_ratio > 0 ? layer.expansion_ratio * cfg.out_ch
                                                      : scale_channels(cfg.expand_ch, variant.channel_ratio);
            cfg.residual  = cfg.residual && BottleneckConfig::residual_allowed(cfg.in_ch, cfg.out_ch, cfg.stride);
            out           = cfg.out_ch;
          }
          else if constexpr (std::is_same_v<T, HeadConfig>)
          {
            cfg.in_ch = producer(layer);
            out       = cfg.out_ch();
          }
          else if constexpr (std::is_same_v<T, UpsampleConfig>)
          {
            out = producer(layer);
          }
          else
          {
            for (std::size_t i = 0; i < layer.inputs.size(); ++i)
            {
              out += producer(layer, i);
            }
          }
        },
        layer.config);
    produced[layer.id] = out;
  }
  return spec;
}

// ---------------------------------------------------------------------------
// Ablations

enum class KernelPolicy
{
  unchanged,
  all_3x3,
  all_5x5,
  k5_from_p4,  // 5x5 for layers whose output is at P4 or deeper, 3x3 elsewhere
};

/// Design toggles explored by the ablation study.
struct AblationConfig
{
  KernelPolicy               kernels{KernelPolicy::unchanged};
  bool                       downsample_3x3_only{false};
  bool                       no_pw_backbone_and_neck{false};
  std::optional<std::size_t> neck_expansion;  // 2 or 3

  friend bool operator==(AblationConfig const &, AblationConfig const &) = default;
};

namespace detail {

inline void check_bottlenecks(ArchitectureSpec const &spec, std::string_view what)
{
  std::string msg;
  for (auto const &layer : spec.layers)
  {
    if (auto const *b = layer.as<BottleneckConfig>())
    {
      for (auto const &p : violations(*b))
      {
        msg += "; " + layer.id + ": " + p;
      }
    }
  }
  if (!msg.empty())
  {
    throw ConfigError(std::string(what) + " produces invalid bottlenecks" + msg);
  }
}

inline bool is_neck_downsample(LayerSpec const &layer)
{
  auto const *c = layer.as<ConvLayerConfig>();
  return layer.section == Section::neck && c != nullptr && c->stride == 2;
}

inline void set_neck_expansion(ArchitectureSpec &spec, std::size_t ratio)
{
  for (auto &layer : spec.layers)
  {
    auto *b = layer.as<BottleneckConfig>();
    if (b == nullptr || layer.section != Section::neck)
    {
      continue;
    }
    b->expand_ch          = ratio * b->out_ch;
    layer.expansion_ratio = ratio;
    if (b->in_ch != b->expand_ch)
    {
      b->use_first_pw = true;
    }
  }
}

}  // namespace detail

/// Applies the toggles to `spec`. Throws ConfigError when the result breaks a
/// bottleneck invariant or the toggles are themselves invalid.
inline ArchitectureSpec apply_ablation(ArchitectureSpec spec, AblationConfig const &ab)
{
  if (ab.neck_expansion && *ab.neck_expansion != 2 && *ab.neck_expansion != 3)
  {
    throw ConfigError("neck_expansion must be 2 or 3, got " + std::to_string(*ab.neck_expansion));
  }
  for (auto &layer : spec.layers)
  {
    auto *b = layer.as<BottleneckConfig>();
    if (b == nullptr)
    {
      continue;
    }
    switch (ab.kernels)
    {
    case KernelPolicy::unchanged:
      break;
    case KernelPolicy::all_3x3:
      b->kernel = 3;
      break;
    case KernelPolicy::all_5x5:
      b->kernel = 5;
      break;
    case KernelPolicy::k5_from_p4:
      b->kernel = layer.level >= 4 ? 5 : 3;
      break;
    }
  }
  if (ab.downsample_3x3_only)
  {
    for (auto &layer : spec.layers)
    {
      if (detail::is_neck_downsample(layer))
      {
        layer.as<ConvLayerConfig>()->kernel = 3;
      }
    }
  }
  if (ab.neck_expansion)
  {
    detail::set_neck_expansion(spec, *ab.neck_expansion);
  }
  if (ab.no_pw_backbone_and_neck)
  {
    for (auto &layer : spec.layers)
    {
      auto *b = layer.as<BottleneckConfig>();
      if (b != nullptr && layer.section != Section::head && b->in_ch == b->expand_ch)
      {
        b->use_first_pw = false;
      }
    }
  }
  detail::check_bottlenecks(spec, "ablation");
  return spec;
}

/// Starting point of the ablation study: neck downsampling convs at 5x5, every
/// first pointwise present, neck expansion 3.
inline ArchitectureSpec ablation_origin(ArchitectureSpec spec)
{
  for (auto &layer : spec.layers)
  {
    if (detail::is_neck_downsample(layer))
    {
      layer.as<ConvLayerConfig>()->kernel = 5;
    }
    if (auto *b = layer.as<BottleneckConfig>(); b != nullptr && layer.section != Section::head)
    {
      b->use_first_pw = true;
    }
  }
  detail::set_neck_expansion(spec, 3);
  detail::check_bottlenecks(spec, "ablation origin");
  return spec;
}

/// One step of the ablation study. Steps are cumulative: each config contains
/// every toggle adopted by the steps before it (kernel steps are alternatives).
struct AblationRow
{
  std::string    key;
  std::string    label;
  AblationConfig config;
  double         reference_gflop;
};

inline std::vector<AblationRow> ablation_rows()
{
  AblationConfig k3{KernelPolicy::all_3x3, false, false, std::nullopt};
  AblationConfig k5{KernelPolicy::all_5x5, false, false, std::nullopt};
  AblationConfig p4{KernelPolicy::k5_from_p4, false, false, std::nullopt};
  AblationConfig ds = p4;
  ds.downsample_3x3_only = true;
  AblationConfig pw      = ds;
  pw.no_pw_backbone_and_neck = true;
  AblationConfig e2          = pw;
  e2.neck_expansion          = 2;
  return {
      {"kernels_3x3_only", "+3x3 only", k3, 2.877},
      {"kernels_5x5_only", "+5x5 only", k5, 3.946},
      {"k5_after_p4_only", "+5x5 after P4", p4, 3.19},
      {"downsample_3x3_only", "+Downsampling 3x3 only", ds, 3.011},
      {"no_pw_backbone_and_neck", "+no pw backbone and neck", pw, 2.823},
      {"neck_expansion_2", "+LeNeck expansion ratio of 2 instead of 3", e2, 2.64},
  };
}

/// Merges the cumulative configs of the named ablation steps.
inline AblationConfig ablation_config_for(std::vector<std::string> const &keys)
{
  AblationConfig merged;
  auto const     rows = ablation_rows();
  for (auto const &key : keys)
  {
    auto it = std::ranges::find(rows, key, &AblationRow::key);
    if (it == rows.end())
    {
      throw ConfigError("unknown ablation toggle '" + key + "'");
    }
    auto const &c = it->config;
    if (c.kernels != KernelPolicy::unchanged)
    {
      if (merged.kernels != KernelPolicy::unchanged && merged.kernels != c.kernels)
      {
        throw ConfigError("ablation toggle '" + key + "' conflicts with an earlier kernel policy");
      }
      merged.kernels = c.kernels;
    }
    merged.downsample_3x3_only     = merged.downsample_3x3_only || c.downsample_3x3_only;
    merged.no_pw_backbone_and_neck = merged.no_pw_backbone_and_neck || c.no_pw_backbone_and_neck;
    if (c.neck_expansion)
    {
      merged.neck_expansion = c.neck_expansion;
    }
  }
  return merged;
}

// ---------------------------------------------------------------------------
// Validation

struct Violation
{
  std::string layer;
  std::string rule;  // "graph", "channels", "ratio-6", "bottleneck", "conv", "backbone-span", "outputs"
  std::string detail;
};

/// Every ArchitectureSpec / BottleneckConfig rule the spec breaks. Empty iff valid.
inline std::vector<Violation> validate(ArchitectureSpec const &spec)
{
  std::vector<Violation>                       out;
  std::unordered_map<std::string, std::size_t> channels;
  std::unordered_map<std::string, int>         levels;
  channels.emplace(std::string(kInputId), spec.input_channels);
  levels.emplace(std::string(kInputId), 0);

  for (auto const &layer : spec.layers)
  {
    if (channels.contains(layer.id))
    {
      out.push_back({layer.id, "graph", "duplicate layer id"});
      continue;
    }
    std::size_t const arity = layer.kind() == LayerKind::concat ? 2 : 1;
    if (layer.inputs.size() != arity)
    {
      out.push_back({layer.id, "graph",
                     std::string(to_string(layer.kind())) + " needs " + std::to_string(arity) + " input(s), has " +
                         std::to_string(layer.inputs.size())});
      channels[layer.id] = 0;
      levels[layer.id]   = layer.level;
      continue;
    }
    bool inputs_ok = true;
    for (auto const &in : layer.inputs)
    {
      if (!channels.contains(in))
      {
        out.push_back({layer.id, "graph", "input '" + in + "' is not an earlier layer"});
        inputs_ok = false;
      }
    }
    if (!inputs_ok)
    {
      channels[layer.id] = 0;
      levels[layer.id]   = layer.level;
      continue;
    }

    std::size_t const in_ch    = channels[layer.inputs[0]];
    int const         in_level = levels[layer.inputs[0]];
    int               expected = in_level;
    std::size_t       out_ch   = 0;
    bool              check_level = true;

    auto channel_check = [&](std::size_t declared) {
      if (declared != in_ch)
      {
        out.push_back({layer.id, "channels",
                       "declared in_ch " + std::to_string(declared) + " but producer has " + std::to_string(in_ch)});
      }
    };

    switch (layer.kind())
    {
    case LayerKind::conv_bn_silu: {
      auto const &c = *layer.as<ConvLayerConfig>();
      channel_check(c.in_ch);
      if (c.groups == 0 || c.in_ch % c.groups != 0 || c.out_ch % c.groups != 0)
      {
        out.push_back({layer.id, "conv", "groups must divide in_ch and out_ch"});
      }
      if (c.kernel % 2 == 0)
      {
        out.push_back({layer.id, "conv", "kernel must be odd"});
      }
      expected += c.stride == 2 ? 1 : 0;
      out_ch = c.out_ch;
      break;
    }
    case LayerKind::inverted_bottleneck: {
      auto const &b = *layer.as<BottleneckConfig>();
      channel_check(b.in_ch);
      for (auto const &p : violations(b))
      {
        out.push_back({layer.id, p.starts_with("ratio-6") ? "ratio-6" : "bottleneck", p});
      }
      expected += b.stride == 2 ? 1 : 0;
      out_ch = b.out_ch;
      break;
    }
    case LayerKind::upsample2x:
      expected -= 1;
      out_ch = in_ch;
      break;
    case LayerKind::concat: {
      int const other_level = levels[layer.inputs[1]];
      if (other_level != in_level)
      {
        out.push_back({layer.id, "graph",
                       "concat inputs at different spatial levels (P" + std::to_string(in_level) + " vs P" +
                           std::to_string(other_level) + ")"});
        check_level = false;
      }
      out_ch = in_ch + channels[layer.inputs[1]];
      break;
    }
    case LayerKind::head_branch: {
      auto const &h = *layer.as<HeadConfig>();
      channel_check(h.in_ch);
      out_ch = h.out_ch();
      break;
    }
    }
    if (check_level && expected != layer.level)
    {
      out.push_back({layer.id, "graph",
                     "declared level P" + std::to_string(layer.level) + " but graph yields P" +
                         std::to_string(expected)});
    }
    channels[layer.id] = out_ch;
    levels[layer.id]   = check_level ? expected : layer.level;
  }

  std::size_t lo = 0;
  std::size_t hi = 0;
  for (auto const &layer : spec.layers)
  {
    if (layer.section != Section::backbone)
    {
      continue;
    }
    std::size_t const c = channels[layer.id];
    lo                  = lo == 0 ? c : std::min(lo, c);
    hi                  = std::max(hi, c);
  }
  if (lo > 0 && hi > kMaxExpansionRatio * lo)
  {
    out.push_back({"backbone", "backbone-span",
                   "backbone widths span " + std::to_string(lo) + ".." + std::to_string(hi) + " (ratio > 6)"});
  }

  if (spec.outputs.size() != 3)
  {
    out.push_back({"outputs", "outputs", "expected 3 detection outputs, got " + std::to_string(spec.outputs.size())});
  }
  else
  {
    for (std::size_t i = 0; i < 3; ++i)
    {
      auto it = levels.find(spec.outputs[i]);
      if (it == levels.end() || !spec.find(spec.outputs[i]))
      {
        out.push_back({spec.outputs[i], "outputs", "output is not a layer"});
      }
      else if (it->second != static_cast<int>(3 + i))
      {
        out.push_back({spec.outputs[i], "outputs",
                       "output " + std::to_string(i) + " must be at stride " + std::to_string(8 << i)});
      }
    }
  }
  return out;
}

}  // namespace leyolo
