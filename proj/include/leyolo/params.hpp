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

// Parameter layout of a spec: which convolutions each layer owns and the
// tensor names/shapes a weight store must provide for them.
//
//   <layer>.<conv>.weight     (out_ch, in_ch / groups, k, k)
//   <layer>.<conv>.bn.gamma   (out_ch)   } present for every conv
//   <layer>.<conv>.bn.beta    (out_ch)   } except the head predictors
//   <layer>.<conv>.bn.mean    (out_ch)   }
//   <layer>.<conv>.bn.var     (out_ch)   }
//   <layer>.<conv>.bias       (out_ch)   head predictors only
//
// Conv names: conv_bn_silu -> "conv"; bottleneck -> "expand" (if present),
// "dw", "project"; head -> "stem_dw", "stem_pw", "box_dw", "box_pw",
// "box_pred", "cls_dw", "cls_pw", "cls_pred".

#include "leyolo/archspec.hpp"

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace leyolo {

struct ConvSlot
{
  std::string name;  // "<layer id>.<conv>"
  std::size_t in_ch{0};
  std::size_t out_ch{0};
  std::size_t kernel{1};
  std::size_t stride{1};
  std::size_t groups{1};
  bool        batch_norm{true};
  bool        bias{false};

  std::size_t in_per_group() const noexcept
  {
    return in_ch / groups;
  }

  std::size_t kernel_params() const noexcept
  {
    return kernel * kernel * in_per_group() * out_ch;
  }

  /// Trainable parameters: kernel, BN scale and shift (running statistics excluded), bias.
  std::size_t params() const noexcept
  {
    return kernel_params() + (batch_norm ? 2 * out_ch : 0) + (bias ? out_ch : 0);
  }
};

/// Convolutions owned by one layer, in execution order.
inline std::vector<ConvSlot> conv_slots(LayerSpec const &layer)
{
  std::vector<ConvSlot> slots;
  auto const           &id = layer.id;
  switch (layer.kind())
  {
  case LayerKind::conv_bn_silu: {
    auto const &c = *layer.as<ConvLayerConfig>();
    slots.push_back({id + ".conv", c.in_ch, c.out_ch, c.kernel, c.stride, c.groups, true, false});
    break;
  }
  case LayerKind::inverted_bottleneck: {
    auto const &b = *layer.as<BottleneckConfig>();
    if (b.use_first_pw)
    {
      slots.push_back({id + ".expand", b.in_ch, b.expand_ch, 1, 1, 1, true, false});
    }
    slots.push_back({id + ".dw", b.expand_ch, b.expand_ch, b.kernel, b.stride, b.expand_ch, true, false});
    slots.push_back({id + ".project", b.expand_ch, b.out_ch, 1, 1, 1, true, false});
    break;
  }
  case LayerKind::head_branch: {
    auto const &h = *layer.as<HeadConfig>();
    slots.push_back({id + ".stem_dw", h.in_ch, h.in_ch, h.kernel, 1, h.in_ch, true, false});
    slots.push_back({id + ".stem_pw", h.in_ch, h.hidden_ch, 1, 1, 1, true, false});
    slots.push_back({id + ".box_dw", h.hidden_ch, h.hidden_ch, h.kernel, 1, h.hidden_ch, true, false});
    slots.push_back({id + ".box_pw", h.hidden_ch, h.hidden_ch, 1, 1, 1, true, false});
    slots.push_back({id + ".box_pred", h.hidden_ch, 4, 1, 1, 1, false, true});
    slots.push_back({id + ".cls_dw", h.hidden_ch, h.hidden_ch, h.kernel, 1, h.hidden_ch, true, false});
    slots.push_back({id + ".cls_pw", h.hidden_ch, h.hidden_ch, 1, 1, 1, true, false});
    slots.push_back({id + ".cls_pred", h.hidden_ch, h.num_classes, 1, 1, 1, false, true});
    break;
  }
  case LayerKind::upsample2x:
  case LayerKind::concat:
    break;
  }
  return slots;
}

struct ParamTensor
{
  std::string                name;
  std::vector<std::uint32_t> dims;
};

inline std::vector<ParamTensor> param_tensors(ConvSlot const &slot)
{
  auto const out = static_cast<std::uint32_t>(slot.out_ch);
  std::vector<ParamTensor> t;
  t.push_back({slot.name + ".weight",
               {out, static_cast<std::uint32_t>(slot.in_per_group()), static_cast<std::uint32_t>(slot.kernel),
                static_cast<std::uint32_t>(slot.kernel)}});
  if (slot.batch_norm)
  {
    for (char const *part : {".bn.gamma", ".bn.beta", ".bn.mean", ".bn.var"})
    {
      t.push_back({slot.name + part, {out}});
    }
  }
  if (slot.bias)
  {
    t.push_back({slot.name + ".bias", {out}});
  }
  return t;
}

/// Every tensor a weight store must hold for `spec`, in canonical order.
inline std::vector<ParamTensor> parameter_manifest(ArchitectureSpec const &spec)
{
  std::vector<ParamTensor> all;
  for (auto const &layer : spec.layers)
  {
    for (auto const &slot : conv_slots(layer))
    {
      for (auto &t : param_tensors(slot))
      {
        all.push_back(std::move(t));
      }
    }
  }
  return all;
}

}  // namespace leyolo
