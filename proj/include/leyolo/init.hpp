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

#include "leyolo/archspec.hpp"
#include "leyolo/params.hpp"
#include "leyolo/weight_store.hpp"

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace leyolo {

/// Deterministic weights for shape and determinism work, not for accuracy.
///
/// Generator: std::mt19937 seeded with `seed`, one stream walked in manifest
/// order. Each kernel value is u = (gen() >> 8) * 2^-24 in [0, 1), mapped to
/// (2u - 1) * sqrt(3 / fan_in) with fan_in = in_per_group * k * k.
/// BN: gamma 1, beta 0, mean 0, var 1. Predictor biases: box 1.0, class
/// log(5 / num_classes / (640 / stride)^2). The integer arithmetic keeps the
/// output identical across standard libraries.
inline WeightStore init_random(ArchitectureSpec const &spec, std::uint32_t seed)
{
  std::mt19937 gen(seed);
  auto         uniform = [&gen] { return static_cast<float>(gen() >> 8) * 0x1.0p-24f; };

  WeightStore store;
  for (auto const &layer : spec.layers)
  {
    for (auto const &slot : conv_slots(layer))
    {
      auto const         fan_in = static_cast<float>(slot.in_per_group() * slot.kernel * slot.kernel);
      float const        bound  = std::sqrt(3.0f / fan_in);
      std::vector<float> kernel(slot.kernel_params());
      for (auto &v : kernel)
      {
        v = (2.0f * uniform() - 1.0f) * bound;
      }
      auto const tensors = param_tensors(slot);
      store.add(tensors[0].name, tensors[0].dims, kernel);
      if (slot.batch_norm)
      {
        std::vector<float> const ones(slot.out_ch, 1.0f);
        std::vector<float> const zeros(slot.out_ch, 0.0f);
        store.add(slot.name + ".bn.gamma", {static_cast<std::uint32_t>(slot.out_ch)}, ones);
        store.add(slot.name + ".bn.beta", {static_cast<std::uint32_t>(slot.out_ch)}, zeros);
        store.add(slot.name + ".bn.mean", {static_cast<std::uint32_t>(slot.out_ch)}, zeros);
        store.add(slot.name + ".bn.var", {static_cast<std::uint32_t>(slot.out_ch)}, ones);
      }
      if (slot.bias)
      {
        float value = 1.0f;
        if (slot.name.ends_with(".cls_pred"))
        {
          double const cells = 640.0 / static_cast<double>(std::size_t{1} << layer.level);
          value = static_cast<float>(std::log(5.0 / static_cast<double>(spec.num_classes) / (cells * cells)));
        }
        std::vector<float> const bias(slot.out_ch, value);
        store.add(slot.name + ".bias", {static_cast<std::uint32_t>(slot.out_ch)}, bias);
      }
    }
  }
  return store;
}

}  // namespace leyolo
