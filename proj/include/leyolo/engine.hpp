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
#include "leyolo/blocks.hpp"
#include "leyolo/error.hpp"
#include "leyolo/kernels.hpp"
#include "leyolo/params.hpp"
#include "leyolo/tensor.hpp"
#include "leyolo/weight_store.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace leyolo {

namespace detail {

inline std::string dims_string(std::vector<std::uint32_t> const &dims)
{
  std::string s = "(";
  for (std::size_t i = 0; i < dims.size(); ++i)
  {
    s += (i == 0 ? "" : ",") + std::to_string(dims[i]);
  }
  return s + ")";
}

}  // namespace detail

/// A spec with every convolution resolved against a weight store. Immutable once
/// bound; forward() only reads it, so one Model can serve concurrent callers.
class Model
{
public:
  /// Resolves every parameter of `spec` from `store`. Throws BindError listing
  /// every missing tensor and every shape mismatch. Extra tensors are ignored.
  static Model bind(ArchitectureSpec spec, WeightStore const &store)
  {
    std::vector<std::string> problems;
    for (auto const &v : validate(spec))
    {
      problems.push_back("invalid spec at " + v.layer + " [" + v.rule + "]: " + v.detail);
    }
    if (!problems.empty())
    {
      throw BindError(std::move(problems));
    }

    Model m;
    m.convs_.resize(spec.layers.size());
    for (std::size_t i = 0; i < spec.layers.size(); ++i)
    {
      for (auto const &slot : conv_slots(spec.layers[i]))
      {
        ConvWeights w;
        w.out_ch       = slot.out_ch;
        w.in_per_group = slot.in_per_group();
        w.k            = slot.kernel;
        if (slot.batch_norm)
        {
          w.bn = BatchNormParams{};
        }
        for (auto const &t : param_tensors(slot))
        {
          auto const *e = store.find(t.name);
          if (e == nullptr)
          {
            problems.push_back("missing tensor '" + t.name + "' (layer " + spec.layers[i].id + ")");
            continue;
          }
          if (e->dims != t.dims)
          {
            problems.push_back("shape mismatch for '" + t.name + "': expected " + detail::dims_string(t.dims) +
                               ", got " + detail::dims_string(e->dims));
            continue;
          }
          auto values = e->floats();
          auto suffix = t.name.substr(slot.name.size());
          if (suffix == ".weight")
          {
            w.kernel = std::move(values);
          }
          else if (suffix == ".bias")
          {
            w.bias = std::move(values);
          }
          else if (suffix == ".bn.gamma")
          {
            w.bn->gamma = std::move(values);
          }
          else if (suffix == ".bn.beta")
          {
            w.bn->beta = std::move(values);
          }
          else if (suffix == ".bn.mean")
          {
            w.bn->mean = std::move(values);
          }
          else if (suffix == ".bn.var")
          {
            w.bn->var = std::move(values);
          }
        }
        m.convs_[i].push_back(std::move(w));
      }
    }
    if (!problems.empty())
    {
      throw BindError(std::move(problems));
    }
    m.last_use_ = last_use(spec);
    m.spec_     = std::move(spec);
    return m;
  }

  ArchitectureSpec const &spec() const noexcept
  {
    return spec_;
  }

  /// Resolved convolutions of layer `i`, in conv_slots() order.
  std::vector<ConvWeights> const &convs(std::size_t i) const
  {
    return convs_.at(i);
  }

  std::vector<std::size_t> const &schedule_last_use() const noexcept
  {
    return last_use_;
  }

private:
  Model() = default;

  ArchitectureSpec                      spec_;
  std::vector<std::vector<ConvWeights>> convs_;
  std::vector<std::size_t>              last_use_;
};

/// Optional per-call record of what forward() did.
struct ForwardTrace
{
  std::vector<std::string> order;  // layer ids as executed
  std::vector<Shape>       shapes;  // output shape per executed layer
  ConvTrace                convs;
  std::size_t              peak_live_bytes{0};  // largest sum of live activations (input included)
};

namespace detail {

inline Tensor run_head(Tensor const &x, HeadConfig const &h, std::vector<ConvWeights> const &w, ConvTrace *trace,
                       std::string const &id)
{
  auto conv = [&](Tensor const &in, std::size_t slot, std::size_t groups, char const *name) {
    auto const &cw = w[slot];
    return conv_bn_silu(in, cw.k, 1, cw.out_ch, cw, groups, trace, id + "." + name);
  };
  auto predict = [&](Tensor const &in, std::size_t slot, char const *name) {
    if (trace != nullptr)
    {
      trace->record(id + "." + name);
    }
    return conv2d(in, w[slot], ConvParams{1, 0, 1}, id + "." + name);
  };

  Tensor stem = conv(conv(x, 0, h.in_ch, "stem_dw"), 1, 1, "stem_pw");
  Tensor box  = predict(conv(conv(stem, 2, h.hidden_ch, "box_dw"), 3, 1, "box_pw"), 4, "box_pred");
  Tensor cls  = predict(conv(conv(stem, 5, h.hidden_ch, "cls_dw"), 6, 1, "cls_pw"), 7, "cls_pred");
  return concat_channels(box, cls, id);
}

}  // namespace detail

/// Runs the model on a letterboxed NCHW input. Returns the spec outputs (the
/// three head tensors, strides 8/16/32, 4 + num_classes channels each).
/// Intermediates are released right after their last consumer.
inline std::vector<Tensor> forward(Model const &model, Tensor const &x, ForwardTrace *trace = nullptr)
{
  auto const &spec = model.spec();
  auto const  s    = x.shape();
  if (s.c != spec.input_channels)
  {
    throw PreconditionError("input has " + std::to_string(s.c) + " channels, model expects " +
                            std::to_string(spec.input_channels));
  }
  if (s.h % 32 != 0 || s.w % 32 != 0)
  {
    throw PreconditionError("input size " + std::to_string(s.h) + "x" + std::to_string(s.w) +
                            " is not divisible by 32; letterbox the image first");
  }

  auto const                                  &last = model.schedule_last_use();
  std::vector<Tensor>                          values(spec.layers.size());
  std::unordered_map<std::string, std::size_t> index;
  std::size_t                                  input_last = 0;
  for (std::size_t i = 0; i < spec.layers.size(); ++i)
  {
    index.emplace(spec.layers[i].id, i);
    for (auto const &in : spec.layers[i].inputs)
    {
      if (in == kInputId)
      {
        input_last = i;
      }
    }
  }
  bool        input_live = true;
  std::size_t live_bytes = x.size() * sizeof(float);
  ConvTrace  *ctrace     = trace != nullptr ? &trace->convs : nullptr;
  if (trace != nullptr)
  {
    trace->peak_live_bytes = live_bytes;
  }

  auto fetch = [&](std::string const &id) -> Tensor const & {
    return id == kInputId ? x : values[index.at(id)];
  };

  for (std::size_t i = 0; i < spec.layers.size(); ++i)
  {
    auto const &layer = spec.layers[i];
    auto const &w     = model.convs(i);
    Tensor const &in  = fetch(layer.inputs.front());
    Tensor        out;
    switch (layer.kind())
    {
    case LayerKind::conv_bn_silu: {
      auto const &c = *layer.as<ConvLayerConfig>();
      out           = conv_bn_silu(in, c.kernel, c.stride, c.out_ch, w[0], c.groups, ctrace, layer.id);
      break;
    }
    case LayerKind::inverted_bottleneck: {
      auto const       &b = *layer.as<BottleneckConfig>();
      BottleneckWeights bw;
      std::size_t       k = 0;
      if (b.use_first_pw)
      {
        bw.expand = w[k++];
      }
      bw.depthwise = w[k++];
      bw.project   = w[k];
      out          = inverted_bottleneck(in, b, bw, ctrace, layer.id);
      break;
    }
    case LayerKind::upsample2x:
      out = upsample_nearest2x(in);
      break;
    case LayerKind::concat:
      out = concat_channels(in, fetch(layer.inputs.at(1)), layer.id);
      break;
    case LayerKind::head_branch:
      out = detail::run_head(in, *layer.as<HeadConfig>(), w, ctrace, layer.id);
      break;
    }

    live_bytes += out.size() * sizeof(float);
    if (trace != nullptr)
    {
      trace->order.push_back(layer.id);
      trace->shapes.push_back(out.shape());
      trace->peak_live_bytes = std::max(trace->peak_live_bytes, live_bytes);
    }
    values[i] = std::move(out);

    for (auto const &src : layer.inputs)
    {
      if (src == kInputId)
      {
        if (input_live && input_last == i)
        {
          input_live = false;
          live_bytes -= x.size() * sizeof(float);
        }
        continue;
      }
      auto const j = index.at(src);
      if (last[j] == i && !values[j].empty())
      {
        live_bytes -= values[j].size() * sizeof(float);
        values[j] = Tensor{};
      }
    }
    if (last[i] == i)
    {
      live_bytes -= values[i].size() * sizeof(float);
      values[i] = Tensor{};
    }
  }

  std::vector<Tensor> outputs;
  for (auto const &id : spec.outputs)
  {
    outputs.push_back(std::move(values[index.at(id)]));
  }
  return outputs;
}

}  // namespace leyolo
