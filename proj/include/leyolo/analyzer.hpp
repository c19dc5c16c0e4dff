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

// Static cost accounting.
//
// Conventions: a conv costs k*k*(in/groups)*out*H_out*W_out MACCs and
// FLOP = 2 * MACC. Parameters are kernel weights, BN scale and shift (running
// statistics are buffers, not parameters) and biases. Upsample, concat,
// residual add, BN and activations cost nothing.

#include "leyolo/archspec.hpp"
#include "leyolo/archspec_json.hpp"
#include "leyolo/params.hpp"

#include "json.hpp"

#include <array>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace leyolo {

struct ConvCost
{
  std::string   name;
  Shape         out_shape;
  std::uint64_t params{0};
  std::uint64_t maccs{0};

  std::uint64_t flops() const noexcept
  {
    return 2 * maccs;
  }
};

struct LayerCost
{
  std::string           id;
  LayerKind             kind{LayerKind::conv_bn_silu};
  Section               section{Section::backbone};
  Shape                 out_shape;
  std::uint64_t         params{0};
  std::uint64_t         maccs{0};
  std::uint64_t         flops{0};
  std::vector<ConvCost> convs;
};

struct CostTotals
{
  std::uint64_t params{0};
  std::uint64_t maccs{0};
  std::uint64_t flops{0};

  void add(LayerCost const &l) noexcept
  {
    params += l.params;
    maccs += l.maccs;
    flops += l.flops;
  }

  double gflops() const noexcept
  {
    return static_cast<double>(flops) * 1e-9;
  }

  double mparams() const noexcept
  {
    return static_cast<double>(params) * 1e-6;
  }
};

struct FlopParamReport
{
  std::string               variant;
  std::size_t               input_size{0};
  std::vector<LayerCost>    per_layer;
  std::array<CostTotals, 3> by_section{};  // indexed by Section
  CostTotals                total;
  std::uint64_t             peak_activation_bytes{0};

  CostTotals const &section(Section s) const noexcept
  {
    return by_section[static_cast<std::size_t>(s)];
  }

  LayerCost const *find(std::string_view id) const
  {
    for (auto const &l : per_layer)
    {
      if (l.id == id)
      {
        return &l;
      }
    }
    return nullptr;
  }
};

/// Cost of one conv slot applied to a (H, W) input. Returns the output extent through `h`, `w`.
inline ConvCost conv_cost(ConvSlot const &slot, std::size_t &h, std::size_t &w)
{
  h = conv_out_extent(h, slot.kernel, slot.stride, slot.kernel / 2);
  w = conv_out_extent(w, slot.kernel, slot.stride, slot.kernel / 2);
  ConvCost c;
  c.name      = slot.name;
  c.out_shape = Shape{1, slot.out_ch, h, w};
  c.params    = slot.params();
  c.maccs     = static_cast<std::uint64_t>(slot.kernel_params()) * h * w;
  return c;
}

/// Activation bytes live at the worst point of the engine's schedule (float32,
/// batch 1, counted between layers: input of the layer plus everything still
/// awaiting a consumer plus the new output).
inline std::uint64_t peak_activation_bytes(ArchitectureSpec const &spec, std::vector<Shape> const &shapes,
                                           Shape const &input)
{
  auto const                                   last = last_use(spec);
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
  std::uint64_t    live = input.count() * sizeof(float);
  std::uint64_t    peak = live;
  std::vector<bool> alive(spec.layers.size(), false);
  for (std::size_t i = 0; i < spec.layers.size(); ++i)
  {
    live += shapes[i].count() * sizeof(float);
    alive[i] = true;
    peak     = std::max(peak, live);
    for (auto const &src : spec.layers[i].inputs)
    {
      if (src == kInputId)
      {
        if (input_last == i)
        {
          live -= input.count() * sizeof(float);
        }
        continue;
      }
      auto const j = index.at(src);
      if (last[j] == i && alive[j])
      {
        alive[j] = false;
        live -= shapes[j].count() * sizeof(float);
      }
    }
    if (last[i] == i)
    {
      alive[i] = false;
      live -= shapes[i].count() * sizeof(float);
    }
  }
  return peak;
}

/// Per-layer and total cost of `spec` at a square input of `input_size` pixels.
inline FlopParamReport count(ArchitectureSpec const &spec, std::size_t input_size)
{
  FlopParamReport r;
  r.variant    = spec.variant;
  r.input_size = input_size;
  auto const shapes = propagate_shapes(spec, input_size, input_size);

  std::unordered_map<std::string, Shape> by_id;
  by_id.emplace(std::string(kInputId), Shape{1, spec.input_channels, input_size, input_size});
  for (std::size_t i = 0; i < spec.layers.size(); ++i)
  {
    auto const &layer = spec.layers[i];
    LayerCost   lc;
    lc.id        = layer.id;
    lc.kind      = layer.kind();
    lc.section   = layer.section;
    lc.out_shape = shapes[i];
    Shape const in = by_id.at(layer.inputs.front());
    std::size_t h  = in.h;
    std::size_t w  = in.w;
    for (auto const &slot : conv_slots(layer))
    {
      // Head branches fan out from the stem; every head conv is stride 1, so
      // chaining the extents still gives each conv its true output size.
      auto c = conv_cost(slot, h, w);
      lc.params += c.params;
      lc.maccs += c.maccs;
      lc.convs.push_back(std::move(c));
    }
    lc.flops = 2 * lc.maccs;
    r.by_section[static_cast<std::size_t>(layer.section)].add(lc);
    r.total.add(lc);
    by_id[layer.id] = shapes[i];
    r.per_layer.push_back(std::move(lc));
  }
  r.peak_activation_bytes =
      peak_activation_bytes(spec, shapes, Shape{1, spec.input_channels, input_size, input_size});
  return r;
}

// ---------------------------------------------------------------------------
// Published operating points

struct VariantComparison
{
  std::string           variant;
  std::size_t           input_size{0};
  double                gflops{0};
  double                mparams{0};
  double                reference_gflops{0};
  std::optional<double> reference_mparams;

  double gflop_delta() const noexcept
  {
    return gflops / reference_gflops - 1.0;
  }
};

struct ReferencePoint
{
  char const *variant;
  std::size_t input_size;
  double      gflops;
  double      mparams;
};

/// Published (variant, size, GFLOP, M params) operating points.
inline std::vector<ReferencePoint> reference_points()
{
  return {
      {"nano", 320, 0.66, 1.1},   {"nano", 480, 1.47, 1.1},   {"nano", 640, 2.64, 1.1},
      {"small", 320, 1.126, 1.9}, {"small", 480, 2.53, 1.9},  {"small", 640, 4.5, 1.9},
      {"medium", 480, 3.27, 2.4}, {"medium", 640, 5.8, 2.4},  {"large", 768, 8.4, 2.4},
  };
}

inline std::vector<VariantComparison> compare_variants()
{
  std::vector<VariantComparison> out;
  for (auto const &p : reference_points())
  {
    auto const spec = build_model_spec(VariantConfig::by_name(p.variant));
    auto const r    = count(spec, p.input_size);
    out.push_back({p.variant, p.input_size, r.total.gflops(), r.total.mparams(), p.gflops, p.mparams});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Constraints

struct ConstraintCheck
{
  std::string name;
  bool        ok{true};
  std::string detail;
};

struct ConstraintReport
{
  std::vector<Violation>       violations;
  std::vector<ConstraintCheck> checks;

  bool ok() const noexcept
  {
    return violations.empty() && std::ranges::all_of(checks, &ConstraintCheck::ok);
  }
};

/// Structural validation plus the design rules the neck and pw-free blocks must obey.
inline ConstraintReport verify_constraints(ArchitectureSpec const &spec)
{
  ConstraintReport rep;
  rep.violations = validate(spec);
  if (!rep.violations.empty())
  {
    return rep;
  }

  std::size_t max_d      = 0;
  std::size_t max_out    = 0;
  std::size_t strided    = 0;
  std::string ratio_fail;
  for (auto const &layer : spec.layers)
  {
    if (layer.section != Section::neck)
    {
      continue;
    }
    if (auto const *b = layer.as<BottleneckConfig>())
    {
      max_d   = std::max(max_d, b->expand_ch);
      max_out = std::max(max_out, b->out_ch);
      if (b->expand_ch != 2 * b->out_ch && ratio_fail.empty())
      {
        ratio_fail = layer.id + ": expand " + std::to_string(b->expand_ch) + " != 2 * " + std::to_string(b->out_ch);
      }
    }
    if (auto const *c = layer.as<ConvLayerConfig>(); c != nullptr && c->stride == 2)
    {
      ++strided;
    }
  }
  rep.checks.push_back({"neck-expansion-2", ratio_fail.empty(), ratio_fail.empty() ? "all neck blocks d = 2C" : ratio_fail});

  double ratio = 1.0;
  for (auto const &v : VariantConfig::all())
  {
    if (v.name == spec.variant)
    {
      ratio = v.channel_ratio;
    }
  }
  auto const want_d = scale_channels(192, ratio);
  rep.checks.push_back({"neck-max-expand", max_d == want_d,
                        "max neck d " + std::to_string(max_d) + ", expected " + std::to_string(want_d)});
  rep.checks.push_back({"neck-strided-convs", strided == 2, std::to_string(strided) + " strided neck conv(s)"});

  // A pw-free block must save exactly the cost of the pointwise it drops.
  bool        pw_ok = true;
  std::size_t pw_free = 0;
  for (auto const &layer : spec.layers)
  {
    auto const *b = layer.as<BottleneckConfig>();
    if (b == nullptr || b->use_first_pw)
    {
      continue;
    }
    ++pw_free;
    LayerSpec with = layer;
    with.as<BottleneckConfig>()->use_first_pw = true;
    std::size_t h = 32, w = 32, h2 = 32, w2 = 32;
    std::uint64_t without_cost = 0, with_cost = 0;
    for (auto const &s : conv_slots(layer))
    {
      without_cost += conv_cost(s, h, w).maccs;
    }
    for (auto const &s : conv_slots(with))
    {
      with_cost += conv_cost(s, h2, w2).maccs;
    }
    pw_ok = pw_ok && with_cost - without_cost == static_cast<std::uint64_t>(b->in_ch) * b->expand_ch * 32 * 32;
  }
  rep.checks.push_back({"pw-free-saves-expand", pw_ok, std::to_string(pw_free) + " pw-free block(s)"});
  return rep;
}

// ---------------------------------------------------------------------------
// Output

inline std::string format_table(FlopParamReport const &r)
{
  std::ostringstream os;
  char               buf[256];
  std::snprintf(buf, sizeof(buf), "%-22s %-20s %-18s %12s %14s %10s\n", "layer", "kind", "out", "params", "MACC",
                "MFLOP");
  os << buf;
  for (auto const &l : r.per_layer)
  {
    std::snprintf(buf, sizeof(buf), "%-22s %-20s %-18s %12llu %14llu %10.3f\n", l.id.c_str(),
                  std::string(to_string(l.kind)).c_str(), to_string(l.out_shape).c_str(),
                  static_cast<unsigned long long>(l.params), static_cast<unsigned long long>(l.maccs),
                  static_cast<double>(l.flops) * 1e-6);
    os << buf;
  }
  os << '\n';
  for (auto s : {Section::backbone, Section::neck, Section::head})
  {
    auto const &t = r.section(s);
    std::snprintf(buf, sizeof(buf), "%-10s %9.4f GFLOP %9.4f M params\n", std::string(to_string(s)).c_str(),
                  t.gflops(), t.mparams());
    os << buf;
  }
  std::snprintf(buf, sizeof(buf), "%-10s %9.4f GFLOP %9.4f M params  (%s @%zu, peak activations %.2f MiB)\n",
                "total", r.total.gflops(), r.total.mparams(), r.variant.c_str(), r.input_size,
                static_cast<double>(r.peak_activation_bytes) / (1024.0 * 1024.0));
  os << buf;
  return os.str();
}

inline nlohmann::ordered_json to_json(FlopParamReport const &r)
{
  auto totals = [](CostTotals const &t) {
    nlohmann::ordered_json j;
    j["params"] = t.params;
    j["maccs"]  = t.maccs;
    j["flops"]  = t.flops;
    j["gflops"] = t.gflops();
    return j;
  };
  nlohmann::ordered_json j;
  j["variant"]    = r.variant;
  j["input_size"] = r.input_size;
  j["total"]      = totals(r.total);
  for (auto s : {Section::backbone, Section::neck, Section::head})
  {
    j["sections"][std::string(to_string(s))] = totals(r.section(s));
  }
  j["peak_activation_bytes"] = r.peak_activation_bytes;
  j["layers"]                = nlohmann::ordered_json::array();
  for (auto const &l : r.per_layer)
  {
    nlohmann::ordered_json lj;
    lj["id"]        = l.id;
    lj["kind"]      = std::string(to_string(l.kind));
    lj["section"]   = std::string(to_string(l.section));
    lj["out_shape"] = {l.out_shape.n, l.out_shape.c, l.out_shape.h, l.out_shape.w};
    lj["params"]    = l.params;
    lj["maccs"]     = l.maccs;
    lj["flops"]     = l.flops;
    j["layers"].push_back(std::move(lj));
  }
  return j;
}

inline std::string format_csv(FlopParamReport const &r)
{
  std::ostringstream os;
  os << "id,kind,section,n,c,h,w,params,maccs,flops\n";
  for (auto const &l : r.per_layer)
  {
    os << l.id << ',' << to_string(l.kind) << ',' << to_string(l.section) << ',' << l.out_shape.n << ','
       << l.out_shape.c << ',' << l.out_shape.h << ',' << l.out_shape.w << ',' << l.params << ',' << l.maccs << ','
       << l.flops << '\n';
  }
  return os.str();
}

}  // namespace leyolo
