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

// Independent reference implementations used by the unit and acceptance tests.
// None of these call into the library code they check.

#include "leyolo/postprocess.hpp"
#include "leyolo/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace leyolo::oracle {

struct ConvCase
{
  std::size_t n{1}, in_ch{1}, out_ch{1}, h{1}, w{1}, k{1}, stride{1}, pad{0}, groups{1};
  bool        bias{false};
};

/// Textbook 7-loop convolution in double precision.
inline std::vector<double> conv_double(ConvCase const &c, std::vector<float> const &x, std::vector<float> const &wt,
                                       std::vector<float> const &bias)
{
  std::size_t const oh  = (c.h + 2 * c.pad - c.k) / c.stride + 1;
  std::size_t const ow  = (c.w + 2 * c.pad - c.k) / c.stride + 1;
  std::size_t const ipg = c.in_ch / c.groups;
  std::size_t const opg = c.out_ch / c.groups;
  std::vector<double> y(c.n * c.out_ch * oh * ow, 0.0);
  for (std::size_t n = 0; n < c.n; ++n)
    for (std::size_t o = 0; o < c.out_ch; ++o)
      for (std::size_t yy = 0; yy < oh; ++yy)
        for (std::size_t xx = 0; xx < ow; ++xx)
        {
          double acc = 0.0;
          std::size_t const g = o / opg;
          for (std::size_t i = 0; i < ipg; ++i)
            for (std::size_t ky = 0; ky < c.k; ++ky)
              for (std::size_t kx = 0; kx < c.k; ++kx)
              {
                auto const iy = static_cast<std::ptrdiff_t>(yy * c.stride + ky) - static_cast<std::ptrdiff_t>(c.pad);
                auto const ix = static_cast<std::ptrdiff_t>(xx * c.stride + kx) - static_cast<std::ptrdiff_t>(c.pad);
                if (iy < 0 || ix < 0 || iy >= static_cast<std::ptrdiff_t>(c.h) ||
                    ix >= static_cast<std::ptrdiff_t>(c.w))
                  continue;
                std::size_t const ic = g * ipg + i;
                acc += static_cast<double>(x[((n * c.in_ch + ic) * c.h + iy) * c.w + ix]) *
                       static_cast<double>(wt[((o * ipg + i) * c.k + ky) * c.k + kx]);
              }
          if (c.bias)
            acc += bias[o];
          y[((n * c.out_ch + o) * oh + yy) * ow + xx] = acc;
        }
  return y;
}

/// Worst relative error of `got` against `want`, normalised per output by the
/// sum of |x*w| terms so cancellation does not inflate the ratio.
inline double max_relative_error(std::span<float const> got, std::vector<double> const &want,
                                 std::vector<double> const &magnitude)
{
  double worst = 0.0;
  for (std::size_t i = 0; i < want.size(); ++i)
  {
    double const scale = std::max(magnitude[i], 1e-30);
    worst              = std::max(worst, std::abs(static_cast<double>(got[i]) - want[i]) / scale);
  }
  return worst;
}

/// O(n^2) greedy NMS written from the definition: repeatedly take the best
/// remaining detection, then delete every same-class detection overlapping it.
inline std::vector<Detection> nms_brute(std::vector<Detection> dets, float iou_thr, std::size_t max_det)
{
  auto overlap = [](Box const &a, Box const &b) {
    double const ix = std::max(0.0, static_cast<double>(std::min(a[2], b[2])) - std::max(a[0], b[0]));
    double const iy = std::max(0.0, static_cast<double>(std::min(a[3], b[3])) - std::max(a[1], b[1]));
    double const ia = std::max(0.0, static_cast<double>(a[2]) - a[0]) * std::max(0.0, static_cast<double>(a[3]) - a[1]);
    double const ib = std::max(0.0, static_cast<double>(b[2]) - b[0]) * std::max(0.0, static_cast<double>(b[3]) - b[1]);
    double const u  = ia + ib - ix * iy;
    return u > 0 ? ix * iy / u : 0.0;
  };
  auto better = [](Detection const &a, Detection const &b) {
    if (a.score != b.score)
      return a.score > b.score;
    if (a.class_id != b.class_id)
      return a.class_id < b.class_id;
    for (int i = 0; i < 4; ++i)
      if (a.box[i] != b.box[i])
        return a.box[i] < b.box[i];
    return false;
  };
  std::vector<Detection> out;
  while (!dets.empty() && out.size() < max_det)
  {
    std::size_t best = 0;
    for (std::size_t i = 1; i < dets.size(); ++i)
      if (better(dets[i], dets[best]))
        best = i;
    Detection const pick = dets[best];
    out.push_back(pick);
    std::vector<Detection> rest;
    for (std::size_t i = 0; i < dets.size(); ++i)
      if (i != best && !(dets[i].class_id == pick.class_id && overlap(dets[i].box, pick.box) > iou_thr))
        rest.push_back(dets[i]);
    dets = std::move(rest);
  }
  return out;
}

/// Random detections with overlapping clusters and a few exact score ties.
inline std::vector<Detection> random_detections(std::mt19937 &gen, std::size_t max_boxes)
{
  std::uniform_int_distribution<std::size_t> count(0, max_boxes);
  std::uniform_real_distribution<float>      pos(0.0f, 200.0f);
  std::uniform_real_distribution<float>      size(1.0f, 60.0f);
  std::uniform_int_distribution<int>         score_step(1, 40);
  std::uniform_int_distribution<std::size_t> cls(0, 3);
  std::vector<Detection>                     dets(count(gen));
  for (auto &d : dets)
  {
    float const x = pos(gen);
    float const y = pos(gen);
    d.box         = {x, y, x + size(gen), y + size(gen)};
    d.score       = static_cast<float>(score_step(gen)) / 40.0f;
    d.class_id    = cls(gen);
  }
  return dets;
}

// Closed-form cost of the nano backbone rows, written out by hand from the
// layer table: (in, expand, out, kernel, stride, first pointwise, output size at 640).

struct BackboneRow
{
  std::size_t in, d, out, k, stride;
  bool        pw;
  std::size_t out_hw;
};

inline std::uint64_t row_params(BackboneRow const &r)
{
  std::uint64_t p = 0;
  if (r.pw)
    p += r.in * r.d + 2 * r.d;
  p += r.k * r.k * r.d + 2 * r.d;
  p += r.d * r.out + 2 * r.out;
  return p;
}

inline std::uint64_t row_maccs(BackboneRow const &r)
{
  std::uint64_t const in_hw = r.out_hw * r.stride;
  std::uint64_t       m     = 0;
  if (r.pw)
    m += r.in * r.d * in_hw * in_hw;
  m += r.k * r.k * r.d * r.out_hw * r.out_hw;
  m += r.d * r.out * r.out_hw * r.out_hw;
  return m;
}

/// (params, MACCs at 640) of the nano backbone.
inline std::pair<std::uint64_t, std::uint64_t> nano_backbone_cost()
{
  std::uint64_t params = 0;
  std::uint64_t maccs  = 0;
  // P0: conv 3x3 s2 3->16, P1: conv 1x1 16->16 (both with BN).
  params += 9 * 3 * 16 + 2 * 16;
  maccs += 9 * 3 * 16 * 320ull * 320;
  params += 16 * 16 + 2 * 16;
  maccs += 16 * 16 * 320ull * 320;
  std::vector<BackboneRow> rows = {
      {16, 16, 16, 3, 2, false, 160}, {16, 96, 32, 3, 2, true, 80}, {32, 96, 32, 3, 1, true, 80},
      {32, 96, 64, 5, 2, true, 40},   {64, 192, 64, 5, 1, true, 40}, {64, 192, 64, 5, 1, true, 40},
      {64, 192, 64, 5, 1, true, 40},  {64, 192, 64, 5, 1, true, 40}, {64, 576, 96, 5, 2, true, 20},
      {96, 576, 96, 5, 1, true, 20},  {96, 576, 96, 5, 1, true, 20}, {96, 576, 96, 5, 1, true, 20},
      {96, 576, 96, 5, 1, true, 20},
  };
  for (auto const &r : rows)
  {
    params += row_params(r);
    maccs += row_maccs(r);
  }
  return {params, maccs};
}

}  // namespace leyolo::oracle
