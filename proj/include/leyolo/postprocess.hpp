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

#include "json.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

namespace leyolo {

inline constexpr float       kLetterboxPad      = 114.0f / 255.0f;
inline constexpr float       kDefaultConf       = 0.25f;
inline constexpr float       kDefaultIou        = 0.65f;
inline constexpr std::size_t kDefaultMaxDet     = 300;
inline constexpr std::size_t kMaxNmsCandidates  = 30000;

/// Corner box (x1, y1, x2, y2).
using Box = std::array<float, 4>;

struct Detection
{
  Box         box{};
  float       score{0};
  std::size_t class_id{0};

  friend bool operator==(Detection const &, Detection const &) = default;
};

/// Maps letterboxed coordinates back to the source image: src = (p - pad) / scale.
struct LetterboxMeta
{
  float       scale{1};
  float       pad_x{0};
  float       pad_y{0};
  std::size_t src_w{0};
  std::size_t src_h{0};
};

inline Box letterbox_box(Box const &b, LetterboxMeta const &m)
{
  return {b[0] * m.scale + m.pad_x, b[1] * m.scale + m.pad_y, b[2] * m.scale + m.pad_x, b[3] * m.scale + m.pad_y};
}

inline Box unletterbox_box(Box const &b, LetterboxMeta const &m)
{
  return {(b[0] - m.pad_x) / m.scale, (b[1] - m.pad_y) / m.scale, (b[2] - m.pad_x) / m.scale,
          (b[3] - m.pad_y) / m.scale};
}

/// Aspect-preserving bilinear resize (half-pixel centres) into a target x target
/// canvas filled with gray, content centred.
inline std::pair<Tensor, LetterboxMeta> letterbox(Tensor const &image, std::size_t target)
{
  auto const s = image.shape();
  if (image.empty() || s.h == 0 || s.w == 0)
  {
    throw PreconditionError("letterbox: image is empty");
  }
  if (target == 0 || target % 32 != 0)
  {
    throw PreconditionError("letterbox: target " + std::to_string(target) + " is not a positive multiple of 32");
  }
  double const scale = std::min(static_cast<double>(target) / static_cast<double>(s.w),
                                static_cast<double>(target) / static_cast<double>(s.h));
  auto const   nw    = std::clamp<std::size_t>(static_cast<std::size_t>(std::lround(s.w * scale)), 1, target);
  auto const   nh    = std::clamp<std::size_t>(static_cast<std::size_t>(std::lround(s.h * scale)), 1, target);
  std::size_t const px = (target - nw) / 2;
  std::size_t const py = (target - nh) / 2;

  LetterboxMeta meta{static_cast<float>(scale), static_cast<float>(px), static_cast<float>(py), s.w, s.h};
  Tensor        out(Shape{s.n, s.c, target, target}, kLetterboxPad);

  double const fy = static_cast<double>(s.h) / static_cast<double>(nh);
  double const fx = static_cast<double>(s.w) / static_cast<double>(nw);
  auto sample = [](double src, std::size_t extent, std::size_t &i0, std::size_t &i1, float &t) {
    src           = std::clamp(src, 0.0, static_cast<double>(extent - 1));
    auto const lo = static_cast<std::size_t>(std::floor(src));
    i0            = lo;
    i1            = std::min(lo + 1, extent - 1);
    t             = static_cast<float>(src - static_cast<double>(lo));
  };
  for (std::size_t n = 0; n < s.n; ++n)
  {
    for (std::size_t c = 0; c < s.c; ++c)
    {
      auto const src = image.plane(n, c);
      auto       dst = out.plane(n, c);
      for (std::size_t y = 0; y < nh; ++y)
      {
        std::size_t y0, y1;
        float       ty;
        sample((static_cast<double>(y) + 0.5) * fy - 0.5, s.h, y0, y1, ty);
        for (std::size_t x = 0; x < nw; ++x)
        {
          std::size_t x0, x1;
          float       tx;
          sample((static_cast<double>(x) + 0.5) * fx - 0.5, s.w, x0, x1, tx);
          float const top = src[y0 * s.w + x0] * (1 - tx) + src[y0 * s.w + x1] * tx;
          float const bot = src[y1 * s.w + x0] * (1 - tx) + src[y1 * s.w + x1] * tx;
          dst[(y + py) * target + x + px] = top * (1 - ty) + bot * ty;
        }
      }
    }
  }
  return {std::move(out), meta};
}

/// Anchor-free decode of the three head outputs (strides 8, 16, 32).
/// Channels 0..3 are distances (l, t, r, b) in cells, clamped at 0; the rest are
/// class logits. Keeps (cell, class) pairs whose sigmoid score exceeds
/// `conf_threshold`, at most kMaxNmsCandidates of the highest scores.
inline std::vector<Detection> decode(std::vector<Tensor> const &heads, float conf_threshold)
{
  if (heads.size() != 3)
  {
    throw PreconditionError("decode: expected 3 head outputs, got " + std::to_string(heads.size()));
  }
  std::vector<Detection> out;
  for (std::size_t level = 0; level < heads.size(); ++level)
  {
    auto const &t      = heads[level];
    auto const  s      = t.shape();
    float const stride = static_cast<float>(8u << level);
    if (s.c < 5)
    {
      throw ShapeError("decode: head output " + std::to_string(level) + " has " + std::to_string(s.c) +
                       " channels, need 4 + classes");
    }
    for (std::size_t i = 0; i < s.h; ++i)
    {
      for (std::size_t j = 0; j < s.w; ++j)
      {
        float const cx = (static_cast<float>(j) + 0.5f) * stride;
        float const cy = (static_cast<float>(i) + 0.5f) * stride;
        Box const   box{cx - std::max(0.0f, t.at(0, 0, i, j)) * stride, cy - std::max(0.0f, t.at(0, 1, i, j)) * stride,
                      cx + std::max(0.0f, t.at(0, 2, i, j)) * stride, cy + std::max(0.0f, t.at(0, 3, i, j)) * stride};
        for (std::size_t c = 4; c < s.c; ++c)
        {
          float const score = sigmoid(t.at(0, c, i, j));
          if (score > conf_threshold)
          {
            out.push_back({box, score, c - 4});
          }
        }
      }
    }
  }
  if (out.size() > kMaxNmsCandidates)
  {
    std::ranges::stable_sort(out, [](auto const &a, auto const &b) { return a.score > b.score; });
    out.resize(kMaxNmsCandidates);
  }
  return out;
}

inline float iou(Box const &a, Box const &b)
{
  float const iw    = std::max(0.0f, std::min(a[2], b[2]) - std::max(a[0], b[0]));
  float const ih    = std::max(0.0f, std::min(a[3], b[3]) - std::max(a[1], b[1]));
  float const inter = iw * ih;
  float const area  = std::max(0.0f, a[2] - a[0]) * std::max(0.0f, a[3] - a[1]) +
                     std::max(0.0f, b[2] - b[0]) * std::max(0.0f, b[3] - b[1]) - inter;
  return area > 0.0f ? inter / area : 0.0f;
}

/// Deterministic NMS order: score descending, then class, then box corners ascending.
inline bool nms_before(Detection const &a, Detection const &b)
{
  if (a.score != b.score)
  {
    return a.score > b.score;
  }
  if (a.class_id != b.class_id)
  {
    return a.class_id < b.class_id;
  }
  return a.box < b.box;
}

/// Greedy per-class suppression: a detection is dropped when its IoU with an
/// already kept detection of the same class exceeds `iou_threshold`.
inline std::vector<Detection> nms(std::vector<Detection> dets, float iou_threshold, std::size_t max_det = kDefaultMaxDet)
{
  std::ranges::sort(dets, nms_before);
  std::vector<Detection> kept;
  for (auto const &d : dets)
  {
    if (kept.size() >= max_det)
    {
      break;
    }
    bool const suppressed = std::ranges::any_of(kept, [&](Detection const &k) {
      return k.class_id == d.class_id && iou(k.box, d.box) > iou_threshold;
    });
    if (!suppressed)
    {
      kept.push_back(d);
    }
  }
  return kept;
}

struct DetectOptions
{
  float       conf{kDefaultConf};
  float       iou{kDefaultIou};
  std::size_t max_det{kDefaultMaxDet};
};

/// decode -> nms -> map to source pixels -> clip. Clipping is last; boxes that
/// collapse to zero width or height after clipping are dropped.
inline std::vector<Detection> postprocess(std::vector<Tensor> const &heads, LetterboxMeta const &meta,
                                          DetectOptions const &opt = {})
{
  auto kept = nms(decode(heads, opt.conf), opt.iou, opt.max_det);
  std::vector<Detection> out;
  out.reserve(kept.size());
  float const w = static_cast<float>(meta.src_w);
  float const h = static_cast<float>(meta.src_h);
  for (auto d : kept)
  {
    d.box    = unletterbox_box(d.box, meta);
    d.box[0] = std::clamp(d.box[0], 0.0f, w);
    d.box[1] = std::clamp(d.box[1], 0.0f, h);
    d.box[2] = std::clamp(d.box[2], 0.0f, w);
    d.box[3] = std::clamp(d.box[3], 0.0f, h);
    if (d.box[2] > d.box[0] && d.box[3] > d.box[1])
    {
      out.push_back(d);
    }
  }
  return out;
}

inline nlohmann::json detections_to_json(std::vector<Detection> const &dets)
{
  auto j = nlohmann::json::array();
  for (auto const &d : dets)
  {
    j.push_back({{"box", {d.box[0], d.box[1], d.box[2], d.box[3]}}, {"score", d.score}, {"class", d.class_id}});
  }
  return j;
}

}  // namespace leyolo
