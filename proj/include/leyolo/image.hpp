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

// Binary PPM (P6, maxval 255) only. Pixels map to (1, 3, H, W) floats in [0, 1], RGB planes.

#include "leyolo/error.hpp"
#include "leyolo/tensor.hpp"
#include "leyolo/weight_store.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <span>
#include <string>
#include <vector>

namespace leyolo {

namespace detail {

class PpmHeader
{
public:
  explicit PpmHeader(std::span<std::uint8_t const> data)
    : data_(data)
  {}

  /// Next whitespace-delimited header token; '#' starts a comment running to end of line.
  std::string token()
  {
    for (;;)
    {
      while (pos_ < data_.size() && std::isspace(data_[pos_]) != 0)
      {
        ++pos_;
      }
      if (pos_ < data_.size() && data_[pos_] == '#')
      {
        while (pos_ < data_.size() && data_[pos_] != '\n')
        {
          ++pos_;
        }
        continue;
      }
      break;
    }
    std::string out;
    while (pos_ < data_.size() && std::isspace(data_[pos_]) == 0 && data_[pos_] != '#')
    {
      out.push_back(static_cast<char>(data_[pos_++]));
    }
    if (out.empty())
    {
      throw FormatError(FormatError::Kind::truncated, "PPM header truncated");
    }
    return out;
  }

  std::size_t number(char const *what)
  {
    auto const t = token();
    if (!std::ranges::all_of(t, [](char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }) ||
        t.size() > 9)
    {
      throw FormatError(FormatError::Kind::unsupported_image, std::string("PPM: bad ") + what + " '" + t + "'");
    }
    return std::stoul(t);
  }

  /// Consumes the single whitespace byte that separates the header from the raster.
  std::size_t raster_offset()
  {
    if (pos_ >= data_.size() || std::isspace(data_[pos_]) == 0)
    {
      throw FormatError(FormatError::Kind::truncated, "PPM header truncated");
    }
    return pos_ + 1;
  }

private:
  std::span<std::uint8_t const> data_;
  std::size_t                   pos_{0};
};

}  // namespace detail

inline Tensor decode_ppm(std::span<std::uint8_t const> data)
{
  detail::PpmHeader hdr(data);
  auto const        magic = hdr.token();
  if (magic != "P6")
  {
    throw FormatError(FormatError::Kind::unsupported_image,
                      "unsupported image format '" + magic + "' (only binary PPM P6 is read)");
  }
  auto const width  = hdr.number("width");
  auto const height = hdr.number("height");
  auto const maxval = hdr.number("maxval");
  if (maxval != 255)
  {
    throw FormatError(FormatError::Kind::unsupported_image,
                      "unsupported PPM maxval " + std::to_string(maxval) + " (only 255)");
  }
  if (width == 0 || height == 0)
  {
    throw FormatError(FormatError::Kind::unsupported_image, "PPM image has zero size");
  }
  auto const offset = hdr.raster_offset();
  auto const plane  = width * height;
  if (data.size() - offset < 3 * plane)
  {
    throw FormatError(FormatError::Kind::truncated, "PPM raster truncated");
  }
  Tensor img(Shape{1, 3, height, width});
  auto   out = img.data();
  for (std::size_t p = 0; p < plane; ++p)
  {
    for (std::size_t c = 0; c < 3; ++c)
    {
      out[c * plane + p] = static_cast<float>(data[offset + 3 * p + c]) / 255.0f;
    }
  }
  return img;
}

inline Tensor read_ppm(std::string const &path)
{
  auto const bytes = read_file_bytes(path);
  return decode_ppm(bytes);
}

/// Writes a (1, 3, H, W) tensor as P6; values are clamped to [0, 1] and rounded.
inline void write_ppm(std::string const &path, Tensor const &img)
{
  auto const s = img.shape();
  if (s.n != 1 || s.c != 3)
  {
    throw ShapeError("write_ppm: expected (1,3,H,W), got " + to_string(s));
  }
  std::string header = "P6\n" + std::to_string(s.w) + " " + std::to_string(s.h) + "\n255\n";
  std::vector<std::uint8_t> bytes(header.begin(), header.end());
  auto const                plane = s.plane();
  auto const                in    = img.data();
  for (std::size_t p = 0; p < plane; ++p)
  {
    for (std::size_t c = 0; c < 3; ++c)
    {
      float const v = std::clamp(in[c * plane + p], 0.0f, 1.0f);
      bytes.push_back(static_cast<std::uint8_t>(std::lround(v * 255.0f)));
    }
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<char const *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out)
  {
    throw FormatError(FormatError::Kind::io, "failed writing '" + path + "'");
  }
}

}  // namespace leyolo
