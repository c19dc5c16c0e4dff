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

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace leyolo {

/// NCHW extents of a rank-4 tensor.
struct Shape
{
  std::size_t n{1};
  std::size_t c{1};
  std::size_t h{1};
  std::size_t w{1};

  constexpr std::size_t count() const noexcept
  {
    return n * c * h * w;
  }

  constexpr std::size_t plane() const noexcept
  {
    return h * w;
  }

  friend constexpr bool operator==(Shape const &, Shape const &) = default;
};

inline std::string to_string(Shape const &s)
{
  return "(" + std::to_string(s.n) + "," + std::to_string(s.c) + "," + std::to_string(s.h) + "," +
         std::to_string(s.w) + ")";
}

/// Dense NCHW float tensor. Data is contiguous and row-major; every dimension is >= 1.
class Tensor
{
public:
  Tensor() = default;

  explicit Tensor(Shape shape, float fill = 0.0f)
    : shape_(checked(shape))
    , data_(shape.count(), fill)
  {}

  Tensor(Shape shape, std::vector<float> data)
    : shape_(checked(shape))
    , data_(std::move(data))
  {
    if (data_.size() != shape_.count())
    {
      throw ShapeError("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                       to_string(shape_));
    }
  }

  Shape const &shape() const noexcept
  {
    return shape_;
  }

  std::size_t size() const noexcept
  {
    return data_.size();
  }

  bool empty() const noexcept
  {
    return data_.empty();
  }

  std::span<float> data() noexcept
  {
    return data_;
  }

  std::span<float const> data() const noexcept
  {
    return data_;
  }

  /// Plane (n, c) as a contiguous H*W span.
  std::span<float> plane(std::size_t n, std::size_t c) noexcept
  {
    return std::span<float>(data_).subspan(index(n, c, 0, 0), shape_.plane());
  }

  std::span<float const> plane(std::size_t n, std::size_t c) const noexcept
  {
    return std::span<float const>(data_).subspan(index(n, c, 0, 0), shape_.plane());
  }

  std::size_t index(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const noexcept
  {
    return ((n * shape_.c + c) * shape_.h + y) * shape_.w + x;
  }

  float &at(std::size_t n, std::size_t c, std::size_t y, std::size_t x) noexcept
  {
    return data_[index(n, c, y, x)];
  }

  float at(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const noexcept
  {
    return data_[index(n, c, y, x)];
  }

  std::vector<float> const &values() const noexcept
  {
    return data_;
  }

private:
  static Shape checked(Shape s)
  {
    if (s.n == 0 || s.c == 0 || s.h == 0 || s.w == 0)
    {
      throw ShapeError("tensor dimensions must all be >= 1, got " + to_string(s));
    }
    return s;
  }

  Shape              shape_{};
  std::vector<float> data_;
};

/// Inference-mode batch normalisation statistics for one convolution output.
struct BatchNormParams
{
  std::vector<float> gamma;
  std::vector<float> beta;
  std::vector<float> mean;
  std::vector<float> var;
  float              eps{1e-3f};

  /// gamma = 1, beta = 0, mean = 0, var = 1.
  static BatchNormParams identity(std::size_t channels, float eps = 1e-3f)
  {
    return {std::vector<float>(channels, 1.0f), std::vector<float>(channels, 0.0f),
            std::vector<float>(channels, 0.0f), std::vector<float>(channels, 1.0f), eps};
  }
};

/// Convolution kernel laid out (out_ch, in_ch / groups, k, k) plus optional bias and BN.
struct ConvWeights
{
  std::size_t                    out_ch{0};
  std::size_t                    in_per_group{0};
  std::size_t                    k{1};
  std::vector<float>             kernel;
  std::vector<float>             bias;  // empty when the convolution has no bias
  std::optional<BatchNormParams> bn;

  std::size_t kernel_count() const noexcept
  {
    return out_ch * in_per_group * k * k;
  }

  float at(std::size_t oc, std::size_t ic, std::size_t ky, std::size_t kx) const noexcept
  {
    return kernel[((oc * in_per_group + ic) * k + ky) * k + kx];
  }

  static ConvWeights zeros(std::size_t out_ch, std::size_t in_per_group, std::size_t k, bool with_bn = true)
  {
    ConvWeights w;
    w.out_ch       = out_ch;
    w.in_per_group = in_per_group;
    w.k            = k;
    w.kernel.assign(w.kernel_count(), 0.0f);
    if (with_bn)
    {
      w.bn = BatchNormParams::identity(out_ch);
    }
    return w;
  }
};

}  // namespace leyolo
