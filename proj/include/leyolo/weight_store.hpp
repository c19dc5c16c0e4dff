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

// "LEYW" weight container. All integers little-endian.
//
//   offset  size  field
//   0       4     magic "LEYW"
//   4       4     version (u32) = 1
//   8       4     entry count (u32)
//   then per entry:
//           2     name length in bytes (u16)
//           n     UTF-8 name
//           1     dtype (u8): 0 = f32
//           1     rank (u8)
//           4*r   dims (u32 each)
//           ...   payload: product(dims) * sizeof(dtype) bytes, little-endian
//
// The file ends exactly after the last payload.

#include "leyolo/error.hpp"

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace leyolo {

enum class DType : std::uint8_t
{
  f32 = 0,
};

inline std::size_t dtype_size(DType d)
{
  switch (d)
  {
  case DType::f32:
    return 4;
  }
  return 0;
}

struct WeightEntry
{
  std::string                name;
  DType                      dtype{DType::f32};
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t>  raw;  // little-endian payload

  std::size_t element_count() const noexcept
  {
    std::size_t n = 1;
    for (auto d : dims)
    {
      n *= d;
    }
    return n;
  }

  /// Payload decoded as floats.
  std::vector<float> floats() const
  {
    std::vector<float> out(element_count());
    for (std::size_t i = 0; i < out.size(); ++i)
    {
      std::uint32_t bits = static_cast<std::uint32_t>(raw[4 * i]) |
                           (static_cast<std::uint32_t>(raw[4 * i + 1]) << 8) |
                           (static_cast<std::uint32_t>(raw[4 * i + 2]) << 16) |
                           (static_cast<std::uint32_t>(raw[4 * i + 3]) << 24);
      out[i] = std::bit_cast<float>(bits);
    }
    return out;
  }
};

/// Ordered name -> tensor map. Insertion order is the on-disk order.
class WeightStore
{
public:
  void add(std::string name, std::vector<std::uint32_t> dims, std::span<float const> values)
  {
    WeightEntry e;
    e.name  = std::move(name);
    e.dtype = DType::f32;
    e.dims  = std::move(dims);
    if (e.element_count() != values.size())
    {
      throw ShapeError("weight '" + e.name + "': " + std::to_string(values.size()) +
                       " values do not match declared shape");
    }
    e.raw.resize(values.size() * 4);
    for (std::size_t i = 0; i < values.size(); ++i)
    {
      auto bits         = std::bit_cast<std::uint32_t>(values[i]);
      e.raw[4 * i]     = static_cast<std::uint8_t>(bits);
      e.raw[4 * i + 1] = static_cast<std::uint8_t>(bits >> 8);
      e.raw[4 * i + 2] = static_cast<std::uint8_t>(bits >> 16);
      e.raw[4 * i + 3] = static_cast<std::uint8_t>(bits >> 24);
    }
    insert(std::move(e));
  }

  void insert(WeightEntry e)
  {
    if (index_.contains(e.name))
    {
      throw FormatError(FormatError::Kind::duplicate_name, "duplicate weight name '" + e.name + "'");
    }
    if (e.raw.size() != e.element_count() * dtype_size(e.dtype))
    {
      throw ShapeError("weight '" + e.name + "': payload length disagrees with shape");
    }
    index_.emplace(e.name, entries_.size());
    entries_.push_back(std::move(e));
  }

  WeightEntry const *find(std::string const &name) const
  {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : &entries_[it->second];
  }

  bool contains(std::string const &name) const
  {
    return index_.contains(name);
  }

  /// Drops an entry (keeps the order of the rest).
  void erase(std::string const &name)
  {
    auto it = index_.find(name);
    if (it == index_.end())
    {
      return;
    }
    entries_.erase(entries_.begin() + static_cast<std::ptrdiff_t>(it->second));
    index_.clear();
    for (std::size_t i = 0; i < entries_.size(); ++i)
    {
      index_.emplace(entries_[i].name, i);
    }
  }

  std::vector<WeightEntry> const &entries() const noexcept
  {
    return entries_;
  }

  std::size_t size() const noexcept
  {
    return entries_.size();
  }

  friend bool operator==(WeightStore const &a, WeightStore const &b)
  {
    if (a.entries_.size() != b.entries_.size())
    {
      return false;
    }
    for (std::size_t i = 0; i < a.entries_.size(); ++i)
    {
      auto const &x = a.entries_[i];
      auto const &y = b.entries_[i];
      if (x.name != y.name || x.dtype != y.dtype || x.dims != y.dims || x.raw != y.raw)
      {
        return false;
      }
    }
    return true;
  }

private:
  std::vector<WeightEntry>                     entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

inline constexpr std::uint32_t kStoreVersion = 1;

namespace detail {

class ByteWriter
{
public:
  void u8(std::uint8_t v)
  {
    out.push_back(v);
  }
  void u16(std::uint16_t v)
  {
    out.push_back(static_cast<std::uint8_t>(v));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
  }
  void u32(std::uint32_t v)
  {
    for (int s = 0; s < 32; s += 8)
    {
      out.push_back(static_cast<std::uint8_t>(v >> s));
    }
  }
  void bytes(std::span<std::uint8_t const> b)
  {
    out.insert(out.end(), b.begin(), b.end());
  }

  std::vector<std::uint8_t> out;
};

class ByteReader
{
public:
  explicit ByteReader(std::span<std::uint8_t const> data)
    : data_(data)
  {}

  std::span<std::uint8_t const> take(std::size_t n, char const *what)
  {
    if (data_.size() - pos_ < n)
    {
      throw FormatError(FormatError::Kind::truncated,
                        std::string("weight store truncated while reading ") + what);
    }
    auto s = data_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  std::uint8_t u8(char const *what)
  {
    return take(1, what)[0];
  }

  std::uint16_t u16(char const *what)
  {
    auto b = take(2, what);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
  }

  std::uint32_t u32(char const *what)
  {
    auto          b = take(4, what);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i)
    {
      v = (v << 8) | b[static_cast<std::size_t>(i)];
    }
    return v;
  }

  std::size_t remaining() const noexcept
  {
    return data_.size() - pos_;
  }

private:
  std::span<std::uint8_t const> data_;
  std::size_t                   pos_{0};
};

}  // namespace detail

inline std::vector<std::uint8_t> serialize_store(WeightStore const &store)
{
  detail::ByteWriter w;
  for (char ch : {'L', 'E', 'Y', 'W'})
  {
    w.u8(static_cast<std::uint8_t>(ch));
  }
  w.u32(kStoreVersion);
  w.u32(static_cast<std::uint32_t>(store.size()));
  for (auto const &e : store.entries())
  {
    if (e.name.size() > 0xFFFF || e.dims.size() > 0xFF)
    {
      throw FormatError(FormatError::Kind::bad_schema, "weight '" + e.name + "' cannot be encoded");
    }
    w.u16(static_cast<std::uint16_t>(e.name.size()));
    w.bytes(std::span(reinterpret_cast<std::uint8_t const *>(e.name.data()), e.name.size()));
    w.u8(static_cast<std::uint8_t>(e.dtype));
    w.u8(static_cast<std::uint8_t>(e.dims.size()));
    for (auto d : e.dims)
    {
      w.u32(d);
    }
    w.bytes(e.raw);
  }
  return std::move(w.out);
}

inline WeightStore parse_store(std::span<std::uint8_t const> data)
{
  detail::ByteReader r(data);
  auto               magic = r.take(4, "magic");
  if (std::memcmp(magic.data(), "LEYW", 4) != 0)
  {
    throw FormatError(FormatError::Kind::bad_magic, "bad magic: not a LEYW weight store");
  }
  auto const version = r.u32("version");
  if (version != kStoreVersion)
  {
    throw FormatError(FormatError::Kind::unsupported_version,
                      "unsupported weight store version " + std::to_string(version));
  }
  auto const  count = r.u32("entry count");
  WeightStore store;
  for (std::uint32_t i = 0; i < count; ++i)
  {
    WeightEntry e;
    auto const  len  = r.u16("name length");
    auto        name = r.take(len, "name");
    e.name.assign(reinterpret_cast<char const *>(name.data()), name.size());
    auto const dtype = r.u8("dtype");
    if (dtype != static_cast<std::uint8_t>(DType::f32))
    {
      throw FormatError(FormatError::Kind::unsupported_dtype,
                        "weight '" + e.name + "': unsupported dtype " + std::to_string(dtype));
    }
    e.dtype          = DType::f32;
    auto const rank  = r.u8("rank");
    for (std::uint8_t d = 0; d < rank; ++d)
    {
      e.dims.push_back(r.u32("dims"));
    }
    auto payload = r.take(e.element_count() * dtype_size(e.dtype), "payload");
    e.raw.assign(payload.begin(), payload.end());
    if (store.contains(e.name))
    {
      throw FormatError(FormatError::Kind::duplicate_name, "duplicate weight name '" + e.name + "'");
    }
    store.insert(std::move(e));
  }
  if (r.remaining() != 0)
  {
    throw FormatError(FormatError::Kind::trailing_data,
                      std::to_string(r.remaining()) + " unexpected byte(s) after the last payload");
  }
  return store;
}

inline void write_store(std::string const &path, WeightStore const &store)
{
  auto const    bytes = serialize_store(store);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
  {
    throw FormatError(FormatError::Kind::io, "cannot open '" + path + "' for writing");
  }
  out.write(reinterpret_cast<char const *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out)
  {
    throw FormatError(FormatError::Kind::io, "failed writing '" + path + "'");
  }
}

inline std::vector<std::uint8_t> read_file_bytes(std::string const &path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
  {
    throw FormatError(FormatError::Kind::io, "cannot open '" + path + "'");
  }
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline WeightStore read_store(std::string const &path)
{
  auto const bytes = read_file_bytes(path);
  return parse_store(bytes);
}

}  // namespace leyolo
