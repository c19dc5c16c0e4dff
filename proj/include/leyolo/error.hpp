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

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace leyolo {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes that do not fit the operation (wrong channel count, spatial mismatch).
class ShapeError : public Error
{
public:
  using Error::Error;
};

/// Invalid layer or block configuration, detected before any compute.
class ConfigError : public Error
{
public:
  using Error::Error;
};

/// Violated caller precondition (e.g. input size not divisible by 32).
class PreconditionError : public Error
{
public:
  using Error::Error;
};

/// Malformed file contents (weight store, image, spec JSON).
class FormatError : public Error
{
public:
  enum class Kind
  {
    io,
    bad_magic,
    unsupported_version,
    unsupported_dtype,
    truncated,
    duplicate_name,
    trailing_data,
    unsupported_image,
    bad_schema,
  };

  FormatError(Kind kind, std::string const &what)
    : Error(what)
    , kind_(kind)
  {}

  Kind kind() const noexcept
  {
    return kind_;
  }

private:
  Kind kind_;
};

/// Weight binding failure. Carries every offending parameter, not just the first.
class BindError : public Error
{
public:
  explicit BindError(std::vector<std::string> problems)
    : Error(join(problems))
    , problems_(std::move(problems))
  {}

  std::vector<std::string> const &problems() const noexcept
  {
    return problems_;
  }

private:
  static std::string join(std::vector<std::string> const &problems)
  {
    std::string out = "weight binding failed (" + std::to_string(problems.size()) + " problem(s))";
    for (auto const &p : problems)
    {
      out += "\n  ";
      out += p;
    }
    return out;
  }

  std::vector<std::string> problems_;
};

}  // namespace leyolo
