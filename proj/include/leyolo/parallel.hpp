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

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace leyolo {

namespace detail {

inline int threads_from_env()
{
  char const *env = std::getenv("LEYOLO_THREADS");
  if (env == nullptr || *env == '\0')
  {
    return 1;
  }
  try
  {
    int n = std::stoi(env);
    return std::max(1, n);
  }
  catch (std::exception const &)
  {
    return 1;
  }
}

inline std::atomic<int> &thread_setting()
{
  static std::atomic<int> value{threads_from_env()};
  return value;
}

}  // namespace detail

/// Intra-op worker count. Defaults to LEYOLO_THREADS (or 1 when unset).
inline int num_threads()
{
  return detail::thread_setting().load(std::memory_order_relaxed);
}

inline void set_num_threads(int n)
{
  detail::thread_setting().store(std::max(1, n), std::memory_order_relaxed);
}

/// Runs fn(i) for i in [0, count). Work is split into contiguous chunks, one per worker.
/// Each index must write only to its own outputs; results never depend on the worker count.
template <typename Fn>
void parallel_for(std::size_t count, Fn &&fn)
{
  auto const workers = static_cast<std::size_t>(std::min<long long>(num_threads(), static_cast<long long>(count)));
  if (workers <= 1)
  {
    for (std::size_t i = 0; i < count; ++i)
    {
      fn(i);
    }
    return;
  }

  std::exception_ptr first_error;
  std::mutex         error_lock;
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    std::size_t const chunk = (count + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w)
    {
      std::size_t const begin = w * chunk;
      std::size_t const end   = std::min(count, begin + chunk);
      if (begin >= end)
      {
        break;
      }
      pool.emplace_back([&, begin, end] {
        try
        {
          for (std::size_t i = begin; i < end; ++i)
          {
            fn(i);
          }
        }
        catch (...)
        {
          std::lock_guard<std::mutex> guard(error_lock);
          if (!first_error)
          {
            first_error = std::current_exception();
          }
        }
      });
    }
  }
  if (first_error)
  {
    std::rethrow_exception(first_error);
  }
}

}  // namespace leyolo
