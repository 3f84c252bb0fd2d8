// Copyright 2026 The rotquant Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace rotquant {

/// Worker count for Monte Carlo loops. Results never depend on it.
struct Exec {
  unsigned threads = 1;
};

/// Number of batches a trial loop is cut into. Fixed so reductions happen in
/// the same order whatever the thread count.
inline constexpr std::size_t kDefaultBatches = 64;

/// Calls fn(batch, begin, end) for `batches` contiguous slices of [0, n) and
/// returns the per-batch results in batch order.
template <class Fn>
auto run_batches(std::size_t n, std::size_t batches, Exec exec, Fn&& fn) {
  using Result = decltype(fn(std::size_t{}, std::size_t{}, std::size_t{}));
  batches = std::max<std::size_t>(1, std::min(batches, n));
  std::vector<Result> results(batches);
  const auto slice = [&](std::size_t b) {
    results[b] = fn(b, n * b / batches, n * (b + 1) / batches);
  };

  const unsigned workers = std::max(1U, std::min<unsigned>(exec.threads, static_cast<unsigned>(batches)));
  if (workers == 1) {
    for (std::size_t b = 0; b < batches; ++b) slice(b);
    return results;
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t b = next++; b < batches; b = next++) {
        try {
          slice(b);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return results;
}

/// out[i] = fn(i) for i in [0, n), evaluated across `exec.threads` workers.
template <class Fn>
auto parallel_map(std::size_t n, Exec exec, Fn&& fn) {
  using Result = decltype(fn(std::size_t{}));
  std::vector<Result> out(n);
  run_batches(n, kDefaultBatches, exec, [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) out[i] = fn(i);
    return 0;
  });
  return out;
}

}  // namespace rotquant
