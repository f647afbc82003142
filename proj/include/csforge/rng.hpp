// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace csforge {

// what a substream is used for; keeps e.g. design draws independent of trial draws
enum class StreamDomain : std::uint64_t {
  trial = 1,
  design = 2,
  covariance = 3,
  omega = 4,
  test = 5,
};

// Seeded stream keyed by (seed, domain, index). Two streams with the same
// key produce the same numbers on every platform and thread count.
class Stream {
 public:
  Stream(std::uint64_t seed, StreamDomain domain, std::uint64_t index);
  explicit Stream(std::uint64_t seed) : Stream(seed, StreamDomain::test, 0) {}

  std::uint64_t next_u64() { return engine_(); }
  double uniform();                            // [0, 1), 53 bits
  double normal();                             // N(0, 1), Box–Muller
  std::size_t uniform_int(std::size_t n);      // [0, n)

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace csforge
