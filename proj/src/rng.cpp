// SPDX-License-Identifier: Apache-2.0
#include "csforge/rng.hpp"

#include <cmath>
#include <numbers>

#include "csforge/errors.hpp"

namespace csforge {

namespace {

std::uint32_t lo(std::uint64_t v) { return static_cast<std::uint32_t>(v & 0xffffffffu); }
std::uint32_t hi(std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); }

}  // namespace

Stream::Stream(std::uint64_t seed, StreamDomain domain, std::uint64_t index) {
  const auto d = static_cast<std::uint64_t>(domain);
  std::seed_seq seq{lo(seed), hi(seed), lo(d), lo(index), hi(index), 0x63736667u};
  engine_.seed(seq);
}

double Stream::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Stream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = 0.0;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double t = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(t);
  has_spare_ = true;
  return r * std::cos(t);
}

std::size_t Stream::uniform_int(std::size_t n) {
  require(n > 0, ErrorKind::domain, "uniform_int over an empty range");
  const std::uint64_t range = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % range);
  std::uint64_t v = 0;
  do {
    v = engine_();
  } while (v >= limit);
  return static_cast<std::size_t>(v % range);
}

}  // namespace csforge
