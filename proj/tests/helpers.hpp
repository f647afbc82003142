// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "csforge/linalg.hpp"
#include "csforge/model.hpp"
#include "csforge/rng.hpp"

namespace csforge::test {

inline Matrix random_matrix(std::size_t r, std::size_t c, Stream& rng) {
  Matrix m(r, c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) m(i, j) = rng.normal();
  return m;
}

inline Matrix random_symmetric(std::size_t n, Stream& rng) {
  return symmetrize(random_matrix(n, n, rng));
}

inline Matrix random_psd(std::size_t n, Stream& rng) {
  const Matrix b = random_matrix(n, n, rng);
  return transpose_times(b, b);
}

inline ChannelSpec identity_channel(std::size_t n, std::size_t m, double g, double sw,
                                    double sv, double P) {
  ChannelSpec s;
  s.H = Matrix::identity(n);
  s.g = g;
  s.sigma_w = sw;
  s.sigma_v = sv;
  s.M = m;
  s.P = P;
  return s;
}

}  // namespace csforge::test
