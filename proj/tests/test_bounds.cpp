// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "csforge/bounds.hpp"
#include "csforge/errors.hpp"
#include "helpers.hpp"

using namespace csforge;

namespace {

// direct Eq-style evaluation: average of Tr (R⁻¹ + E_Sᵀ Bᵀ Rn⁻¹ B E_S)⁻¹
double brute_bound(const Matrix& a, const ChannelSpec& s, const Matrix& R, std::size_t N,
                   std::size_t K) {
  const EffectiveModel m = effective_model(a, s);
  const Matrix rn_inv = inverse_spd(m.Rn);
  const Matrix info = transpose_times(m.B, rn_inv * m.B);
  const Matrix r_inv = inverse_spd(R);
  double sum = 0.0;
  const auto all = enumerate_supports(N, K);
  for (const auto& sup : all) sum += trace_inverse_spd(r_inv + submatrix(info, sup.indices));
  return sum / all.size();
}

}  // namespace

TEST_CASE("noise covariance") {
  Stream rng(1);
  const Matrix a = test::random_matrix(3, 5, rng);
  ChannelSpec s = test::identity_channel(5, 3, 0.5, 0.2, 0.0, 1.0);
  CHECK(max_abs(noise_covariance(a, s) - 0.04 * Matrix::identity(3)) < 1e-15);
  ChannelSpec u = test::identity_channel(3, 3, 1.0, 1.0, 1.0, 1.0);
  CHECK(max_abs(noise_covariance(Matrix::identity(3), u) - 2.0 * Matrix::identity(3)) < 1e-15);

  MultiTerminalSpec ms;
  ms.terminals[0] = test::identity_channel(5, 2, 0.5, 0.1, 0.0, 1.0);
  ms.terminals[1] = test::identity_channel(5, 3, 0.7, 0.3, 0.0, 1.0);
  ms.mode = MacMode::orthogonal;
  const Matrix rn = noise_covariance(test::random_matrix(2, 5, rng), test::random_matrix(3, 5, rng), ms);
  Matrix want(5, 5);
  for (std::size_t i = 0; i < 2; ++i) want(i, i) = 0.01;
  for (std::size_t i = 2; i < 5; ++i) want(i, i) = 0.09;
  CHECK(max_abs(rn - want) < 1e-15);
}

TEST_CASE("woodbury inverse agrees with direct inversion") {
  Stream rng(2);
  for (int t = 0; t < 100; ++t) {
    const std::size_t M = 1 + rng.uniform_int(6);
    const std::size_t N = M + rng.uniform_int(6);
    const Matrix a = test::random_matrix(M, N, rng);
    ChannelSpec s = test::identity_channel(N, M, 0.2 + rng.uniform(), 0.05 + rng.uniform(),
                                           rng.uniform(), 1.0);
    const Matrix direct = inverse_spd(noise_covariance(a, s));
    CHECK(frobenius_norm(woodbury_noise_inverse(a, s) - direct) <= 1e-8 * frobenius_norm(direct));
  }
  ChannelSpec z = test::identity_channel(4, 2, 0.5, 0.5, 0.0, 1.0);
  CHECK(max_abs(woodbury_noise_inverse(Matrix(2, 4), z) - 4.0 * Matrix::identity(2)) < 1e-15);
  // orthogonal rows: diagonal 1/(g²σ_v²‖a_i‖² + σ_w²)
  ChannelSpec o = test::identity_channel(3, 2, 2.0, 1.0, 0.5, 1.0);
  const Matrix a = Matrix::from_rows({{3, 0, 0}, {0, 0, 1}});
  const Matrix w = woodbury_noise_inverse(a, o);
  CHECK(w(0, 0) == doctest::Approx(1.0 / (4.0 * 0.25 * 9.0 + 1.0)));
  CHECK(w(1, 1) == doctest::Approx(1.0 / (4.0 * 0.25 * 1.0 + 1.0)));
  CHECK(std::abs(w(0, 1)) < 1e-15);
}

TEST_CASE("oracle estimate") {
  const Matrix R = exponential_covariance(2, 0.5);
  Stream rng(3);
  const Matrix a = test::random_matrix(4, 6, rng);
  ChannelSpec s = test::identity_channel(6, 4, 0.5, 1e-6, 0.0, 1.0);
  const SupportSet sup{{1, 4}};
  const Vector zero = oracle_estimate(Vector(4, 0.0), sup, a, s, R);
  for (double v : zero) CHECK(v == 0.0);
  Vector x(6, 0.0);
  x[1] = 0.7;
  x[4] = -1.3;
  Vector y = a * x;
  for (double& v : y) v *= s.g;
  const Vector xh = oracle_estimate(y, sup, a, s, R);
  CHECK(xh[1] == doctest::Approx(0.7).epsilon(1e-3));
  CHECK(xh[4] == doctest::Approx(-1.3).epsilon(1e-3));
  for (std::size_t i : {0, 2, 3, 5}) CHECK(xh[i] == 0.0);
}

TEST_CASE("lower bound fixed cases") {
  const Matrix R = exponential_covariance(2, 0.5);
  ChannelSpec s = test::identity_channel(5, 3, 0.5, 0.1, 0.0, 1.0);
  const auto all = all_supports(5, 2);
  CHECK(mse_lower_bound(Matrix(3, 5), s, R, all).value == doctest::Approx(trace(R)));

  // N=4, K=1, A = first two rows of I₄: captured columns give 1/(1+1), others 1
  ChannelSpec u = test::identity_channel(4, 2, 1.0, 1.0, 0.0, 1.0);
  const Matrix a = Matrix::from_rows({{1, 0, 0, 0}, {0, 1, 0, 0}});
  CHECK(mse_lower_bound(a, u, Matrix::identity(1), all_supports(4, 1)).value ==
        doctest::Approx((0.5 + 0.5 + 1 + 1) / 4.0));

  Stream rng(4);
  for (int t = 0; t < 10; ++t) {
    const Matrix b = test::random_matrix(3, 5, rng);
    ChannelSpec sv = s;
    sv.sigma_v = rng.uniform();
    CHECK(mse_lower_bound(b, sv, R, all).value ==
          doctest::Approx(brute_bound(b, sv, R, 5, 2)).epsilon(1e-12));
  }
}

TEST_CASE("sampled bound") {
  const Matrix R = exponential_covariance(2, 0.5);
  ChannelSpec s = test::identity_channel(10, 4, 0.5, 0.1, 0.0, 1.0);
  Stream rng(5);
  const Matrix a = test::random_matrix(4, 10, rng);
  const double exact = mse_lower_bound(a, s, R, all_supports(10, 2)).value;

  Stream full(6);
  const auto everything = sample_supports(10, 2, 45, full);
  CHECK(std::abs(mse_lower_bound(a, s, R, everything).value - exact) <= 1e-12 * exact);

  const int reps = 200;
  double sum = 0.0;
  double sum2 = 0.0;
  for (int r = 0; r < reps; ++r) {
    Stream draw(100 + r);
    const double v = mse_lower_bound(a, s, R, sample_supports(10, 2, 20, draw)).value;
    sum += v;
    sum2 += v * v;
  }
  const double mean = sum / reps;
  const double sd = std::sqrt(std::max(sum2 / reps - mean * mean, 0.0));
  CHECK(std::abs(mean - exact) <= 2.0 * sd / std::sqrt(double(reps)));
}

TEST_CASE("lower bound below the linear bound") {
  Stream rng(7);
  for (int t = 0; t < 30; ++t) {
    const std::size_t N = 4 + rng.uniform_int(4);
    const std::size_t K = 1 + rng.uniform_int(2);
    const std::size_t M = 1 + rng.uniform_int(N);
    const Matrix R = exponential_covariance(K, 0.8 * rng.uniform());
    const Matrix R_x = source_covariance(N, K, R, {});
    ChannelSpec s = test::identity_channel(N, M, 0.2 + rng.uniform(), 0.05 + rng.uniform(),
                                           0.5 * rng.uniform(), 1.0);
    const Matrix a = test::random_matrix(M, N, rng);
    const double lb = mse_lower_bound(a, s, R, all_supports(N, K)).value;
    CHECK(lb <= lmmse_upper_bound(a, s, R_x) + 1e-9);
    CHECK(lb <= trace(R));
  }
  const Matrix R_x = source_covariance(5, 2, Matrix::identity(2), {});
  ChannelSpec s = test::identity_channel(5, 3, 0.5, 0.1, 0.0, 1.0);
  CHECK(lmmse_upper_bound(Matrix(3, 5), s, R_x) == doctest::Approx(trace(R_x)));
  ChannelSpec full = test::identity_channel(5, 5, 1.0, 0.1, 0.0, 1.0);
  double prev = trace(R_x);
  for (double g : {0.1, 1.0, 10.0, 100.0}) {
    full.g = g;
    const double v = lmmse_upper_bound(Matrix::identity(5), full, R_x);
    CHECK(v < prev);
    prev = v;
  }
  CHECK(prev < 1e-3);
}

TEST_CASE("lower bound decreases with power") {
  const Matrix R = exponential_covariance(2, 0.5);
  ChannelSpec s = test::identity_channel(6, 3, 0.5, 0.1, 0.0, 1.0);
  Stream rng(8);
  const Matrix a = test::random_matrix(3, 6, rng);
  const auto all = all_supports(6, 2);
  double prev = trace(R);
  for (double c : {0.01, 0.1, 0.5, 1.0, 2.0, 5.0, 20.0}) {
    const double v = mse_lower_bound(c * a, s, R, all).value;
    CHECK(v <= prev);
    prev = v;
  }
}

TEST_CASE("coherence sandwich") {
  const ChannelSpec s = test::identity_channel(4, 4, 0.5, 0.1, 0.0, 1.0);
  const Matrix R = 2.0 * Matrix::identity(2);
  const Sandwich c = coherence_sandwich(Matrix::identity(4), s, R, 0.0, 1.0, 1.0);
  const double want = 2.0 / (0.5 + 0.25 / 0.01);
  CHECK(c.lower == doctest::Approx(want));
  CHECK(c.upper == doctest::Approx(want));
  CHECK(std::isinf(coherence_sandwich(Matrix::identity(4), s, R, 0.5, 1.0, 1.0).upper));
  CHECK_THROWS_AS(coherence_sandwich(Matrix::identity(4), s, R, 1.5, 1.0, 1.0), Error);
}

TEST_CASE("normalized columns") {
  const ColumnNormalization n = normalize_columns(Matrix::from_rows({{3, 0}, {4, 2}}));
  CHECK(n.s1 == doctest::Approx(25.0));
  CHECK(n.s2 == doctest::Approx(4.0));
  CHECK(n.normalized(0, 0) == doctest::Approx(0.6));
  CHECK(n.normalized(1, 1) == doctest::Approx(1.0));
}
