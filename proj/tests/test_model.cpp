// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <map>

#include "csforge/errors.hpp"
#include "csforge/model.hpp"
#include "helpers.hpp"

using namespace csforge;

namespace {

double rel_fro(const Matrix& a, const Matrix& b) { return frobenius_norm(a - b) / frobenius_norm(b); }

}  // namespace

TEST_CASE("exponential covariance") {
  CHECK(max_abs(exponential_covariance(2, 0.5) - Matrix::from_rows({{1, .5}, {.5, 1}})) < 1e-15);
  CHECK(max_abs(exponential_covariance(3, 0.0) - Matrix::identity(3)) == 0.0);
  CHECK(max_abs(exponential_covariance(3, 0.25, 2.0) -
                Matrix::from_rows({{2, .5, .125}, {.5, 2, .5}, {.125, .5, 2}})) < 1e-15);
  CHECK_THROWS_AS(exponential_covariance(3, 1.0), Error);
}

TEST_CASE("selector matrices") {
  const Matrix e = selector_matrix(SupportSet{{1, 2}}, 3);
  CHECK(max_abs(e - Matrix::from_rows({{0, 0}, {1, 0}, {0, 1}})) == 0.0);
  const Matrix e0 = selector_matrix(SupportSet{{0}}, 2);
  CHECK(e0(0, 0) == 1.0);
  CHECK(e0(1, 0) == 0.0);
  try {
    selector_matrix(SupportSet{{3}}, 3);
    FAIL("expected an error");
  } catch (const Error& err) {
    CHECK(err.kind() == ErrorKind::domain);
  }
}

TEST_CASE("enumeration") {
  const auto s = enumerate_supports(3, 2);
  REQUIRE(s.size() == 3);
  CHECK(s[0].indices == std::vector<std::size_t>{0, 1});
  CHECK(s[1].indices == std::vector<std::size_t>{0, 2});
  CHECK(s[2].indices == std::vector<std::size_t>{1, 2});
  CHECK(enumerate_supports(4, 1).size() == 4);
  CHECK(enumerate_supports(5, 3).size() == 10);
  CHECK(binomial(36, 3) == 7140.0);
  try {
    enumerate_supports(40, 10, 1000);
    FAIL("expected an error");
  } catch (const Error& err) {
    CHECK(err.kind() == ErrorKind::capacity);
  }
}

TEST_CASE("selector identities over all supports") {
  for (std::size_t N = 2; N <= 8; ++N) {
    for (std::size_t K = 1; K < N; ++K) {
      Matrix sum(N, N);
      for (const auto& s : enumerate_supports(N, K)) {
        const Matrix e = selector_matrix(s, N);
        CHECK(max_abs(transpose_times(e, e) - Matrix::identity(K)) == 0.0);
        sum += times_transpose(e, e);
      }
      // each index lies in C(N−1, K−1) supports
      CHECK(max_abs(sum - binomial(N - 1, K - 1) * Matrix::identity(N)) == 0.0);
      if (K * K == N) CHECK(max_abs(sum - (binomial(N, K) / K) * Matrix::identity(N)) < 1e-12);
    }
  }
}

TEST_CASE("analytic source covariance") {
  const Matrix r1 = source_covariance(2, 1, Matrix::from_rows({{4.0}}), {});
  CHECK(max_abs(r1 - 2.0 * Matrix::identity(2)) < 1e-15);
  const Matrix r2 = source_covariance(6, 2, 3.0 * Matrix::identity(2), {});
  CHECK(max_abs(r2 - (2.0 / 6.0 * 3.0) * Matrix::identity(6)) < 1e-14);
  // brute force over supports
  const Matrix R = exponential_covariance(3, 0.5);
  Matrix brute(7, 7);
  const auto all = enumerate_supports(7, 3);
  for (const auto& s : all) {
    const Matrix e = selector_matrix(s, 7);
    brute += e * R * Matrix(transpose_times(e, Matrix::identity(7)));
  }
  brute *= 1.0 / all.size();
  CHECK(max_abs(source_covariance(7, 3, R, {}) - brute) < 1e-14);
}

TEST_CASE("sampled source covariance approaches the analytic one") {
  const Matrix R = exponential_covariance(2, 0.5);
  const Matrix exact = source_covariance(8, 2, R, {});
  CovarianceMode mode;
  mode.kind = CovarianceMode::sampled;
  mode.samples = 100000;
  mode.seed = 11;
  CHECK(rel_fro(source_covariance(8, 2, R, mode), exact) <= 0.03);
}

TEST_CASE("draw_source statistics") {
  const Matrix R = exponential_covariance(2, 0.5);
  const SourceModel m = SourceModel::make(5, 2, R);
  Stream rng(12);
  const int n = 100000;
  Matrix cov(2, 2);
  std::map<std::vector<std::size_t>, int> freq;
  for (int t = 0; t < n; ++t) {
    const SourceDraw d = draw_source(m, rng);
    ++freq[d.support.indices];
    for (std::size_t i = 0; i < 5; ++i)
      if (!d.support.contains(i)) REQUIRE(d.x[i] == 0.0);
    const double a = d.x[d.support.indices[0]];
    const double b = d.x[d.support.indices[1]];
    cov(0, 0) += a * a;
    cov(0, 1) += a * b;
    cov(1, 0) += a * b;
    cov(1, 1) += b * b;
  }
  cov *= 1.0 / n;
  CHECK(rel_fro(cov, R) <= 0.03);
  CHECK(freq.size() == 10);
  const double p = 0.1;
  const double sd = std::sqrt(n * p * (1 - p));
  for (const auto& [s, c] : freq) CHECK(std::abs(c - n * p) <= 4.0 * sd);
}

TEST_CASE("mutual coherence") {
  CHECK(mutual_coherence(Matrix::identity(3)) == 0.0);
  CHECK(mutual_coherence(Matrix::from_rows({{1, 1}, {2, 2}})) == doctest::Approx(1.0));
  CHECK(mutual_coherence(Matrix::from_rows({{1, 1}, {0, 1}})) ==
        doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK_THROWS_AS(mutual_coherence(Matrix::from_rows({{1, 0}, {1, 0}})), Error);
  Stream rng(13);
  const Matrix a = test::random_matrix(5, 9, rng);
  Vector d(9);
  for (auto& v : d) v = 0.1 + 3.0 * rng.uniform();
  CHECK(mutual_coherence(a * Matrix::diagonal(d)) == doctest::Approx(mutual_coherence(a)).epsilon(1e-12));
}

TEST_CASE("transmit power") {
  const Matrix R_x = source_covariance(6, 2, exponential_covariance(2, 0.5), {});
  const ChannelSpec s = test::identity_channel(6, 6, 0.5, 0.1, 0.0, 10.0);
  CHECK(transmit_power(Matrix::identity(6), s, R_x) == doctest::Approx(trace(R_x)));
  CHECK(transmit_power(Matrix(3, 6), s, R_x) == 0.0);
  Stream rng(14);
  const Matrix a = test::random_matrix(3, 6, rng);
  ChannelSpec sv = s;
  sv.sigma_v = 0.3;
  const double p = transmit_power(a, sv, R_x);
  CHECK(transmit_power(2.5 * a, sv, R_x) == doctest::Approx(6.25 * p).epsilon(1e-12));
  CHECK_THROWS_AS(transmit_power(Matrix(3, 5), s, R_x), Error);
}
