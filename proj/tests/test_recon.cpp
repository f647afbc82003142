// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "csforge/bounds.hpp"
#include "csforge/errors.hpp"
#include "csforge/design.hpp"
#include "csforge/recon.hpp"
#include "helpers.hpp"

using namespace csforge;

namespace {

double sq_err(const Vector& a, const Vector& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

// 4×6 frame pushed toward low coherence by shrinking the Gram off-diagonals
Matrix low_coherence_frame(Stream& rng) {
  Matrix a = test::random_matrix(4, 6, rng);
  for (int it = 0; it < 100; ++it) {
    Matrix g = transpose_times(normalize_columns(a).normalized, normalize_columns(a).normalized);
    for (std::size_t i = 0; i < 6; ++i)
      for (std::size_t j = 0; j < 6; ++j)
        if (i != j && std::abs(g(i, j)) > 0.3) g(i, j) = g(i, j) > 0 ? 0.3 : -0.3;
    a = low_rank_from_gram(g, 4).a;
  }
  return normalize_columns(a).normalized;
}

Vector add_noise(Vector y, double sigma, Stream& rng) {
  for (auto& v : y) v += sigma * rng.normal();
  return y;
}

}  // namespace

TEST_CASE("support match") {
  CHECK(support_match(SupportSet{{1, 2, 3}}, SupportSet{{1, 2, 3}}) == 1.0);
  CHECK(support_match(SupportSet{{1, 2, 3}}, SupportSet{{4, 5, 6}}) == 0.0);
  CHECK(support_match(SupportSet{{1, 2, 3}}, SupportSet{{1, 2, 9}}) == doctest::Approx(2.0 / 3.0));
  CHECK(top_k_support({0.1, -3.0, 2.0, 0.0}, 2).indices == std::vector<std::size_t>{1, 2});
}

TEST_CASE("omp basics") {
  Stream rng(1);
  const Matrix q = random_orthogonal(6, rng);
  const DecodeResult r = omp(q.col(4), q, 1);
  CHECK(r.support_hat.indices == std::vector<std::size_t>{4});
  CHECK(r.x_hat[4] == doctest::Approx(1.0));
  for (std::size_t i = 0; i < 6; ++i)
    if (i != 4) CHECK(std::abs(r.x_hat[i]) < 1e-12);

  // one step picks the largest normalized correlation
  const Matrix a = test::random_matrix(4, 7, rng);
  const Vector y{0.3, -1.2, 0.8, 0.1};
  std::size_t best = 0;
  double bc = -1.0;
  for (std::size_t j = 0; j < 7; ++j) {
    const Vector c = a.col(j);
    const double v = std::abs(dot(c, y)) / norm2(c);
    if (v > bc) {
      bc = v;
      best = j;
    }
  }
  const DecodeResult one = omp(y, a, 1);
  CHECK(one.support_hat.indices == std::vector<std::size_t>{best});
  CHECK(one.support_hat.size() == 1);
}

TEST_CASE("omp recovers exactly under low coherence") {
  Stream rng(2);
  Matrix a = Matrix::identity(12);
  a += test::random_matrix(12, 12, rng) * 0.02;
  const std::size_t K = 3;
  REQUIRE(mutual_coherence(a) < 1.0 / (2.0 * K - 1.0));
  for (int t = 0; t < 500; ++t) {
    const SupportSet s = draw_support(12, K, rng);
    Vector x(12, 0.0);
    for (std::size_t i : s.indices) x[i] = rng.normal();
    const DecodeResult r = omp(a * x, a, K);
    CHECK(r.support_hat == s);
  }
}

TEST_CASE("omp against best-K least squares on small noiseless instances") {
  int agree = 0;
  const int runs = 1000;
  for (int seed = 0; seed < runs; ++seed) {
    Stream rng(1000 + seed);
    const Matrix a = low_coherence_frame(rng);
    const SupportSet s = draw_support(6, 2, rng);
    Vector x(6, 0.0);
    for (std::size_t i : s.indices) x[i] = rng.normal();
    const Vector y = a * x;
    // brute force: smallest LS residual over all C(6,2) supports
    double best = std::numeric_limits<double>::infinity();
    SupportSet arg;
    for (const auto& c : enumerate_supports(6, 2)) {
      const Matrix ac = columns(a, c.indices);
      const Vector z = pinv(ac) * y;
      const double r = sq_err(ac * z, y);
      if (r < best) {
        best = r;
        arg = c;
      }
    }
    agree += omp(y, a, 2).support_hat == arg;
  }
  MESSAGE("omp agreement " << agree << "/" << runs);
  CHECK(agree >= 0.95 * runs);
}

TEST_CASE("exhaustive mmse") {
  const Matrix R = Matrix::identity(1);
  SUBCASE("weights and collapse at high SNR") {
    Stream rng(3);
    const Matrix a = test::random_matrix(4, 6, rng);
    const ChannelSpec s = test::identity_channel(6, 4, 1.0, 1e-4, 0.0, 1.0);
    const WhitenedModel m(effective_model(a, s), R);
    Vector x(6, 0.0);
    x[2] = 1.4;
    const Vector y = add_noise(a * x, 1e-4, rng);
    Vector beta;
    const DecodeResult d = exhaustive_mmse(m.whiten(y), m, all_supports(6, 1), &beta);
    double sum = 0.0;
    for (double b : beta) {
      CHECK(b >= 0.0);
      sum += b;
    }
    CHECK(std::abs(sum - 1.0) <= 1e-12);
    const Vector o = oracle_estimate(y, SupportSet{{2}}, a, s, R);
    CHECK(std::sqrt(sq_err(d.x_hat, o)) <= 1e-6);
  }
  SUBCASE("symmetric ambiguity") {
    // identical columns: y cannot tell the two supports apart
    const Matrix a = Matrix::from_rows({{1, 1}, {0.5, 0.5}});
    const ChannelSpec s = test::identity_channel(2, 2, 1.0, 0.5, 0.0, 1.0);
    const WhitenedModel m(effective_model(a, s), R);
    Vector beta;
    exhaustive_mmse(m.whiten({0.8, 0.1}), m, all_supports(2, 1), &beta);
    REQUIRE(beta.size() == 2);
    CHECK(beta[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(beta[1] == doctest::Approx(0.5).epsilon(1e-12));
  }
  SUBCASE("one support equals the oracle") {
    Stream rng(4);
    const Matrix a = test::random_matrix(3, 5, rng);
    const Matrix R2 = exponential_covariance(2, 0.5);
    const ChannelSpec s = test::identity_channel(5, 3, 0.5, 0.3, 0.1, 1.0);
    const WhitenedModel m(effective_model(a, s), R2);
    SupportCollection one;
    one.sets = {SupportSet{{1, 3}}};
    const Vector y{0.2, -0.4, 1.1};
    const DecodeResult d = exhaustive_mmse(m.whiten(y), m, one);
    CHECK(sq_err(d.x_hat, oracle_estimate(y, one.sets[0], a, s, R2)) < 1e-24);
  }
  SUBCASE("capacity") {
    const ChannelSpec s = test::identity_channel(40, 10, 1.0, 0.5, 0.0, 1.0);
    try {
      exhaustive_mmse(Vector(10, 0.0), Matrix(10, 40), s, Matrix::identity(10), 1000);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::capacity);
    }
  }
}

TEST_CASE("random omp basics") {
  Stream rng(5);
  const Matrix a = test::random_matrix(4, 8, rng);
  const Matrix R = exponential_covariance(2, 0.5);
  const ChannelSpec s = test::identity_channel(8, 4, 0.5, 0.1, 0.0, 1.0);
  const DecodeResult z = random_omp(Vector(4, 0.0), a, s, R, 2, 20, rng);
  for (double v : z.x_hat) CHECK(v == 0.0);

  // every greedy draw lands on the only support there is
  const Matrix a2 = test::random_matrix(3, 2, rng);
  const ChannelSpec s2 = test::identity_channel(2, 3, 0.5, 0.1, 0.0, 1.0);
  const Vector y{0.4, -0.2, 0.9};
  const DecodeResult d = random_omp(y, a2, s2, R, 2, 5, rng);
  CHECK(sq_err(d.x_hat, oracle_estimate(y, SupportSet{{0, 1}}, a2, s2, R)) < 1e-24);
}

TEST_CASE("decoder ordering on a small test bed") {
  const std::size_t N = 8;
  const std::size_t M = 4;
  const Matrix R = Matrix::identity(1);
  Stream setup(6);
  const Matrix a = test::random_matrix(M, N, setup) * 0.6;
  const ChannelSpec s = test::identity_channel(N, M, 1.0, 0.3, 0.0, 1.0);
  const WhitenedModel m(effective_model(a, s), R);
  const SourceModel src = SourceModel::make(N, 1, R);
  const auto all = all_supports(N, 1);

  const int trials = 10000;
  double e_ex = 0.0;
  double e_ro = 0.0;
  double e_omp = 0.0;
  double d1 = 0.0, d1sq = 0.0;  // random-omp minus exhaustive
  double d2 = 0.0, d2sq = 0.0;  // omp minus random-omp
  for (int t = 0; t < trials; ++t) {
    Stream rng(7, StreamDomain::trial, t);
    const SourceDraw draw = draw_source(src, rng);
    const Vector y = add_noise(a * draw.x, s.sigma_w, rng);
    const Vector yw = m.whiten(y);
    const double ex = sq_err(exhaustive_mmse(yw, m, all).x_hat, draw.x);
    const double ro = sq_err(random_omp(yw, m, 1, 200, rng).x_hat, draw.x);
    const double om = sq_err(omp(yw, m.B(), 1).x_hat, draw.x);
    e_ex += ex;
    e_ro += ro;
    e_omp += om;
    d1 += ro - ex;
    d1sq += (ro - ex) * (ro - ex);
    d2 += om - ro;
    d2sq += (om - ro) * (om - ro);
  }
  auto se = [&](double s1, double s2) {
    const double mean = s1 / trials;
    return std::sqrt(std::max(s2 / trials - mean * mean, 0.0) / trials);
  };
  MESSAGE("mse exhaustive " << e_ex / trials << " random-omp " << e_ro / trials << " omp "
                            << e_omp / trials);
  CHECK(d1 / trials >= -2.0 * se(d1, d1sq));
  CHECK(d2 / trials >= -2.0 * se(d2, d2sq));
  CHECK(e_ro <= 1.05 * e_ex);
}

TEST_CASE("lmmse gain") {
  Stream rng(8);
  const Matrix a = test::random_matrix(3, 5, rng);
  const Matrix R_x = source_covariance(5, 2, exponential_covariance(2, 0.5), {});
  const ChannelSpec s = test::identity_channel(5, 3, 0.5, 0.2, 0.1, 1.0);
  const WhitenedModel m(effective_model(a, s), exponential_covariance(2, 0.5));
  const Matrix g = lmmse_gain(m, R_x);
  const Matrix bw = m.B();
  const Matrix want = R_x * bw.transpose() * inverse_spd(bw * R_x * bw.transpose() + Matrix::identity(3));
  CHECK(max_abs(g - want) < 1e-12);
}
