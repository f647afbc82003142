// SPDX-License-Identifier: Apache-2.0
#include "csforge/selftest.hpp"

#include <cmath>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "csforge/design.hpp"
#include "csforge/errors.hpp"
#include "csforge/harness.hpp"
#include "csforge/recon.hpp"

namespace csforge {

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, Stream& rng) {
  Matrix m(r, c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) m(i, j) = rng.normal();
  return m;
}

bool eig_2x2() {
  const SymEig e = sym_eig(Matrix::from_rows({{2, 1}, {1, 2}}));
  return std::abs(e.values[0] - 3.0) < 1e-12 && std::abs(e.values[1] - 1.0) < 1e-12;
}

bool low_rank_tail() {
  Stream rng(11);
  for (int t = 0; t < 10; ++t) {
    const std::size_t n = 5 + rng.uniform_int(20);
    const Matrix b = random_matrix(n, n, rng);
    const Matrix q = transpose_times(b, b);
    const std::size_t m = 1 + rng.uniform_int(n);
    const LowRank lr = low_rank_from_gram(q, m);
    double tail = 0.0;
    for (std::size_t i = m; i < n; ++i) tail += lr.eigenvalues[i] * lr.eigenvalues[i];
    if (std::abs(lr.residual - tail) > 1e-8 * std::max(1.0, tail)) return false;
  }
  return true;
}

bool analytic_covariance() {
  // brute force over all supports for N=7, K=3
  const std::size_t n = 7;
  const std::size_t k = 3;
  const Matrix r = exponential_covariance(k, 0.6);
  const Matrix rx = source_covariance(n, k, r, CovarianceMode{});
  Matrix brute(n, n);
  const auto sets = enumerate_supports(n, k);
  for (const auto& s : sets) {
    const Matrix e = selector_matrix(s, n);
    brute += e * r * e.transpose();
  }
  brute *= 1.0 / static_cast<double>(sets.size());
  return max_abs(brute - rx) < 1e-14;
}

bool woodbury() {
  Stream rng(12);
  ChannelSpec spec{random_matrix(6, 8, rng), 0.7, 0.3, 0.2, 4, 1.0};
  const Matrix a = random_matrix(4, 6, rng);
  const Matrix direct = inverse_spd(noise_covariance(a, spec));
  return max_abs(direct - woodbury_noise_inverse(a, spec)) < 1e-9 * max_abs(direct);
}

bool sampled_equals_exact() {
  Stream rng(13);
  const std::size_t n = 8;
  const std::size_t k = 2;
  const Matrix r = exponential_covariance(k, 0.5);
  ChannelSpec spec{Matrix::identity(n), 0.5, 0.0, 0.1, 4, 10.0};
  const Matrix a = random_matrix(4, n, rng);
  const auto exact = all_supports(n, k);
  Stream s2(14);
  const auto sampled = sample_supports(n, k, exact.size(), s2);
  const double x = mse_lower_bound(a, spec, r, exact).value;
  const double y = mse_lower_bound(a, spec, r, sampled).value;
  return std::abs(x - y) <= 1e-12 * x;
}

bool closed_form_matches_sdr() {
  const std::size_t n = 9;
  const std::size_t k = 3;
  const Matrix r = Matrix::identity(k);
  const Matrix rx = source_covariance(n, k, r, CovarianceMode{});
  ChannelSpec spec{Matrix::identity(n), 1.0, 0.0, 1.0, 4, 2.0};
  const GramSolution s = solve_reduced(sdr_instance(spec, r, rx, all_supports(n, k)));
  const Matrix expect = Matrix::identity(n) * (static_cast<double>(k) * spec.P / static_cast<double>(n));
  return frobenius_norm(s.Q[0] - expect) <= 1e-3 * frobenius_norm(expect);
}

bool omp_orthonormal() {
  Stream rng(15);
  const Matrix q = random_orthogonal(6, rng);
  const Vector y = q.col(4);
  const DecodeResult d = omp(y, q, 1);
  return d.support_hat.indices == std::vector<std::size_t>{4} && std::abs(d.x_hat[4] - 1.0) < 1e-12;
}

bool exhaustive_weights() {
  Stream rng(16);
  const std::size_t n = 6;
  const Matrix r = exponential_covariance(2, 0.3);
  ChannelSpec spec{Matrix::identity(n), 1.0, 0.0, 0.5, 3, 1.0};
  const Matrix a = random_matrix(3, n, rng);
  const WhitenedModel m(effective_model(a, spec), r);
  Vector y(3);
  for (double& v : y) v = rng.normal();
  Vector beta;
  exhaustive_mmse(m.whiten(y), m, all_supports(n, 2), &beta);
  double sum = 0.0;
  for (double b : beta) {
    if (b < 0.0) return false;
    sum += b;
  }
  return std::abs(sum - 1.0) < 1e-12;
}

bool trial_determinism() {
  ExperimentConfig c;
  c.N = 10;
  c.K = 2;
  c.M = {5};
  c.trials = 40;
  c.designs = {"gaussian"};
  c.covariance_samples = 2000;
  const Scenario sc = make_scenario(c);
  const PointConfig p = at_axis(c, 5.0);
  const BuiltDesign d = build_design("gaussian", p, sc);
  const SweepRecord one = run_monte_carlo(p, sc, d, 1);
  const SweepRecord many = run_monte_carlo(p, sc, d, 4);
  return one.nmse_db == many.nmse_db && one.support_recovery == many.support_recovery;
}

bool capacity_error() {
  try {
    enumerate_supports(100, 5, 1000);
  } catch (const Error& e) {
    return e.kind() == ErrorKind::capacity;
  }
  return false;
}

}  // namespace

bool run_selftest(std::ostream& os) {
  const std::vector<std::pair<const char*, std::function<bool()>>> checks{
      {"eigenvalues of [[2,1],[1,2]]", eig_2x2},
      {"low-rank residual equals tail energy", low_rank_tail},
      {"analytic R_x equals support average", analytic_covariance},
      {"Woodbury noise inverse", woodbury},
      {"sampled bound with all supports equals exact", sampled_equals_exact},
      {"relaxed Gram matches the scaled identity", closed_form_matches_sdr},
      {"OMP picks the matching column", omp_orthonormal},
      {"exhaustive weights are a distribution", exhaustive_weights},
      {"Monte Carlo independent of threads", trial_determinism},
      {"enumeration cap raises capacity error", capacity_error},
  };
  bool all = true;
  for (const auto& [name, fn] : checks) {
    bool ok = false;
    try {
      ok = fn();
    } catch (const std::exception& e) {
      os << "error in " << name << ": " << e.what() << "\n";
    }
    os << (ok ? "ok   " : "FAIL ") << name << "\n";
    all = all && ok;
  }
  return all;
}

}  // namespace csforge
