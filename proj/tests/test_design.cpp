// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "csforge/design.hpp"
#include "csforge/errors.hpp"
#include "helpers.hpp"

using namespace csforge;

namespace {

double tail_energy(const Matrix& q, std::size_t M) {
  const SymEig e = sym_eig(q);
  double s = 0.0;
  for (std::size_t i = M; i < e.values.size(); ++i) s += e.values[i] * e.values[i];
  return s;
}

bool rows_tight(const Matrix& a, double tol) {
  const Matrix g = times_transpose(a, a);
  const double c = g(0, 0);
  return max_abs(g - Matrix::identity(a.rows()) * c) <= tol * c;
}

struct Fixture {
  std::size_t N = 8;
  std::size_t K = 2;
  Matrix R = exponential_covariance(2, 0.5);
  Matrix R_x = source_covariance(8, 2, exponential_covariance(2, 0.5),
                                 {CovarianceMode::sampled, 100000, 3});
  SupportCollection all = all_supports(8, 2);
  ChannelSpec spec = test::identity_channel(8, 4, 0.5, 0.1, 0.0, 10.0);
};

}  // namespace

TEST_CASE("low-rank factor") {
  const LowRank a = low_rank_from_gram(Matrix::diagonal({4, 1, 0}), 1);
  CHECK(std::abs(a.a(0, 0)) == doctest::Approx(2.0));
  CHECK(std::abs(a.a(0, 1)) < 1e-15);
  CHECK(a.residual == doctest::Approx(1.0));

  const LowRank id = low_rank_from_gram(Matrix::identity(5), 5);
  CHECK(max_abs(transpose_times(id.a, id.a) - Matrix::identity(5)) < 1e-14);

  Stream rng(1);
  const Matrix b = test::random_matrix(2, 7, rng);
  const LowRank r2 = low_rank_from_gram(transpose_times(b, b), 2);
  CHECK(r2.residual < 1e-20 * 1e6);
  CHECK(max_abs(transpose_times(r2.a, r2.a) - transpose_times(b, b)) < 1e-10);

  for (int t = 0; t < 20; ++t) {
    const std::size_t L = 2 + rng.uniform_int(20);
    const std::size_t M = 1 + rng.uniform_int(L);
    const Matrix q = test::random_psd(L, rng);
    const LowRank lr = low_rank_from_gram(q, M);
    CHECK(lr.a.rows() == M);
    CHECK(std::abs(lr.residual - tail_energy(q, M)) <= 1e-8 * std::max(1.0, frobenius_norm(q) * frobenius_norm(q)));
  }
}

TEST_CASE("power rescale") {
  Fixture f;
  Stream rng(2);
  const Matrix a = power_rescale(test::random_matrix(4, 8, rng), f.spec, f.R_x);
  CHECK(transmit_power(a, f.spec, f.R_x) == doctest::Approx(f.spec.P).epsilon(1e-9));
  CHECK(max_abs(power_rescale(a, f.spec, f.R_x) - a) < 1e-12);
  const Matrix b = power_rescale(a * 0.5, f.spec, f.R_x);
  CHECK(max_abs(b - a) < 1e-12);
  try {
    power_rescale(Matrix(4, 8), f.spec, f.R_x);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::domain);
  }
}

TEST_CASE("left unitary freedom leaves the bound unchanged") {
  Fixture f;
  f.spec.sigma_v = 0.2;
  Stream rng(3);
  const Matrix a = test::random_matrix(4, 8, rng);
  const Matrix u = random_orthogonal(4, rng);
  CHECK(mse_lower_bound(u * a, f.spec, f.R, f.all).value ==
        doctest::Approx(mse_lower_bound(a, f.spec, f.R, f.all).value).epsilon(1e-10));
}

TEST_CASE("procedure 1") {
  Fixture f;
  const DesignResult r = design_procedure1(f.spec, f.R, f.R_x, f.all);
  CHECK(r.matrices[0].rows() == 4);
  CHECK(r.achieved_power == doctest::Approx(f.spec.P).epsilon(1e-6));
  CHECK(r.lb.value >= r.relaxation_bound - 1e-9);
  CHECK(r.solver.has_value());
  Stream rng(4);
  const DesignResult g = design_baseline(BaselineKind::gaussian, f.spec, f.R, f.R_x, f.all, &rng);
  CHECK(r.lb.value < g.lb.value);
}

TEST_CASE("procedure 1 meets closed form 1 under white prior") {
  Fixture f;
  const Matrix R = Matrix::identity(2);
  const Matrix R_x = source_covariance(8, 2, R, {});
  const DesignResult p = design_procedure1(f.spec, R, R_x, f.all);
  const DesignResult c = closed_form(1, f.spec, R, R_x, f.all);
  CHECK(p.lb.value == doctest::Approx(c.lb.value).epsilon(1e-3));
  CHECK(rows_tight(c.matrices[0], 1e-12));
}

TEST_CASE("closed form cases") {
  SUBCASE("case 1 nominal scale") {
    const Matrix R = Matrix::identity(3);
    const Matrix R_x = source_covariance(36, 3, R, {});
    const ChannelSpec s = test::identity_channel(36, 18, 0.5, 0.1, 0.0, 10.0);
    Stream rng(5);
    const DesignResult c = closed_form(1, s, R, R_x, sample_supports(36, 3, 50, rng));
    CHECK(c.rescale_factors[0] == doctest::Approx(std::sqrt(30.0 / 18.0)).epsilon(1e-12));
    CHECK(c.rescale_factors[0] == doctest::Approx(1.2910).epsilon(1e-4));
    CHECK(c.achieved_power == doctest::Approx(10.0).epsilon(1e-9));
  }
  SUBCASE("case 2 with identity channel agrees with case 1") {
    Fixture f;
    const Matrix R = Matrix::identity(2) * 2.0;
    const Matrix R_x = source_covariance(8, 2, R, {});
    const DesignResult c1 = closed_form(1, f.spec, R, R_x, f.all);
    const DesignResult c2 = closed_form(2, f.spec, R, R_x, f.all);
    CHECK(c2.lb.value == doctest::Approx(c1.lb.value).epsilon(1e-9));
    CHECK(rows_tight(c2.matrices[0], 1e-9));
  }
  SUBCASE("case 2 effective matrix is a tight frame") {
    Fixture f;
    Stream rng(6);
    f.spec.H = test::random_matrix(8, 8, rng);
    const Matrix R = Matrix::identity(2);
    const DesignResult c = closed_form(2, f.spec, R, f.R_x, f.all);
    CHECK(rows_tight(c.matrices[0] * f.spec.H, 1e-8));
    CHECK(c.achieved_power == doctest::Approx(10.0).epsilon(1e-9));
  }
  SUBCASE("case 4 has one active singular value") {
    Fixture f;
    const DesignResult c = [&] {
      DesignOptions o;
      o.force_asymptotic = true;
      return closed_form(4, f.spec, f.R, f.R_x, f.all, o);
    }();
    const Svd s = svd_thin(c.matrices[0]);
    CHECK(s.sigma[0] > 0.0);
    for (std::size_t i = 1; i < s.sigma.size(); ++i) CHECK(s.sigma[i] <= 1e-10 * s.sigma[0]);
    CHECK(c.achieved_power == doctest::Approx(10.0).epsilon(1e-9));
  }
  SUBCASE("preconditions") {
    Fixture f;
    auto kind_of = [&](int which, const ChannelSpec& s) {
      try {
        closed_form(which, s, f.R, f.R_x, f.all);
      } catch (const Error& e) {
        return e.kind();
      }
      return ErrorKind::io;
    };
    CHECK(kind_of(1, f.spec) == ErrorKind::case_mismatch);  // R not white
    CHECK(kind_of(3, f.spec) == ErrorKind::case_mismatch);  // σ_w > 0
    CHECK(kind_of(4, f.spec) == ErrorKind::case_mismatch);  // CSNR above threshold
  }
}

TEST_CASE("randomization baseline") {
  Fixture f;
  const GramSolution sdr = solve_sdr(sdr_instance(f.spec, f.R, f.R_x, f.all), {});
  const DesignResult one = design_randomization(f.spec, f.R, f.R_x, f.all, 1, 9, {}, &sdr);
  CHECK(one.achieved_power == doctest::Approx(10.0).epsilon(1e-9));
  const DesignResult ten = design_randomization(f.spec, f.R, f.R_x, f.all, 10, 9, {}, &sdr);
  const DesignResult twenty = design_randomization(f.spec, f.R, f.R_x, f.all, 20, 9, {}, &sdr);
  CHECK(ten.lb.value <= one.lb.value);
  CHECK(twenty.lb.value <= ten.lb.value);
  const DesignResult p = design_procedure1(f.spec, f.R, f.R_x, f.all, {}, &sdr);
  CHECK(p.lb.value <= twenty.lb.value);
}

TEST_CASE("baselines") {
  Fixture f;
  Stream rng(7);
  const DesignResult tf = design_baseline(BaselineKind::tight_frame, f.spec, f.R, f.R_x, f.all, &rng);
  CHECK(rows_tight(tf.matrices[0], 1e-10));
  const DesignResult g = design_baseline(BaselineKind::gaussian, f.spec, f.R, f.R_x, f.all, &rng);
  const DesignResult lm = design_baseline(BaselineKind::lmmse_min, f.spec, f.R, f.R_x, f.all);
  for (const auto* d : {&tf, &g, &lm}) CHECK(d->achieved_power == doctest::Approx(10.0).epsilon(1e-6));
  CHECK(lm.relaxation_bound <= lmmse_upper_bound(lm.matrices[0], f.spec, f.R_x));
  CHECK_THROWS_AS(design_baseline(BaselineKind::gaussian, f.spec, f.R, f.R_x, f.all, nullptr), Error);
}

TEST_CASE("upper-bound minimizing design beats gaussian on its own objective") {
  Fixture f;
  Stream rng(7);
  const DesignResult g = design_baseline(BaselineKind::gaussian, f.spec, f.R, f.R_x, f.all, &rng);
  const DesignResult lm = design_baseline(BaselineKind::lmmse_min, f.spec, f.R, f.R_x, f.all);
  const double ul = lmmse_upper_bound(lm.matrices[0], f.spec, f.R_x);
  const double ug = lmmse_upper_bound(g.matrices[0], f.spec, f.R_x);
  MESSAGE("linear bound: lmmse_min " << ul << ", gaussian " << ug << ", relaxation " << lm.relaxation_bound);
  CHECK(ul <= ug);
}

TEST_CASE("gaussian coherence at the reference size") {
  double sum = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Stream rng(seed, StreamDomain::test, 0);
    sum += mutual_coherence(test::random_matrix(20, 36, rng));
  }
  CHECK(std::abs(sum / 20.0 - 0.75) <= 0.12);
}

TEST_CASE("two-terminal designs") {
  const Matrix R = exponential_covariance(2, 0.5);
  const Matrix R_x = source_covariance(8, 2, R, {});
  const auto all = all_supports(8, 2);
  MultiTerminalSpec ms;
  ms.terminals[0] = test::identity_channel(8, 3, 0.5, 0.2, 0.0, 10.0);
  ms.terminals[1] = test::identity_channel(8, 3, 0.75, 0.2, 0.0, 10.0);
  ms.P = 10.0;

  ms.mode = MacMode::orthogonal;
  const DesignResult o = design_mac(ms, R, R_x, all);
  ms.mode = MacMode::coherent;
  const DesignResult c = design_mac(ms, R, R_x, all);
  const DesignResult ce = design_mac(ms, R, R_x, all, {}, false);
  for (const auto* d : {&o, &c, &ce}) {
    CHECK(d->matrices.size() == 2);
    CHECK(d->achieved_power == doctest::Approx(10.0).epsilon(1e-6));
  }
  CHECK(c.lb.value <= o.lb.value);
  CHECK(c.lb.value <= ce.lb.value * (1.0 + 1e-9));
  CHECK(c.alpha_objective <= ce.alpha_objective * (1.0 + 1e-9));
}

TEST_CASE("matrix csv round trip") {
  Stream rng(8);
  const Matrix a = test::random_matrix(3, 5, rng);
  std::stringstream ss;
  write_matrix_csv(ss, a, "procedure1");
  CHECK(ss.str().rfind("3,5,procedure1\n", 0) == 0);
  std::string method;
  const Matrix b = read_matrix_csv(ss, &method);
  CHECK(method == "procedure1");
  CHECK(max_abs(a - b) == 0.0);
}
