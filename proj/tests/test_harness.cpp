// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "csforge/errors.hpp"
#include "csforge/harness.hpp"
#include "csforge/selftest.hpp"
#include "helpers.hpp"

using namespace csforge;

namespace {

ExperimentConfig small() {
  ExperimentConfig c;
  c.experiment = "unit";
  c.N = 8;
  c.K = 2;
  c.M = {4};
  c.trials = 400;
  c.covariance_samples = 20000;
  c.designs = {"procedure1", "gaussian"};
  return c;
}

ErrorKind kind_of(const std::string& json_text) {
  try {
    validate(parse_config(json_text));
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::io;
}

}  // namespace

TEST_CASE("config parsing") {
  const ExperimentConfig c = parse_config(
      R"({"experiment":"x","N":10,"K":2,"g":[0.5,0.7],"sigma_w":0.2,"M":[3,5],"decoder":"omp",
          "designs":["procedure1","tight_frame"],"omega_prime_size":20})");
  CHECK(c.N == 10);
  CHECK(c.g[1] == 0.7);
  CHECK(c.sigma_w[0] == 0.2);
  CHECK(c.sigma_w[1] == 0.2);
  CHECK(c.M == std::vector<std::size_t>{3, 5});
  CHECK(c.decoder == Decoder::omp);
  CHECK(*c.omega_prime_size == 20);
  CHECK(c.P() == doctest::Approx(10.0));

  const ExperimentConfig back = parse_config(config_to_json(c));
  CHECK(config_to_json(back) == config_to_json(c));

  CHECK(kind_of(R"({"bogus":1})") == ErrorKind::validation);
  CHECK(kind_of(R"({"trials":0})") == ErrorKind::validation);
  CHECK(kind_of(R"({"M":[8,4]})") == ErrorKind::validation);
  CHECK(kind_of(R"({"rho":1.0})") == ErrorKind::validation);
  CHECK(kind_of(R"({"designs":["nope"]})") == ErrorKind::validation);
  CHECK(kind_of("not json") == ErrorKind::validation);
  CHECK(kind_of(R"({"sweep_axis":"gain_ratio","sweep_values":[1,2]})") == ErrorKind::validation);
}

TEST_CASE("axis application") {
  ExperimentConfig c = small();
  c.sweep_axis = SweepAxis::CSNR;
  c.sweep_values = {100.0};
  const PointConfig p = at_axis(c, 100.0);
  CHECK(p.cfg.g[0] * p.cfg.g[0] / (c.sigma_w[0] * c.sigma_w[0]) == doctest::Approx(100.0));
  c.sweep_axis = SweepAxis::P_dB;
  CHECK(at_axis(c, 20.0).cfg.P() == doctest::Approx(100.0));
  c.setup = Setup::orthogonal;
  c.designs = {"procedure1"};
  c.sweep_axis = SweepAxis::gain_ratio;
  CHECK(at_axis(c, 3.0).cfg.g[1] == doctest::Approx(3.0 * c.g[0]));
}

TEST_CASE("single trials") {
  ExperimentConfig c = small();
  c.decoder = Decoder::oracle;
  c.sigma_w = {1e-9, 1e-9};
  const Scenario sc = make_scenario(c);
  const PointConfig p = at_axis(c, 4.0);
  const BuiltDesign d = build_design("gaussian", p, sc);
  const WhitenedModel m(d.effective(), sc.source.R);
  for (std::size_t t = 0; t < 20; ++t) CHECK(run_trial(c, sc, d, m, t).se <= 1e-10);

  // no information: squared error is the source energy
  BuiltDesign zero = d;
  zero.matrices[0] = Matrix(4, 8);
  c.sigma_w = {0.1, 0.1};
  zero.channel.sigma_w = 0.1;
  const WhitenedModel mz(zero.effective(), sc.source.R);
  const int T = 4000;
  double s = 0.0, s2 = 0.0;
  for (int t = 0; t < T; ++t) {
    const double v = run_trial(c, sc, zero, mz, t).se;
    s += v;
    s2 += v * v;
  }
  const double mean = s / T;
  const double se = std::sqrt((s2 / T - mean * mean) / T);
  CHECK(std::abs(mean - trace(sc.source.R)) <= 3.0 * se);

  const TrialResult a = run_trial(c, sc, d, m, 17);
  const TrialResult b = run_trial(c, sc, d, m, 17);
  CHECK(a.se == b.se);
}

TEST_CASE("monte carlo is independent of the thread count") {
  ExperimentConfig c = small();
  const Scenario sc = make_scenario(c);
  const PointConfig p = at_axis(c, 4.0);
  const BuiltDesign d = build_design("procedure1", p, sc);
  const SweepRecord r1 = run_monte_carlo(p, sc, d, 1);
  const SweepRecord r4 = run_monte_carlo(p, sc, d, 4);
  CHECK(r1.nmse_db == r4.nmse_db);
  CHECK(r1.support_recovery == r4.support_recovery);
  CHECK(r1.nmse_stderr_db == r4.nmse_stderr_db);
}

TEST_CASE("standard error shrinks with trials") {
  ExperimentConfig c = small();
  c.decoder = Decoder::oracle;
  const Scenario sc = make_scenario(c);
  std::vector<double> se;
  for (std::size_t T : {1000, 2000, 4000}) {
    c.trials = T;
    const PointConfig p = at_axis(c, 4.0);
    const BuiltDesign d = build_design("gaussian", p, sc);
    se.push_back(run_monte_carlo(p, sc, d).nmse_stderr_db);
  }
  CHECK(se[0] / se[1] == doctest::Approx(std::sqrt(2.0)).epsilon(0.2));
  CHECK(se[1] / se[2] == doctest::Approx(std::sqrt(2.0)).epsilon(0.2));
}

TEST_CASE("oracle-class records sit above the bound") {
  ExperimentConfig c = small();
  c.M = {3, 5};
  c.trials = 2000;
  for (Decoder dec : {Decoder::oracle, Decoder::exhaustive}) {
    c.decoder = dec;
    for (const auto& r : run_sweep(c).records) CHECK(r.nmse_db >= r.lb_db - 0.5);
  }
}

TEST_CASE("sweep output") {
  ExperimentConfig c = small();
  c.M = {3, 5};
  c.trials = 200;
  c.decoder = Decoder::omp;
  const SweepOutput a = run_sweep(c);
  CHECK(a.records.size() == 4);
  std::ostringstream ca, cb;
  write_csv(ca, a.records);
  write_csv(cb, run_sweep(c, 3).records);
  CHECK(ca.str() == cb.str());
  const std::string head = ca.str().substr(0, ca.str().find('\n'));
  CHECK(head ==
        "experiment,setup,design,decoder,axis_name,axis_value,M,P_dB,CSNR,trials,seed,nmse_db,"
        "support_recovery,lb_db,wall_ms");
  const std::string js = sweep_to_json(a);
  CHECK(js.find("\"omega_prime_size\"") != std::string::npos);
  CHECK(js.find("\"records\"") != std::string::npos);
}

TEST_CASE("bound-only sweep falls with M") {
  ExperimentConfig c = small();
  c.N = 12;
  c.M = {2, 4, 6, 8, 10, 12};
  c.decoder = Decoder::none;
  c.designs = {"procedure1"};
  const SweepOutput o = run_sweep(c);
  for (std::size_t i = 1; i < o.records.size(); ++i)
    CHECK(o.records[i].lb_db < o.records[i - 1].lb_db);
}

TEST_CASE("sampled bound approaches the exact one") {
  const Matrix R = exponential_covariance(2, 0.5);
  ChannelSpec s = test::identity_channel(10, 4, 0.5, 0.1, 0.0, 10.0);
  Stream rng(1);
  const Matrix a = power_rescale(test::random_matrix(4, 10, rng), s, source_covariance(10, 2, R, {}));
  const double exact = mse_lower_bound(a, s, R, all_supports(10, 2)).value;
  std::vector<double> err;
  for (std::size_t size : {10, 30, 45}) {
    double e = 0.0;
    for (int r = 0; r < 100; ++r) {
      Stream d(size * 1000 + r);
      e += std::abs(mse_lower_bound(a, s, R, sample_supports(10, 2, size, d)).value - exact);
    }
    err.push_back(e / 100);
  }
  CHECK(err[1] < err[0]);
  CHECK(err[2] <= 1e-12);
}

TEST_CASE("presets are valid") {
  for (const auto& name : preset_names())
    for (Scale sc : {Scale::desk, Scale::paper})
      for (const auto& c : preset(name, sc)) CHECK_NOTHROW(validate(c));
  CHECK_THROWS_AS(preset("fig1", Scale::desk), Error);
  const auto f4 = preset("fig4", Scale::desk);
  CHECK(f4.front().trials == 2000);
  CHECK(preset("fig4", Scale::paper).front().trials == 5000);
}

TEST_CASE("thread resolution") {
  CHECK(resolve_threads(3) == 3);
  CHECK(resolve_threads() >= 1);
}

TEST_CASE("selftest passes") {
  std::ostringstream os;
  CHECK(run_selftest(os));
}
