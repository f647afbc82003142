// SPDX-License-Identifier: Apache-2.0
#include "csforge/harness.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "csforge/errors.hpp"

namespace csforge {

using json = nlohmann::ordered_json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double to_db(double v) { return 10.0 * std::log10(v); }

const std::set<std::string>& single_tags() {
  static const std::set<std::string> t{"procedure1",   "randomization", "closed_form1",
                                       "closed_form2", "closed_form3",  "closed_form4",
                                       "gaussian",     "tight_frame",   "lmmse_min",
                                       "sdr"};
  return t;
}

const std::set<std::string>& mac_tags() {
  static const std::set<std::string> t{"procedure1", "equal_alpha", "single", "gaussian",
                                       "tight_frame", "sdr"};
  return t;
}

template <class E>
E parse_enum(const std::string& v, const std::map<std::string, E>& names, const char* what) {
  auto it = names.find(v);
  if (it == names.end()) fail(ErrorKind::validation, std::string("unknown ") + what + " '" + v + "'");
  return it->second;
}

const std::map<std::string, Setup> kSetups{
    {"single", Setup::single}, {"orthogonal", Setup::orthogonal}, {"coherent", Setup::coherent}};
const std::map<std::string, Decoder> kDecoders{
    {"omp", Decoder::omp},       {"random_omp", Decoder::random_omp},
    {"oracle", Decoder::oracle}, {"exhaustive", Decoder::exhaustive},
    {"lmmse", Decoder::lmmse},   {"none", Decoder::none}};
const std::map<std::string, SweepAxis> kAxes{{"M", SweepAxis::M},
                                             {"P_dB", SweepAxis::P_dB},
                                             {"CSNR", SweepAxis::CSNR},
                                             {"gain_ratio", SweepAxis::gain_ratio}};

std::array<double, 2> pair_value(const json& v, const char* key) {
  if (v.is_number()) return {v.get<double>(), v.get<double>()};
  if (v.is_array() && (v.size() == 1 || v.size() == 2)) {
    const double a = v[0].get<double>();
    return {a, v.size() == 2 ? v[1].get<double>() : a};
  }
  fail(ErrorKind::validation, std::string(key) + " must be a number or a list of 1 or 2 numbers");
}

std::uint64_t tag_code(const std::string& tag) {
  // FNV-1a, stable across platforms
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : tag) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h & 0xffffffffULL;
}

DesignOptions design_options(const ExperimentConfig& c) {
  DesignOptions o;
  o.backend = c.backend;
  o.reduced.tol = c.solver_tol;
  o.reduced.max_iter = c.solver_max_iter;
  return o;
}

bool uses_sdr(const std::string& tag) {
  return tag == "procedure1" || tag == "randomization" || tag == "sdr" || tag == "equal_alpha";
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

json num(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

}  // namespace

const char* to_string(Setup s) {
  switch (s) {
    case Setup::single: return "single";
    case Setup::orthogonal: return "orthogonal";
    case Setup::coherent: return "coherent";
  }
  return "?";
}

const char* to_string(Decoder d) {
  switch (d) {
    case Decoder::omp: return "omp";
    case Decoder::random_omp: return "random_omp";
    case Decoder::oracle: return "oracle";
    case Decoder::exhaustive: return "exhaustive";
    case Decoder::lmmse: return "lmmse";
    case Decoder::none: return "none";
  }
  return "?";
}

const char* to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::M: return "M";
    case SweepAxis::P_dB: return "P_dB";
    case SweepAxis::CSNR: return "CSNR";
    case SweepAxis::gain_ratio: return "gain_ratio";
  }
  return "?";
}

double ExperimentConfig::P() const { return std::pow(10.0, P_dB / 10.0); }

std::vector<double> ExperimentConfig::axis_values() const {
  if (sweep_axis != SweepAxis::M) return sweep_values;
  std::vector<double> v;
  for (std::size_t m : M) v.push_back(static_cast<double>(m));
  return v;
}

void validate(const ExperimentConfig& c) {
  auto check = [](bool ok, const std::string& msg) {
    if (!ok) fail(ErrorKind::validation, msg);
  };
  check(!c.experiment.empty() && c.experiment.find_first_of(",\n\"") == std::string::npos,
        "experiment name must be non-empty and free of commas and quotes");
  check(c.N >= 2, "N must be at least 2");
  check(c.K >= 1 && c.K < c.N, "need 1 <= K < N");
  check(c.rho >= 0.0 && c.rho < 1.0, "rho must lie in [0, 1)");
  check(c.trials >= 1, "trials must be at least 1");
  check(std::isfinite(c.P_dB), "P_dB must be finite");
  check(!c.M.empty(), "M needs at least one value");
  for (std::size_t m : c.M) check(m >= 1 && m <= c.N, "every M must satisfy 1 <= M <= N");
  const bool mac = c.setup != Setup::single;
  for (std::size_t t = 0; t < (mac ? 2u : 1u); ++t) {
    check(c.g[t] > 0.0 && std::isfinite(c.g[t]), "g must be positive");
    check(c.sigma_w[t] >= 0.0 && std::isfinite(c.sigma_w[t]), "sigma_w must be nonnegative");
    check(c.sigma_v[t] >= 0.0 && std::isfinite(c.sigma_v[t]), "sigma_v must be nonnegative");
  }
  if (c.setup == Setup::coherent) {
    check(c.sigma_w[0] == c.sigma_w[1], "coherent setup needs one sigma_w for both terminals");
    check((c.sigma_v[0] > 0.0) == (c.sigma_v[1] > 0.0),
          "coherent setup needs sigma_v zero for both terminals or positive for both");
  }
  if (c.sweep_axis == SweepAxis::M) {
    for (std::size_t i = 1; i < c.M.size(); ++i)
      check(c.M[i] > c.M[i - 1], "M sweep list must be strictly increasing");
  } else {
    check(c.M.size() == 1, "M must be a single value when sweeping another axis");
    check(!c.sweep_values.empty(), "sweep_values needs at least one value");
    for (std::size_t i = 1; i < c.sweep_values.size(); ++i)
      check(c.sweep_values[i] > c.sweep_values[i - 1], "sweep_values must be strictly increasing");
    for (double v : c.sweep_values) {
      check(std::isfinite(v), "sweep_values must be finite");
      if (c.sweep_axis == SweepAxis::CSNR || c.sweep_axis == SweepAxis::gain_ratio)
        check(v > 0.0, "CSNR and gain_ratio values must be positive");
    }
    if (c.sweep_axis == SweepAxis::gain_ratio) check(mac, "gain_ratio sweeps need a MAC setup");
  }
  check(!c.designs.empty(), "designs needs at least one entry");
  const auto& known = mac ? mac_tags() : single_tags();
  for (const auto& d : c.designs)
    check(known.count(d) == 1,
          "design '" + d + "' is not available for the " + to_string(c.setup) + " setup");
  check(std::set<std::string>(c.designs.begin(), c.designs.end()).size() == c.designs.size(),
        "designs must not repeat");
  if (c.omega_prime_size) check(*c.omega_prime_size >= 1, "omega_prime_size must be at least 1");
  check(c.random_omp_draws >= 1, "random_omp_draws must be at least 1");
  check(c.randomizations >= 1, "randomizations must be at least 1");
  check(c.covariance_samples >= 2, "covariance_samples must be at least 2");
  check(c.solver_tol > 0.0, "solver_tol must be positive");
  check(c.solver_max_iter >= 1, "solver_max_iter must be positive");
  if (c.decoder == Decoder::exhaustive)
    check(binomial(c.N, c.K) <= static_cast<double>(c.enumeration_cap),
          "exhaustive decoder needs C(N,K) within the enumeration cap");
}

ExperimentConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorKind::validation, std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) fail(ErrorKind::validation, "config must be a JSON object");
  ExperimentConfig c;
  try {
    for (auto it = j.begin(); it != j.end(); ++it) {
      const std::string& k = it.key();
      const json& v = it.value();
      if (k == "experiment") c.experiment = v.get<std::string>();
      else if (k == "setup") c.setup = parse_enum(v.get<std::string>(), kSetups, "setup");
      else if (k == "N") c.N = v.get<std::size_t>();
      else if (k == "K") c.K = v.get<std::size_t>();
      else if (k == "rho") c.rho = v.get<double>();
      else if (k == "g") c.g = pair_value(v, "g");
      else if (k == "g1") c.g[0] = v.get<double>();
      else if (k == "g2") c.g[1] = v.get<double>();
      else if (k == "sigma_w") c.sigma_w = pair_value(v, "sigma_w");
      else if (k == "sigma_v") c.sigma_v = pair_value(v, "sigma_v");
      else if (k == "P_dB") c.P_dB = v.get<double>();
      else if (k == "M") {
        if (v.is_array()) c.M = v.get<std::vector<std::size_t>>();
        else c.M = {v.get<std::size_t>()};
      } else if (k == "sweep_axis") c.sweep_axis = parse_enum(v.get<std::string>(), kAxes, "sweep_axis");
      else if (k == "sweep_values") c.sweep_values = v.get<std::vector<double>>();
      else if (k == "trials") {
        if (v.is_number_integer() && v.get<long long>() < 0)
          fail(ErrorKind::validation, "trials must be at least 1");
        c.trials = v.get<std::size_t>();
      } else if (k == "seed") c.seed = v.get<std::uint64_t>();
      else if (k == "designs") c.designs = v.get<std::vector<std::string>>();
      else if (k == "decoder") c.decoder = parse_enum(v.get<std::string>(), kDecoders, "decoder");
      else if (k == "omega_prime_size") {
        if (v.is_null()) c.omega_prime_size.reset();
        else c.omega_prime_size = v.get<std::size_t>();
      } else if (k == "resample_omega") c.resample_omega = v.get<bool>();
      else if (k == "random_omp_draws") c.random_omp_draws = v.get<std::size_t>();
      else if (k == "randomizations") c.randomizations = v.get<std::size_t>();
      else if (k == "covariance") {
        const std::string s = v.get<std::string>();
        if (s != "sampled" && s != "analytic")
          fail(ErrorKind::validation, "covariance must be 'sampled' or 'analytic'");
        c.sampled_covariance = s == "sampled";
      } else if (k == "covariance_samples") c.covariance_samples = v.get<std::size_t>();
      else if (k == "enumeration_cap") c.enumeration_cap = v.get<std::size_t>();
      else if (k == "backend") {
        const std::string s = v.get<std::string>();
        if (s != "reduced" && s != "admm")
          fail(ErrorKind::validation, "backend must be 'reduced' or 'admm'");
        c.backend = s == "admm" ? SdrBackend::admm : SdrBackend::reduced;
      } else if (k == "solver_tol") c.solver_tol = v.get<double>();
      else if (k == "solver_max_iter") c.solver_max_iter = v.get<int>();
      else if (k == "timing") c.timing = v.get<bool>();
      else fail(ErrorKind::validation, "unknown config key '" + k + "'");
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::validation, std::string("bad config value: ") + e.what());
  }
  validate(c);
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

namespace {

json config_json(const ExperimentConfig& c) {
  json j;
  j["experiment"] = c.experiment;
  j["setup"] = to_string(c.setup);
  j["N"] = c.N;
  j["K"] = c.K;
  j["rho"] = c.rho;
  j["g"] = {c.g[0], c.g[1]};
  j["sigma_w"] = {c.sigma_w[0], c.sigma_w[1]};
  j["sigma_v"] = {c.sigma_v[0], c.sigma_v[1]};
  j["P_dB"] = c.P_dB;
  j["M"] = c.M;
  j["sweep_axis"] = to_string(c.sweep_axis);
  j["sweep_values"] = c.sweep_values;
  j["trials"] = c.trials;
  j["seed"] = c.seed;
  j["designs"] = c.designs;
  j["decoder"] = to_string(c.decoder);
  j["omega_prime_size"] = c.omega_prime_size ? json(*c.omega_prime_size) : json(nullptr);
  j["resample_omega"] = c.resample_omega;
  j["random_omp_draws"] = c.random_omp_draws;
  j["randomizations"] = c.randomizations;
  j["covariance"] = c.sampled_covariance ? "sampled" : "analytic";
  j["covariance_samples"] = c.covariance_samples;
  j["enumeration_cap"] = c.enumeration_cap;
  j["backend"] = c.backend == SdrBackend::admm ? "admm" : "reduced";
  j["solver_tol"] = c.solver_tol;
  j["solver_max_iter"] = c.solver_max_iter;
  j["timing"] = c.timing;
  return j;
}

}  // namespace

std::string config_to_json(const ExperimentConfig& c, int indent) {
  return config_json(c).dump(indent);
}

PointConfig at_axis(const ExperimentConfig& c, double value) {
  PointConfig p{c, value, c.M.front()};
  switch (c.sweep_axis) {
    case SweepAxis::M:
      p.M = static_cast<std::size_t>(std::llround(value));
      break;
    case SweepAxis::P_dB:
      p.cfg.P_dB = value;
      break;
    case SweepAxis::CSNR:
      for (int t = 0; t < 2; ++t) p.cfg.g[t] = std::sqrt(value) * c.sigma_w[t];
      break;
    case SweepAxis::gain_ratio:
      p.cfg.g[1] = value * c.g[0];
      break;
  }
  p.cfg.M = {p.M};
  return p;
}

ChannelSpec channel_spec(const ExperimentConfig& c, std::size_t M, std::size_t terminal) {
  ChannelSpec s;
  s.H = Matrix::identity(c.N);
  s.g = c.g[terminal];
  s.sigma_v = c.sigma_v[terminal];
  s.sigma_w = c.sigma_w[terminal];
  s.M = M;
  s.P = c.P();
  return s;
}

MultiTerminalSpec mac_spec(const ExperimentConfig& c, std::size_t M) {
  MultiTerminalSpec m;
  m.terminals = {channel_spec(c, M, 0), channel_spec(c, M, 1)};
  m.mode = c.setup == Setup::coherent ? MacMode::coherent : MacMode::orthogonal;
  m.P = c.P();
  return m;
}

Scenario make_scenario(const ExperimentConfig& c) {
  validate(c);
  Scenario sc;
  CovarianceMode mode;
  mode.kind = c.sampled_covariance ? CovarianceMode::sampled : CovarianceMode::analytic;
  mode.samples = c.covariance_samples;
  mode.seed = c.seed;
  sc.source = SourceModel::make(c.N, c.K, exponential_covariance(c.K, c.rho), mode);
  const double total = binomial(c.N, c.K);
  std::optional<std::size_t> sample = c.omega_prime_size;
  if (!sample && total > static_cast<double>(c.enumeration_cap)) {
    sample = 2500;
    sc.notes.push_back("C(N,K) exceeds the enumeration cap; using a sampled support set of 2500");
  }
  if (sample) {
    Stream rng(c.seed, StreamDomain::omega, 0);
    sc.design_supports = sample_supports(c.N, c.K, *sample, rng, c.enumeration_cap);
    if (c.resample_omega) {
      Stream rng2(c.seed, StreamDomain::omega, 1);
      sc.eval_supports = sample_supports(c.N, c.K, *sample, rng2, c.enumeration_cap);
    } else {
      sc.eval_supports = sc.design_supports;
    }
  } else {
    sc.design_supports = all_supports(c.N, c.K, c.enumeration_cap);
    sc.eval_supports = sc.design_supports;
  }
  return sc;
}

EffectiveModel BuiltDesign::effective() const {
  if (is_mac) return effective_model(matrices.at(0), matrices.at(1), mac);
  return effective_model(matrices.at(0), channel);
}

namespace {

GramSolution point_sdr(const PointConfig& p, const Scenario& sc) {
  const ExperimentConfig& c = p.cfg;
  const Matrix& R = sc.source.R;
  const Matrix& Rx = sc.source.R_x;
  if (c.setup == Setup::single)
    return solve_sdr(sdr_instance(channel_spec(c, p.M), R, Rx, sc.design_supports),
                     design_options(c));
  return solve_sdr(sdr_instance(mac_spec(c, p.M), R, Rx, sc.design_supports), design_options(c));
}

}  // namespace

BuiltDesign build_design(const std::string& tag, const PointConfig& p, const Scenario& sc,
                         const GramSolution* shared_sdr) {
  const ExperimentConfig& c = p.cfg;
  const Matrix& R = sc.source.R;
  const Matrix& Rx = sc.source.R_x;
  const DesignOptions opt = design_options(c);
  const SupportCollection& sup = sc.design_supports;
  BuiltDesign d;
  d.tag = tag;
  d.setup = c.setup;
  GramSolution local;
  if (uses_sdr(tag) && !shared_sdr && !(c.setup != Setup::single && tag == "single")) {
    local = point_sdr(p, sc);
    shared_sdr = &local;
  }
  Stream rng(c.seed, StreamDomain::design, (std::uint64_t{1} << 40) + tag_code(tag));

  const bool mac = c.setup != Setup::single;
  if (!mac || tag == "single") {
    const ChannelSpec spec = channel_spec(c, p.M, 0);
    d.channel = spec;
    if (tag == "procedure1" || tag == "single") {
      d.result = design_procedure1(spec, R, Rx, sup, opt, mac ? nullptr : shared_sdr);
      if (tag == "single") d.result.method = "single";
    } else if (tag == "randomization") {
      d.result = design_randomization(spec, R, Rx, sup, c.randomizations, c.seed, opt, shared_sdr);
    } else if (tag.rfind("closed_form", 0) == 0) {
      d.result = closed_form(tag.back() - '0', spec, R, Rx, sup, opt);
    } else if (tag == "gaussian") {
      d.result = design_baseline(BaselineKind::gaussian, spec, R, Rx, sup, &rng, opt);
    } else if (tag == "tight_frame") {
      d.result = design_baseline(BaselineKind::tight_frame, spec, R, Rx, sup, &rng, opt);
    } else if (tag == "lmmse_min") {
      d.result = design_baseline(BaselineKind::lmmse_min, spec, R, Rx, sup, &rng, opt);
    } else if (tag == "sdr") {
      d.result.method = "sdr";
      d.result.relaxation_bound = shared_sdr->objective;
      d.result.lb.value = shared_sdr->objective;
      d.result.lb.support_count_used = sup.size();
      d.result.lb.exact = sup.exact;
      d.result.solver = SolverSummary{shared_sdr->backend, to_string(shared_sdr->status),
                                      shared_sdr->iterations, shared_sdr->objective,
                                      shared_sdr->residual};
      d.decodable = false;
    } else {
      fail(ErrorKind::validation, "unknown design '" + tag + "'");
    }
    if (d.decodable) {
      d.matrices = d.result.matrices;
      d.lb_eval = &sc.eval_supports == &sc.design_supports || !c.resample_omega
                      ? d.result.lb.value
                      : mse_lower_bound(d.matrices[0], spec, R, sc.eval_supports).value;
      const Matrix eff = d.matrices[0] * spec.H;
      d.mu = mutual_coherence(eff);
      if (spec.sigma_v == 0.0) {
        try {
          d.sandwich = coherence_sandwich(eff, spec, R);
        } catch (const Error&) {
        }
      }
    } else {
      d.lb_eval = d.result.lb.value;
    }
    return d;
  }

  const MultiTerminalSpec ms = mac_spec(c, p.M);
  d.is_mac = true;
  d.mac = ms;
  if (tag == "procedure1" || tag == "equal_alpha") {
    d.result = design_mac(ms, R, Rx, sup, opt, tag == "procedure1", shared_sdr);
  } else if (tag == "gaussian" || tag == "tight_frame") {
    const BaselineKind kind = tag == "gaussian" ? BaselineKind::gaussian : BaselineKind::tight_frame;
    DesignResult r1 = design_baseline(kind, ms.terminals[0], R, Rx, sup, &rng, opt);
    DesignResult r2 = design_baseline(kind, ms.terminals[1], R, Rx, sup, &rng, opt);
    Matrix a1 = r1.matrices[0];
    Matrix a2 = r2.matrices[0];
    const double s = std::sqrt(ms.P / transmit_power(a1, a2, ms, Rx));
    a1 *= s;
    a2 *= s;
    d.result.method = tag;
    d.result.matrices = {a1, a2};
    d.result.achieved_power = transmit_power(a1, a2, ms, Rx);
    d.result.lb = mse_lower_bound(a1, a2, ms, R, sup);
  } else if (tag == "sdr") {
    d.result.method = "sdr";
    d.result.relaxation_bound = shared_sdr->objective;
    d.result.lb.value = shared_sdr->objective;
    d.decodable = false;
  } else {
    fail(ErrorKind::validation, "unknown design '" + tag + "'");
  }
  if (d.decodable) {
    d.matrices = d.result.matrices;
    d.lb_eval = !c.resample_omega
                    ? d.result.lb.value
                    : mse_lower_bound(d.matrices[0], d.matrices[1], ms, R, sc.eval_supports).value;
    d.mu = mutual_coherence(d.effective().B);
  } else {
    d.lb_eval = d.result.lb.value;
  }
  return d;
}

TrialResult run_trial(const ExperimentConfig& c, const Scenario& sc, const BuiltDesign& d,
                      const WhitenedModel& model, std::size_t index, const Matrix* lmmse) {
  Stream rng(c.seed, StreamDomain::trial, index);
  const SourceDraw src = draw_source(sc.source, rng);
  const std::size_t n = c.N;

  // received vector, built from the physical chain rather than the effective model
  auto terminal_out = [&](const Matrix& a, const ChannelSpec& s) {
    Vector u = s.H * src.x;
    if (s.sigma_v > 0.0)
      for (double& v : u) v += s.sigma_v * rng.normal();
    Vector y = a * u;
    for (double& v : y) v *= s.g;
    return y;
  };
  auto add_noise = [&](Vector& y, double sw) {
    if (sw > 0.0)
      for (double& v : y) v += sw * rng.normal();
  };
  Vector y;
  if (!d.is_mac) {
    y = terminal_out(d.matrices[0], d.channel);
    add_noise(y, d.channel.sigma_w);
  } else if (d.mac.mode == MacMode::orthogonal) {
    Vector y1 = terminal_out(d.matrices[0], d.mac.terminals[0]);
    Vector y2 = terminal_out(d.matrices[1], d.mac.terminals[1]);
    add_noise(y1, d.mac.terminals[0].sigma_w);
    add_noise(y2, d.mac.terminals[1].sigma_w);
    y = y1;
    y.insert(y.end(), y2.begin(), y2.end());
  } else {
    y = terminal_out(d.matrices[0], d.mac.terminals[0]);
    const Vector y2 = terminal_out(d.matrices[1], d.mac.terminals[1]);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += y2[i];
    add_noise(y, d.mac.terminals[0].sigma_w);
  }
  const Vector yw = model.whiten(y);

  DecodeResult dec;
  switch (c.decoder) {
    case Decoder::omp:
      dec = omp(yw, model.B(), c.K);
      break;
    case Decoder::random_omp:
      dec = random_omp(yw, model, c.K, c.random_omp_draws, rng);
      break;
    case Decoder::oracle:
      dec.x_hat = model.oracle_estimate_whitened(yw, src.support);
      dec.support_hat = src.support;
      break;
    case Decoder::exhaustive:
      dec = exhaustive_mmse(yw, model, sc.eval_supports);
      break;
    case Decoder::lmmse:
      require(lmmse != nullptr, ErrorKind::validation, "lmmse decoder needs its gain");
      dec.x_hat = *lmmse * yw;
      dec.support_hat = top_k_support(dec.x_hat, c.K);
      break;
    case Decoder::none:
      fail(ErrorKind::validation, "run_trial called without a decoder");
  }
  TrialResult r;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = src.x[i] - dec.x_hat[i];
    r.se += e * e;
  }
  r.match = support_match(src.support, dec.support_hat);
  if (!std::isfinite(r.se)) fail(ErrorKind::solver, "decoder produced a non-finite estimate");
  return r;
}

std::size_t resolve_threads(std::size_t threads) {
  if (threads > 0) return threads;
  if (const char* env = std::getenv("CS_FORGE_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? hw : 1;
}

SweepRecord run_monte_carlo(const PointConfig& p, const Scenario& sc, const BuiltDesign& d,
                            std::size_t threads) {
  const ExperimentConfig& c = p.cfg;
  const auto start = std::chrono::steady_clock::now();
  SweepRecord rec;
  rec.experiment = c.experiment;
  rec.setup = to_string(c.setup);
  rec.design = d.tag;
  rec.decoder = to_string(c.decoder);
  rec.axis_name = to_string(c.sweep_axis);
  rec.axis_value = p.axis_value;
  rec.M = p.M;
  rec.P_dB = c.P_dB;
  rec.CSNR = c.sigma_w[0] > 0.0 ? c.g[0] * c.g[0] / (c.sigma_w[0] * c.sigma_w[0])
                                : std::numeric_limits<double>::infinity();
  rec.seed = c.seed;
  rec.lb_db = to_db(d.lb_eval / static_cast<double>(c.K));
  rec.mu = d.mu;
  rec.sandwich_lower_db = to_db(d.sandwich.lower / static_cast<double>(c.K));
  rec.sandwich_upper_db = to_db(d.sandwich.upper / static_cast<double>(c.K));
  if (std::isfinite(d.result.relaxation_bound))
    rec.relaxation_db = to_db(d.result.relaxation_bound / static_cast<double>(c.K));
  rec.achieved_power = d.decodable ? d.result.achieved_power : kNaN;
  rec.alphas = d.result.rescale_factors;
  rec.notes = d.result.notes;
  rec.notes.insert(rec.notes.end(), sc.notes.begin(), sc.notes.end());

  if (c.decoder != Decoder::none && d.decodable) {
    const WhitenedModel model(d.effective(), sc.source.R);
    Matrix gain;
    if (c.decoder == Decoder::lmmse) gain = lmmse_gain(model, sc.source.R_x);
    const std::size_t T = c.trials;
    std::vector<TrialResult> res(T);
    std::vector<char> ok(T, 0);
    std::vector<std::string> err(T);
    parallel_for(T, resolve_threads(threads), [&](std::size_t t) {
      try {
        res[t] = run_trial(c, sc, d, model, t, c.decoder == Decoder::lmmse ? &gain : nullptr);
        ok[t] = 1;
      } catch (const Error& e) {
        err[t] = e.what();
      }
    });
    double s = 0.0, s2 = 0.0, m = 0.0, m2 = 0.0;
    std::size_t good = 0;
    std::string first_err;
    for (std::size_t t = 0; t < T; ++t) {
      if (!ok[t]) {
        if (first_err.empty()) first_err = "trial " + std::to_string(t) + ": " + err[t];
        continue;
      }
      ++good;
      s += res[t].se;
      s2 += res[t].se * res[t].se;
      m += res[t].match;
      m2 += res[t].match * res[t].match;
    }
    rec.failures = T - good;
    if (rec.failures * 100 > T)
      fail(ErrorKind::solver, std::to_string(rec.failures) + " of " + std::to_string(T) +
                                  " trials failed for design " + d.tag + "; first: " + first_err);
    const double gd = static_cast<double>(good);
    const double mean = s / gd;
    const double var = good > 1 ? std::max(s2 / gd - mean * mean, 0.0) * gd / (gd - 1.0) : 0.0;
    const double mmean = m / gd;
    const double mvar = good > 1 ? std::max(m2 / gd - mmean * mmean, 0.0) * gd / (gd - 1.0) : 0.0;
    rec.trials = good;
    rec.nmse_db = to_db(mean / static_cast<double>(c.K));
    rec.nmse_stderr_db = 10.0 / std::log(10.0) * std::sqrt(var / gd) / mean;
    rec.support_recovery = mmean;
    rec.support_stderr = std::sqrt(mvar / gd);
  }
  if (c.timing)
    rec.wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

SweepOutput run_sweep(const ExperimentConfig& c, std::size_t threads) {
  validate(c);
  const std::size_t nt = resolve_threads(threads);
  const Scenario sc = make_scenario(c);
  const std::vector<double> axis = c.axis_values();
  std::vector<PointConfig> points;
  for (double v : axis) points.push_back(at_axis(c, v));

  bool need_sdr = false;
  for (const auto& tag : c.designs)
    if (uses_sdr(tag) && !(c.setup != Setup::single && tag == "single")) need_sdr = true;
  std::vector<GramSolution> sdrs(points.size());
  if (need_sdr)
    parallel_for(points.size(), nt, [&](std::size_t i) { sdrs[i] = point_sdr(points[i], sc); });

  const std::size_t nd = c.designs.size();
  std::vector<BuiltDesign> built(points.size() * nd);
  std::vector<double> build_ms(built.size(), 0.0);
  parallel_for(built.size(), nt, [&](std::size_t k) {
    const std::size_t i = k / nd;
    const auto t0 = std::chrono::steady_clock::now();
    built[k] = build_design(c.designs[k % nd], points[i], sc, need_sdr ? &sdrs[i] : nullptr);
    build_ms[k] =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  });

  SweepOutput out;
  out.configs.push_back(c);
  for (std::size_t k = 0; k < built.size(); ++k) {
    SweepRecord r = run_monte_carlo(points[k / nd], sc, built[k], nt);
    if (c.timing) r.wall_ms += build_ms[k];
    out.records.push_back(std::move(r));
  }
  return out;
}

SweepOutput run_sweeps(const std::vector<ExperimentConfig>& cs, std::size_t threads) {
  SweepOutput out;
  for (const auto& c : cs) {
    SweepOutput one = run_sweep(c, threads);
    out.configs.push_back(c);
    for (auto& r : one.records) out.records.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// presets

std::vector<std::string> preset_names() {
  return {"fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "fig8", "fig9"};
}

namespace {

std::vector<std::size_t> range(std::size_t a, std::size_t b, std::size_t step) {
  std::vector<std::size_t> v;
  for (std::size_t m = a; m <= b; m += step) v.push_back(m);
  return v;
}

ExperimentConfig base(const std::string& name, Scale scale) {
  ExperimentConfig c;
  c.experiment = name;
  c.trials = scale == Scale::paper ? 5000 : 2000;
  c.seed = 1;
  return c;
}

}  // namespace

std::vector<ExperimentConfig> preset(const std::string& fig, Scale scale) {
  const bool paper = scale == Scale::paper;
  if (fig == "fig2") {
    ExperimentConfig c = base("fig2", scale);
    c.N = 48;
    c.K = 2;
    c.rho = 0.5;
    c.g = {0.5, 0.5};
    c.sigma_w = {0.1, 0.1};
    c.P_dB = 10.0;
    c.M = range(12, 48, 4);
    c.designs = {"procedure1", "gaussian"};
    c.decoder = Decoder::none;
    return {c};
  }
  if (fig == "fig3") {
    ExperimentConfig c = base("fig3", scale);
    c.N = 24;
    c.K = 3;
    c.rho = 0.5;
    c.g = {0.5, 0.5};
    c.sigma_w = {0.1, 0.1};
    c.P_dB = 10.0;
    c.M = range(4, 24, 4);
    c.designs = {"sdr", "procedure1", "randomization"};
    c.decoder = Decoder::none;
    return {c};
  }
  if (fig == "fig4" || fig == "fig5") {
    ExperimentConfig c = base(fig, scale);
    c.N = 36;
    c.K = 3;
    c.rho = 0.25;
    c.g = {0.5, 0.5};
    c.sigma_w = {0.1, 0.1};
    c.P_dB = 10.0;
    c.designs = {"procedure1", "tight_frame", "gaussian", "lmmse_min"};
    c.decoder = Decoder::random_omp;
    if (fig == "fig4") {
      c.M = paper ? range(6, 30, 3) : std::vector<std::size_t>{12, 18, 24, 30};
      return {c};
    }
    c.M = {18};
    c.sweep_axis = SweepAxis::P_dB;
    c.sweep_values = paper ? std::vector<double>{0, 5, 10, 15, 20, 25, 30}
                           : std::vector<double>{0, 10, 20, 30};
    // support recovery against P with the greedy decoder
    ExperimentConfig s = c;
    s.experiment = "fig5_support";
    s.rho = 0.5;
    s.decoder = Decoder::omp;
    return {c, s};
  }
  if (fig == "fig6") {
    ExperimentConfig c = base("fig6", scale);
    c.N = 36;
    c.K = 3;
    c.rho = 0.5;
    c.sigma_w = {0.1, 0.1};
    c.g = {1.0, 1.0};
    c.P_dB = 10.0;
    c.M = {18};
    c.designs = {"procedure1", "tight_frame", "gaussian", "lmmse_min"};
    c.decoder = Decoder::omp;
    c.sweep_axis = SweepAxis::CSNR;
    c.sweep_values = paper ? std::vector<double>{1, 3.1622776601683795, 10, 31.622776601683793,
                                                 100, 316.22776601683796, 1000}
                           : std::vector<double>{1, 10, 100, 1000};
    // support recovery against M at P = 10 dB
    ExperimentConfig s = c;
    s.experiment = "fig6_support";
    s.g = {0.5, 0.5};
    s.sweep_axis = SweepAxis::M;
    s.sweep_values.clear();
    s.M = paper ? range(6, 30, 3) : std::vector<std::size_t>{12, 18, 24, 30};
    return {c, s};
  }
  if (fig == "fig7") {
    ExperimentConfig c = base("fig7", scale);
    c.N = 100;
    c.K = 5;
    c.rho = 0.75;
    c.g = {0.5, 0.5};
    c.sigma_w = {0.1, 0.1};
    c.P_dB = 10.0;
    c.M = paper ? range(20, 60, 5) : std::vector<std::size_t>{20, 30, 40, 50};
    c.omega_prime_size = 2500;
    c.designs = {"procedure1", "tight_frame", "gaussian"};
    c.decoder = Decoder::random_omp;
    if (!paper) c.trials = 500;
    return {c};
  }
  if (fig == "fig8") {
    ExperimentConfig c = base("fig8", scale);
    c.N = 32;
    c.K = 3;
    c.rho = 0.5;
    c.g = {0.5, 0.75};
    c.sigma_w = {0.2, 0.2};
    c.P_dB = 10.0;
    c.M = paper ? range(4, 24, 2) : std::vector<std::size_t>{6, 10, 14, 18};
    c.designs = {"procedure1", "equal_alpha"};
    c.decoder = Decoder::random_omp;
    ExperimentConfig o = c;
    o.setup = Setup::orthogonal;
    ExperimentConfig h = c;
    h.setup = Setup::coherent;
    return {o, h};
  }
  if (fig == "fig9") {
    ExperimentConfig c = base("fig9", scale);
    c.N = paper ? 64 : 32;
    c.K = paper ? 4 : 3;
    c.M = {paper ? std::size_t{40} : std::size_t{20}};
    c.rho = 0.5;
    c.g = {0.5, 0.5};
    c.sigma_w = {0.02, 0.02};
    c.P_dB = 10.0;
    c.sweep_axis = SweepAxis::gain_ratio;
    c.sweep_values = {0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0};
    if (paper) c.omega_prime_size = 2500;
    c.designs = {"single", "procedure1"};
    c.decoder = Decoder::random_omp;
    ExperimentConfig o = c;
    o.setup = Setup::orthogonal;
    ExperimentConfig h = c;
    h.setup = Setup::coherent;
    return {o, h};
  }
  fail(ErrorKind::validation, "unknown preset '" + fig + "'");
}

// ---------------------------------------------------------------------------
// output

void write_csv(std::ostream& os, const std::vector<SweepRecord>& records) {
  os << "experiment,setup,design,decoder,axis_name,axis_value,M,P_dB,CSNR,trials,seed,nmse_db,"
        "support_recovery,lb_db,wall_ms\n";
  for (const auto& r : records) {
    os << r.experiment << ',' << r.setup << ',' << r.design << ',' << r.decoder << ','
       << r.axis_name << ',' << fmt(r.axis_value) << ',' << r.M << ',' << fmt(r.P_dB) << ','
       << fmt(r.CSNR) << ',' << r.trials << ',' << r.seed << ',' << fmt(r.nmse_db) << ','
       << fmt(r.support_recovery) << ',' << fmt(r.lb_db) << ',' << fmt(r.wall_ms) << '\n';
  }
}

std::string sweep_to_json(const SweepOutput& out) {
  json j;
  j["configs"] = json::array();
  for (const auto& c : out.configs) j["configs"].push_back(config_json(c));
  j["records"] = json::array();
  for (const auto& r : out.records) {
    json e;
    e["experiment"] = r.experiment;
    e["setup"] = r.setup;
    e["design"] = r.design;
    e["decoder"] = r.decoder;
    e["axis_name"] = r.axis_name;
    e["axis_value"] = num(r.axis_value);
    e["M"] = r.M;
    e["P_dB"] = num(r.P_dB);
    e["CSNR"] = num(r.CSNR);
    e["trials"] = r.trials;
    e["seed"] = r.seed;
    e["nmse_db"] = num(r.nmse_db);
    e["nmse_stderr_db"] = num(r.nmse_stderr_db);
    e["support_recovery"] = num(r.support_recovery);
    e["support_stderr"] = num(r.support_stderr);
    e["lb_db"] = num(r.lb_db);
    e["relaxation_db"] = num(r.relaxation_db);
    e["mu"] = num(r.mu);
    e["sandwich_lower_db"] = num(r.sandwich_lower_db);
    e["sandwich_upper_db"] = num(r.sandwich_upper_db);
    e["achieved_power"] = num(r.achieved_power);
    e["alphas"] = r.alphas;
    e["failures"] = r.failures;
    e["wall_ms"] = num(r.wall_ms);
    e["notes"] = r.notes;
    j["records"].push_back(e);
  }
  return j.dump(2);
}

}  // namespace csforge
