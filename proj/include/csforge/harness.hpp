// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "csforge/design.hpp"
#include "csforge/model.hpp"
#include "csforge/recon.hpp"

namespace csforge {

enum class Setup { single, orthogonal, coherent };
enum class Decoder { omp, random_omp, oracle, exhaustive, lmmse, none };
enum class SweepAxis { M, P_dB, CSNR, gain_ratio };

const char* to_string(Setup s);
const char* to_string(Decoder d);
const char* to_string(SweepAxis a);

struct ExperimentConfig {
  std::string experiment = "custom";
  Setup setup = Setup::single;
  std::size_t N = 36;
  std::size_t K = 3;
  double rho = 0.5;
  // per terminal; a single-terminal run uses the first entry
  std::array<double, 2> g{0.5, 0.5};
  std::array<double, 2> sigma_w{0.1, 0.1};
  std::array<double, 2> sigma_v{0.0, 0.0};
  double P_dB = 10.0;
  std::vector<std::size_t> M{18};
  SweepAxis sweep_axis = SweepAxis::M;
  std::vector<double> sweep_values;  // used when the axis is not M
  std::size_t trials = 2000;
  std::uint64_t seed = 1;
  std::vector<std::string> designs{"procedure1", "tight_frame", "gaussian"};
  Decoder decoder = Decoder::random_omp;
  std::optional<std::size_t> omega_prime_size;
  bool resample_omega = false;
  std::size_t random_omp_draws = 20;
  std::size_t randomizations = 1000;
  bool sampled_covariance = true;
  std::size_t covariance_samples = 100000;
  std::size_t enumeration_cap = kDefaultEnumerationCap;
  SdrBackend backend = SdrBackend::reduced;
  double solver_tol = 1e-7;
  int solver_max_iter = 20000;
  bool timing = false;

  double P() const;
  // the axis values this config sweeps over
  std::vector<double> axis_values() const;
};

void validate(const ExperimentConfig& c);

// JSON text; unknown keys are a validation error
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);
std::string config_to_json(const ExperimentConfig& c, int indent = 2);

// the config with one axis value applied (M, P, g or g₂ set accordingly)
struct PointConfig {
  ExperimentConfig cfg;
  double axis_value = 0.0;
  std::size_t M = 0;
};
PointConfig at_axis(const ExperimentConfig& c, double value);

ChannelSpec channel_spec(const ExperimentConfig& c, std::size_t M, std::size_t terminal = 0);
MultiTerminalSpec mac_spec(const ExperimentConfig& c, std::size_t M);

// everything a design and its evaluation need that depends only on the config
struct Scenario {
  SourceModel source;
  SupportCollection design_supports;
  SupportCollection eval_supports;
  std::vector<std::string> notes;
};

Scenario make_scenario(const ExperimentConfig& c);

// a built design in the form the Monte-Carlo loop consumes
struct BuiltDesign {
  std::string tag;
  Setup setup = Setup::single;
  std::vector<Matrix> matrices;
  bool is_mac = false;
  ChannelSpec channel;    // when !is_mac
  MultiTerminalSpec mac;  // when is_mac
  DesignResult result;
  double lb_eval = std::numeric_limits<double>::quiet_NaN();  // on the evaluation supports
  double mu = std::numeric_limits<double>::quiet_NaN();
  Sandwich sandwich{std::numeric_limits<double>::quiet_NaN(),
                    std::numeric_limits<double>::quiet_NaN()};
  bool decodable = true;  // false for relaxation-only entries

  EffectiveModel effective() const;
};

BuiltDesign build_design(const std::string& tag, const PointConfig& p, const Scenario& sc,
                         const GramSolution* shared_sdr = nullptr);

struct TrialResult {
  double se = 0.0;
  double match = 0.0;
};

// one realization from substream (seed, trial, index)
TrialResult run_trial(const ExperimentConfig& c, const Scenario& sc, const BuiltDesign& d,
                      const WhitenedModel& model, std::size_t index,
                      const Matrix* lmmse = nullptr);

struct SweepRecord {
  std::string experiment;
  std::string setup;
  std::string design;
  std::string decoder;
  std::string axis_name;
  double axis_value = 0.0;
  std::size_t M = 0;
  double P_dB = 0.0;
  double CSNR = 0.0;
  std::size_t trials = 0;
  std::uint64_t seed = 0;
  double nmse_db = std::numeric_limits<double>::quiet_NaN();
  double support_recovery = std::numeric_limits<double>::quiet_NaN();
  double lb_db = std::numeric_limits<double>::quiet_NaN();
  double wall_ms = 0.0;

  // JSON-only extras
  double nmse_stderr_db = std::numeric_limits<double>::quiet_NaN();
  double support_stderr = std::numeric_limits<double>::quiet_NaN();
  std::size_t failures = 0;
  double mu = std::numeric_limits<double>::quiet_NaN();
  double sandwich_lower_db = std::numeric_limits<double>::quiet_NaN();
  double sandwich_upper_db = std::numeric_limits<double>::quiet_NaN();
  double relaxation_db = std::numeric_limits<double>::quiet_NaN();
  double achieved_power = std::numeric_limits<double>::quiet_NaN();
  Vector alphas;
  std::vector<std::string> notes;
};

// threads == 0 means CS_FORGE_THREADS, else all cores
std::size_t resolve_threads(std::size_t threads = 0);

SweepRecord run_monte_carlo(const PointConfig& p, const Scenario& sc, const BuiltDesign& d,
                            std::size_t threads = 0);

struct SweepOutput {
  std::vector<ExperimentConfig> configs;
  std::vector<SweepRecord> records;
};

SweepOutput run_sweep(const ExperimentConfig& c, std::size_t threads = 0);
SweepOutput run_sweeps(const std::vector<ExperimentConfig>& cs, std::size_t threads = 0);

enum class Scale { desk, paper };
std::vector<ExperimentConfig> preset(const std::string& figure, Scale scale);
std::vector<std::string> preset_names();

void write_csv(std::ostream& os, const std::vector<SweepRecord>& records);
std::string sweep_to_json(const SweepOutput& out);

// deterministic parallel loop; body(i) for i in [0, n)
template <class F>
void parallel_for(std::size_t n, std::size_t threads, F body);

}  // namespace csforge

#include "csforge/detail/parallel.hpp"
