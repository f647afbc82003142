// SPDX-License-Identifier: Apache-2.0
#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "csforge/errors.hpp"
#include "csforge/harness.hpp"
#include "csforge/selftest.hpp"

namespace fs = std::filesystem;
using namespace csforge;

namespace {

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trials;
  std::optional<std::size_t> omega_prime;
};

void apply(ExperimentConfig& c, const Overrides& o) {
  if (o.seed) c.seed = *o.seed;
  if (o.trials) c.trials = *o.trials;
  if (o.omega_prime) c.omega_prime_size = *o.omega_prime;
  validate(c);
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) fail(ErrorKind::io, "cannot write '" + p.string() + "'");
  out << text;
  if (!out) fail(ErrorKind::io, "write failed for '" + p.string() + "'");
}

void emit(const SweepOutput& out, const fs::path& dir, const std::string& stem) {
  fs::create_directories(dir);
  std::ostringstream csv;
  write_csv(csv, out.records);
  write_file(dir / (stem + ".csv"), csv.str());
  write_file(dir / (stem + ".json"), sweep_to_json(out) + "\n");
  std::cout << (dir / (stem + ".csv")).string() << "\n";
}

int report(const Error& e) {
  nlohmann::ordered_json j;
  j["error"] = {{"kind", to_string(e.kind())}, {"message", e.what()}};
  std::cerr << j.dump() << "\n";
  return e.kind() == ErrorKind::validation ? 2 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sensing-matrix design and compressed-sensing simulation"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";
  Overrides ov;
  std::string figure;
  std::string scale = "desk";

  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* opt = sub->add_option("--config", config_path, "experiment config (JSON)");
    if (needs_config) opt->required();
    sub->add_option("--seed", ov.seed, "master seed");
    sub->add_option("--out-dir", out_dir, "output directory");
    sub->add_option("--trials", ov.trials, "Monte-Carlo trials");
    sub->add_option("--omega-prime", ov.omega_prime, "size of the sampled support set");
  };

  auto* design = app.add_subcommand("design", "emit designed matrices as CSV");
  add_common(design, true);
  auto* evaluate = app.add_subcommand("evaluate", "Monte Carlo at the first sweep point");
  add_common(evaluate, true);
  auto* sweep = app.add_subcommand("sweep", "run a full sweep");
  add_common(sweep, true);
  auto* reproduce = app.add_subcommand("reproduce", "run a figure preset");
  add_common(reproduce, false);
  reproduce->add_option("figure", figure, "fig2 .. fig9")
      ->required()
      ->check(CLI::IsMember(preset_names()));
  reproduce->add_option("--scale", scale, "desk or paper")->check(CLI::IsMember({"desk", "paper"}));
  auto* selftest = app.add_subcommand("selftest", "run the built-in invariant checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*selftest) return run_selftest(std::cout) ? 0 : 1;

    if (*reproduce) {
      std::vector<ExperimentConfig> cs =
          preset(figure, scale == "paper" ? Scale::paper : Scale::desk);
      for (auto& c : cs) apply(c, ov);
      emit(run_sweeps(cs), out_dir, figure);
      return 0;
    }

    ExperimentConfig c = load_config(config_path);
    apply(c, ov);

    if (*sweep) {
      emit(run_sweep(c), out_dir, c.experiment);
      return 0;
    }
    if (*evaluate) {
      ExperimentConfig one = c;
      if (one.sweep_axis == SweepAxis::M) one.M = {c.M.front()};
      else one.sweep_values = {c.sweep_values.front()};
      emit(run_sweep(one), out_dir, c.experiment + "_evaluate");
      return 0;
    }
    if (*design) {
      const Scenario sc = make_scenario(c);
      fs::create_directories(out_dir);
      nlohmann::ordered_json summary = nlohmann::ordered_json::array();
      for (double v : c.axis_values()) {
        const PointConfig p = at_axis(c, v);
        for (const auto& tag : c.designs) {
          const BuiltDesign d = build_design(tag, p, sc);
          if (!d.decodable) continue;
          char axis[64];
          std::snprintf(axis, sizeof axis, "%g", v);
          for (std::size_t t = 0; t < d.matrices.size(); ++t) {
            std::string name = c.experiment + "_" + tag + "_" + to_string(c.sweep_axis) + axis;
            if (d.matrices.size() > 1) name += "_t" + std::to_string(t + 1);
            std::ostringstream os;
            write_matrix_csv(os, d.matrices[t], d.result.method);
            write_file(fs::path(out_dir) / (name + ".csv"), os.str());
            std::cout << (fs::path(out_dir) / (name + ".csv")).string() << "\n";
          }
          summary.push_back({{"design", tag},
                             {"axis", to_string(c.sweep_axis)},
                             {"axis_value", v},
                             {"M", p.M},
                             {"lb", d.lb_eval},
                             {"achieved_power", d.result.achieved_power},
                             {"mu", std::isfinite(d.mu) ? nlohmann::ordered_json(d.mu)
                                                        : nlohmann::ordered_json(nullptr)},
                             {"notes", d.result.notes}});
        }
      }
      write_file(fs::path(out_dir) / (c.experiment + "_designs.json"), summary.dump(2) + "\n");
      return 0;
    }
  } catch (const Error& e) {
    return report(e);
  } catch (const std::exception& e) {
    return report(Error(ErrorKind::io, e.what()));
  }
  return 0;
}
