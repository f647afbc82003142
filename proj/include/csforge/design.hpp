// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "csforge/bounds.hpp"
#include "csforge/linalg.hpp"
#include "csforge/model.hpp"
#include "csforge/sdp.hpp"

namespace csforge {

enum class SdrBackend { reduced, admm };

struct DesignOptions {
  SdrBackend backend = SdrBackend::reduced;
  ReducedOptions reduced;
  SolverOptions admm;
  // eigenvalues closer than this (relative to the largest) share an eigenspace
  double tie_tolerance = 1e-6;
  double asymptotic_threshold = 1e-3;
  bool force_asymptotic = false;
};

struct SolverSummary {
  std::string backend;
  std::string status;
  int iterations = 0;
  double objective = 0.0;
  double residual = 0.0;
};

struct DesignResult {
  std::vector<Matrix> matrices;
  double achieved_power = 0.0;
  BoundReport lb;
  std::string method;
  std::optional<SolverSummary> solver;
  Vector rescale_factors;
  double relaxation_bound = std::numeric_limits<double>::quiet_NaN();
  double alpha_objective = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::string> notes;
};

struct LowRank {
  Matrix a;          // M×L
  Vector eigenvalues;  // of q, descending
  double residual = 0.0;  // ‖AᵀA − q‖_F²
};

LowRank low_rank_from_gram(const Matrix& q, std::size_t M, double tie_tolerance = 0.0);
Matrix power_rescale(const Matrix& a, const ChannelSpec& spec, const Matrix& R_x);

GramSolution solve_sdr(const SdrInstance& inst, const DesignOptions& opt);

DesignResult design_procedure1(const ChannelSpec& spec, const Matrix& R, const Matrix& R_x,
                               const SupportCollection& supports, const DesignOptions& opt = {},
                               const GramSolution* sdr = nullptr);

DesignResult closed_form(int which, const ChannelSpec& spec, const Matrix& R, const Matrix& R_x,
                         const SupportCollection& supports, const DesignOptions& opt = {});

DesignResult design_randomization(const ChannelSpec& spec, const Matrix& R, const Matrix& R_x,
                                  const SupportCollection& supports, std::size_t n_rand,
                                  std::uint64_t seed, const DesignOptions& opt = {},
                                  const GramSolution* sdr = nullptr);

DesignResult design_mac(const MultiTerminalSpec& spec, const Matrix& R, const Matrix& R_x,
                        const SupportCollection& supports, const DesignOptions& opt = {},
                        bool optimize_alpha = true, const GramSolution* sdr = nullptr);

enum class BaselineKind { gaussian, tight_frame, lmmse_min };

DesignResult design_baseline(BaselineKind kind, const ChannelSpec& spec, const Matrix& R,
                             const Matrix& R_x, const SupportCollection& supports,
                             Stream* rng = nullptr, const DesignOptions& opt = {});

// Haar-distributed orthogonal matrix
Matrix random_orthogonal(std::size_t n, Stream& rng);

void write_matrix_csv(std::ostream& os, const Matrix& a, const std::string& method);
Matrix read_matrix_csv(std::istream& is, std::string* method = nullptr);

}  // namespace csforge
