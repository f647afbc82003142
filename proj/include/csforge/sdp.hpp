// SPDX-License-Identifier: Apache-2.0
//
// Semidefinite relaxations of the sensing-matrix design problem and a small
// conic solver to go with them.
#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "csforge/linalg.hpp"
#include "csforge/model.hpp"

namespace csforge {

// ---------------------------------------------------------------------------
// generic conic problem

enum class VarKind { symmetric, scalar_nonneg, scalar_free };

struct ConicVariable {
  std::string name;
  VarKind kind = VarKind::symmetric;
  std::size_t dim = 1;     // n for an n×n symmetric variable, 1 for scalars
  std::size_t offset = 0;  // first flat unknown
};

// value at (row, col) and (col, row) of the block, times unknown x[flat]
struct LmiCoef {
  std::size_t flat;
  std::size_t row;
  std::size_t col;
  double value;
};

struct LmiBlock {
  std::string name;
  std::size_t size = 0;
  Matrix constant;
  std::vector<LmiCoef> terms;
};

struct LinearIneq {  // constant + Σ value·x[flat] <= 0
  std::string name;
  double constant = 0.0;
  std::vector<std::pair<std::size_t, double>> terms;
};

class ConicProblem {
 public:
  std::size_t add_symmetric(const std::string& name, std::size_t n);
  std::size_t add_scalar(const std::string& name, bool nonneg = true);

  // flat unknown holding entry (i, j) of a symmetric variable (or the scalar)
  std::size_t flat(std::size_t var, std::size_t i = 0, std::size_t j = 0) const;

  void add_objective(std::size_t flat_index, double coef);
  // c·Tr(X) for a symmetric variable
  void add_trace_objective(std::size_t var, double coef);

  LmiBlock& add_lmi(const std::string& name, std::size_t size);
  // block(r0 + i, c0 + j) += coef·V(i, j) for every entry of variable V
  void add_variable_to_block(LmiBlock& block, std::size_t var, std::size_t r0, std::size_t c0,
                             double coef) const;
  LinearIneq& add_ineq(const std::string& name, double constant);

  std::size_t num_unknowns() const { return unknowns_; }
  const std::vector<ConicVariable>& variables() const { return vars_; }
  const std::vector<LmiBlock>& lmis() const { return lmis_; }
  std::vector<LmiBlock>& lmis() { return lmis_; }
  const std::vector<LinearIneq>& ineqs() const { return ineqs_; }
  const Vector& objective() const { return objective_; }

  Matrix block_value(const LmiBlock& b, const Vector& x) const;
  Matrix variable_value(std::size_t var, const Vector& x) const;
  void set_variable(std::size_t var, const Matrix& value, Vector& x) const;

  void dump(std::ostream& os) const;

 private:
  std::vector<ConicVariable> vars_;
  std::vector<LmiBlock> lmis_;
  std::vector<LinearIneq> ineqs_;
  Vector objective_;
  std::size_t unknowns_ = 0;
};

struct ConicCheck {
  double objective = 0.0;
  double lmi_violation = 0.0;     // max(0, -min eigenvalue) over blocks
  double ineq_violation = 0.0;    // max(0, value) over inequalities and signs
  double feasibility() const { return lmi_violation > ineq_violation ? lmi_violation : ineq_violation; }
};

// direct evaluation, independent of any solver
ConicCheck check_point(const ConicProblem& p, const Vector& x);

enum class SolveStatus { converged, max_iter, infeasible_suspected, numerical_breakdown };
const char* to_string(SolveStatus s);

struct SolverOptions {
  double eps_feas = 1e-6;
  double eps_rel = 1e-7;
  int max_iter = 50000;
  double over_relaxation = 1.6;
  double rho = 1.0;
  bool adaptive_rho = true;
  bool scale_blocks = true;
};

struct ConicSolution {
  Vector x;
  double objective = 0.0;
  double feasibility_residual = 0.0;
  double convergence_residual = 0.0;
  double duality_gap = 0.0;
  int iterations = 0;
  SolveStatus status = SolveStatus::max_iter;
  double block_scale_min = 1.0;
  double block_scale_max = 1.0;
};

ConicSolution solve(const ConicProblem& p, const SolverOptions& opt = {},
                    const Vector* warm_start = nullptr);

// ---------------------------------------------------------------------------
// design relaxations
//
// Every setup is a list of Gram blocks Q_b ⪰ 0. The information matrix seen
// by the decoder is Σ_b H_bᵀ Φ_b(Q_b) H_b with Φ(Q) = cQ when beta == 0 and
// Φ(Q) = c(Q − Q(βI + Q)⁻¹Q) otherwise; power is Σ_b Tr(W_b Q_b) <= P.

struct GramBlock {
  Matrix H;  // L_b × N
  double c = 1.0;
  double beta = 0.0;
  Matrix W;  // L_b × L_b
};

struct SdrInstance {
  std::vector<GramBlock> blocks;
  Matrix prior_info;  // R⁻¹ (K×K) or R_x⁻¹ (N×N) for the LMMSE design
  std::vector<std::vector<std::size_t>> index_sets;
  Vector weights;  // sum to 1
  double P = 1.0;

  std::size_t N() const { return blocks.empty() ? 0 : blocks.front().H.cols(); }
};

SdrInstance sdr_instance(const ChannelSpec& spec, const Matrix& R, const Matrix& R_x,
                         const SupportCollection& supports);
SdrInstance sdr_instance(const MultiTerminalSpec& spec, const Matrix& R, const Matrix& R_x,
                         const SupportCollection& supports);
// one term over all N coordinates with prior R_x (regularized)
SdrInstance lmmse_instance(const ChannelSpec& spec, const Matrix& R_x);

Matrix woodbury_map(const GramBlock& b, const Matrix& q);  // Φ_b(Q)

// Σ_t w_t Tr{(Λ + C[S_t,S_t])⁻¹}; gradient w.r.t. each Q_b when asked
double relaxation_objective(const SdrInstance& inst, const std::vector<Matrix>& q,
                            std::vector<Matrix>* grad = nullptr);

struct SdrLayout {
  std::vector<std::size_t> q_vars;
  std::vector<std::size_t> y_vars;  // npos where the block has no slack
  std::vector<std::size_t> x_vars;
  std::vector<std::size_t> alpha_vars;
};

ConicProblem assemble_sdr(const SdrInstance& inst, SdrLayout* layout = nullptr);
// point of the assembled problem induced by Gram matrices Q_b
Vector sdr_point(const SdrInstance& inst, const ConicProblem& p, const SdrLayout& layout,
                 const std::vector<Matrix>& q);
std::vector<Matrix> sdr_gram(const ConicProblem& p, const SdrLayout& layout, const Vector& x);

struct ReducedOptions {
  int max_iter = 20000;
  double tol = 1e-7;
  int memory = 10;
};

struct GramSolution {
  std::vector<Matrix> Q;
  double objective = 0.0;  // average over supports
  double residual = 0.0;
  int iterations = 0;
  SolveStatus status = SolveStatus::max_iter;
  std::string backend;
};

// projected spectral gradient on the Gram matrices directly
GramSolution solve_reduced(const SdrInstance& inst, const ReducedOptions& opt = {});
// assemble + ADMM
GramSolution solve_conic(const SdrInstance& inst, const SolverOptions& opt = {});

// ---------------------------------------------------------------------------
// α-rescaling after the low-rank stage: Q_b(α) = Σ_k α_k G[b][k]

struct AlphaInstance {
  SdrInstance base;
  std::vector<std::vector<Matrix>> parts;  // parts[b][k]
  std::size_t n_alpha = 2;
  bool coupled = false;  // coherent: α₃ multiplies the cross blocks, [[α₁,α₃],[α₃,α₂]] ⪰ 0
};

AlphaInstance alpha_instance(const MultiTerminalSpec& spec, const Matrix& R, const Matrix& R_x,
                             const SupportCollection& supports,
                             const std::vector<Matrix>& fixed_grams);
std::vector<Matrix> alpha_gram(const AlphaInstance& inst, const Vector& alpha);
ConicProblem assemble_alpha_rescale(const AlphaInstance& inst, SdrLayout* layout = nullptr);

struct AlphaSolution {
  Vector alpha;  // α₁, α₂ (and α₃ when coupled)
  double objective = 0.0;
  std::string backend;
};

AlphaSolution solve_alpha_reduced(const AlphaInstance& inst);
AlphaSolution solve_alpha_conic(const AlphaInstance& inst, const SolverOptions& opt = {});

}  // namespace csforge
