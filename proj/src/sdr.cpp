// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <string>

#include "csforge/errors.hpp"
#include "csforge/sdp.hpp"

namespace csforge {

namespace {

GramBlock terminal_block(const ChannelSpec& spec, const Matrix& R_x) {
  validate_channel(spec);
  require(spec.sigma_w > 0.0, ErrorKind::domain, "relaxation needs sigma_w > 0");
  require(spec.g != 0.0, ErrorKind::domain, "relaxation needs a nonzero channel gain");
  GramBlock b;
  b.H = spec.H;
  b.c = spec.g * spec.g / (spec.sigma_w * spec.sigma_w);
  b.beta = spec.sigma_v > 0.0 ? spec.sigma_w * spec.sigma_w /
                                    (spec.g * spec.g * spec.sigma_v * spec.sigma_v)
                              : 0.0;
  b.W = power_weight(spec, R_x);
  return b;
}

void fill_supports(SdrInstance& inst, const Matrix& R, const SupportCollection& supports) {
  require(supports.size() >= 1, ErrorKind::domain, "relaxation needs at least one support");
  inst.prior_info = inverse_spd(R);
  inst.index_sets.reserve(supports.size());
  for (const SupportSet& s : supports.sets) {
    require(s.size() == R.rows(), ErrorKind::dimension, "support size must match R");
    inst.index_sets.push_back(s.indices);
  }
  inst.weights = supports.normalized_weights();
}

double inner(const std::vector<Matrix>& a, const std::vector<Matrix>& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const auto& x = a[k].storage();
    const auto& y = b[k].storage();
    for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  }
  return s;
}

double norm(const std::vector<Matrix>& a) { return std::sqrt(inner(a, a)); }

std::vector<Matrix> axpy(const std::vector<Matrix>& x, double t, const std::vector<Matrix>& d) {
  std::vector<Matrix> out = x;
  for (std::size_t k = 0; k < x.size(); ++k) out[k] += d[k] * t;
  return out;
}

std::vector<Matrix> diff(const std::vector<Matrix>& a, const std::vector<Matrix>& b) {
  std::vector<Matrix> out = a;
  for (std::size_t k = 0; k < a.size(); ++k) out[k] -= b[k];
  return out;
}

// onto {Z_b ⪰ 0, Σ Tr Z_b <= P}
std::vector<Matrix> project_budget(const std::vector<Matrix>& y, double P) {
  std::vector<SymEig> eigs;
  std::vector<double> all;
  for (const Matrix& m : y) {
    eigs.push_back(sym_eig(m));
    for (double v : eigs.back().values) all.push_back(std::max(v, 0.0));
  }
  double total = std::accumulate(all.begin(), all.end(), 0.0);
  double tau = 0.0;
  if (total > P) {
    std::sort(all.begin(), all.end(), std::greater<>());
    double run = 0.0;
    for (std::size_t k = 0; k < all.size(); ++k) {
      run += all[k];
      const double t = (run - P) / static_cast<double>(k + 1);
      if (k + 1 == all.size() || all[k + 1] <= t) {
        tau = t;
        break;
      }
    }
  }
  std::vector<Matrix> out;
  out.reserve(y.size());
  for (const SymEig& e : eigs)
    out.push_back(spectral_map(e, [tau](double v) { return std::max(v - tau, 0.0); }));
  return out;
}

}  // namespace

SdrInstance sdr_instance(const ChannelSpec& spec, const Matrix& R, const Matrix& R_x,
                         const SupportCollection& supports) {
  SdrInstance inst;
  inst.blocks.push_back(terminal_block(spec, R_x));
  inst.P = spec.P;
  fill_supports(inst, R, supports);
  return inst;
}

SdrInstance sdr_instance(const MultiTerminalSpec& spec, const Matrix& R, const Matrix& R_x,
                         const SupportCollection& supports) {
  validate_mac(spec);
  SdrInstance inst;
  inst.P = spec.P;
  const auto& t1 = spec.terminals[0];
  const auto& t2 = spec.terminals[1];
  if (spec.mode == MacMode::orthogonal) {
    inst.blocks.push_back(terminal_block(t1, R_x));
    inst.blocks.push_back(terminal_block(t2, R_x));
  } else {
    require(t1.sigma_w == t2.sigma_w && t1.sigma_w > 0.0, ErrorKind::domain,
            "coherent MAC needs one positive channel noise level");
    require(t1.g != 0.0 && t2.g != 0.0, ErrorKind::domain, "coherent MAC needs nonzero gains");
    const bool v1 = t1.sigma_v > 0.0;
    const bool v2 = t2.sigma_v > 0.0;
    require(v1 == v2, ErrorKind::domain,
            "coherent MAC with sensor noise on only one terminal is not supported");
    const double s1 = v1 ? t1.sigma_v : 1.0;
    const double s2 = v2 ? t2.sigma_v : 1.0;
    GramBlock b;
    b.H = vstack(t1.H * (1.0 / s1), t2.H * (1.0 / s2));
    b.c = 1.0 / (t1.sigma_w * t1.sigma_w);
    b.beta = v1 ? t1.sigma_w * t1.sigma_w : 0.0;
    b.W = block_diagonal(power_weight(t1, R_x) * (1.0 / (t1.g * t1.g * s1 * s1)),
                         power_weight(t2, R_x) * (1.0 / (t2.g * t2.g * s2 * s2)));
    inst.blocks.push_back(std::move(b));
  }
  fill_supports(inst, R, supports);
  return inst;
}

SdrInstance lmmse_instance(const ChannelSpec& spec, const Matrix& R_x) {
  SdrInstance inst;
  inst.blocks.push_back(terminal_block(spec, R_x));
  inst.P = spec.P;
  const std::size_t n = R_x.rows();
  Matrix reg = symmetrize(R_x);
  const double eps = 1e-10 * trace(reg) / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) reg(i, i) += eps;
  inst.prior_info = inverse_spd(reg);
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), 0);
  inst.index_sets.push_back(all);
  inst.weights = {1.0};
  return inst;
}

Matrix woodbury_map(const GramBlock& b, const Matrix& q) {
  if (b.beta == 0.0) return q * b.c;
  // c(Q − Q(βI+Q)⁻¹Q) = cβ(I − β(βI+Q)⁻¹)
  Matrix s = q;
  for (std::size_t i = 0; i < s.rows(); ++i) s(i, i) += b.beta;
  Matrix k = inverse_spd(s);
  Matrix out = k * (-b.c * b.beta * b.beta);
  for (std::size_t i = 0; i < out.rows(); ++i) out(i, i) += b.c * b.beta;
  return symmetrize(out);
}

double relaxation_objective(const SdrInstance& inst, const std::vector<Matrix>& q,
                            std::vector<Matrix>* grad) {
  require(q.size() == inst.blocks.size(), ErrorKind::dimension, "one Gram matrix per block");
  const std::size_t n = inst.N();
  Matrix c(n, n);
  for (std::size_t b = 0; b < q.size(); ++b) {
    const GramBlock& blk = inst.blocks[b];
    c += transpose_times(blk.H, woodbury_map(blk, q[b]) * blk.H);
  }
  Matrix gamma;
  if (grad) gamma = Matrix(n, n);
  double obj = 0.0;
  const std::size_t k = inst.prior_info.rows();
  Matrix m(k, k);
  const Matrix eye = Matrix::identity(k);
  for (std::size_t t = 0; t < inst.index_sets.size(); ++t) {
    const auto& idx = inst.index_sets[t];
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j) m(i, j) = inst.prior_info(i, j) + c(idx[i], idx[j]);
    const Matrix linv = forward_substitute(cholesky(m), eye);
    const double w = inst.weights[t];
    const double f = frobenius_norm(linv);
    obj += w * f * f;
    if (!grad) continue;
    const Matrix minv = transpose_times(linv, linv);
    const Matrix m2 = minv * minv;
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j) gamma(idx[i], idx[j]) -= w * m2(i, j);
  }
  if (grad) {
    grad->clear();
    for (std::size_t b = 0; b < q.size(); ++b) {
      const GramBlock& blk = inst.blocks[b];
      const Matrix g = blk.H * times_transpose(gamma, blk.H);
      if (blk.beta == 0.0) {
        grad->push_back(symmetrize(g * blk.c));
      } else {
        Matrix s = q[b];
        for (std::size_t i = 0; i < s.rows(); ++i) s(i, i) += blk.beta;
        const Matrix kk = inverse_spd(s);
        grad->push_back(symmetrize(kk * g * kk * (blk.c * blk.beta * blk.beta)));
      }
    }
  }
  return obj;
}

namespace {

// adds Σ_b D_bᵀ(coef·V)D_b into the top-left k×k corner for a symmetric
// variable V living in block b's Gram coordinates
void add_sandwich(const ConicProblem& p, LmiBlock& lmi, std::size_t var, const Matrix& d,
                  double coef) {
  const std::size_t k = d.cols();
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < d.rows(); ++i)
    for (std::size_t q = 0; q < k; ++q)
      if (d(i, q) != 0.0) {
        rows.push_back(i);
        break;
      }
  for (std::size_t a = 0; a < rows.size(); ++a)
    for (std::size_t bb = a; bb < rows.size(); ++bb) {
      const std::size_t i = rows[a];
      const std::size_t j = rows[bb];
      const std::size_t f = p.flat(var, i, j);
      for (std::size_t r = 0; r < k; ++r)
        for (std::size_t s = r; s < k; ++s) {
          double v = d(i, r) * d(j, s);
          if (i != j) v += d(j, r) * d(i, s);
          if (v != 0.0) lmi.terms.push_back({f, r, s, coef * v});
        }
    }
}

}  // namespace

ConicProblem assemble_sdr(const SdrInstance& inst, SdrLayout* layout) {
  ConicProblem p;
  SdrLayout lay;
  const std::size_t nb = inst.blocks.size();
  const std::size_t npos = std::numeric_limits<std::size_t>::max();
  for (std::size_t b = 0; b < nb; ++b) {
    const GramBlock& blk = inst.blocks[b];
    const std::size_t l = blk.H.rows();
    const std::size_t q = p.add_symmetric("Q" + std::to_string(b + 1), l);
    lay.q_vars.push_back(q);
    p.add_variable_to_block(p.add_lmi("Q" + std::to_string(b + 1) + "_psd", l), q, 0, 0, 1.0);
    if (blk.beta > 0.0) {
      const std::size_t y = p.add_symmetric("Y" + std::to_string(b + 1), l);
      lay.y_vars.push_back(y);
      LmiBlock& lmi = p.add_lmi("Y" + std::to_string(b + 1) + "_schur", 2 * l);
      p.add_variable_to_block(lmi, y, 0, 0, 1.0);
      p.add_variable_to_block(lmi, q, 0, l, std::sqrt(blk.c));
      p.add_variable_to_block(lmi, q, l, l, 1.0);
      for (std::size_t i = 0; i < l; ++i) lmi.constant(l + i, l + i) = blk.beta;
    } else {
      lay.y_vars.push_back(npos);
    }
  }
  const std::size_t k = inst.prior_info.rows();
  for (std::size_t t = 0; t < inst.index_sets.size(); ++t) {
    const auto& idx = inst.index_sets[t];
    const std::size_t x = p.add_symmetric("X" + std::to_string(t), k);
    lay.x_vars.push_back(x);
    p.add_trace_objective(x, inst.weights[t]);
    LmiBlock& lmi = p.add_lmi("S" + std::to_string(t), 2 * k);
    lmi.constant.set_block(0, 0, inst.prior_info);
    for (std::size_t i = 0; i < k; ++i) lmi.constant(i, k + i) = lmi.constant(k + i, i) = 1.0;
    p.add_variable_to_block(lmi, x, k, k, 1.0);
    for (std::size_t b = 0; b < nb; ++b) {
      const GramBlock& blk = inst.blocks[b];
      const Matrix d = columns(blk.H, idx);
      add_sandwich(p, lmi, lay.q_vars[b], d, blk.c);
      if (lay.y_vars[b] != npos) add_sandwich(p, lmi, lay.y_vars[b], d, -1.0);
    }
  }
  LinearIneq& pow = p.add_ineq("power", -inst.P);
  for (std::size_t b = 0; b < nb; ++b) {
    const Matrix& w = inst.blocks[b].W;
    for (std::size_t i = 0; i < w.rows(); ++i)
      for (std::size_t j = i; j < w.cols(); ++j) {
        const double v = i == j ? w(i, i) : w(i, j) + w(j, i);
        if (v != 0.0) pow.terms.emplace_back(p.flat(lay.q_vars[b], i, j), v);
      }
  }
  if (layout) *layout = lay;
  return p;
}

Vector sdr_point(const SdrInstance& inst, const ConicProblem& p, const SdrLayout& layout,
                 const std::vector<Matrix>& q) {
  Vector x(p.num_unknowns(), 0.0);
  const std::size_t npos = std::numeric_limits<std::size_t>::max();
  const std::size_t n = inst.N();
  Matrix c(n, n);
  for (std::size_t b = 0; b < inst.blocks.size(); ++b) {
    const GramBlock& blk = inst.blocks[b];
    const Matrix phi = woodbury_map(blk, q[b]);
    p.set_variable(layout.q_vars[b], q[b], x);
    if (layout.y_vars[b] != npos) p.set_variable(layout.y_vars[b], q[b] * blk.c - phi, x);
    c += transpose_times(blk.H, phi * blk.H);
  }
  for (std::size_t t = 0; t < layout.x_vars.size(); ++t) {
    const auto& idx = inst.index_sets[t];
    Matrix m = inst.prior_info + submatrix(c, idx);
    p.set_variable(layout.x_vars[t], inverse_spd(m), x);
  }
  return x;
}

std::vector<Matrix> sdr_gram(const ConicProblem& p, const SdrLayout& layout, const Vector& x) {
  std::vector<Matrix> q;
  for (std::size_t v : layout.q_vars) q.push_back(p.variable_value(v, x));
  return q;
}

namespace {

std::vector<Matrix> initial_gram(const SdrInstance& inst) {
  double tw = 0.0;
  for (const GramBlock& b : inst.blocks) tw += trace(b.W);
  require(tw > 0.0, ErrorKind::domain, "power weight has zero trace");
  std::vector<Matrix> q;
  for (const GramBlock& b : inst.blocks) q.push_back(Matrix::identity(b.W.rows()) * (inst.P / tw));
  return q;
}

}  // namespace

GramSolution solve_reduced(const SdrInstance& inst, const ReducedOptions& opt) {
  require(!inst.blocks.empty(), ErrorKind::dimension, "relaxation has no blocks");
  const std::size_t nb = inst.blocks.size();
  // Q_b = T_b Z_b T_b with T_b = W_b^{-1/2}, so the budget is Σ Tr Z_b <= P
  std::vector<Matrix> t(nb);
  for (std::size_t b = 0; b < nb; ++b) {
    const SymEig e = sym_eig(inst.blocks[b].W);
    const double floor = std::max(e.values.front(), 1e-300) * 1e-12;
    t[b] = spectral_map(e, [floor](double v) { return 1.0 / std::sqrt(std::max(v, floor)); });
  }
  auto to_q = [&](const std::vector<Matrix>& z) {
    std::vector<Matrix> q(nb);
    for (std::size_t b = 0; b < nb; ++b) q[b] = symmetrize(t[b] * z[b] * t[b]);
    return q;
  };
  auto eval = [&](const std::vector<Matrix>& z, std::vector<Matrix>& g) {
    std::vector<Matrix> gq;
    const double f = relaxation_objective(inst, to_q(z), &gq);
    g.resize(nb);
    for (std::size_t b = 0; b < nb; ++b) g[b] = symmetrize(t[b] * gq[b] * t[b]);
    return f;
  };

  double tw = 0.0;
  for (const GramBlock& b : inst.blocks) tw += trace(b.W);
  std::vector<Matrix> z(nb);
  for (std::size_t b = 0; b < nb; ++b) z[b] = inst.blocks[b].W * (inst.P / tw);
  z = project_budget(z, inst.P);

  std::vector<Matrix> g;
  double f = eval(z, g);
  std::deque<double> hist{f};
  double lambda = norm(z) / std::max(norm(g), 1e-300);
  GramSolution sol;
  sol.backend = "reduced";
  auto residual = [&](const std::vector<Matrix>& zz, const std::vector<Matrix>& gg) {
    const double nz = norm(zz);
    const double ng = norm(gg);
    if (ng == 0.0 || nz == 0.0) return 0.0;
    const std::vector<Matrix> pz = project_budget(axpy(zz, -nz / ng, gg), inst.P);
    return norm(diff(pz, zz)) / nz;
  };
  int it = 0;
  for (it = 1; it <= opt.max_iter; ++it) {
    const std::vector<Matrix> d = diff(project_budget(axpy(z, -lambda, g), inst.P), z);
    const double gd = inner(g, d);
    if (!(gd < 0.0)) {
      const double reset = norm(z) / std::max(norm(g), 1e-300);
      if (lambda != reset) {
        lambda = reset;
        continue;
      }
      sol.residual = residual(z, g);
      if (sol.residual <= opt.tol) sol.status = SolveStatus::converged;
      break;
    }
    const double fmax = *std::max_element(hist.begin(), hist.end());
    double step = 1.0;
    std::vector<Matrix> zn;
    std::vector<Matrix> gn;
    double fn = 0.0;
    for (int ls = 0; ls < 60; ++ls) {
      zn = axpy(z, step, d);
      fn = eval(zn, gn);
      if (fn <= fmax + 1e-4 * step * gd) break;
      const double denom = 2.0 * (fn - f - step * gd);
      double next = denom > 0.0 ? -gd * step * step / denom : 0.5 * step;
      step = std::clamp(next, 0.1 * step, 0.5 * step);
    }
    const std::vector<Matrix> s = diff(zn, z);
    const std::vector<Matrix> y = diff(gn, g);
    const double sy = inner(s, y);
    lambda = sy > 0.0 ? inner(s, s) / sy : 1e10 * lambda;
    lambda = std::clamp(lambda, 1e-30, 1e30);
    z = std::move(zn);
    g = std::move(gn);
    f = fn;
    hist.push_back(f);
    if (static_cast<int>(hist.size()) > opt.memory) hist.pop_front();
    if (it % 10 == 0) {
      sol.residual = residual(z, g);
      if (sol.residual <= opt.tol) {
        sol.status = SolveStatus::converged;
        break;
      }
    }
  }
  if (!std::isfinite(f)) sol.status = SolveStatus::numerical_breakdown;
  sol.iterations = std::min(it, opt.max_iter);
  sol.Q = to_q(z);
  sol.objective = relaxation_objective(inst, sol.Q);
  return sol;
}

GramSolution solve_conic(const SdrInstance& inst, const SolverOptions& opt) {
  SdrLayout lay;
  const ConicProblem p = assemble_sdr(inst, &lay);
  const Vector x0 = sdr_point(inst, p, lay, initial_gram(inst));
  const ConicSolution cs = solve(p, opt, &x0);
  GramSolution sol;
  sol.backend = "admm";
  sol.Q = sdr_gram(p, lay, cs.x);
  for (Matrix& q : sol.Q) q = symmetrize(q);
  sol.objective = cs.objective;
  sol.residual = cs.convergence_residual;
  sol.iterations = cs.iterations;
  sol.status = cs.status;
  return sol;
}

// ---------------------------------------------------------------------------

AlphaInstance alpha_instance(const MultiTerminalSpec& spec, const Matrix& R, const Matrix& R_x,
                             const SupportCollection& supports,
                             const std::vector<Matrix>& fixed_grams) {
  AlphaInstance a;
  a.base = sdr_instance(spec, R, R_x, supports);
  if (spec.mode == MacMode::orthogonal) {
    require(fixed_grams.size() == 2, ErrorKind::dimension, "orthogonal rescale needs two Grams");
    a.n_alpha = 2;
    a.coupled = false;
    for (std::size_t b = 0; b < 2; ++b) {
      const std::size_t l = a.base.blocks[b].H.rows();
      require(fixed_grams[b].rows() == l, ErrorKind::dimension, "Gram size mismatch");
      std::vector<Matrix> parts(2, Matrix(l, l));
      parts[b] = fixed_grams[b];
      a.parts.push_back(std::move(parts));
    }
    return a;
  }
  require(fixed_grams.size() == 1, ErrorKind::dimension, "coherent rescale needs one joint Gram");
  const std::size_t l1 = spec.terminals[0].L();
  const std::size_t l2 = spec.terminals[1].L();
  const Matrix& g = fixed_grams[0];
  require(g.rows() == l1 + l2, ErrorKind::dimension, "joint Gram size mismatch");
  Matrix g11(l1 + l2, l1 + l2);
  Matrix g22(l1 + l2, l1 + l2);
  Matrix g12(l1 + l2, l1 + l2);
  g11.set_block(0, 0, g.block(0, 0, l1, l1));
  g22.set_block(l1, l1, g.block(l1, l1, l2, l2));
  g12.set_block(0, l1, g.block(0, l1, l1, l2));
  g12.set_block(l1, 0, g.block(l1, 0, l2, l1));
  a.n_alpha = 3;
  a.coupled = true;
  a.parts.push_back({g11, g22, g12});
  return a;
}

std::vector<Matrix> alpha_gram(const AlphaInstance& inst, const Vector& alpha) {
  require(alpha.size() == inst.n_alpha, ErrorKind::dimension, "wrong number of α values");
  std::vector<Matrix> q;
  for (const auto& parts : inst.parts) {
    Matrix m(parts[0].rows(), parts[0].cols());
    for (std::size_t k = 0; k < inst.n_alpha; ++k)
      if (alpha[k] != 0.0) m += parts[k] * alpha[k];
    q.push_back(m);
  }
  return q;
}

namespace {

Vector unit_power(const AlphaInstance& inst) {
  Vector p(inst.n_alpha, 0.0);
  for (std::size_t b = 0; b < inst.parts.size(); ++b)
    for (std::size_t k = 0; k < inst.n_alpha; ++k) {
      const Matrix& w = inst.base.blocks[b].W;
      const Matrix& g = inst.parts[b][k];
      double s = 0.0;
      for (std::size_t i = 0; i < w.rows(); ++i)
        for (std::size_t j = 0; j < w.cols(); ++j) s += w(i, j) * g(i, j);
      p[k] += s;
    }
  return p;
}

template <class F>
double golden_min(F f, double lo, double hi, double tol, double* fbest) {
  const double r = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = lo;
  double b = hi;
  double x1 = b - r * (b - a);
  double x2 = a + r * (b - a);
  double f1 = f(x1);
  double f2 = f(x2);
  while (b - a > tol) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - r * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + r * (b - a);
      f2 = f(x2);
    }
  }
  // the interval ends are candidates too (one terminal switched off)
  double best = f1 <= f2 ? x1 : x2;
  double fb = std::min(f1, f2);
  for (double e : {lo, hi}) {
    const double fe = f(e);
    if (fe < fb) {
      fb = fe;
      best = e;
    }
  }
  if (fbest) *fbest = fb;
  return best;
}

}  // namespace

AlphaSolution solve_alpha_reduced(const AlphaInstance& inst) {
  const Vector pw = unit_power(inst);
  const double pmax = std::max(pw[0], pw[1]);
  require(pmax > 0.0, ErrorKind::domain, "fixed design carries no power");
  // a terminal whose fixed design is empty gets α = 0
  const bool on1 = pw[0] > 1e-12 * pmax;
  const bool on2 = pw[1] > 1e-12 * pmax;
  const double P = inst.base.P;
  auto alphas = [&](double t) {
    Vector a(inst.n_alpha, 0.0);
    a[0] = on1 ? t * P / pw[0] : 0.0;
    a[1] = on2 ? (1.0 - t) * P / pw[1] : 0.0;
    return a;
  };
  auto inner_min = [&](double t, double* a3) {
    Vector a = alphas(t);
    if (!inst.coupled) return relaxation_objective(inst.base, alpha_gram(inst, a));
    const double lim = std::sqrt(a[0] * a[1]);
    double fb = 0.0;
    const double best = golden_min(
        [&](double v) {
          a[2] = v;
          return relaxation_objective(inst.base, alpha_gram(inst, a));
        },
        -lim, lim, 1e-7 * std::max(lim, 1e-300), &fb);
    if (a3) *a3 = best;
    return fb;
  };
  double fbest = 0.0;
  double t = on1 ? 1.0 : 0.0;
  if (on1 && on2)
    t = golden_min([&](double tt) { return inner_min(tt, nullptr); }, 0.0, 1.0, 1e-7, &fbest);
  else
    fbest = inner_min(t, nullptr);
  AlphaSolution sol;
  sol.backend = "reduced";
  sol.alpha = alphas(t);
  if (inst.coupled) {
    double a3 = 0.0;
    fbest = inner_min(t, &a3);
    sol.alpha[2] = a3;
  }
  sol.objective = fbest;
  return sol;
}

ConicProblem assemble_alpha_rescale(const AlphaInstance& inst, SdrLayout* layout) {
  ConicProblem p;
  SdrLayout lay;
  const SdrInstance& base = inst.base;
  const std::size_t npos = std::numeric_limits<std::size_t>::max();
  for (std::size_t k = 0; k < inst.n_alpha; ++k)
    lay.alpha_vars.push_back(p.add_scalar("alpha" + std::to_string(k + 1), k < 2));
  if (inst.coupled) {
    LmiBlock& lmi = p.add_lmi("alpha_psd", 2);
    lmi.terms.push_back({p.flat(lay.alpha_vars[0]), 0, 0, 1.0});
    lmi.terms.push_back({p.flat(lay.alpha_vars[1]), 1, 1, 1.0});
    lmi.terms.push_back({p.flat(lay.alpha_vars[2]), 0, 1, 1.0});
  }
  for (std::size_t b = 0; b < base.blocks.size(); ++b) {
    const GramBlock& blk = base.blocks[b];
    const std::size_t l = blk.H.rows();
    if (blk.beta <= 0.0) {
      lay.y_vars.push_back(npos);
      continue;
    }
    const std::size_t y = p.add_symmetric("Y" + std::to_string(b + 1), l);
    lay.y_vars.push_back(y);
    LmiBlock& lmi = p.add_lmi("Y" + std::to_string(b + 1) + "_schur", 2 * l);
    p.add_variable_to_block(lmi, y, 0, 0, 1.0);
    for (std::size_t i = 0; i < l; ++i) lmi.constant(l + i, l + i) = blk.beta;
    for (std::size_t k = 0; k < inst.n_alpha; ++k) {
      const Matrix& g = inst.parts[b][k];
      const std::size_t f = p.flat(lay.alpha_vars[k]);
      for (std::size_t i = 0; i < l; ++i)
        for (std::size_t j = 0; j < l; ++j) {
          if (g(i, j) == 0.0) continue;
          lmi.terms.push_back({f, i, l + j, std::sqrt(blk.c) * g(i, j)});
          if (i <= j) lmi.terms.push_back({f, l + i, l + j, g(i, j)});
        }
    }
  }
  const std::size_t kk = base.prior_info.rows();
  for (std::size_t t = 0; t < base.index_sets.size(); ++t) {
    const auto& idx = base.index_sets[t];
    const std::size_t x = p.add_symmetric("X" + std::to_string(t), kk);
    lay.x_vars.push_back(x);
    p.add_trace_objective(x, base.weights[t]);
    LmiBlock& lmi = p.add_lmi("S" + std::to_string(t), 2 * kk);
    lmi.constant.set_block(0, 0, base.prior_info);
    for (std::size_t i = 0; i < kk; ++i) lmi.constant(i, kk + i) = lmi.constant(kk + i, i) = 1.0;
    p.add_variable_to_block(lmi, x, kk, kk, 1.0);
    for (std::size_t b = 0; b < base.blocks.size(); ++b) {
      const GramBlock& blk = base.blocks[b];
      const Matrix d = columns(blk.H, idx);
      for (std::size_t k = 0; k < inst.n_alpha; ++k) {
        const Matrix dgd = transpose_times(d, inst.parts[b][k] * d);
        const std::size_t f = p.flat(lay.alpha_vars[k]);
        for (std::size_t r = 0; r < kk; ++r)
          for (std::size_t s = r; s < kk; ++s)
            if (dgd(r, s) != 0.0) lmi.terms.push_back({f, r, s, blk.c * dgd(r, s)});
      }
      if (lay.y_vars[b] != npos) add_sandwich(p, lmi, lay.y_vars[b], d, -1.0);
    }
  }
  const Vector pw = unit_power(inst);
  LinearIneq& pow = p.add_ineq("power", -base.P);
  for (std::size_t k = 0; k < inst.n_alpha; ++k)
    if (pw[k] != 0.0) pow.terms.emplace_back(p.flat(lay.alpha_vars[k]), pw[k]);
  if (layout) *layout = lay;
  return p;
}

AlphaSolution solve_alpha_conic(const AlphaInstance& inst, const SolverOptions& opt) {
  SdrLayout lay;
  const ConicProblem p = assemble_alpha_rescale(inst, &lay);
  const ConicSolution cs = solve(p, opt);
  AlphaSolution sol;
  sol.backend = "admm";
  for (std::size_t v : lay.alpha_vars) sol.alpha.push_back(cs.x[p.flat(v)]);
  sol.objective = cs.objective;
  return sol;
}

}  // namespace csforge
