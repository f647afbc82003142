// SPDX-License-Identifier: Apache-2.0
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "csforge/errors.hpp"
#include "csforge/sdp.hpp"

namespace csforge {

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::converged: return "converged";
    case SolveStatus::max_iter: return "max-iter";
    case SolveStatus::infeasible_suspected: return "infeasible-suspected";
    case SolveStatus::numerical_breakdown: return "numerical-breakdown";
  }
  return "unknown";
}

std::size_t ConicProblem::add_symmetric(const std::string& name, std::size_t n) {
  require(n >= 1, ErrorKind::dimension, "symmetric variable needs n >= 1");
  vars_.push_back({name, VarKind::symmetric, n, unknowns_});
  unknowns_ += n * (n + 1) / 2;
  objective_.resize(unknowns_, 0.0);
  return vars_.size() - 1;
}

std::size_t ConicProblem::add_scalar(const std::string& name, bool nonneg) {
  vars_.push_back({name, nonneg ? VarKind::scalar_nonneg : VarKind::scalar_free, 1, unknowns_});
  unknowns_ += 1;
  objective_.resize(unknowns_, 0.0);
  return vars_.size() - 1;
}

std::size_t ConicProblem::flat(std::size_t var, std::size_t i, std::size_t j) const {
  require(var < vars_.size(), ErrorKind::dimension, "unknown conic variable");
  const ConicVariable& v = vars_[var];
  if (v.kind != VarKind::symmetric) return v.offset;
  if (i > j) std::swap(i, j);
  require(j < v.dim, ErrorKind::dimension, "entry outside symmetric variable");
  // row-wise upper triangle
  return v.offset + i * v.dim - i * (i - 1) / 2 + (j - i);
}

void ConicProblem::add_objective(std::size_t flat_index, double coef) {
  require(flat_index < unknowns_, ErrorKind::dimension, "objective index out of range");
  objective_[flat_index] += coef;
}

void ConicProblem::add_trace_objective(std::size_t var, double coef) {
  for (std::size_t i = 0; i < vars_[var].dim; ++i) add_objective(flat(var, i, i), coef);
}

LmiBlock& ConicProblem::add_lmi(const std::string& name, std::size_t size) {
  LmiBlock b;
  b.name = name;
  b.size = size;
  b.constant = Matrix(size, size);
  lmis_.push_back(std::move(b));
  return lmis_.back();
}

void ConicProblem::add_variable_to_block(LmiBlock& block, std::size_t var, std::size_t r0,
                                         std::size_t c0, double coef) const {
  const ConicVariable& v = vars_[var];
  if (v.kind != VarKind::symmetric) {
    block.terms.push_back({v.offset, r0, c0, coef});
    return;
  }
  require(r0 + v.dim <= block.size && c0 + v.dim <= block.size, ErrorKind::dimension,
          "variable does not fit in LMI block");
  for (std::size_t i = 0; i < v.dim; ++i)
    for (std::size_t j = 0; j < v.dim; ++j) {
      // on a diagonal placement the (j,i) mirror is produced by symmetry
      if (r0 == c0 && j < i) continue;
      block.terms.push_back({flat(var, i, j), r0 + i, c0 + j, coef});
    }
}

LinearIneq& ConicProblem::add_ineq(const std::string& name, double constant) {
  ineqs_.push_back({name, constant, {}});
  return ineqs_.back();
}

Matrix ConicProblem::block_value(const LmiBlock& b, const Vector& x) const {
  Matrix m = b.constant;
  for (const LmiCoef& t : b.terms) {
    const double v = t.value * x[t.flat];
    m(t.row, t.col) += v;
    if (t.row != t.col) m(t.col, t.row) += v;
  }
  return m;
}

Matrix ConicProblem::variable_value(std::size_t var, const Vector& x) const {
  const ConicVariable& v = vars_[var];
  Matrix m(v.dim, v.dim);
  for (std::size_t i = 0; i < v.dim; ++i)
    for (std::size_t j = 0; j < v.dim; ++j) m(i, j) = x[flat(var, i, j)];
  return m;
}

void ConicProblem::set_variable(std::size_t var, const Matrix& value, Vector& x) const {
  const ConicVariable& v = vars_[var];
  x.resize(unknowns_, 0.0);
  for (std::size_t i = 0; i < v.dim; ++i)
    for (std::size_t j = i; j < v.dim; ++j) x[flat(var, i, j)] = 0.5 * (value(i, j) + value(j, i));
}

void ConicProblem::dump(std::ostream& os) const {
  os.precision(17);
  os << "unknowns " << unknowns_ << "\n";
  os << "variables " << vars_.size() << "\n";
  for (std::size_t k = 0; k < vars_.size(); ++k) {
    const ConicVariable& v = vars_[k];
    const char* kind = v.kind == VarKind::symmetric       ? "sym"
                       : v.kind == VarKind::scalar_nonneg ? "nonneg"
                                                          : "free";
    os << "var " << k << " " << v.name << " " << kind << " " << v.dim << " " << v.offset << "\n";
  }
  std::size_t nnz = 0;
  for (double c : objective_) nnz += c != 0.0;
  os << "objective " << nnz << "\n";
  for (std::size_t i = 0; i < objective_.size(); ++i)
    if (objective_[i] != 0.0) os << i << " " << objective_[i] << "\n";
  for (const LmiBlock& b : lmis_) {
    std::size_t nc = 0;
    for (std::size_t i = 0; i < b.size; ++i)
      for (std::size_t j = i; j < b.size; ++j) nc += b.constant(i, j) != 0.0;
    os << "lmi " << b.name << " " << b.size << " " << nc << " " << b.terms.size() << "\n";
    for (std::size_t i = 0; i < b.size; ++i)
      for (std::size_t j = i; j < b.size; ++j)
        if (b.constant(i, j) != 0.0) os << "c " << i << " " << j << " " << b.constant(i, j) << "\n";
    for (const LmiCoef& t : b.terms)
      os << "t " << t.flat << " " << t.row << " " << t.col << " " << t.value << "\n";
  }
  for (const LinearIneq& q : ineqs_) {
    os << "ineq " << q.name << " " << q.constant << " " << q.terms.size() << "\n";
    for (const auto& [f, v] : q.terms) os << "t " << f << " " << v << "\n";
  }
}

ConicCheck check_point(const ConicProblem& p, const Vector& x) {
  require(x.size() == p.num_unknowns(), ErrorKind::dimension, "point has the wrong length");
  ConicCheck c;
  c.objective = dot(p.objective(), x);
  for (const LmiBlock& b : p.lmis()) {
    const SymEig e = sym_eig(p.block_value(b, x));
    c.lmi_violation = std::max(c.lmi_violation, -e.values.back());
  }
  for (const LinearIneq& q : p.ineqs()) {
    double v = q.constant;
    for (const auto& [f, a] : q.terms) v += a * x[f];
    c.ineq_violation = std::max(c.ineq_violation, v);
  }
  for (const ConicVariable& v : p.variables())
    if (v.kind == VarKind::scalar_nonneg) c.ineq_violation = std::max(c.ineq_violation, -x[v.offset]);
  return c;
}

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using EVec = Eigen::VectorXd;

constexpr double kSqrt2 = 1.41421356237309504880;

std::size_t svec_index(std::size_t n, std::size_t r, std::size_t c) {
  if (r > c) std::swap(r, c);
  return r * n - r * (r - 1) / 2 + (c - r);
}

struct Cone {
  std::size_t offset;
  std::size_t size;  // matrix order for psd, count for nonneg
  bool psd;
};

void project_cones(const std::vector<Cone>& cones, EVec& z) {
  for (const Cone& k : cones) {
    if (!k.psd) {
      for (std::size_t i = 0; i < k.size; ++i) z[k.offset + i] = std::max(z[k.offset + i], 0.0);
      continue;
    }
    const std::size_t n = k.size;
    if (n == 1) {
      z[k.offset] = std::max(z[k.offset], 0.0);
      continue;
    }
    Matrix m(n, n);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = r; c < n; ++c) {
        const double v = z[k.offset + svec_index(n, r, c)];
        m(r, c) = m(c, r) = r == c ? v : v / kSqrt2;
      }
    const SymEig e = sym_eig(m);
    if (e.values.back() >= 0.0) continue;
    const Matrix pm = spectral_map(e, [](double x) { return x > 0.0 ? x : 0.0; });
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = r; c < n; ++c)
        z[k.offset + svec_index(n, r, c)] = r == c ? pm(r, c) : pm(r, c) * kSqrt2;
  }
}

}  // namespace

ConicSolution solve(const ConicProblem& p, const SolverOptions& opt, const Vector* warm_start) {
  const std::size_t n = p.num_unknowns();
  require(n >= 1, ErrorKind::dimension, "conic problem has no unknowns");

  // rows: LMI blocks (svec), linear inequalities, nonneg scalars
  std::vector<Eigen::Triplet<double>> trip;
  std::vector<Cone> cones;
  std::vector<double> bvec;
  double scale_min = std::numeric_limits<double>::infinity();
  double scale_max = 0.0;
  std::size_t row = 0;
  for (const LmiBlock& b : p.lmis()) {
    const std::size_t m = b.size;
    const std::size_t dim = m * (m + 1) / 2;
    double big = 0.0;
    for (const LmiCoef& t : b.terms) big = std::max(big, std::abs(t.value));
    const double s = (opt.scale_blocks && big > 0.0) ? 1.0 / big : 1.0;
    scale_min = std::min(scale_min, s);
    scale_max = std::max(scale_max, s);
    for (const LmiCoef& t : b.terms) {
      const double w = t.row == t.col ? 1.0 : kSqrt2;
      trip.emplace_back(static_cast<int>(row + svec_index(m, t.row, t.col)),
                        static_cast<int>(t.flat), s * w * t.value);
    }
    bvec.resize(row + dim, 0.0);
    for (std::size_t r = 0; r < m; ++r)
      for (std::size_t c = r; c < m; ++c)
        bvec[row + svec_index(m, r, c)] = s * (r == c ? 1.0 : kSqrt2) * b.constant(r, c);
    cones.push_back({row, m, true});
    row += dim;
  }
  const std::size_t lin_start = row;
  for (const LinearIneq& q : p.ineqs()) {
    double big = 0.0;
    for (const auto& t : q.terms) big = std::max(big, std::abs(t.second));
    const double s = (opt.scale_blocks && big > 0.0) ? 1.0 / big : 1.0;
    for (const auto& [f, a] : q.terms)
      trip.emplace_back(static_cast<int>(row), static_cast<int>(f), -s * a);
    bvec.push_back(-s * q.constant);
    ++row;
  }
  for (const ConicVariable& v : p.variables()) {
    if (v.kind != VarKind::scalar_nonneg) continue;
    trip.emplace_back(static_cast<int>(row), static_cast<int>(v.offset), 1.0);
    bvec.push_back(0.0);
    ++row;
  }
  if (row > lin_start) cones.push_back({lin_start, row - lin_start, false});
  const std::size_t mrows = row;

  SpMat A(static_cast<int>(mrows), static_cast<int>(n));
  A.setFromTriplets(trip.begin(), trip.end());
  A.makeCompressed();
  const EVec b = Eigen::Map<const EVec>(bvec.data(), static_cast<Eigen::Index>(mrows));

  EVec c = Eigen::Map<const EVec>(p.objective().data(), static_cast<Eigen::Index>(n));
  const double c_scale = c.cwiseAbs().maxCoeff() > 0.0 ? 1.0 / c.cwiseAbs().maxCoeff() : 1.0;
  c *= c_scale;

  SpMat AtA = SpMat(A.transpose()) * A;
  double dmax = 0.0;
  for (int k = 0; k < AtA.outerSize(); ++k)
    for (SpMat::InnerIterator it(AtA, k); it; ++it)
      if (it.row() == it.col()) dmax = std::max(dmax, it.value());
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n); ++i)
    AtA.coeffRef(i, i) += 1e-12 * (1.0 + dmax);
  Eigen::SimplicialLDLT<SpMat> ldlt;
  ldlt.compute(AtA);
  require(ldlt.info() == Eigen::Success, ErrorKind::solver,
          "conic problem: constraint map is rank deficient");

  EVec x = EVec::Zero(static_cast<Eigen::Index>(n));
  if (warm_start) {
    require(warm_start->size() == n, ErrorKind::dimension, "warm start has the wrong length");
    x = Eigen::Map<const EVec>(warm_start->data(), static_cast<Eigen::Index>(n));
  }
  EVec z = A * x + b;
  project_cones(cones, z);
  EVec u = EVec::Zero(static_cast<Eigen::Index>(mrows));
  double rho = opt.rho;
  const double alpha = opt.over_relaxation;
  double eps_rel = opt.eps_rel;
  double eps_abs = opt.eps_rel;

  ConicSolution sol;
  sol.block_scale_min = scale_min;
  sol.block_scale_max = scale_max;
  EVec z_old;
  EVec ax;
  int it = 0;
  bool converged = false;
  double last_rp = 0.0;
  double last_rd = 0.0;
  for (it = 1; it <= opt.max_iter; ++it) {
    const EVec rhs = -(A.transpose() * (b - z + u)) - c / rho;
    x = ldlt.solve(rhs);
    ax = A * x;
    const EVec h = alpha * (ax + b) + (1.0 - alpha) * z;
    z_old = z;
    z = h + u;
    project_cones(cones, z);
    u += h - z;

    if (it % 10 != 0 && it != opt.max_iter) continue;
    if (!x.allFinite() || !u.allFinite()) {
      sol.status = SolveStatus::numerical_breakdown;
      break;
    }
    const double rp = (ax + b - z).norm();
    const double rd = rho * (A.transpose() * (z - z_old)).norm();
    const double scale_p = std::max({ax.norm(), z.norm(), b.norm()});
    const double aty = rho * (A.transpose() * u).norm();
    const double pobj = c.dot(x);
    const double dobj = rho * u.dot(b);
    const double gap = std::abs(pobj - dobj);
    last_rp = rp / (1.0 + scale_p);
    last_rd = rd / (1.0 + aty);
    const bool small = rp <= eps_abs + eps_rel * scale_p && rd <= eps_abs + eps_rel * aty &&
                       gap <= eps_rel * (1.0 + std::abs(pobj) + std::abs(dobj));
    if (small) {
      Vector xs(x.data(), x.data() + n);
      if (check_point(p, xs).feasibility() <= opt.eps_feas) {
        converged = true;
        break;
      }
      eps_rel *= 0.1;
      eps_abs *= 0.1;
    }
    if (opt.adaptive_rho && it % 50 == 0) {
      const double ratio = std::sqrt((rp / (1e-30 + scale_p)) / (rd / (1e-30 + aty) + 1e-30));
      if (ratio > 5.0 || ratio < 0.2) {
        const double f = std::clamp(ratio, 1e-3, 1e3);
        rho *= f;
        u /= f;
      }
    }
  }
  sol.iterations = std::min(it, opt.max_iter);
  sol.x.assign(x.data(), x.data() + n);
  const ConicCheck chk = check_point(p, sol.x);
  sol.objective = chk.objective;
  sol.feasibility_residual = chk.feasibility();
  sol.convergence_residual = std::max(last_rp, last_rd);
  sol.duality_gap = std::abs(c.dot(x) - rho * u.dot(b)) / c_scale;
  if (sol.status != SolveStatus::numerical_breakdown) {
    if (converged)
      sol.status = SolveStatus::converged;
    else if (last_rp > 1e-3 && last_rd < 1e-6)
      sol.status = SolveStatus::infeasible_suspected;
    else
      sol.status = SolveStatus::max_iter;
  }
  return sol;
}

}  // namespace csforge
