// SPDX-License-Identifier: Apache-2.0
#include "csforge/design.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "csforge/errors.hpp"

namespace csforge {

namespace {

bool is_identity(const Matrix& h) {
  if (!h.square()) return false;
  for (std::size_t i = 0; i < h.rows(); ++i)
    for (std::size_t j = 0; j < h.cols(); ++j)
      if (h(i, j) != (i == j ? 1.0 : 0.0)) return false;
  return true;
}

// σ² when R = σ²I (to rounding), else nullopt
std::optional<double> scaled_identity(const Matrix& r) {
  const double s = r(0, 0);
  for (std::size_t i = 0; i < r.rows(); ++i)
    for (std::size_t j = 0; j < r.cols(); ++j)
      if (std::abs(r(i, j) - (i == j ? s : 0.0)) > 1e-12 * std::abs(s)) return std::nullopt;
  return s;
}

SolverSummary summarize(const GramSolution& s) {
  return {s.backend, to_string(s.status), s.iterations, s.objective, s.residual};
}

Matrix leading_rows(std::size_t m, std::size_t l, double scale) {
  Matrix a(m, l);
  for (std::size_t i = 0; i < m; ++i) a(i, i) = scale;
  return a;
}

void finish(DesignResult& r, const ChannelSpec& spec, const Matrix& R, const Matrix& R_x,
            const SupportCollection& supports) {
  r.matrices[0] = power_rescale(r.matrices[0], spec, R_x);
  r.achieved_power = transmit_power(r.matrices[0], spec, R_x);
  r.lb = mse_lower_bound(r.matrices[0], spec, R, supports);
}

}  // namespace

LowRank low_rank_from_gram(const Matrix& q, std::size_t M, double tie_tolerance) {
  require(q.square(), ErrorKind::dimension, "Gram matrix must be square");
  const std::size_t l = q.rows();
  require(M >= 1 && M <= l, ErrorKind::dimension, "need 1 <= M <= L");
  const Matrix qs = symmetrize(q);
  SymEig e = sym_eig(qs);
  Matrix u = e.vectors;
  Vector gam = e.values;

  if (tie_tolerance > 0.0 && l > 1) {
    // near-equal eigenvalues: replace the cluster's basis by the
    // Gram–Schmidt basis of its projector's columns in index order, so a
    // degenerate spectrum gives a coordinate-aligned factor
    const double scale = std::max(std::abs(gam.front()), std::abs(gam.back()));
    std::size_t start = 0;
    while (start < M) {
      std::size_t end = start + 1;
      while (end < l && gam[end - 1] - gam[end] <= tie_tolerance * scale) ++end;
      const std::size_t size = end - start;
      if (size > 1) {
        Matrix uc = u.block(0, start, l, size);
        const Matrix proj = times_transpose(uc, uc);
        const Matrix basis = orthonormal_columns(proj, 1e-6);
        if (basis.cols() == size) {
          const Matrix qb = qs * basis;
          for (std::size_t k = 0; k < size; ++k) {
            double rq = 0.0;
            for (std::size_t i = 0; i < l; ++i) {
              u(i, start + k) = basis(i, k);
              rq += basis(i, k) * qb(i, k);
            }
            gam[start + k] = rq;
          }
        }
      }
      start = end;
    }
  }

  LowRank out;
  out.eigenvalues = e.values;
  out.a = Matrix(M, l);
  for (std::size_t i = 0; i < M; ++i) {
    const double s = std::sqrt(std::max(gam[i], 0.0));
    for (std::size_t j = 0; j < l; ++j) out.a(i, j) = s * u(j, i);
  }
  const Matrix d = transpose_times(out.a, out.a) - qs;
  const double f = frobenius_norm(d);
  out.residual = f * f;
  return out;
}

Matrix power_rescale(const Matrix& a, const ChannelSpec& spec, const Matrix& R_x) {
  const double p = transmit_power(a, spec, R_x);
  require(p > 0.0 && std::isfinite(p), ErrorKind::domain, "cannot rescale a zero-power matrix");
  return a * std::sqrt(spec.P / p);
}

GramSolution solve_sdr(const SdrInstance& inst, const DesignOptions& opt) {
  if (opt.backend == SdrBackend::admm) return solve_conic(inst, opt.admm);
  return solve_reduced(inst, opt.reduced);
}

DesignResult design_procedure1(const ChannelSpec& spec, const Matrix& R, const Matrix& R_x,
                               const SupportCollection& supports, const DesignOptions& opt,
                               const GramSolution* sdr) {
  validate_channel(spec);
  GramSolution local;
  if (!sdr) {
    local = solve_sdr(sdr_instance(spec, R, R_x, supports), opt);
    sdr = &local;
  }
  DesignResult r;
  r.method = "procedure1";
  r.solver = summarize(*sdr);
  r.relaxation_bound = sdr->objective;
  r.matrices.push_back(low_rank_from_gram(sdr->Q[0], spec.M, opt.tie_tolerance).a);
  finish(r, spec, R, R_x, supports);
  if (sdr->status != SolveStatus::converged)
    r.notes.push_back(std::string("relaxation solver status ") + to_string(sdr->status));
  return r;
}

DesignResult closed_form(int which, const ChannelSpec& spec, const Matrix& R, const Matrix& R_x,
                         const SupportCollection& supports, const DesignOptions& opt) {
  validate_channel(spec);
  const std::size_t m = spec.M;
  const std::size_t l = spec.L();
  const double k = static_cast<double>(R.rows());
  const auto sx2 = scaled_identity(R);
  DesignResult r;
  r.method = "closed_form" + std::to_string(which);
  auto mismatch = [&](const char* why) {
    fail(ErrorKind::case_mismatch, "closed form " + std::to_string(which) + ": " + why);
  };
  switch (which) {
    case 1: {
      if (!sx2) mismatch("needs R = sigma_x^2 I");
      if (!is_identity(spec.H)) mismatch("needs H = I");
      const double sv2 = spec.sigma_v * spec.sigma_v;
      const double nominal = std::sqrt(k * spec.P / (static_cast<double>(m) * (*sx2 + k * sv2)));
      r.matrices.push_back(leading_rows(m, l, nominal));
      r.rescale_factors = {nominal};
      break;
    }
    case 2: {
      if (!sx2) mismatch("needs R = sigma_x^2 I");
      if (spec.sigma_v != 0.0) mismatch("needs sigma_v = 0");
      if (!spec.H.square()) mismatch("needs a square H");
      const Svd s = svd_thin(spec.H);
      if (s.sigma.back() <= 1e-12 * s.sigma.front()) mismatch("needs a full-rank H");
      const double nominal = std::sqrt(k * spec.P / (static_cast<double>(m) * *sx2));
      // singular values come out descending; take the M smallest, ascending
      const std::size_t n = s.sigma.size();
      Matrix a(m, l);
      for (std::size_t i = 0; i < m; ++i) {
        const std::size_t c = n - 1 - i;
        const double g = nominal / s.sigma[c];
        for (std::size_t j = 0; j < l; ++j) a(i, j) = g * s.u(j, c);
      }
      r.matrices.push_back(a);
      r.rescale_factors = {nominal};
      r.notes.push_back(
          "inverts the M smallest channel singular values; the largest-M choice is the untested "
          "alternative");
      break;
    }
    case 3: {
      if (spec.sigma_w != 0.0) mismatch("needs sigma_w = 0");
      if (!is_identity(spec.H)) mismatch("needs H = I");
      if (!sx2) mismatch("needs R = sigma_x^2 I");
      if (spec.sigma_v <= 0.0) mismatch("needs sigma_v > 0 so the measurement noise is nonsingular");
      const double sv2 = spec.sigma_v * spec.sigma_v;
      const double nominal = std::sqrt(k * spec.P / (static_cast<double>(m) * (*sx2 + k * sv2)));
      r.matrices.push_back(leading_rows(m, l, nominal));
      r.rescale_factors = {nominal};
      break;
    }
    case 4: {
      if (spec.sigma_v != 0.0) mismatch("needs sigma_v = 0");
      const double csnr = spec.g * spec.g / (spec.sigma_w * spec.sigma_w);
      if (!opt.force_asymptotic && !(csnr <= opt.asymptotic_threshold))
        mismatch("g^2/sigma_w^2 is above the asymptotic threshold");
      // T = Σ_S D_S R² D_Sᵀ with D_S = H E_S
      const Matrix r2 = R * R;
      const Vector w = supports.normalized_weights();
      Matrix t(l, l);
      for (std::size_t s = 0; s < supports.size(); ++s) {
        const Matrix d = columns(spec.H, supports.sets[s].indices);
        t += (d * r2 * d.transpose()) * w[s];
      }
      const SymEig te = sym_eig(t);
      if (te.values.back() <= 1e-12 * te.values.front()) mismatch("T is singular (H rank deficient)");
      const Matrix t_isqrt = spectral_map(te, [](double v) { return 1.0 / std::sqrt(v); });
      const Matrix z = t_isqrt * power_weight(spec, R_x) * t_isqrt;
      const SymEig ze = sym_eig(z);
      const std::size_t last = ze.values.size() - 1;
      const double gz = ze.values[last];
      require(gz > 0.0, ErrorKind::case_mismatch, "closed form 4: Z has a zero eigenvalue");
      Vector v = t_isqrt * ze.vectors.col(last);
      // Q* = (P/γ) v vᵀ; rank one, so A* carries v in its first row
      const double gq = spec.P / gz * dot(v, v);
      const double nv = norm2(v);
      Matrix a(m, l);
      for (std::size_t j = 0; j < l; ++j) a(0, j) = std::sqrt(gq) * v[j] / nv;
      r.matrices.push_back(a);
      r.rescale_factors = {gq};
      break;
    }
    default:
      fail(ErrorKind::case_mismatch, "closed form case must be 1, 2, 3 or 4");
  }
  finish(r, spec, R, R_x, supports);
  return r;
}

DesignResult design_randomization(const ChannelSpec& spec, const Matrix& R, const Matrix& R_x,
                                  const SupportCollection& supports, std::size_t n_rand,
                                  std::uint64_t seed, const DesignOptions& opt,
                                  const GramSolution* sdr) {
  validate_channel(spec);
  require(n_rand >= 1, ErrorKind::domain, "randomization needs at least one draw");
  GramSolution local;
  if (!sdr) {
    local = solve_sdr(sdr_instance(spec, R, R_x, supports), opt);
    sdr = &local;
  }
  const std::size_t l = spec.L();
  const std::size_t m = spec.M;
  const SymEig e = sym_eig(sdr->Q[0]);
  // Γ^{1/2} U_qᵀ
  Matrix root(l, l);
  for (std::size_t i = 0; i < l; ++i) {
    const double s = std::sqrt(std::max(e.values[i], 0.0));
    for (std::size_t j = 0; j < l; ++j) root(i, j) = s * e.vectors(j, i);
  }
  const double sd = 1.0 / std::sqrt(static_cast<double>(m));
  DesignResult best;
  best.method = "randomization";
  double best_lb = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < n_rand; ++k) {
    Stream rng(seed, StreamDomain::design, k);
    Matrix v(m, l);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < l; ++j) v(i, j) = sd * rng.normal();
    const Matrix a = power_rescale(v * root, spec, R_x);
    const BoundReport lb = mse_lower_bound(a, spec, R, supports);
    if (lb.value < best_lb) {
      best_lb = lb.value;
      best.matrices = {a};
      best.lb = lb;
    }
  }
  best.achieved_power = transmit_power(best.matrices[0], spec, R_x);
  best.solver = summarize(*sdr);
  best.relaxation_bound = sdr->objective;
  return best;
}

DesignResult design_mac(const MultiTerminalSpec& spec, const Matrix& R, const Matrix& R_x,
                        const SupportCollection& supports, const DesignOptions& opt,
                        bool optimize_alpha, const GramSolution* sdr) {
  validate_mac(spec);
  GramSolution local;
  if (!sdr) {
    local = solve_sdr(sdr_instance(spec, R, R_x, supports), opt);
    sdr = &local;
  }
  const auto& t1 = spec.terminals[0];
  const auto& t2 = spec.terminals[1];
  DesignResult r;
  r.solver = summarize(*sdr);
  r.relaxation_bound = sdr->objective;
  Matrix a1;
  Matrix a2;
  std::vector<Matrix> grams;
  if (spec.mode == MacMode::orthogonal) {
    r.method = optimize_alpha ? "mac_orthogonal" : "mac_orthogonal_equal";
    std::array<Matrix, 2> q{sdr->Q[0], sdr->Q[1]};
    const double tr1 = trace(q[0]);
    const double tr2 = trace(q[1]);
    for (std::size_t l = 0; l < 2; ++l) {
      // an empty relaxed Gram has no direction to keep; borrow one from the
      // terminal's own relaxation and let the α stage set its power
      if (trace(q[l]) > 1e-9 * std::max(tr1, tr2)) continue;
      ChannelSpec alone = spec.terminals[l];
      alone.P = spec.P;
      q[l] = solve_sdr(sdr_instance(alone, R, R_x, supports), opt).Q[0];
      r.notes.push_back("terminal " + std::to_string(l + 1) +
                        " got no power in the joint relaxation; its direction comes from its "
                        "own relaxation");
    }
    a1 = low_rank_from_gram(q[0], t1.M, opt.tie_tolerance).a;
    a2 = low_rank_from_gram(q[1], t2.M, opt.tie_tolerance).a;
    grams = {transpose_times(a1, a1), transpose_times(a2, a2)};
  } else {
    r.method = optimize_alpha ? "mac_coherent" : "mac_coherent_equal";
    const Matrix at = low_rank_from_gram(sdr->Q[0], t1.M, opt.tie_tolerance).a;
    const bool whitened = t1.sigma_v > 0.0;
    const double s1 = whitened ? t1.sigma_v : 1.0;
    const double s2 = whitened ? t2.sigma_v : 1.0;
    a1 = at.block(0, 0, t1.M, t1.L()) * (1.0 / (t1.g * s1));
    a2 = at.block(0, t1.L(), t1.M, t2.L()) * (1.0 / (t2.g * s2));
    grams = {transpose_times(at, at)};
  }
  const AlphaInstance ai = alpha_instance(spec, R, R_x, supports, grams);
  Vector alpha;
  if (optimize_alpha) {
    const AlphaSolution as = opt.backend == SdrBackend::admm ? solve_alpha_conic(ai, opt.admm)
                                                             : solve_alpha_reduced(ai);
    alpha = as.alpha;
    r.alpha_objective = as.objective;
  } else {
    const double p1 = transmit_power(a1, t1, R_x);
    const double p2 = transmit_power(a2, t2, R_x);
    require(p1 + p2 > 0.0, ErrorKind::domain, "low-rank stage produced zero power");
    const double a = spec.P / (p1 + p2);
    alpha = {a, a};
    if (ai.coupled) alpha.push_back(a);
    r.alpha_objective = relaxation_objective(ai.base, alpha_gram(ai, alpha));
  }
  r.rescale_factors = alpha;
  a1 *= std::sqrt(std::max(alpha[0], 0.0));
  a2 *= std::sqrt(std::max(alpha[1], 0.0));
  r.matrices = {a1, a2};
  r.achieved_power = transmit_power(a1, a2, spec, R_x);
  r.lb = mse_lower_bound(a1, a2, spec, R, supports);
  if (ai.coupled && optimize_alpha) {
    const double real = std::sqrt(std::max(alpha[0] * alpha[1], 0.0));
    if (std::abs(alpha[2] - real) > 1e-6 * std::max(real, 1.0))
      r.notes.push_back("cross weight alpha3 differs from sqrt(alpha1 alpha2); the realized bound "
                        "uses the realizable scaling");
  }
  return r;
}

Matrix random_orthogonal(std::size_t n, Stream& rng) {
  while (true) {
    Matrix g(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) g(i, j) = rng.normal();
    Matrix q = orthonormal_columns(g, 1e-8);
    if (q.cols() == n) return q;
  }
}

DesignResult design_baseline(BaselineKind kind, const ChannelSpec& spec, const Matrix& R,
                             const Matrix& R_x, const SupportCollection& supports, Stream* rng,
                             const DesignOptions& opt) {
  validate_channel(spec);
  const std::size_t m = spec.M;
  const std::size_t l = spec.L();
  DesignResult r;
  switch (kind) {
    case BaselineKind::gaussian: {
      require(rng != nullptr, ErrorKind::domain, "gaussian baseline needs a random stream");
      r.method = "gaussian";
      Matrix a(m, l);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < l; ++j) a(i, j) = rng->normal();
      r.matrices.push_back(a);
      break;
    }
    case BaselineKind::tight_frame: {
      require(rng != nullptr, ErrorKind::domain, "tight frame baseline needs a random stream");
      r.method = "tight_frame";
      const Matrix v = random_orthogonal(l, *rng);
      Matrix a(m, l);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < l; ++j) a(i, j) = v(j, i);
      r.matrices.push_back(a);
      break;
    }
    case BaselineKind::lmmse_min: {
      r.method = "lmmse_min";
      const GramSolution s = solve_sdr(lmmse_instance(spec, R_x), opt);
      r.solver = summarize(s);
      r.relaxation_bound = s.objective;
      r.matrices.push_back(low_rank_from_gram(s.Q[0], m, opt.tie_tolerance).a);
      break;
    }
  }
  finish(r, spec, R, R_x, supports);
  return r;
}

void write_matrix_csv(std::ostream& os, const Matrix& a, const std::string& method) {
  os << a.rows() << "," << a.cols() << "," << method << "\n";
  char buf[64];
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", a(i, j));
      os << (j ? "," : "") << buf;
    }
    os << "\n";
  }
}

Matrix read_matrix_csv(std::istream& is, std::string* method) {
  std::string line;
  require(static_cast<bool>(std::getline(is, line)), ErrorKind::io, "matrix CSV is empty");
  std::istringstream head(line);
  std::string ms;
  std::string ls;
  std::string tag;
  std::getline(head, ms, ',');
  std::getline(head, ls, ',');
  std::getline(head, tag);
  std::size_t m = 0;
  std::size_t l = 0;
  try {
    m = std::stoul(ms);
    l = std::stoul(ls);
  } catch (const std::exception&) {
    fail(ErrorKind::io, "matrix CSV header must be M,L,method");
  }
  if (method) *method = tag;
  Matrix a(m, l);
  for (std::size_t i = 0; i < m; ++i) {
    require(static_cast<bool>(std::getline(is, line)), ErrorKind::io, "matrix CSV is truncated");
    std::istringstream row(line);
    std::string cell;
    for (std::size_t j = 0; j < l; ++j) {
      require(static_cast<bool>(std::getline(row, cell, ',')), ErrorKind::io,
              "matrix CSV row is short");
      a(i, j) = std::stod(cell);
    }
  }
  return a;
}

}  // namespace csforge
