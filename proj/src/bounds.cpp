// SPDX-License-Identifier: Apache-2.0
#include "csforge/bounds.hpp"

#include <algorithm>
#include <cmath>

#include "csforge/errors.hpp"

namespace csforge {

namespace {

void check_terminal(const Matrix& a, const ChannelSpec& spec) {
  require(a.cols() == spec.L(), ErrorKind::dimension, "sensing matrix width must equal L");
}

// g²σ_v² A Aᵀ + σ_w² I
Matrix terminal_noise(const Matrix& a, const ChannelSpec& spec) {
  Matrix rn(a.rows(), a.rows());
  const double gv = spec.g * spec.g * spec.sigma_v * spec.sigma_v;
  if (gv != 0.0) rn = times_transpose(a, a) * gv;
  for (std::size_t i = 0; i < rn.rows(); ++i) rn(i, i) += spec.sigma_w * spec.sigma_w;
  return symmetrize(rn);
}

}  // namespace

Matrix noise_covariance(const Matrix& a, const ChannelSpec& spec) {
  check_terminal(a, spec);
  return terminal_noise(a, spec);
}

Matrix noise_covariance(const Matrix& a1, const Matrix& a2, const MultiTerminalSpec& spec) {
  const auto& t1 = spec.terminals[0];
  const auto& t2 = spec.terminals[1];
  check_terminal(a1, t1);
  check_terminal(a2, t2);
  if (spec.mode == MacMode::orthogonal)
    return block_diagonal(terminal_noise(a1, t1), terminal_noise(a2, t2));
  require(a1.rows() == a2.rows(), ErrorKind::dimension, "coherent MAC needs M1 == M2");
  require(t1.sigma_w == t2.sigma_w, ErrorKind::domain,
          "coherent MAC has a single channel noise; sigma_w must match");
  Matrix rn(a1.rows(), a1.rows());
  const double v1 = t1.g * t1.g * t1.sigma_v * t1.sigma_v;
  const double v2 = t2.g * t2.g * t2.sigma_v * t2.sigma_v;
  if (v1 != 0.0) rn += times_transpose(a1, a1) * v1;
  if (v2 != 0.0) rn += times_transpose(a2, a2) * v2;
  for (std::size_t i = 0; i < rn.rows(); ++i) rn(i, i) += t1.sigma_w * t1.sigma_w;
  return symmetrize(rn);
}

EffectiveModel effective_model(const Matrix& a, const ChannelSpec& spec) {
  check_terminal(a, spec);
  return {a * spec.H * spec.g, terminal_noise(a, spec)};
}

EffectiveModel effective_model(const Matrix& a1, const Matrix& a2, const MultiTerminalSpec& spec) {
  const auto& t1 = spec.terminals[0];
  const auto& t2 = spec.terminals[1];
  const Matrix b1 = a1 * t1.H * t1.g;
  const Matrix b2 = a2 * t2.H * t2.g;
  const Matrix rn = noise_covariance(a1, a2, spec);
  if (spec.mode == MacMode::orthogonal) return {vstack(b1, b2), rn};
  return {b1 + b2, rn};
}

Matrix woodbury_noise_inverse(const Matrix& a, const ChannelSpec& spec) {
  check_terminal(a, spec);
  require(spec.sigma_w > 0.0, ErrorKind::domain, "Woodbury form needs sigma_w > 0");
  const double w2 = spec.sigma_w * spec.sigma_w;
  const std::size_t m = a.rows();
  Matrix out = Matrix::identity(m) * (1.0 / w2);
  const double gv = spec.g * spec.g * spec.sigma_v * spec.sigma_v;
  if (gv == 0.0) return out;
  const double beta = w2 / gv;
  Matrix inner = transpose_times(a, a);
  for (std::size_t i = 0; i < inner.rows(); ++i) inner(i, i) += beta;
  // A(βI + AᵀA)⁻¹Aᵀ
  const Matrix x = solve_spd(inner, a.transpose());
  out -= (a * x) * (1.0 / w2);
  return symmetrize(out);
}

WhitenedModel::WhitenedModel(const EffectiveModel& m, const Matrix& R)
    : ln_(cholesky(m.Rn)),
      bw_(forward_substitute(ln_, m.B)),
      info_(symmetrize(transpose_times(bw_, bw_))),
      r_(symmetrize(R)),
      r_inv_(inverse_spd(R)) {
  require(m.B.rows() == m.Rn.rows(), ErrorKind::dimension, "B and Rn disagree on M");
}

Matrix WhitenedModel::posterior_info(const SupportSet& s) const {
  const std::size_t k = s.size();
  require(k == r_.rows(), ErrorKind::dimension, "support size must match R");
  Matrix p(k, k);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) p(i, j) = r_inv_(i, j) + info_(s.indices[i], s.indices[j]);
  return p;
}

Vector WhitenedModel::oracle_estimate_whitened(const Vector& yw, const SupportSet& s) const {
  const std::size_t k = s.size();
  Vector rhs(k, 0.0);
  for (std::size_t j = 0; j < k; ++j) {
    const std::size_t c = s.indices[j];
    double acc = 0.0;
    for (std::size_t i = 0; i < bw_.rows(); ++i) acc += bw_(i, c) * yw[i];
    rhs[j] = acc;
  }
  const Vector xs = solve_spd(posterior_info(s), rhs);
  Vector x(N(), 0.0);
  for (std::size_t j = 0; j < k; ++j) x[s.indices[j]] = xs[j];
  return x;
}

BoundReport mse_lower_bound(const EffectiveModel& m, const Matrix& R,
                            const SupportCollection& supports, bool keep_terms) {
  require(supports.size() >= 1, ErrorKind::domain, "lower bound needs at least one support");
  const WhitenedModel w(m, R);
  const Vector weights = supports.normalized_weights();
  BoundReport rep;
  rep.exact = supports.exact;
  rep.support_count_used = supports.size();
  if (keep_terms) rep.per_support_terms.resize(supports.size());
  double total = 0.0;
  for (std::size_t t = 0; t < supports.size(); ++t) {
    const double term = trace_inverse_spd(w.posterior_info(supports.sets[t]));
    if (keep_terms) rep.per_support_terms[t] = term;
    total += weights[t] * term;
  }
  rep.value = total;
  return rep;
}

BoundReport mse_lower_bound(const Matrix& a, const ChannelSpec& spec, const Matrix& R,
                            const SupportCollection& supports, bool keep_terms) {
  return mse_lower_bound(effective_model(a, spec), R, supports, keep_terms);
}

BoundReport mse_lower_bound(const Matrix& a1, const Matrix& a2, const MultiTerminalSpec& spec,
                            const Matrix& R, const SupportCollection& supports, bool keep_terms) {
  return mse_lower_bound(effective_model(a1, a2, spec), R, supports, keep_terms);
}

Vector oracle_estimate(const Vector& y, const SupportSet& s, const EffectiveModel& m,
                       const Matrix& R) {
  require(y.size() == m.B.rows(), ErrorKind::dimension, "measurement length mismatch");
  const WhitenedModel w(m, R);
  return w.oracle_estimate_whitened(w.whiten(y), s);
}

Vector oracle_estimate(const Vector& y, const SupportSet& s, const Matrix& a,
                       const ChannelSpec& spec, const Matrix& R) {
  return oracle_estimate(y, s, effective_model(a, spec), R);
}

double lmmse_upper_bound(const EffectiveModel& m, const Matrix& R_x) {
  // Tr{(R_x⁻¹ + BᵀRn⁻¹B)⁻¹} written in covariance form, which is the
  // ε → 0 limit of the regularized inverse and needs no R_x⁻¹
  const std::size_t n = R_x.rows();
  require(m.B.cols() == n, ErrorKind::dimension, "R_x does not match B");
  const Matrix brx = m.B * R_x;                      // M×N
  const Matrix s = times_transpose(brx, m.B) + m.Rn;  // B R_x Bᵀ + Rn
  const Matrix x = solve_spd(s, brx);                // M×N
  double reduction = 0.0;
  for (std::size_t i = 0; i < brx.rows(); ++i)
    for (std::size_t j = 0; j < n; ++j) reduction += brx(i, j) * x(i, j);
  return std::max(trace(R_x) - reduction, 0.0);
}

double lmmse_upper_bound(const Matrix& a, const ChannelSpec& spec, const Matrix& R_x) {
  return lmmse_upper_bound(effective_model(a, spec), R_x);
}

ColumnNormalization normalize_columns(const Matrix& a) {
  ColumnNormalization out;
  out.normalized = a;
  out.s1 = 0.0;
  out.s2 = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < a.cols(); ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) s += a(i, j) * a(i, j);
    require(s > 0.0, ErrorKind::domain, "cannot normalize a zero column");
    const double inv = 1.0 / std::sqrt(s);
    for (std::size_t i = 0; i < a.rows(); ++i) out.normalized(i, j) *= inv;
    out.s1 = std::max(out.s1, s);
    out.s2 = std::min(out.s2, s);
  }
  return out;
}

Sandwich coherence_sandwich(const Matrix& a_normalized, const ChannelSpec& spec, const Matrix& R,
                            double mu, double s1, double s2) {
  require(mu >= 0.0 && mu <= 1.0, ErrorKind::domain, "coherence must lie in [0, 1]");
  require(a_normalized.cols() == spec.L(), ErrorKind::dimension, "A width must equal L");
  require(s1 >= s2 && s2 > 0.0, ErrorKind::domain, "need s1 >= s2 > 0");
  require(spec.sigma_w > 0.0, ErrorKind::domain, "sandwich needs sigma_w > 0");
  const double k = static_cast<double>(R.rows());
  const SymEig e = sym_eig(inverse_spd(R));
  const double lam_max = e.values.front();
  const double lam_min = e.values.back();
  const double c = spec.g * spec.g / (spec.sigma_w * spec.sigma_w);
  Sandwich out;
  out.lower = k / (lam_max + c * s1 * (1.0 + k * mu));
  if (k * mu < 1.0) out.upper = k / (lam_min + c * s2 * (1.0 - k * mu));
  return out;
}

Sandwich coherence_sandwich(const Matrix& a, const ChannelSpec& spec, const Matrix& R) {
  const ColumnNormalization n = normalize_columns(a);
  return coherence_sandwich(n.normalized, spec, R, mutual_coherence(n.normalized), n.s1, n.s2);
}

}  // namespace csforge
