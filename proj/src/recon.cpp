// SPDX-License-Identifier: Apache-2.0
#include "csforge/recon.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "csforge/errors.hpp"

namespace csforge {

namespace {

// prior pieces for the leading k×k block of R, k = 1..K
struct PriorCache {
  std::vector<Matrix> inv;
  Vector log_det;

  explicit PriorCache(const Matrix& R) : inv(R.rows() + 1), log_det(R.rows() + 1, 0.0) {
    for (std::size_t k = 1; k <= R.rows(); ++k) {
      std::vector<std::size_t> lead(k);
      std::iota(lead.begin(), lead.end(), std::size_t{0});
      const Matrix r = submatrix(R, lead);
      inv[k] = inverse_spd(r);
      log_det[k] = log_det_from_cholesky(cholesky(r));
    }
  }
};

// log evidence of support t (sorted) up to a constant shared by all
// supports of the same size
struct Evidence {
  double log_ev = 0.0;
  Vector mean;  // conditional mean of x_t
};

Evidence support_evidence(const WhitenedModel& model, const PriorCache& prior, const Vector& b,
                          const std::vector<std::size_t>& t) {
  const std::size_t k = t.size();
  Matrix g = prior.inv[k] + submatrix(model.info(), t);
  Matrix lg = cholesky(symmetrize(g));
  Vector bt(k);
  for (std::size_t i = 0; i < k; ++i) bt[i] = b[t[i]];
  Evidence ev;
  ev.mean = cholesky_solve(lg, bt);
  ev.log_ev = -0.5 * (prior.log_det[k] + log_det_from_cholesky(lg)) + 0.5 * dot(bt, ev.mean);
  return ev;
}

std::size_t sample_softmax(const Vector& logw, Stream& rng) {
  double mx = *std::max_element(logw.begin(), logw.end());
  Vector w(logw.size());
  double total = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = std::exp(logw[i] - mx);
    total += w[i];
  }
  double u = rng.uniform() * total;
  for (std::size_t i = 0; i < w.size(); ++i) {
    u -= w[i];
    if (u < 0.0) return i;
  }
  return w.size() - 1;
}

WhitenedModel single_model(const Matrix& a, const ChannelSpec& spec, const Matrix& R) {
  return WhitenedModel(effective_model(a, spec), R);
}

}  // namespace

DecodeResult omp(const Vector& y, const Matrix& phi, std::size_t K) {
  require(y.size() == phi.rows(), ErrorKind::dimension, "omp: y and phi disagree");
  require(K >= 1 && K <= phi.cols(), ErrorKind::domain, "omp: K out of range");
  const std::size_t n = phi.cols();
  Vector norms(n);
  for (std::size_t j = 0; j < n; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < phi.rows(); ++i) s += phi(i, j) * phi(i, j);
    norms[j] = std::sqrt(s);
  }
  DecodeResult out;
  std::vector<std::size_t> chosen;
  Vector r = y;
  Vector coef;
  for (std::size_t it = 0; it < K; ++it) {
    Vector c = transpose_times(phi, r);
    std::size_t best = n;
    double best_v = -1.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (std::find(chosen.begin(), chosen.end(), j) != chosen.end()) continue;
      double v = norms[j] > 0.0 ? std::abs(c[j]) / norms[j] : 0.0;
      if (v > best_v) {
        best_v = v;
        best = j;
      }
    }
    chosen.push_back(best);
    Matrix sub = columns(phi, chosen);
    Vector rhs = transpose_times(sub, y);
    try {
      coef = solve_spd(transpose_times(sub, sub), rhs);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::definiteness) throw;
      coef = pinv(sub) * y;
      out.rank_deficient = true;
    }
    Vector fit = sub * coef;
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = y[i] - fit[i];
    out.iterations = static_cast<int>(it + 1);
  }
  out.x_hat.assign(n, 0.0);
  for (std::size_t i = 0; i < chosen.size(); ++i) out.x_hat[chosen[i]] = coef[i];
  std::sort(chosen.begin(), chosen.end());
  out.support_hat.indices = chosen;
  return out;
}

DecodeResult random_omp(const Vector& yw, const WhitenedModel& model, std::size_t K,
                        std::size_t n_draws, Stream& rng) {
  const std::size_t n = model.N();
  require(K >= 1 && K <= n && K == model.R().rows(), ErrorKind::domain,
          "random_omp: K must match the source prior");
  require(n_draws >= 1, ErrorKind::validation, "random_omp: need at least one draw");
  require(yw.size() == model.B().rows(), ErrorKind::dimension, "random_omp: y has wrong length");
  Vector b = transpose_times(model.B(), yw);
  const PriorCache prior(model.R());
  DecodeResult out;
  out.x_hat.assign(n, 0.0);
  for (std::size_t d = 0; d < n_draws; ++d) {
    std::vector<std::size_t> t;
    Evidence last;
    for (std::size_t step = 0; step < K; ++step) {
      std::vector<std::size_t> cand;
      Vector logw;
      std::vector<Evidence> evs;
      for (std::size_t j = 0; j < n; ++j) {
        if (std::binary_search(t.begin(), t.end(), j)) continue;
        std::vector<std::size_t> tj = t;
        tj.insert(std::upper_bound(tj.begin(), tj.end(), j), j);
        Evidence ev = support_evidence(model, prior, b, tj);
        cand.push_back(j);
        logw.push_back(ev.log_ev);
        evs.push_back(std::move(ev));
      }
      std::size_t pick = sample_softmax(logw, rng);
      t.insert(std::upper_bound(t.begin(), t.end(), cand[pick]), cand[pick]);
      last = std::move(evs[pick]);
    }
    for (std::size_t i = 0; i < K; ++i) out.x_hat[t[i]] += last.mean[i];
  }
  for (double& v : out.x_hat) v /= static_cast<double>(n_draws);
  out.iterations = static_cast<int>(n_draws);
  out.support_hat = top_k_support(out.x_hat, K);
  return out;
}

DecodeResult random_omp(const Vector& y, const Matrix& a, const ChannelSpec& spec,
                        const Matrix& R, std::size_t K, std::size_t n_draws, Stream& rng) {
  WhitenedModel m = single_model(a, spec, R);
  return random_omp(m.whiten(y), m, K, n_draws, rng);
}

DecodeResult exhaustive_mmse(const Vector& yw, const WhitenedModel& model,
                             const SupportCollection& supports, Vector* beta) {
  require(supports.size() > 0, ErrorKind::validation, "exhaustive_mmse: no supports");
  const std::size_t n = model.N();
  Vector b = transpose_times(model.B(), yw);
  Vector w = supports.normalized_weights();
  const PriorCache prior(model.R());
  Vector logp(supports.size());
  std::vector<Vector> means(supports.size());
  for (std::size_t s = 0; s < supports.size(); ++s) {
    Evidence ev = support_evidence(model, prior, b, supports.sets[s].indices);
    logp[s] = w[s] > 0.0 ? std::log(w[s]) + ev.log_ev : -std::numeric_limits<double>::infinity();
    means[s] = std::move(ev.mean);
  }
  double mx = *std::max_element(logp.begin(), logp.end());
  Vector post(supports.size());
  double total = 0.0;
  for (std::size_t s = 0; s < post.size(); ++s) {
    post[s] = std::exp(logp[s] - mx);
    total += post[s];
  }
  DecodeResult out;
  out.x_hat.assign(n, 0.0);
  for (std::size_t s = 0; s < post.size(); ++s) {
    post[s] /= total;
    const auto& idx = supports.sets[s].indices;
    for (std::size_t i = 0; i < idx.size(); ++i) out.x_hat[idx[i]] += post[s] * means[s][i];
  }
  out.support_hat = top_k_support(out.x_hat, supports.sets.front().size());
  if (beta) *beta = std::move(post);
  return out;
}

DecodeResult exhaustive_mmse(const Vector& y, const Matrix& a, const ChannelSpec& spec,
                             const Matrix& R, std::size_t cap) {
  WhitenedModel m = single_model(a, spec, R);
  return exhaustive_mmse(m.whiten(y), m, all_supports(spec.N(), R.rows(), cap));
}

Matrix lmmse_gain(const WhitenedModel& model, const Matrix& R_x) {
  const Matrix& bw = model.B();
  require(R_x.rows() == bw.cols() && R_x.square(), ErrorKind::dimension,
          "lmmse_gain: R_x has wrong size");
  Matrix brx = bw * R_x;
  Matrix s = times_transpose(brx, bw) + Matrix::identity(bw.rows());
  return solve_spd(symmetrize(s), brx).transpose();
}

double support_match(const SupportSet& truth, const SupportSet& est) {
  require(truth.size() > 0, ErrorKind::validation, "support_match: empty true support");
  std::size_t hit = 0;
  for (std::size_t i : est.indices)
    if (truth.contains(i)) ++hit;
  return static_cast<double>(hit) / static_cast<double>(truth.size());
}

SupportSet top_k_support(const Vector& x, std::size_t K) {
  require(K <= x.size(), ErrorKind::domain, "top_k_support: K larger than x");
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t i, std::size_t j) { return std::abs(x[i]) > std::abs(x[j]); });
  idx.resize(K);
  std::sort(idx.begin(), idx.end());
  return SupportSet{idx};
}

}  // namespace csforge
