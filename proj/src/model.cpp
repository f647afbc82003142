// SPDX-License-Identifier: Apache-2.0
#include "csforge/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "csforge/errors.hpp"

namespace csforge {

bool SupportSet::contains(std::size_t i) const {
  return std::binary_search(indices.begin(), indices.end(), i);
}

void validate_support(const SupportSet& s, std::size_t N, std::size_t K) {
  require(s.size() == K, ErrorKind::domain, "support has the wrong size");
  for (std::size_t j = 0; j < s.size(); ++j) {
    require(s.indices[j] < N, ErrorKind::domain, "support index out of range");
    require(j == 0 || s.indices[j - 1] < s.indices[j], ErrorKind::domain,
            "support indices must be sorted and distinct");
  }
}

Vector SupportCollection::normalized_weights() const {
  const std::size_t n = sets.size();
  Vector w(n, n ? 1.0 / static_cast<double>(n) : 0.0);
  if (weights.empty()) return w;
  require(weights.size() == n, ErrorKind::dimension, "support weight count mismatch");
  double total = 0.0;
  for (double v : weights) {
    require(v >= 0.0 && std::isfinite(v), ErrorKind::domain, "support weights must be >= 0");
    total += v;
  }
  require(total > 0.0, ErrorKind::domain, "support weights sum to zero");
  for (std::size_t i = 0; i < n; ++i) w[i] = weights[i] / total;
  return w;
}

double binomial(std::size_t n, std::size_t k) {
  if (k > n) return 0.0;
  k = std::min(k, n - k);
  double r = 1.0;
  for (std::size_t i = 1; i <= k; ++i)
    r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  return std::round(r);
}

Matrix exponential_covariance(std::size_t K, double rho, double scale) {
  require(rho >= 0.0 && rho < 1.0, ErrorKind::domain, "correlation rho must lie in [0, 1)");
  require(scale > 0.0, ErrorKind::domain, "covariance scale must be positive");
  Matrix r(K, K);
  for (std::size_t i = 0; i < K; ++i)
    for (std::size_t j = 0; j < K; ++j)
      r(i, j) = scale * std::pow(rho, static_cast<double>(i > j ? i - j : j - i));
  return r;
}

Matrix selector_matrix(const SupportSet& s, std::size_t N) {
  Matrix e(N, s.size());
  for (std::size_t j = 0; j < s.size(); ++j) {
    require(s.indices[j] < N, ErrorKind::domain, "support index out of range");
    e(s.indices[j], j) = 1.0;
  }
  return e;
}

std::vector<SupportSet> enumerate_supports(std::size_t N, std::size_t K, std::size_t cap) {
  require(K <= N, ErrorKind::domain, "K must not exceed N");
  const double count = binomial(N, K);
  if (count > static_cast<double>(cap)) {
    std::ostringstream msg;
    msg << "C(" << N << "," << K << ") = " << count << " supports exceeds the enumeration cap "
        << cap << "; use a sampled support set";
    fail(ErrorKind::capacity, msg.str());
  }
  std::vector<SupportSet> out;
  out.reserve(static_cast<std::size_t>(count));
  std::vector<std::size_t> idx(K);
  for (std::size_t j = 0; j < K; ++j) idx[j] = j;
  while (true) {
    out.push_back(SupportSet{idx});
    // next combination in lexicographic order
    std::size_t j = K;
    while (j > 0 && idx[j - 1] == N - K + (j - 1)) --j;
    if (j == 0) break;
    ++idx[j - 1];
    for (std::size_t t = j; t < K; ++t) idx[t] = idx[t - 1] + 1;
  }
  if (K == 0) out.resize(1);
  return out;
}

SupportCollection all_supports(std::size_t N, std::size_t K, std::size_t cap) {
  SupportCollection c;
  c.sets = enumerate_supports(N, K, cap);
  c.exact = true;
  return c;
}

SupportSet draw_support(std::size_t N, std::size_t K, Stream& rng) {
  require(K <= N, ErrorKind::domain, "K must not exceed N");
  // Floyd's algorithm: uniform K-subset with K draws
  std::vector<std::size_t> chosen;
  chosen.reserve(K);
  for (std::size_t j = N - K; j < N; ++j) {
    const std::size_t t = rng.uniform_int(j + 1);
    if (std::find(chosen.begin(), chosen.end(), t) == chosen.end())
      chosen.push_back(t);
    else
      chosen.push_back(j);
  }
  std::sort(chosen.begin(), chosen.end());
  return SupportSet{chosen};
}

SupportCollection sample_supports(std::size_t N, std::size_t K, std::size_t count, Stream& rng,
                                  std::size_t cap) {
  require(count >= 1, ErrorKind::domain, "sampled support set must be nonempty");
  const double total = binomial(N, K);
  if (static_cast<double>(count) >= total) return all_supports(N, K, cap);
  SupportCollection c;
  c.exact = false;
  std::set<std::vector<std::size_t>> seen;
  while (c.sets.size() < count) {
    SupportSet s = draw_support(N, K, rng);
    if (seen.insert(s.indices).second) c.sets.push_back(std::move(s));
  }
  return c;
}

Matrix source_covariance(std::size_t N, std::size_t K, const Matrix& R, CovarianceMode mode) {
  require(K < N, ErrorKind::domain, "source model needs K < N");
  require(R.rows() == K && R.cols() == K, ErrorKind::dimension, "R must be K×K");
  Matrix rx(N, N);
  if (mode.kind == CovarianceMode::analytic) {
    // R_x(i,j) averages R(p,q) over supports holding i at slot p and j at
    // slot q; count those supports directly instead of enumerating them.
    const double total = binomial(N, K);
    for (std::size_t i = 0; i < N; ++i) {
      for (std::size_t p = 0; p < K; ++p) {
        const double ci = binomial(i, p) * binomial(N - 1 - i, K - 1 - p);
        if (ci > 0.0) rx(i, i) += ci * R(p, p);
      }
      for (std::size_t j = i + 1; j < N; ++j) {
        double s = 0.0;
        for (std::size_t p = 0; p < K; ++p)
          for (std::size_t q = p + 1; q < K; ++q) {
            const double c = binomial(i, p) * binomial(j - i - 1, q - p - 1) *
                             binomial(N - 1 - j, K - 1 - q);
            s += c * R(p, q);
          }
        rx(i, j) = rx(j, i) = s;
      }
    }
    rx *= 1.0 / total;
    return rx;
  }
  require(mode.samples >= 1, ErrorKind::domain, "sampled covariance needs samples >= 1");
  SourceModel m;
  m.N = N;
  m.K = K;
  m.R = R;
  m.chol_R = cholesky(symmetrize(R));
  Stream rng(mode.seed, StreamDomain::covariance, 0);
  for (std::size_t t = 0; t < mode.samples; ++t) {
    const SourceDraw d = draw_source(m, rng);
    const auto& idx = d.support.indices;
    for (std::size_t a = 0; a < K; ++a)
      for (std::size_t b = 0; b < K; ++b) rx(idx[a], idx[b]) += d.x[idx[a]] * d.x[idx[b]];
  }
  rx *= 1.0 / static_cast<double>(mode.samples);
  return rx;
}

Matrix source_covariance(const SourceModel& model, CovarianceMode mode) {
  return source_covariance(model.N, model.K, model.R, mode);
}

SourceModel SourceModel::make(std::size_t N, std::size_t K, const Matrix& R,
                              CovarianceMode mode) {
  require(K >= 1 && K < N, ErrorKind::domain, "source model needs 1 <= K < N");
  require(R.rows() == K && R.cols() == K, ErrorKind::dimension, "R must be K×K");
  SourceModel m;
  m.N = N;
  m.K = K;
  m.R = symmetrize(R);
  m.chol_R = cholesky(m.R);
  m.R_x = source_covariance(N, K, m.R, mode);
  return m;
}

SourceDraw draw_source(const SourceModel& model, Stream& rng) {
  SourceDraw d;
  d.support = draw_support(model.N, model.K, rng);
  d.x.assign(model.N, 0.0);
  Vector z(model.K);
  for (double& v : z) v = rng.normal();
  for (std::size_t i = 0; i < model.K; ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k <= i; ++k) s += model.chol_R(i, k) * z[k];
    d.x[d.support.indices[i]] = s;
  }
  return d;
}

double mutual_coherence(const Matrix& a) {
  const std::size_t n = a.cols();
  Vector norms(n);
  for (std::size_t j = 0; j < n; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) s += a(i, j) * a(i, j);
    require(s > 0.0, ErrorKind::domain, "mutual coherence undefined for a zero column");
    norms[j] = std::sqrt(s);
  }
  const Matrix g = transpose_times(a, a);
  double mu = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      mu = std::max(mu, std::abs(g(i, j)) / (norms[i] * norms[j]));
  return std::min(mu, 1.0);
}

void validate_channel(const ChannelSpec& spec) {
  require(spec.L() >= 1 && spec.N() >= 1, ErrorKind::dimension, "channel H is empty");
  require(spec.M >= 1 && spec.M <= spec.L(), ErrorKind::domain, "channel needs 1 <= M <= L");
  require(spec.sigma_w >= 0.0 && spec.sigma_v >= 0.0, ErrorKind::domain,
          "noise levels must be nonnegative");
  require(std::isfinite(spec.g), ErrorKind::domain, "channel gain must be finite");
  require(spec.P > 0.0, ErrorKind::domain, "power budget must be positive");
}

void validate_mac(const MultiTerminalSpec& spec) {
  for (const auto& t : spec.terminals) {
    require(t.L() >= 1 && t.M >= 1 && t.M <= t.L(), ErrorKind::domain,
            "terminal needs 1 <= M <= L");
    require(t.sigma_w >= 0.0 && t.sigma_v >= 0.0, ErrorKind::domain,
            "noise levels must be nonnegative");
  }
  require(spec.terminals[0].N() == spec.terminals[1].N(), ErrorKind::dimension,
          "terminals observe sources of different length");
  require(spec.P > 0.0, ErrorKind::domain, "power budget must be positive");
  if (spec.mode == MacMode::coherent)
    require(spec.terminals[0].M == spec.terminals[1].M, ErrorKind::dimension,
            "coherent MAC needs M1 == M2");
}

Matrix power_weight(const ChannelSpec& spec, const Matrix& R_x) {
  require(R_x.rows() == spec.N() && R_x.cols() == spec.N(), ErrorKind::dimension,
          "R_x does not match H");
  Matrix w = spec.H * times_transpose(R_x, spec.H);
  for (std::size_t i = 0; i < w.rows(); ++i) w(i, i) += spec.sigma_v * spec.sigma_v;
  return symmetrize(w);
}

double transmit_power(const Matrix& a, const ChannelSpec& spec, const Matrix& R_x) {
  require(a.cols() == spec.L(), ErrorKind::dimension, "A has the wrong number of columns");
  const Matrix w = power_weight(spec, R_x);
  // Tr(A W Aᵀ)
  const Matrix aw = a * w;
  double s = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) s += aw(i, j) * a(i, j);
  return s;
}

double transmit_power(const Matrix& a1, const Matrix& a2, const MultiTerminalSpec& spec,
                      const Matrix& R_x) {
  return transmit_power(a1, spec.terminals[0], R_x) + transmit_power(a2, spec.terminals[1], R_x);
}

}  // namespace csforge
