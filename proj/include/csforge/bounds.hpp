// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <limits>

#include "csforge/linalg.hpp"
#include "csforge/model.hpp"

namespace csforge {

// y = B x + n with n ~ N(0, Rn). Single terminal, orthogonal MAC and
// coherent MAC all reduce to this.
struct EffectiveModel {
  Matrix B;
  Matrix Rn;
};

EffectiveModel effective_model(const Matrix& a, const ChannelSpec& spec);
EffectiveModel effective_model(const Matrix& a1, const Matrix& a2, const MultiTerminalSpec& spec);

Matrix noise_covariance(const Matrix& a, const ChannelSpec& spec);
Matrix noise_covariance(const Matrix& a1, const Matrix& a2, const MultiTerminalSpec& spec);
Matrix woodbury_noise_inverse(const Matrix& a, const ChannelSpec& spec);

// the model after multiplying by Ln⁻¹ (Rn = Ln Lnᵀ); noise becomes white
class WhitenedModel {
 public:
  WhitenedModel(const EffectiveModel& m, const Matrix& R);

  const Matrix& B() const { return bw_; }
  const Matrix& info() const { return info_; }  // BᵀRn⁻¹B
  const Matrix& R_inv() const { return r_inv_; }
  const Matrix& R() const { return r_; }
  std::size_t N() const { return bw_.cols(); }
  Vector whiten(const Vector& y) const { return forward_substitute(ln_, y); }

  // Kx K posterior information matrix R⁻¹ + B_SᵀRn⁻¹B_S
  Matrix posterior_info(const SupportSet& s) const;
  Vector oracle_estimate_whitened(const Vector& yw, const SupportSet& s) const;

 private:
  Matrix ln_;
  Matrix bw_;
  Matrix info_;
  Matrix r_;
  Matrix r_inv_;
};

struct BoundReport {
  double value = 0.0;
  Vector per_support_terms;
  std::size_t support_count_used = 0;
  bool exact = true;
};

BoundReport mse_lower_bound(const EffectiveModel& m, const Matrix& R,
                            const SupportCollection& supports, bool keep_terms = false);
BoundReport mse_lower_bound(const Matrix& a, const ChannelSpec& spec, const Matrix& R,
                            const SupportCollection& supports, bool keep_terms = false);
BoundReport mse_lower_bound(const Matrix& a1, const Matrix& a2, const MultiTerminalSpec& spec,
                            const Matrix& R, const SupportCollection& supports,
                            bool keep_terms = false);

Vector oracle_estimate(const Vector& y, const SupportSet& s, const EffectiveModel& m,
                       const Matrix& R);
Vector oracle_estimate(const Vector& y, const SupportSet& s, const Matrix& a,
                       const ChannelSpec& spec, const Matrix& R);

double lmmse_upper_bound(const EffectiveModel& m, const Matrix& R_x);
double lmmse_upper_bound(const Matrix& a, const ChannelSpec& spec, const Matrix& R_x);

struct ColumnNormalization {
  Matrix normalized;
  double s1 = 0.0;  // largest squared column norm
  double s2 = 0.0;  // smallest squared column norm
};

ColumnNormalization normalize_columns(const Matrix& a);

struct Sandwich {
  double lower = 0.0;
  double upper = std::numeric_limits<double>::infinity();
};

// Gershgorin bracket on the exact-support bound for H = I, σ_v = 0
Sandwich coherence_sandwich(const Matrix& a_normalized, const ChannelSpec& spec,
                            const Matrix& R, double mu, double s1, double s2);
Sandwich coherence_sandwich(const Matrix& a, const ChannelSpec& spec, const Matrix& R);

}  // namespace csforge
