// SPDX-License-Identifier: Apache-2.0
//
// Decoders. All of them work on the whitened model (noise covariance I),
// see WhitenedModel.
#pragma once

#include <cstddef>

#include "csforge/bounds.hpp"
#include "csforge/linalg.hpp"
#include "csforge/model.hpp"
#include "csforge/rng.hpp"

namespace csforge {

struct DecodeResult {
  Vector x_hat;
  SupportSet support_hat;  // empty for dense outputs
  int iterations = 0;
  bool rank_deficient = false;
};

DecodeResult omp(const Vector& y, const Matrix& phi, std::size_t K);

// greedy supports sampled with probability ∝ evidence, then the average
// of their conditional means
DecodeResult random_omp(const Vector& yw, const WhitenedModel& model, std::size_t K,
                        std::size_t n_draws, Stream& rng);
DecodeResult random_omp(const Vector& y, const Matrix& a, const ChannelSpec& spec,
                        const Matrix& R, std::size_t K, std::size_t n_draws, Stream& rng);

DecodeResult exhaustive_mmse(const Vector& yw, const WhitenedModel& model,
                             const SupportCollection& supports, Vector* beta = nullptr);
DecodeResult exhaustive_mmse(const Vector& y, const Matrix& a, const ChannelSpec& spec,
                             const Matrix& R, std::size_t cap = kDefaultEnumerationCap);

// x̂ = G y with G = R_x Bᵀ(B R_x Bᵀ + I)⁻¹ on the whitened model
Matrix lmmse_gain(const WhitenedModel& model, const Matrix& R_x);

double support_match(const SupportSet& truth, const SupportSet& est);
SupportSet top_k_support(const Vector& x, std::size_t K);

}  // namespace csforge
