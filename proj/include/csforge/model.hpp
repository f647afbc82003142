// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "csforge/linalg.hpp"
#include "csforge/rng.hpp"

namespace csforge {

inline constexpr std::size_t kDefaultEnumerationCap = 1000000;

struct SupportSet {
  std::vector<std::size_t> indices;  // sorted, distinct

  std::size_t size() const { return indices.size(); }
  bool contains(std::size_t i) const;
  bool operator==(const SupportSet&) const = default;
};

void validate_support(const SupportSet& s, std::size_t N, std::size_t K);

// The supports a bound or a design averages over. Uniform unless weights
// are given (weights need not be normalized).
struct SupportCollection {
  std::vector<SupportSet> sets;
  Vector weights;
  bool exact = true;

  std::size_t size() const { return sets.size(); }
  Vector normalized_weights() const;
};

double binomial(std::size_t n, std::size_t k);

Matrix exponential_covariance(std::size_t K, double rho, double scale = 1.0);
Matrix selector_matrix(const SupportSet& s, std::size_t N);
std::vector<SupportSet> enumerate_supports(std::size_t N, std::size_t K,
                                           std::size_t cap = kDefaultEnumerationCap);
SupportCollection all_supports(std::size_t N, std::size_t K,
                               std::size_t cap = kDefaultEnumerationCap);
// |Ω′| = count supports drawn uniformly without replacement; the full set
// when count reaches C(N,K)
SupportCollection sample_supports(std::size_t N, std::size_t K, std::size_t count,
                                  Stream& rng, std::size_t cap = kDefaultEnumerationCap);
SupportSet draw_support(std::size_t N, std::size_t K, Stream& rng);

struct CovarianceMode {
  enum Kind { analytic, sampled } kind = analytic;
  std::size_t samples = 100000;
  std::uint64_t seed = 0;
};

struct SourceModel {
  std::size_t N = 0;
  std::size_t K = 0;
  Matrix R;       // K×K, SPD
  Matrix R_x;     // N×N
  Matrix chol_R;  // lower factor of R

  static SourceModel make(std::size_t N, std::size_t K, const Matrix& R,
                          CovarianceMode mode = {});
};

Matrix source_covariance(std::size_t N, std::size_t K, const Matrix& R, CovarianceMode mode);
Matrix source_covariance(const SourceModel& model, CovarianceMode mode);

struct SourceDraw {
  SupportSet support;
  Vector x;
};

SourceDraw draw_source(const SourceModel& model, Stream& rng);

double mutual_coherence(const Matrix& a);

struct ChannelSpec {
  Matrix H;  // L×N
  double g = 1.0;
  double sigma_v = 0.0;
  double sigma_w = 1.0;
  std::size_t M = 1;
  double P = 1.0;

  std::size_t L() const { return H.rows(); }
  std::size_t N() const { return H.cols(); }
};

void validate_channel(const ChannelSpec& spec);

enum class MacMode { orthogonal, coherent };

struct MultiTerminalSpec {
  std::array<ChannelSpec, 2> terminals;
  MacMode mode = MacMode::orthogonal;
  double P = 1.0;
};

void validate_mac(const MultiTerminalSpec& spec);

// H R_x Hᵀ + σ_v² I, the matrix the power constraint weighs AᵀA with
Matrix power_weight(const ChannelSpec& spec, const Matrix& R_x);
double transmit_power(const Matrix& a, const ChannelSpec& spec, const Matrix& R_x);
double transmit_power(const Matrix& a1, const Matrix& a2, const MultiTerminalSpec& spec,
                      const Matrix& R_x);

}  // namespace csforge
