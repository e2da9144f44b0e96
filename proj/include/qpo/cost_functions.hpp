#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace qpo {

enum class WeightKind { Uniform, EnergyExp, RankExp, Piecewise };

/// Weighting of the lower alpha-tail of an energy sample. Only the fields
/// used by `kind` matter. Ranks k are 1-based:
///   Uniform:    w_k = 1
///   EnergyExp:  w_k = exp(-beta (E_(k) - E_(1)))
///   RankExp:    w_k = exp(-beta k)
///   Piecewise:  exp(-beta1 k)                         for k <  n1
///               exp(-beta2 (k - n1 + 1)) w_{n1-1}     for n1 <= k < n2
///               exp(-beta3 (k - n2 + 1)) w_{n2-1}     for k >= n2
/// then normalized to sum to one.
struct WeightScheme {
  WeightKind kind = WeightKind::Uniform;
  double alpha = 1.0;
  double beta = 0.5;
  int n1 = 5;
  int n2 = 20;
  double beta1 = 0.7;
  double beta2 = 0.2;
  double beta3 = 0.05;

  static WeightScheme uniform(double alpha);
  static WeightScheme energy_exp(double alpha, double beta);
  static WeightScheme rank_exp(double alpha, double beta);
  static WeightScheme piecewise(double alpha, int n1, int n2, double beta1, double beta2,
                                double beta3);

  void validate() const;
};

enum class CostKind { Mean, Cvar, Wcvar };

/// What vqe objectives minimize. Cvar uses scheme.alpha only; Wcvar uses
/// the full scheme.
struct CostSpec {
  CostKind kind = CostKind::Mean;
  WeightScheme scheme;

  void validate() const;
  bool supports_exact_mode() const;
};

/// m = ceil(alpha K) clamped to [1, K].
std::size_t tail_size(double alpha, std::size_t sample_size);

/// Mean of the sample, summed in ascending order.
double sample_mean(std::span<const double> energies);

/// Mean of the ceil(alpha K) smallest energies.
double cvar(std::span<const double> energies, double alpha);

/// Normalized weights for the first m entries of an ascending sample.
std::vector<double> compute_weights(const WeightScheme& scheme,
                                    std::span<const double> sorted_energies, std::size_t m);

/// sum_k w_k E_(k) over the ceil(alpha K) smallest energies. The uniform
/// scheme is evaluated as cvar.
double wcvar(std::span<const double> energies, const WeightScheme& scheme);

/// Cost of a shot sample under `spec`.
double sampled_cost(const CostSpec& spec, std::span<const double> energies);

/// Shot-free cost from a full distribution over states with known energies.
/// CVaR includes the boundary state fractionally. Rank-based WCVaR schemes
/// raise UnsupportedInExactMode.
double exact_mode_cost(std::span<const double> probabilities, std::span<const double> energies,
                       const CostSpec& spec);

std::string to_string(WeightKind kind);
WeightKind weight_kind_from_string(const std::string& name);
std::string to_string(CostKind kind);
CostKind cost_kind_from_string(const std::string& name);

}  // namespace qpo
