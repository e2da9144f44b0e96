#include "qpo/cost_functions.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "qpo/error.hpp"

namespace qpo {

namespace {

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    raise(ErrorCode::AlphaOutOfRange, "alpha must lie in (0, 1], got " + std::to_string(alpha));
  }
}

std::vector<double> sorted_copy(std::span<const double> energies) {
  if (energies.empty()) raise(ErrorCode::EmptySample, "no energies");
  std::vector<double> sorted(energies.begin(), energies.end());
  std::sort(sorted.begin(), sorted.end());
  return sorted;
}

double head_mean(std::span<const double> sorted, std::size_t m) {
  double sum = 0.0;
  for (std::size_t k = 0; k < m; ++k) sum += sorted[k];
  return sum / static_cast<double>(m);
}

// Normalizes exp(log_weights) after shifting by the max exponent.
std::vector<double> normalize_log_weights(std::vector<double> log_w) {
  const double top = *std::max_element(log_w.begin(), log_w.end());
  double total = 0.0;
  for (auto& v : log_w) {
    v = std::exp(v - top);
    total += v;
  }
  for (auto& v : log_w) v /= total;
  return log_w;
}

}  // namespace

WeightScheme WeightScheme::uniform(double alpha) {
  WeightScheme s;
  s.kind = WeightKind::Uniform;
  s.alpha = alpha;
  return s;
}

WeightScheme WeightScheme::energy_exp(double alpha, double beta) {
  WeightScheme s;
  s.kind = WeightKind::EnergyExp;
  s.alpha = alpha;
  s.beta = beta;
  return s;
}

WeightScheme WeightScheme::rank_exp(double alpha, double beta) {
  WeightScheme s;
  s.kind = WeightKind::RankExp;
  s.alpha = alpha;
  s.beta = beta;
  return s;
}

WeightScheme WeightScheme::piecewise(double alpha, int n1, int n2, double beta1, double beta2,
                                     double beta3) {
  WeightScheme s;
  s.kind = WeightKind::Piecewise;
  s.alpha = alpha;
  s.n1 = n1;
  s.n2 = n2;
  s.beta1 = beta1;
  s.beta2 = beta2;
  s.beta3 = beta3;
  return s;
}

void WeightScheme::validate() const {
  check_alpha(alpha);
  switch (kind) {
    case WeightKind::Uniform:
      break;
    case WeightKind::EnergyExp:
    case WeightKind::RankExp:
      if (!(beta > 0.0)) raise(ErrorCode::InvalidSpec, "beta must be positive");
      break;
    case WeightKind::Piecewise:
      if (!(beta1 > 0.0 && beta2 > 0.0 && beta3 > 0.0)) {
        raise(ErrorCode::InvalidSpec, "piecewise betas must be positive");
      }
      if (n1 < 1 || n2 <= n1) {
        raise(ErrorCode::InvalidSegments, "piecewise segments need 1 <= n1 < n2, got n1=" +
                                              std::to_string(n1) + " n2=" + std::to_string(n2));
      }
      break;
  }
}

void CostSpec::validate() const {
  if (kind != CostKind::Mean) scheme.validate();
}

bool CostSpec::supports_exact_mode() const {
  return kind != CostKind::Wcvar || scheme.kind == WeightKind::Uniform ||
         scheme.kind == WeightKind::EnergyExp;
}

std::size_t tail_size(double alpha, std::size_t sample_size) {
  check_alpha(alpha);
  if (sample_size == 0) raise(ErrorCode::EmptySample, "no energies");
  // The small slack keeps products like 0.1 * 30 = 3.0000000000000004 at 3.
  const double raw = std::ceil(alpha * static_cast<double>(sample_size) - 1e-9);
  return std::clamp<std::size_t>(static_cast<std::size_t>(std::max(raw, 1.0)), 1, sample_size);
}

double sample_mean(std::span<const double> energies) {
  const auto sorted = sorted_copy(energies);
  return head_mean(sorted, sorted.size());
}

double cvar(std::span<const double> energies, double alpha) {
  check_alpha(alpha);
  const auto sorted = sorted_copy(energies);
  return head_mean(sorted, tail_size(alpha, sorted.size()));
}

std::vector<double> compute_weights(const WeightScheme& scheme,
                                    std::span<const double> sorted_energies, std::size_t m) {
  scheme.validate();
  if (m == 0) raise(ErrorCode::EmptySample, "tail size must be positive");
  if (m > sorted_energies.size() && scheme.kind == WeightKind::EnergyExp) {
    raise(ErrorCode::DimensionMismatch, "tail longer than the sample");
  }
  std::vector<double> log_w(m, 0.0);
  switch (scheme.kind) {
    case WeightKind::Uniform:
      break;
    case WeightKind::EnergyExp: {
      const double e0 = sorted_energies[0];
      for (std::size_t k = 0; k < m; ++k) log_w[k] = -scheme.beta * (sorted_energies[k] - e0);
      break;
    }
    case WeightKind::RankExp:
      for (std::size_t k = 0; k < m; ++k) log_w[k] = -scheme.beta * static_cast<double>(k + 1);
      break;
    case WeightKind::Piecewise: {
      // Segments past the tail are simply never reached.
      const auto n1 = static_cast<std::size_t>(scheme.n1);
      const auto n2 = static_cast<std::size_t>(scheme.n2);
      const auto at = [&](std::size_t rank) { return rank == 0 ? 0.0 : log_w[rank - 1]; };
      for (std::size_t rank = 1; rank <= m; ++rank) {
        const double r = static_cast<double>(rank);
        if (rank < n1) {
          log_w[rank - 1] = -scheme.beta1 * r;
        } else if (rank < n2) {
          log_w[rank - 1] = -scheme.beta2 * (r - static_cast<double>(n1) + 1.0) + at(n1 - 1);
        } else {
          log_w[rank - 1] = -scheme.beta3 * (r - static_cast<double>(n2) + 1.0) + at(n2 - 1);
        }
      }
      break;
    }
  }
  return normalize_log_weights(std::move(log_w));
}

double wcvar(std::span<const double> energies, const WeightScheme& scheme) {
  scheme.validate();
  if (scheme.kind == WeightKind::Uniform) return cvar(energies, scheme.alpha);
  const auto sorted = sorted_copy(energies);
  const auto m = tail_size(scheme.alpha, sorted.size());
  const auto w = compute_weights(scheme, sorted, m);
  double total = 0.0;
  for (std::size_t k = 0; k < m; ++k) total += w[k] * sorted[k];
  return total;
}

double sampled_cost(const CostSpec& spec, std::span<const double> energies) {
  switch (spec.kind) {
    case CostKind::Mean: return sample_mean(energies);
    case CostKind::Cvar: return cvar(energies, spec.scheme.alpha);
    case CostKind::Wcvar: return wcvar(energies, spec.scheme);
  }
  return 0.0;
}

double exact_mode_cost(std::span<const double> probabilities, std::span<const double> energies,
                       const CostSpec& spec) {
  if (probabilities.size() != energies.size()) {
    raise(ErrorCode::DimensionMismatch, "probability and energy vectors differ in length");
  }
  if (probabilities.empty()) raise(ErrorCode::EmptySample, "empty distribution");
  if (!spec.supports_exact_mode()) {
    raise(ErrorCode::UnsupportedInExactMode,
          to_string(spec.scheme.kind) + " weighting needs discrete samples");
  }
  spec.validate();
  if (spec.kind == CostKind::Mean) {
    double e = 0.0;
    for (std::size_t i = 0; i < energies.size(); ++i) e += probabilities[i] * energies[i];
    return e;
  }

  std::vector<std::size_t> order(energies.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return energies[a] < energies[b]; });

  const double total_mass = std::accumulate(probabilities.begin(), probabilities.end(), 0.0);
  const double target = spec.scheme.alpha * total_mass;
  const bool energy_weighted =
      spec.kind == CostKind::Wcvar && spec.scheme.kind == WeightKind::EnergyExp;

  double e0 = 0.0;
  bool have_e0 = false;
  double mass = 0.0;
  double weight_sum = 0.0;
  double weighted_energy = 0.0;
  for (const auto idx : order) {
    if (mass >= target) break;
    const double p = probabilities[idx];
    if (p <= 0.0) continue;
    if (!have_e0) {
      e0 = energies[idx];
      have_e0 = true;
    }
    const double take = std::min(p, target - mass);
    mass += take;
    const double w = energy_weighted ? take * std::exp(-spec.scheme.beta * (energies[idx] - e0))
                                     : take;
    weight_sum += w;
    weighted_energy += w * energies[idx];
  }
  return weighted_energy / weight_sum;
}

std::string to_string(WeightKind kind) {
  switch (kind) {
    case WeightKind::Uniform: return "uniform";
    case WeightKind::EnergyExp: return "energy_exp";
    case WeightKind::RankExp: return "rank_exp";
    case WeightKind::Piecewise: return "piecewise";
  }
  return "?";
}

WeightKind weight_kind_from_string(const std::string& name) {
  if (name == "uniform") return WeightKind::Uniform;
  if (name == "energy_exp") return WeightKind::EnergyExp;
  if (name == "rank_exp") return WeightKind::RankExp;
  if (name == "piecewise") return WeightKind::Piecewise;
  raise(ErrorCode::InvalidConfig, "unknown weighting '" + name + "'");
}

std::string to_string(CostKind kind) {
  switch (kind) {
    case CostKind::Mean: return "mean";
    case CostKind::Cvar: return "cvar";
    case CostKind::Wcvar: return "wcvar";
  }
  return "?";
}

CostKind cost_kind_from_string(const std::string& name) {
  if (name == "mean") return CostKind::Mean;
  if (name == "cvar") return CostKind::Cvar;
  if (name == "wcvar") return CostKind::Wcvar;
  raise(ErrorCode::InvalidConfig, "unknown cost kind '" + name + "'");
}

}  // namespace qpo
