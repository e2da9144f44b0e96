#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "qpo/market_data.hpp"

namespace qpo {

/// Computational-basis state of N binary variables. Bit i of `index` is
/// variable (qubit) i, so variable 0 is the least-significant bit.
using BasisIndex = std::uint64_t;

/// Key of an upper-triangular coefficient, always first < second.
using PairKey = std::pair<int, int>;

struct PortfolioSpec {
  double lambda = 0.5;  // weight on the return term, (1 - lambda) on variance
  double penalty = 1.0;
  int budget = 1;
  int n_assets = 2;

  void validate() const;
};

/// How the variance term is expanded into QUBO coefficients.
enum class VarianceForm {
  Full,           // sum over all (i, j) with x_i^2 = x_i folding
  UpperTriangle,  // sum over i < j only, diagonal dropped
};

/// C(x) = sum_{i<j} q_ij x_i x_j + sum_i q_i x_i + c over x in {0,1}^N.
struct QuboProblem {
  int n = 0;
  std::map<PairKey, double> quadratic;
  std::vector<double> linear;
  double constant = 0.0;

  /// Adds `value` to q_ij, reordering so i < j. Diagonal terms go to linear.
  void add_quadratic(int i, int j, double value);
};

/// H(s) = -sum_i h_i s_i - sum_{i<j} J_ij s_i s_j, with s_i = 1 - 2 x_i.
/// H(s(x)) + offset equals the source QUBO energy of x.
struct IsingHamiltonian {
  int n = 0;
  std::vector<double> h;
  std::map<PairKey, double> j;
  double offset = 0.0;
};

struct ExactSolution {
  BasisIndex ground_index = 0;          // smallest index attaining the minimum
  std::vector<std::uint8_t> ground_bitstring;
  double ground_energy = 0.0;
  std::vector<BasisIndex> ground_states;  // all minimizers, ascending
  std::uint64_t degeneracy = 0;
  /// Full (index, energy) list sorted by energy then index, when requested.
  std::optional<std::vector<std::pair<BasisIndex, double>>> spectrum;
};

/// Largest N accepted by solve_exact.
inline constexpr int kMaxExactVariables = 26;

/// Energies within this absolute distance of the minimum count as ground states.
inline constexpr double kDegeneracyTolerance = 1e-12;

QuboProblem build_qubo(const AssetStats& stats, const PortfolioSpec& spec,
                       VarianceForm form = VarianceForm::Full);

double qubo_energy(const QuboProblem& q, std::span<const std::uint8_t> x);
double qubo_energy(const QuboProblem& q, BasisIndex x);

IsingHamiltonian to_ising(const QuboProblem& q);

/// Ising energy for spins s_i in {-1, +1}; excludes the offset.
double ising_energy(const IsingHamiltonian& h, std::span<const int> spins);
/// Ising energy of basis state x (spin s_i = 1 - 2 x_i); excludes the offset.
double ising_energy(const IsingHamiltonian& h, BasisIndex x);

/// Ising energy (without offset) of every basis state, indexed by BasisIndex.
std::vector<double> ising_diagonal(const IsingHamiltonian& h);

ExactSolution solve_exact(const QuboProblem& q, bool keep_spectrum);

/// Penalty large enough that any budget violation costs more than the best
/// achievable objective improvement: lambda*sum|mu| + (1-lambda)*sum|sigma| + 1e-6.
double default_penalty(const AssetStats& stats, double lambda);

std::vector<std::uint8_t> to_bits(BasisIndex x, int n);
BasisIndex from_bits(std::span<const std::uint8_t> bits);
/// 0/1 string with variable N-1 first and variable 0 last.
std::string bitstring_label(BasisIndex x, int n);

nlohmann::json to_json(const QuboProblem& q);
nlohmann::json to_json(const IsingHamiltonian& h);
QuboProblem qubo_from_json(const nlohmann::json& doc);
IsingHamiltonian ising_from_json(const nlohmann::json& doc);

}  // namespace qpo
