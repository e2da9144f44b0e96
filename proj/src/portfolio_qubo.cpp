#include "qpo/portfolio_qubo.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

#include "qpo/error.hpp"

namespace qpo {

namespace {

struct DenseTerm {
  int i;
  int j;
  double value;
};

std::vector<DenseTerm> flatten(const std::map<PairKey, double>& terms) {
  std::vector<DenseTerm> out;
  out.reserve(terms.size());
  for (const auto& [key, value] : terms) out.push_back({key.first, key.second, value});
  return out;
}

double energy_of(const std::vector<DenseTerm>& quad, const std::vector<double>& linear,
                 double constant, BasisIndex x) {
  double e = constant;
  for (std::size_t i = 0; i < linear.size(); ++i) {
    if ((x >> i) & 1U) e += linear[i];
  }
  for (const auto& t : quad) {
    if (((x >> t.i) & 1U) && ((x >> t.j) & 1U)) e += t.value;
  }
  return e;
}

}  // namespace

void PortfolioSpec::validate() const {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    raise(ErrorCode::InvalidSpec, "lambda must lie in [0, 1]");
  }
  if (!(penalty >= 0.0) || !std::isfinite(penalty)) {
    raise(ErrorCode::InvalidSpec, "penalty must be a finite non-negative number");
  }
  if (n_assets < 1) raise(ErrorCode::InvalidSpec, "n_assets must be positive");
  if (budget < 1 || budget > n_assets) {
    raise(ErrorCode::InvalidSpec, "budget must lie in [1, n_assets]");
  }
}

void QuboProblem::add_quadratic(int i, int j, double value) {
  if (i < 0 || j < 0 || i >= n || j >= n) {
    raise(ErrorCode::IndexOutOfRange, "quadratic index outside [0, n)");
  }
  if (i == j) {
    linear[static_cast<std::size_t>(i)] += value;
    return;
  }
  quadratic[{std::min(i, j), std::max(i, j)}] += value;
}

QuboProblem build_qubo(const AssetStats& stats, const PortfolioSpec& spec, VarianceForm form) {
  spec.validate();
  const int n = spec.n_assets;
  if (stats.size() != n || stats.sigma.rows() != n || stats.sigma.cols() != n) {
    raise(ErrorCode::DimensionMismatch, "stats dimension " + std::to_string(stats.size()) +
                                            " does not match n_assets " + std::to_string(n));
  }
  QuboProblem q;
  q.n = n;
  q.linear.assign(static_cast<std::size_t>(n), 0.0);

  const double lambda = spec.lambda;
  const double risk = 1.0 - lambda;
  const double p = spec.penalty;
  const double budget = spec.budget;

  for (int i = 0; i < n; ++i) {
    double lin = -lambda * stats.mu(i);
    if (form == VarianceForm::Full) lin += risk * stats.sigma(i, i);
    lin += p * (1.0 - 2.0 * budget);
    q.linear[static_cast<std::size_t>(i)] = lin;
  }
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double cov = form == VarianceForm::Full ? 2.0 * stats.sigma(i, j) : stats.sigma(i, j);
      const double value = risk * cov + 2.0 * p;
      if (value != 0.0) q.quadratic[{i, j}] = value;
    }
  }
  q.constant = p * budget * budget;
  return q;
}

double qubo_energy(const QuboProblem& q, std::span<const std::uint8_t> x) {
  if (static_cast<int>(x.size()) != q.n) {
    raise(ErrorCode::LengthMismatch, "bitstring length " + std::to_string(x.size()) +
                                         " != " + std::to_string(q.n));
  }
  double e = q.constant;
  for (int i = 0; i < q.n; ++i) {
    if (x[static_cast<std::size_t>(i)]) e += q.linear[static_cast<std::size_t>(i)];
  }
  for (const auto& [key, value] : q.quadratic) {
    if (x[static_cast<std::size_t>(key.first)] && x[static_cast<std::size_t>(key.second)]) {
      e += value;
    }
  }
  return e;
}

double qubo_energy(const QuboProblem& q, BasisIndex x) {
  if (q.n < 64 && (x >> q.n) != 0) {
    raise(ErrorCode::LengthMismatch, "basis index has bits beyond n");
  }
  const auto bits = to_bits(x, q.n);
  return qubo_energy(q, bits);
}

IsingHamiltonian to_ising(const QuboProblem& q) {
  // x_i = (1 - s_i) / 2:
  //   q_i x_i       -> q_i/2 - (q_i/2) s_i
  //   q_ij x_i x_j  -> q_ij/4 (1 - s_i - s_j + s_i s_j)
  IsingHamiltonian h;
  h.n = q.n;
  h.h.assign(static_cast<std::size_t>(q.n), 0.0);
  h.offset = q.constant;
  for (int i = 0; i < q.n; ++i) {
    const double qi = q.linear[static_cast<std::size_t>(i)];
    h.h[static_cast<std::size_t>(i)] += 0.5 * qi;
    h.offset += 0.5 * qi;
  }
  for (const auto& [key, value] : q.quadratic) {
    const double quarter = 0.25 * value;
    h.h[static_cast<std::size_t>(key.first)] += quarter;
    h.h[static_cast<std::size_t>(key.second)] += quarter;
    h.j[key] = -quarter;
    h.offset += quarter;
  }
  return h;
}

double ising_energy(const IsingHamiltonian& h, std::span<const int> spins) {
  if (static_cast<int>(spins.size()) != h.n) {
    raise(ErrorCode::LengthMismatch, "spin vector length mismatch");
  }
  double e = 0.0;
  for (int i = 0; i < h.n; ++i) {
    e -= h.h[static_cast<std::size_t>(i)] * spins[static_cast<std::size_t>(i)];
  }
  for (const auto& [key, value] : h.j) {
    e -= value * spins[static_cast<std::size_t>(key.first)] *
         spins[static_cast<std::size_t>(key.second)];
  }
  return e;
}

double ising_energy(const IsingHamiltonian& h, BasisIndex x) {
  std::vector<int> spins(static_cast<std::size_t>(h.n));
  for (int i = 0; i < h.n; ++i) spins[static_cast<std::size_t>(i)] = ((x >> i) & 1U) ? -1 : 1;
  return ising_energy(h, spins);
}

std::vector<double> ising_diagonal(const IsingHamiltonian& h) {
  if (h.n > kMaxExactVariables) {
    raise(ErrorCode::TooManyVariables, "diagonal of more than 2^26 entries requested");
  }
  const BasisIndex dim = BasisIndex{1} << h.n;
  std::vector<double> diag(dim);
  const auto couplings = flatten(h.j);
  for (BasisIndex x = 0; x < dim; ++x) {
    double e = 0.0;
    for (int i = 0; i < h.n; ++i) {
      const double s = ((x >> i) & 1U) ? -1.0 : 1.0;
      e -= h.h[static_cast<std::size_t>(i)] * s;
    }
    for (const auto& t : couplings) {
      const bool parity = (((x >> t.i) ^ (x >> t.j)) & 1U) != 0;
      e -= parity ? -t.value : t.value;
    }
    diag[x] = e;
  }
  return diag;
}

ExactSolution solve_exact(const QuboProblem& q, bool keep_spectrum) {
  if (q.n > kMaxExactVariables) {
    raise(ErrorCode::TooManyVariables,
          std::to_string(q.n) + " variables exceeds enumeration limit " +
              std::to_string(kMaxExactVariables));
  }
  const BasisIndex dim = BasisIndex{1} << q.n;
  const auto quad = flatten(q.quadratic);

  std::vector<double> energies(dim);
  double best = std::numeric_limits<double>::infinity();
  for (BasisIndex x = 0; x < dim; ++x) {
    energies[x] = energy_of(quad, q.linear, q.constant, x);
    best = std::min(best, energies[x]);
  }

  ExactSolution sol;
  sol.ground_energy = best;
  for (BasisIndex x = 0; x < dim; ++x) {
    if (energies[x] - best <= kDegeneracyTolerance) sol.ground_states.push_back(x);
  }
  sol.degeneracy = sol.ground_states.size();
  sol.ground_index = sol.ground_states.front();
  sol.ground_energy = energies[sol.ground_index];
  sol.ground_bitstring = to_bits(sol.ground_index, q.n);

  if (keep_spectrum) {
    std::vector<std::pair<BasisIndex, double>> spectrum(dim);
    for (BasisIndex x = 0; x < dim; ++x) spectrum[x] = {x, energies[x]};
    std::stable_sort(spectrum.begin(), spectrum.end(),
                     [](const auto& a, const auto& b) { return a.second < b.second; });
    sol.spectrum = std::move(spectrum);
  }
  return sol;
}

double default_penalty(const AssetStats& stats, double lambda) {
  return lambda * stats.mu.cwiseAbs().sum() + (1.0 - lambda) * stats.sigma.cwiseAbs().sum() +
         1e-6;
}

std::vector<std::uint8_t> to_bits(BasisIndex x, int n) {
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) bits[static_cast<std::size_t>(i)] = (x >> i) & 1U;
  return bits;
}

BasisIndex from_bits(std::span<const std::uint8_t> bits) {
  BasisIndex x = 0;
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i]) x |= BasisIndex{1} << i;
  }
  return x;
}

std::string bitstring_label(BasisIndex x, int n) {
  std::string label(static_cast<std::size_t>(n), '0');
  for (int i = 0; i < n; ++i) {
    if ((x >> i) & 1U) label[static_cast<std::size_t>(n - 1 - i)] = '1';
  }
  return label;
}

namespace {

nlohmann::json triples(const std::map<PairKey, double>& terms) {
  auto arr = nlohmann::json::array();
  for (const auto& [key, value] : terms) arr.push_back({key.first, key.second, value});
  return arr;
}

std::map<PairKey, double> parse_triples(const nlohmann::json& arr, int n) {
  std::map<PairKey, double> terms;
  for (const auto& t : arr) {
    const int i = t.at(0).get<int>();
    const int j = t.at(1).get<int>();
    if (i < 0 || j < 0 || i >= n || j >= n || i >= j) {
      raise(ErrorCode::InvalidConfig, "quadratic triple must satisfy 0 <= i < j < n");
    }
    terms[{i, j}] += t.at(2).get<double>();
  }
  return terms;
}

}  // namespace

nlohmann::json to_json(const QuboProblem& q) {
  return {{"kind", "qubo"},
          {"n", q.n},
          {"linear", q.linear},
          {"quadratic", triples(q.quadratic)},
          {"constant", q.constant}};
}

nlohmann::json to_json(const IsingHamiltonian& h) {
  return {{"kind", "ising"},
          {"n", h.n},
          {"linear", h.h},
          {"quadratic", triples(h.j)},
          {"offset", h.offset}};
}

QuboProblem qubo_from_json(const nlohmann::json& doc) {
  QuboProblem q;
  q.n = doc.at("n").get<int>();
  q.linear = doc.at("linear").get<std::vector<double>>();
  if (static_cast<int>(q.linear.size()) != q.n) {
    raise(ErrorCode::InvalidConfig, "linear array length differs from n");
  }
  q.quadratic = parse_triples(doc.at("quadratic"), q.n);
  q.constant = doc.at("constant").get<double>();
  return q;
}

IsingHamiltonian ising_from_json(const nlohmann::json& doc) {
  IsingHamiltonian h;
  h.n = doc.at("n").get<int>();
  h.h = doc.at("linear").get<std::vector<double>>();
  if (static_cast<int>(h.h.size()) != h.n) {
    raise(ErrorCode::InvalidConfig, "linear array length differs from n");
  }
  h.j = parse_triples(doc.at("quadratic"), h.n);
  h.offset = doc.at("offset").get<double>();
  return h;
}

}  // namespace qpo
