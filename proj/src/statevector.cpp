#include "qpo/statevector.hpp"

#include <algorithm>
#include <cmath>

#include "qpo/error.hpp"

namespace qpo {

StateVector::StateVector(int n_qubits) : n_qubits_(n_qubits) {
  if (n_qubits < 0 || n_qubits > kMaxExactVariables) {
    raise(ErrorCode::InvalidSize, "qubit count outside [0, 26]");
  }
  amplitudes_.assign(std::size_t{1} << n_qubits, Amplitude{0.0, 0.0});
  amplitudes_[0] = 1.0;
}

StateVector::StateVector(int n_qubits, std::vector<Amplitude> amplitudes)
    : n_qubits_(n_qubits), amplitudes_(std::move(amplitudes)) {
  if (n_qubits < 0 || n_qubits > kMaxExactVariables ||
      amplitudes_.size() != (std::size_t{1} << n_qubits)) {
    raise(ErrorCode::DimensionMismatch, "amplitude count must be 2^n");
  }
}

double StateVector::norm_squared() const {
  double total = 0.0;
  for (const auto& a : amplitudes_) total += std::norm(a);
  return total;
}

void StateVector::apply(const Gate& gate, std::optional<double> theta) {
  const auto in_range = [this](int q) { return q >= 0 && q < n_qubits_; };
  if (!in_range(gate.target)) raise(ErrorCode::IndexOutOfRange, "gate target out of range");
  if (gate.parameterized()) {
    if (!theta) raise(ErrorCode::MissingParameter, "rotation gate needs an angle");
  } else if (theta) {
    raise(ErrorCode::MissingParameter, "CNOT takes no angle");
  }
  switch (gate.kind) {
    case GateKind::RY:
      apply_ry(gate.target, *theta);
      break;
    case GateKind::RZ:
      apply_rz(gate.target, *theta);
      break;
    case GateKind::CNOT:
      if (!in_range(gate.control) || gate.control == gate.target) {
        raise(ErrorCode::IndexOutOfRange, "CNOT control invalid");
      }
      apply_cnot(gate.control, gate.target);
      break;
  }
}

// The loops below visit each pair (i, i | bit) once with i having the
// target bit clear.

void StateVector::apply_ry(int target, double theta) {
  const double c = std::cos(0.5 * theta);
  const double s = std::sin(0.5 * theta);
  const std::size_t bit = std::size_t{1} << target;
  const std::size_t dim = amplitudes_.size();
  for (std::size_t base = 0; base < dim; base += 2 * bit) {
    for (std::size_t i = base; i < base + bit; ++i) {
      const Amplitude a0 = amplitudes_[i];
      const Amplitude a1 = amplitudes_[i | bit];
      amplitudes_[i] = c * a0 - s * a1;
      amplitudes_[i | bit] = s * a0 + c * a1;
    }
  }
}

void StateVector::apply_rz(int target, double theta) {
  const Amplitude lower = std::polar(1.0, -0.5 * theta);
  const Amplitude upper = std::polar(1.0, 0.5 * theta);
  const std::size_t bit = std::size_t{1} << target;
  for (std::size_t i = 0; i < amplitudes_.size(); ++i) {
    amplitudes_[i] *= (i & bit) ? upper : lower;
  }
}

void StateVector::apply_cnot(int control, int target) {
  const std::size_t cbit = std::size_t{1} << control;
  const std::size_t tbit = std::size_t{1} << target;
  for (std::size_t i = 0; i < amplitudes_.size(); ++i) {
    if ((i & cbit) && !(i & tbit)) std::swap(amplitudes_[i], amplitudes_[i | tbit]);
  }
}

StateVector apply_gate(StateVector state, const Gate& gate, std::optional<double> theta) {
  state.apply(gate, theta);
  return state;
}

std::vector<double> probabilities(const StateVector& state) {
  const auto amps = state.amplitudes();
  std::vector<double> probs(amps.size());
  std::transform(amps.begin(), amps.end(), probs.begin(),
                 [](const Amplitude& a) { return std::norm(a); });
  return probs;
}

std::vector<BasisIndex> sample_bitstrings(std::span<const double> probs, std::size_t shots,
                                          Rng& rng) {
  if (probs.empty()) raise(ErrorCode::DimensionMismatch, "empty distribution");
  std::vector<double> cdf(probs.size());
  double running = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    running += probs[i];
    cdf[i] = running;
  }
  // Scale by the realized total so round-off never leaves mass unreachable.
  const double total = running;
  std::size_t last_nonzero = probs.size() - 1;
  while (last_nonzero > 0 && probs[last_nonzero] == 0.0) --last_nonzero;

  std::vector<BasisIndex> out(shots);
  for (auto& draw : out) {
    const double u = rng.uniform01() * total;
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    auto idx = static_cast<std::size_t>(it - cdf.begin());
    draw = std::min(idx, last_nonzero);
  }
  return out;
}

std::vector<BasisIndex> sample_bitstrings(const StateVector& state, std::size_t shots, Rng& rng) {
  const auto probs = probabilities(state);
  return sample_bitstrings(probs, shots, rng);
}

double diagonal_expectation(std::span<const double> probs, std::span<const double> diagonal) {
  if (probs.size() != diagonal.size()) {
    raise(ErrorCode::DimensionMismatch, "probability and diagonal sizes differ");
  }
  double e = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) e += probs[i] * diagonal[i];
  return e;
}

double diagonal_expectation(const StateVector& state, const IsingHamiltonian& h) {
  if (state.n_qubits() != h.n) {
    raise(ErrorCode::DimensionMismatch, "state and Hamiltonian sizes differ");
  }
  const auto probs = probabilities(state);
  const auto diag = ising_diagonal(h);
  return diagonal_expectation(probs, diag);
}

}  // namespace qpo
