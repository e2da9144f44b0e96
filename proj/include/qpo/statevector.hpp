#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "qpo/portfolio_qubo.hpp"
#include "qpo/rng.hpp"

namespace qpo {

using Amplitude = std::complex<double>;

enum class GateKind { RY, RZ, CNOT };

/// One circuit instruction. RY/RZ act on `target` with angle taken from
/// parameter slot `param`; CNOT uses `control` and `target` and no parameter.
struct Gate {
  GateKind kind = GateKind::RY;
  int target = 0;
  int control = -1;
  int param = -1;

  static Gate ry(int target, int slot) { return {GateKind::RY, target, -1, slot}; }
  static Gate rz(int target, int slot) { return {GateKind::RZ, target, -1, slot}; }
  static Gate cnot(int control, int target) { return {GateKind::CNOT, target, control, -1}; }

  bool parameterized() const { return kind != GateKind::CNOT; }
  bool operator==(const Gate&) const = default;
};

/// Dense state of n qubits; amplitude index bit i is qubit i.
class StateVector {
 public:
  explicit StateVector(int n_qubits);  // |0...0>
  StateVector(int n_qubits, std::vector<Amplitude> amplitudes);

  int n_qubits() const { return n_qubits_; }
  std::size_t dimension() const { return amplitudes_.size(); }
  std::span<const Amplitude> amplitudes() const { return amplitudes_; }
  double norm_squared() const;

  /// Applies `gate` in place. `theta` must be given exactly when the gate is
  /// parameterized.
  void apply(const Gate& gate, std::optional<double> theta = std::nullopt);

 private:
  void apply_ry(int target, double theta);
  void apply_rz(int target, double theta);
  void apply_cnot(int control, int target);

  int n_qubits_;
  std::vector<Amplitude> amplitudes_;
};

/// Value-returning form of StateVector::apply.
StateVector apply_gate(StateVector state, const Gate& gate, std::optional<double> theta);

std::vector<double> probabilities(const StateVector& state);

/// K i.i.d. basis-state draws by inverse-CDF lookup; consumes K uniforms.
std::vector<BasisIndex> sample_bitstrings(std::span<const double> probs, std::size_t shots,
                                          Rng& rng);
std::vector<BasisIndex> sample_bitstrings(const StateVector& state, std::size_t shots, Rng& rng);

/// sum_x p_x * E(x) with E the Ising energy excluding the offset.
double diagonal_expectation(const StateVector& state, const IsingHamiltonian& h);
/// Same, against a precomputed diagonal (see ising_diagonal).
double diagonal_expectation(std::span<const double> probs, std::span<const double> diagonal);

}  // namespace qpo
