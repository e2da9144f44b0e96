#pragma once

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "qpo/statevector.hpp"

namespace qpo {

enum class AnsatzFamily { TwoLocal, Block };

/// Ordered gate list over `n_qubits` with `n_params` parameter slots.
struct Circuit {
  int n_qubits = 0;
  int n_params = 0;
  std::vector<Gate> gates;

  /// Throws unless every gate index is valid and each slot in
  /// [0, n_params) is referenced at least once.
  void validate() const;
};

/// Rotation layer RY,RZ on every qubit, then `layers` x [CNOT chain
/// i -> i+1 ascending; rotation layer]. 2n(L+1) parameters.
Circuit two_local(int n_qubits, int layers);

/// Brick layers of two-qubit blocks on (0,1),(2,3),... then (1,2),(3,4),...
/// Block(a,b) = RY a, RY b, CNOT a->b, RY a, RY b, CNOT a->b (4 parameters).
Circuit block_ansatz(int n_qubits, int layers);

Circuit make_ansatz(AnsatzFamily family, int n_qubits, int layers);

inline int param_count(const Circuit& c) { return c.n_params; }

StateVector run_circuit(const Circuit& c, std::span<const double> params);

/// One line per gate, e.g. "RY q0 t3", "CNOT q0->q1".
std::string to_text(const Circuit& c);
/// {"n_qubits", "n_params", "gates": [{"gate":"RY","target":0,"param":3}, ...]}.
nlohmann::json to_json(const Circuit& c);

std::string to_string(AnsatzFamily family);
AnsatzFamily ansatz_family_from_string(const std::string& name);

}  // namespace qpo
