#include "qpo/ansatz.hpp"

#include <sstream>

#include "qpo/error.hpp"

namespace qpo {

namespace {

void check_size(int n_qubits, int layers) {
  if (n_qubits < 2 || layers < 1) {
    raise(ErrorCode::InvalidSize, "ansatz needs n >= 2 and layers >= 1, got n=" +
                                      std::to_string(n_qubits) + " layers=" +
                                      std::to_string(layers));
  }
  if (n_qubits > kMaxExactVariables) raise(ErrorCode::InvalidSize, "too many qubits");
}

void rotation_layer(Circuit& c) {
  for (int q = 0; q < c.n_qubits; ++q) {
    c.gates.push_back(Gate::ry(q, c.n_params++));
    c.gates.push_back(Gate::rz(q, c.n_params++));
  }
}

void add_block(Circuit& c, int a, int b) {
  c.gates.push_back(Gate::ry(a, c.n_params++));
  c.gates.push_back(Gate::ry(b, c.n_params++));
  c.gates.push_back(Gate::cnot(a, b));
  c.gates.push_back(Gate::ry(a, c.n_params++));
  c.gates.push_back(Gate::ry(b, c.n_params++));
  c.gates.push_back(Gate::cnot(a, b));
}

const char* gate_name(GateKind kind) {
  switch (kind) {
    case GateKind::RY: return "RY";
    case GateKind::RZ: return "RZ";
    case GateKind::CNOT: return "CNOT";
  }
  return "?";
}

}  // namespace

void Circuit::validate() const {
  std::vector<bool> used(static_cast<std::size_t>(n_params), false);
  for (const auto& g : gates) {
    if (g.target < 0 || g.target >= n_qubits) {
      raise(ErrorCode::IndexOutOfRange, "gate target out of range");
    }
    if (g.parameterized()) {
      if (g.param < 0 || g.param >= n_params) {
        raise(ErrorCode::IndexOutOfRange, "parameter slot out of range");
      }
      used[static_cast<std::size_t>(g.param)] = true;
    } else if (g.control < 0 || g.control >= n_qubits || g.control == g.target) {
      raise(ErrorCode::IndexOutOfRange, "CNOT control invalid");
    }
  }
  for (std::size_t slot = 0; slot < used.size(); ++slot) {
    if (!used[slot]) raise(ErrorCode::InvalidSize, "parameter slot " + std::to_string(slot) + " unused");
  }
}

Circuit two_local(int n_qubits, int layers) {
  check_size(n_qubits, layers);
  Circuit c;
  c.n_qubits = n_qubits;
  rotation_layer(c);
  for (int layer = 0; layer < layers; ++layer) {
    for (int q = 0; q + 1 < n_qubits; ++q) c.gates.push_back(Gate::cnot(q, q + 1));
    rotation_layer(c);
  }
  return c;
}

Circuit block_ansatz(int n_qubits, int layers) {
  check_size(n_qubits, layers);
  Circuit c;
  c.n_qubits = n_qubits;
  for (int layer = 0; layer < layers; ++layer) {
    for (int a = 0; a + 1 < n_qubits; a += 2) add_block(c, a, a + 1);
    for (int a = 1; a + 1 < n_qubits; a += 2) add_block(c, a, a + 1);
  }
  return c;
}

Circuit make_ansatz(AnsatzFamily family, int n_qubits, int layers) {
  return family == AnsatzFamily::TwoLocal ? two_local(n_qubits, layers)
                                          : block_ansatz(n_qubits, layers);
}

StateVector run_circuit(const Circuit& c, std::span<const double> params) {
  if (static_cast<int>(params.size()) != c.n_params) {
    raise(ErrorCode::ParamCountMismatch, "circuit expects " + std::to_string(c.n_params) +
                                             " parameters, got " + std::to_string(params.size()));
  }
  StateVector state(c.n_qubits);
  for (const auto& g : c.gates) {
    if (g.parameterized()) {
      state.apply(g, params[static_cast<std::size_t>(g.param)]);
    } else {
      state.apply(g);
    }
  }
  return state;
}

std::string to_text(const Circuit& c) {
  std::ostringstream out;
  out << "circuit n_qubits=" << c.n_qubits << " n_params=" << c.n_params << '\n';
  for (const auto& g : c.gates) {
    if (g.parameterized()) {
      out << gate_name(g.kind) << " q" << g.target << " t" << g.param << '\n';
    } else {
      out << "CNOT q" << g.control << "->q" << g.target << '\n';
    }
  }
  return out.str();
}

nlohmann::json to_json(const Circuit& c) {
  auto gates = nlohmann::json::array();
  for (const auto& g : c.gates) {
    nlohmann::json entry{{"gate", gate_name(g.kind)}, {"target", g.target}};
    if (g.parameterized()) {
      entry["param"] = g.param;
    } else {
      entry["control"] = g.control;
    }
    gates.push_back(std::move(entry));
  }
  return {{"n_qubits", c.n_qubits}, {"n_params", c.n_params}, {"gates", std::move(gates)}};
}

std::string to_string(AnsatzFamily family) {
  return family == AnsatzFamily::TwoLocal ? "two_local" : "block";
}

AnsatzFamily ansatz_family_from_string(const std::string& name) {
  if (name == "two_local" || name == "A1") return AnsatzFamily::TwoLocal;
  if (name == "block" || name == "A2") return AnsatzFamily::Block;
  raise(ErrorCode::InvalidConfig, "unknown ansatz family '" + name + "'");
}

}  // namespace qpo
