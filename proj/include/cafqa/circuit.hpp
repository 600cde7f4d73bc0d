#pragma once
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace cafqa {

enum class GateKind { X, Y, Z, H, S, Sdg, Rx, Ry, Rz, Cx, Rxx };

inline const char* gate_name(GateKind k) {
  switch (k) {
    case GateKind::X: return "x";
    case GateKind::Y: return "y";
    case GateKind::Z: return "z";
    case GateKind::H: return "h";
    case GateKind::S: return "s";
    case GateKind::Sdg: return "sdg";
    case GateKind::Rx: return "rx";
    case GateKind::Ry: return "ry";
    case GateKind::Rz: return "rz";
    case GateKind::Cx: return "cx";
    case GateKind::Rxx: return "rxx";
  }
  return "?";
}

inline bool gate_from_name(const std::string& s, GateKind& out) {
  static const std::pair<const char*, GateKind> table[] = {
      {"x", GateKind::X},   {"y", GateKind::Y},     {"z", GateKind::Z},
      {"h", GateKind::H},   {"s", GateKind::S},     {"sdg", GateKind::Sdg},
      {"rx", GateKind::Rx}, {"ry", GateKind::Ry},   {"rz", GateKind::Rz},
      {"cx", GateKind::Cx}, {"rxx", GateKind::Rxx}};
  for (const auto& [name, kind] : table)
    if (s == name) {
      out = kind;
      return true;
    }
  return false;
}

inline int gate_arity(GateKind k) {
  return (k == GateKind::Cx || k == GateKind::Rxx) ? 2 : 1;
}

inline int gate_param_count(GateKind k) {
  switch (k) {
    case GateKind::Rx:
    case GateKind::Ry:
    case GateKind::Rz:
    case GateKind::Rxx: return 1;
    default: return 0;
  }
}

struct Gate {
  GateKind kind;
  std::vector<double> params;
  std::vector<int> qubits;

  bool operator==(const Gate& o) const = default;
};

/// Gate-list IR bridging ansatz construction, QASM text, the transpiler and
/// the backends. Measurement-final circuits only.
struct Circuit {
  int n_qubits = 0;
  int n_clbits = 0;
  std::vector<Gate> gates;
  std::vector<std::pair<int, int>> measurements;  // (qubit, clbit)

  void add(GateKind k, std::vector<int> qubits, std::vector<double> params = {}) {
    if (int(qubits.size()) != gate_arity(k))
      throw std::invalid_argument("wrong qubit count for gate");
    if (int(params.size()) != gate_param_count(k))
      throw std::invalid_argument("wrong parameter count for gate");
    for (int q : qubits)
      if (q < 0 || q >= n_qubits) throw std::out_of_range("qubit index");
    if (gate_arity(k) == 2 && qubits[0] == qubits[1])
      throw std::invalid_argument("two-qubit gate on identical qubits");
    gates.push_back({k, std::move(params), std::move(qubits)});
  }

  void measure(int qubit, int clbit) {
    if (qubit < 0 || qubit >= n_qubits) throw std::out_of_range("qubit index");
    if (clbit < 0 || clbit >= n_clbits) throw std::out_of_range("clbit index");
    measurements.emplace_back(qubit, clbit);
  }

  /// Appends measure q[i] -> c[i] for all qubits.
  void measure_all() {
    for (int q = 0; q < n_qubits; ++q) measure(q, q);
  }

  bool operator==(const Circuit& o) const = default;
};

}  // namespace cafqa
