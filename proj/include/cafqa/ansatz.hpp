#pragma once
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "cafqa/circuit.hpp"

namespace cafqa {

enum class Axis { Rx, Ry, Rz };

inline char axis_letter(Axis a) {
  switch (a) {
    case Axis::Rx: return 'x';
    case Axis::Ry: return 'y';
    case Axis::Rz: return 'z';
  }
  return '?';
}

inline GateKind axis_gate(Axis a) {
  switch (a) {
    case Axis::Rx: return GateKind::Rx;
    case Axis::Ry: return GateKind::Ry;
    case Axis::Rz: return GateKind::Rz;
  }
  return GateKind::Rz;
}

/// Hardware-efficient ansatz: X-gate occupation prefix, then per layer a block
/// of parameterized single-qubit rotations followed by the entangler CNOTs.
struct AnsatzSpec {
  int n_qubits = 0;
  int n_occupied = 0;
  int n_layers = 0;
  std::vector<Axis> rotation_axes = {Axis::Ry, Axis::Rz};  // per-layer pattern
  std::vector<std::pair<int, int>> entangler;               // empty -> linear chain
  bool final_rotation_layer = false;

  std::vector<std::pair<int, int>> entangler_pairs() const {
    if (!entangler.empty()) return entangler;
    std::vector<std::pair<int, int>> chain;
    for (int q = 0; q + 1 < n_qubits; ++q) chain.emplace_back(q, q + 1);
    return chain;
  }

  void validate() const {
    if (n_qubits < 1) throw std::invalid_argument("n_qubits must be positive");
    if (n_occupied < 0 || n_occupied > n_qubits)
      throw std::invalid_argument("n_occupied out of range");
    if (n_layers < 0) throw std::invalid_argument("n_layers negative");
    if (rotation_axes.empty())
      throw std::invalid_argument("rotation axis pattern empty");
    for (auto [a, b] : entangler_pairs())
      if (a < 0 || b < 0 || a >= n_qubits || b >= n_qubits || a == b)
        throw std::invalid_argument("entangler pair out of range");
  }

  int param_count() const {
    int layers = n_layers + (final_rotation_layer ? 1 : 0);
    return layers * n_qubits * int(rotation_axes.size());
  }
};

/// The parameter vector theta, radians. Discrete (quarter-turn) points are the
/// Clifford grid.
struct ParamPoint {
  std::vector<double> values;

  std::size_t size() const { return values.size(); }

  bool is_clifford(double tol = 1e-9) const {
    for (double v : values) {
      double k = v / (std::numbers::pi / 2);
      if (std::fabs(k - std::round(k)) > tol / (std::numbers::pi / 2)) return false;
    }
    return true;
  }

  bool operator==(const ParamPoint& o) const = default;
};

inline Circuit build_circuit(const AnsatzSpec& spec, const ParamPoint& p) {
  spec.validate();
  if (int(p.size()) != spec.param_count())
    throw std::invalid_argument("parameter count mismatch");
  Circuit c;
  c.n_qubits = spec.n_qubits;
  c.n_clbits = spec.n_qubits;
  for (int q = 0; q < spec.n_occupied; ++q) c.add(GateKind::X, {q});
  auto pairs = spec.entangler_pairs();
  std::size_t pi = 0;
  int layers = spec.n_layers + (spec.final_rotation_layer ? 1 : 0);
  for (int layer = 0; layer < layers; ++layer) {
    for (Axis a : spec.rotation_axes)
      for (int q = 0; q < spec.n_qubits; ++q)
        c.add(axis_gate(a), {q}, {p.values[pi++]});
    bool is_final_extra = spec.final_rotation_layer && layer == layers - 1;
    if (!is_final_extra)
      for (auto [ctrl, tgt] : pairs) c.add(GateKind::Cx, {ctrl, tgt});
  }
  return c;
}

/// All-zeros point: the Hartree-Fock initialization.
inline ParamPoint hf_point(const AnsatzSpec& spec) {
  return ParamPoint{std::vector<double>(std::size_t(spec.param_count()), 0.0)};
}

/// Maps a Clifford point to grid indices in {0,1,2,3}^k.
inline std::vector<int> snap_to_grid(const ParamPoint& p) {
  if (!p.is_clifford()) throw std::domain_error("point is off the Clifford grid");
  std::vector<int> idx(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    long k = std::lround(p.values[i] / (std::numbers::pi / 2));
    idx[i] = int(((k % 4) + 4) % 4);
  }
  return idx;
}

/// Inverse of snap_to_grid: index i -> i * pi/2.
inline ParamPoint grid_to_point(const std::vector<int>& idx) {
  ParamPoint p;
  p.values.reserve(idx.size());
  for (int k : idx) {
    if (k < 0 || k > 3) throw std::invalid_argument("grid index out of {0..3}");
    p.values.push_back(k * (std::numbers::pi / 2));
  }
  return p;
}

}  // namespace cafqa
