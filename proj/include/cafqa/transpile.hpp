#pragma once
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "cafqa/circuit.hpp"

namespace cafqa {

/// Circuit restricted to the trapped-ion native set {rx, ry, rz, rxx}.
using NativeCircuit = Circuit;

namespace detail {

constexpr double kHalfPi = std::numbers::pi / 2;

/// Maps an angle to (-pi, pi]; rotations are 2pi-periodic up to global phase.
inline double normalize_angle(double a) {
  double r = std::fmod(a, 2 * std::numbers::pi);
  if (r <= -std::numbers::pi) r += 2 * std::numbers::pi;
  if (r > std::numbers::pi) r -= 2 * std::numbers::pi;
  return r;
}

inline bool is_zero_angle(double a) { return std::fabs(a) < 1e-12; }

}  // namespace detail

/// Fixed CNOT template: one rxx(pi/2) plus single-qubit corrections. The
/// composite equals CNOT up to global phase (checked against a 4x4 unitary
/// oracle in the test suite).
inline std::vector<Gate> decompose_cnot(int control, int target) {
  if (control == target) throw std::invalid_argument("cnot on identical qubits");
  using detail::kHalfPi;
  return {
      {GateKind::Ry, {kHalfPi}, {control}},
      {GateKind::Rxx, {kHalfPi}, {control, target}},
      {GateKind::Rx, {-kHalfPi}, {control}},
      {GateKind::Rx, {-kHalfPi}, {target}},
      {GateKind::Ry, {-kHalfPi}, {control}},
  };
}

/// Lowers to {rx, ry, rz, rxx} and merges adjacent same-axis rotations on the
/// same qubit (angles summed mod 2pi, zero-angle gates dropped). Measurements
/// are preserved unchanged.
inline NativeCircuit transpile(const Circuit& c) {
  using detail::kHalfPi;
  NativeCircuit out;
  out.n_qubits = c.n_qubits;
  out.n_clbits = c.n_clbits;
  out.measurements = c.measurements;

  auto push = [&](GateKind k, std::vector<double> params, std::vector<int> qubits) {
    if (k == GateKind::Rxx) {
      double a = detail::normalize_angle(params[0]);
      if (detail::is_zero_angle(a)) return;
      out.gates.push_back({k, {a}, std::move(qubits)});
      return;
    }
    double a = detail::normalize_angle(params[0]);
    int q = qubits[0];
    // merge with the most recent gate touching this qubit, if same axis
    for (auto it = out.gates.rbegin(); it != out.gates.rend(); ++it) {
      bool touches = false;
      for (int gq : it->qubits) touches |= (gq == q);
      if (!touches) continue;
      if (it->kind == k && it->qubits.size() == 1) {
        double merged = detail::normalize_angle(it->params[0] + a);
        if (detail::is_zero_angle(merged))
          out.gates.erase(std::next(it).base());
        else
          it->params[0] = merged;
        return;
      }
      break;
    }
    if (!detail::is_zero_angle(a))
      out.gates.push_back({k, {a}, std::move(qubits)});
  };

  for (const auto& g : c.gates) {
    switch (g.kind) {
      case GateKind::Rx:
      case GateKind::Ry:
      case GateKind::Rz:
      case GateKind::Rxx:
        push(g.kind, g.params, g.qubits);
        break;
      case GateKind::X: push(GateKind::Rx, {std::numbers::pi}, g.qubits); break;
      case GateKind::Y: push(GateKind::Ry, {std::numbers::pi}, g.qubits); break;
      case GateKind::Z: push(GateKind::Rz, {std::numbers::pi}, g.qubits); break;
      case GateKind::S: push(GateKind::Rz, {kHalfPi}, g.qubits); break;
      case GateKind::Sdg: push(GateKind::Rz, {-kHalfPi}, g.qubits); break;
      case GateKind::H:
        push(GateKind::Ry, {kHalfPi}, g.qubits);
        push(GateKind::Rx, {std::numbers::pi}, g.qubits);
        break;
      case GateKind::Cx:
        for (const auto& ng : decompose_cnot(g.qubits[0], g.qubits[1]))
          push(ng.kind, ng.params, ng.qubits);
        break;
    }
  }
  return out;
}

}  // namespace cafqa
