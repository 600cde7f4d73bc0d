#pragma once
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "cafqa/circuit.hpp"
#include "cafqa/pauli.hpp"

namespace cafqa {

/// Aaronson-Gottesman tableau: rows 0..n-1 destabilizers, n..2n-1 stabilizers.
/// Row Paulis are stored as x/z bitmasks, phases as sign bits (0 -> +, 1 -> -).
/// Global phase is discarded; only Pauli expectations are observable here.
class StabilizerTableau {
 public:
  explicit StabilizerTableau(int n) : n_(n) {
    if (n < 1 || n > 64) throw std::invalid_argument("qubit count out of range");
    x_.assign(std::size_t(2 * n), 0);
    z_.assign(std::size_t(2 * n), 0);
    r_.assign(std::size_t(2 * n), 0);
    for (int i = 0; i < n; ++i) {
      x_[std::size_t(i)] = std::uint64_t(1) << i;          // destabilizer X_i
      z_[std::size_t(n + i)] = std::uint64_t(1) << i;      // stabilizer Z_i
    }
  }

  int n_qubits() const { return n_; }
  std::uint64_t row_ops() const { return row_ops_; }

  void apply_h(int q) {
    check_qubit(q);
    std::uint64_t bit = std::uint64_t(1) << q;
    for (std::size_t i = 0; i < x_.size(); ++i) {
      std::uint64_t xb = x_[i] & bit, zb = z_[i] & bit;
      if (xb && zb) r_[i] ^= 1;
      x_[i] = (x_[i] & ~bit) | (zb ? bit : 0);
      z_[i] = (z_[i] & ~bit) | (xb ? bit : 0);
      ++row_ops_;
    }
  }

  void apply_s(int q) {
    check_qubit(q);
    std::uint64_t bit = std::uint64_t(1) << q;
    for (std::size_t i = 0; i < x_.size(); ++i) {
      if ((x_[i] & bit) && (z_[i] & bit)) r_[i] ^= 1;
      if (x_[i] & bit) z_[i] ^= bit;
      ++row_ops_;
    }
  }

  void apply_sdg(int q) {
    check_qubit(q);
    std::uint64_t bit = std::uint64_t(1) << q;
    for (std::size_t i = 0; i < x_.size(); ++i) {
      if ((x_[i] & bit) && !(z_[i] & bit)) r_[i] ^= 1;
      if (x_[i] & bit) z_[i] ^= bit;
      ++row_ops_;
    }
  }

  void apply_x(int q) {
    check_qubit(q);
    std::uint64_t bit = std::uint64_t(1) << q;
    for (std::size_t i = 0; i < x_.size(); ++i) {
      if (z_[i] & bit) r_[i] ^= 1;
      ++row_ops_;
    }
  }

  void apply_z(int q) {
    check_qubit(q);
    std::uint64_t bit = std::uint64_t(1) << q;
    for (std::size_t i = 0; i < x_.size(); ++i) {
      if (x_[i] & bit) r_[i] ^= 1;
      ++row_ops_;
    }
  }

  void apply_y(int q) {
    check_qubit(q);
    std::uint64_t bit = std::uint64_t(1) << q;
    for (std::size_t i = 0; i < x_.size(); ++i) {
      if (((x_[i] & bit) != 0) != ((z_[i] & bit) != 0)) r_[i] ^= 1;
      ++row_ops_;
    }
  }

  void apply_cnot(int control, int target) {
    check_qubit(control);
    check_qubit(target);
    if (control == target) throw std::invalid_argument("cnot on identical qubits");
    std::uint64_t cb = std::uint64_t(1) << control;
    std::uint64_t tb = std::uint64_t(1) << target;
    for (std::size_t i = 0; i < x_.size(); ++i) {
      bool xc = x_[i] & cb, zc = z_[i] & cb, xt = x_[i] & tb, zt = z_[i] & tb;
      if (xc && zt && (xt == zc)) r_[i] ^= 1;
      if (xc) x_[i] ^= tb;
      if (zt) z_[i] ^= cb;
      ++row_ops_;
    }
  }

  /// Applies one gate from the Clifford set. Rotation angles must be multiples
  /// of pi/2 within 1e-12; a non-Clifford angle throws (caller falls back to
  /// the statevector backend).
  void apply_gate(const Gate& g) {
    switch (g.kind) {
      case GateKind::H: apply_h(g.qubits[0]); return;
      case GateKind::S: apply_s(g.qubits[0]); return;
      case GateKind::Sdg: apply_sdg(g.qubits[0]); return;
      case GateKind::X: apply_x(g.qubits[0]); return;
      case GateKind::Y: apply_y(g.qubits[0]); return;
      case GateKind::Z: apply_z(g.qubits[0]); return;
      case GateKind::Cx: apply_cnot(g.qubits[0], g.qubits[1]); return;
      case GateKind::Rx: apply_rx(g.qubits[0], quarter_turns(g.params[0])); return;
      case GateKind::Ry: apply_ry(g.qubits[0], quarter_turns(g.params[0])); return;
      case GateKind::Rz: apply_rz(g.qubits[0], quarter_turns(g.params[0])); return;
      default:
        throw std::invalid_argument("gate is not Clifford");
    }
  }

  // Quarter-turn rotations via fixed H/S/X compositions (unitary equivalence
  // up to global phase is checked against a matrix oracle in the test suite).
  void apply_rz(int q, int k) {
    switch (((k % 4) + 4) % 4) {
      case 0: return;
      case 1: apply_s(q); return;
      case 2: apply_z(q); return;
      case 3: apply_sdg(q); return;
    }
  }

  void apply_rx(int q, int k) {
    switch (((k % 4) + 4) % 4) {
      case 0: return;
      case 1: apply_h(q); apply_s(q); apply_h(q); return;
      case 2: apply_x(q); return;
      case 3: apply_h(q); apply_sdg(q); apply_h(q); return;
    }
  }

  void apply_ry(int q, int k) {
    // Ry(theta) = S Rx(theta) Sdg
    switch (((k % 4) + 4) % 4) {
      case 0: return;
      case 1: apply_sdg(q); apply_rx(q, 1); apply_s(q); return;
      case 2: apply_y(q); return;
      case 3: apply_sdg(q); apply_rx(q, 3); apply_s(q); return;
    }
  }

  /// 0 if p anticommutes with some stabilizer generator; otherwise the sign of
  /// p as a product of stabilizer generators.
  int expect_pauli(const PauliString& p) const {
    if (p.n != n_) throw std::invalid_argument("Pauli length mismatch");
    if (p.is_identity()) return 1;
    for (int i = 0; i < n_; ++i)
      if (anticommutes(std::size_t(n_ + i), p)) return 0;
    // p = +- product of stabilizers whose paired destabilizer anticommutes
    // with p; accumulate the i-exponent of the product.
    std::uint64_t ax = 0, az = 0;
    int iexp = 0;  // mod 4
    for (int i = 0; i < n_; ++i) {
      if (!anticommutes(std::size_t(i), p)) continue;
      std::size_t row = std::size_t(n_ + i);
      iexp = (iexp + 2 * r_[row] + phase_exponent(ax, az, x_[row], z_[row])) % 4;
      ax ^= x_[row];
      az ^= z_[row];
      row_ops_ += std::uint64_t(n_);
    }
    if (ax != p.x || az != p.z)
      throw std::logic_error("stabilizer synthesis failed (invalid tableau)");
    if (iexp == 0) return 1;
    if (iexp == 2) return -1;
    throw std::logic_error("non-Hermitian phase in stabilizer product");
  }

  double energy(const PauliHamiltonian& h) const {
    if (h.n_qubits != n_) throw std::invalid_argument("dimension mismatch");
    double e = h.identity_offset;
    for (const auto& t : h.terms) e += t.coeff * expect_pauli(t.string);
    return e;
  }

  /// Verifies commutation structure and GF(2) independence of the rows.
  bool check_invariants() const {
    for (int i = 0; i < n_; ++i) {
      for (int j = 0; j < n_; ++j) {
        bool anti = rows_anticommute(std::size_t(n_ + i), std::size_t(n_ + j));
        if (anti) return false;  // stabilizers must commute
        bool da = rows_anticommute(std::size_t(i), std::size_t(n_ + j));
        if (da != (i == j)) return false;
      }
    }
    // Full rank over GF(2): Gaussian elimination on [x|z] rows.
    std::vector<std::pair<std::uint64_t, std::uint64_t>> rows;
    for (std::size_t i = 0; i < x_.size(); ++i) rows.emplace_back(x_[i], z_[i]);
    std::size_t rank = 0;
    for (int col = 0; col < 2 * n_; ++col) {
      std::uint64_t bit = std::uint64_t(1) << (col % n_);
      bool use_x = col < n_;
      std::size_t pivot = rows.size();
      for (std::size_t i = rank; i < rows.size(); ++i) {
        std::uint64_t v = use_x ? rows[i].first : rows[i].second;
        if (v & bit) {
          pivot = i;
          break;
        }
      }
      if (pivot == rows.size()) continue;
      std::swap(rows[rank], rows[pivot]);
      for (std::size_t i = 0; i < rows.size(); ++i) {
        if (i == rank) continue;
        std::uint64_t v = use_x ? rows[i].first : rows[i].second;
        if (v & bit) {
          rows[i].first ^= rows[rank].first;
          rows[i].second ^= rows[rank].second;
        }
      }
      ++rank;
    }
    return rank == std::size_t(2 * n_);
  }

  static int quarter_turns(double angle) {
    double k = angle / (std::numbers::pi / 2);
    double rounded = std::round(k);
    if (std::fabs(k - rounded) > 1e-12 / (std::numbers::pi / 2))
      throw std::domain_error("rotation angle is not a multiple of pi/2");
    return int(std::llround(rounded)) % 4;
  }

  static bool is_quarter_turn(double angle) {
    double k = angle / (std::numbers::pi / 2);
    return std::fabs(k - std::round(k)) <= 1e-12 / (std::numbers::pi / 2);
  }

 private:
  void check_qubit(int q) const {
    if (q < 0 || q >= n_) throw std::out_of_range("qubit index");
  }

  bool anticommutes(std::size_t row, const PauliString& p) const {
    auto parity = [](std::uint64_t v) { return __builtin_popcountll(v) & 1; };
    return (parity(x_[row] & p.z) ^ parity(z_[row] & p.x)) != 0;
  }

  bool rows_anticommute(std::size_t a, std::size_t b) const {
    auto parity = [](std::uint64_t v) { return __builtin_popcountll(v) & 1; };
    return (parity(x_[a] & z_[b]) ^ parity(z_[a] & x_[b])) != 0;
  }

  /// i-exponent picked up when multiplying Pauli (x1,z1) by (x2,z2), qubitwise.
  static int phase_exponent(std::uint64_t x1, std::uint64_t z1, std::uint64_t x2,
                            std::uint64_t z2) {
    int g = 0;
    std::uint64_t support = x1 | z1;
    while (support) {
      int q = __builtin_ctzll(support);
      support &= support - 1;
      std::uint64_t bit = std::uint64_t(1) << q;
      int a = ((x1 & bit) ? 1 : 0) | ((z1 & bit) ? 2 : 0);
      int bx = (x2 & bit) ? 1 : 0, bz = (z2 & bit) ? 1 : 0;
      switch (a) {
        case 1: g += bz * (2 * bx - 1); break;       // X * P
        case 3: g += bz - bx; break;                 // Y * P
        case 2: g += bx * (1 - 2 * bz); break;       // Z * P
      }
    }
    return ((g % 4) + 4) % 4;
  }

  int n_;
  std::vector<std::uint64_t> x_, z_;
  std::vector<std::uint8_t> r_;
  mutable std::uint64_t row_ops_ = 0;
};

inline StabilizerTableau new_zero_state(int n) { return StabilizerTableau(n); }

/// Exact Clifford-circuit energy; the kernel of the CAFQA discrete search.
inline double clifford_energy(const Circuit& c, const PauliHamiltonian& h) {
  StabilizerTableau t(c.n_qubits);
  for (const auto& g : c.gates) t.apply_gate(g);
  return t.energy(h);
}

}  // namespace cafqa
