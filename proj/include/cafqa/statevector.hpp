#pragma once
#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cafqa/circuit.hpp"
#include "cafqa/pauli.hpp"
#include "cafqa/rng.hpp"

namespace cafqa {

constexpr int kMaxSimQubits = 12;

/// Depolarizing-plus-readout-flip noise. Defaults map the quoted device
/// fidelities as p = 1 - fidelity.
struct NoiseModel {
  double p1 = 0.003;      // per single-qubit gate
  double p2 = 0.009;      // per two-qubit gate
  double p_spam = 0.0027; // per-qubit readout flip

  void validate() const {
    for (double p : {p1, p2, p_spam})
      if (p < 0 || p >= 1) throw std::invalid_argument("noise probability out of [0,1)");
  }
};

struct Histogram {
  std::map<std::string, std::uint64_t> counts;
  std::uint64_t shots = 0;
};

/// Dense state simulator; qubit q is bit q of the amplitude index.
class Statevector {
 public:
  explicit Statevector(int n) : n_(n) {
    if (n < 1 || n > kMaxSimQubits)
      throw std::invalid_argument("qubit count out of simulable range");
    amp_.assign(std::size_t(1) << n, {0.0, 0.0});
    amp_[0] = {1.0, 0.0};
  }

  int n_qubits() const { return n_; }
  const std::vector<std::complex<double>>& amplitudes() const { return amp_; }

  void apply_1q(int q, const std::complex<double> m[2][2]) {
    std::size_t bit = std::size_t(1) << q;
    for (std::size_t i = 0; i < amp_.size(); ++i) {
      if (i & bit) continue;
      auto a0 = amp_[i], a1 = amp_[i | bit];
      amp_[i] = m[0][0] * a0 + m[0][1] * a1;
      amp_[i | bit] = m[1][0] * a0 + m[1][1] * a1;
    }
  }

  void apply_2q(int qa, int qb, const std::complex<double> m[4][4]) {
    std::size_t ba = std::size_t(1) << qa, bb = std::size_t(1) << qb;
    for (std::size_t i = 0; i < amp_.size(); ++i) {
      if ((i & ba) || (i & bb)) continue;
      std::size_t idx[4] = {i, i | ba, i | bb, i | ba | bb};
      std::complex<double> v[4];
      for (int k = 0; k < 4; ++k) v[k] = amp_[idx[k]];
      for (int r = 0; r < 4; ++r) {
        std::complex<double> acc = 0;
        for (int k = 0; k < 4; ++k) acc += m[r][k] * v[k];
        amp_[idx[r]] = acc;
      }
    }
  }

  void apply_gate(const Gate& g) {
    using namespace std::complex_literals;
    const double s2 = 1.0 / std::sqrt(2.0);
    std::complex<double> m[2][2];
    switch (g.kind) {
      case GateKind::X: m[0][0] = 0; m[0][1] = 1; m[1][0] = 1; m[1][1] = 0; break;
      case GateKind::Y: m[0][0] = 0; m[0][1] = -1i; m[1][0] = 1i; m[1][1] = 0; break;
      case GateKind::Z: m[0][0] = 1; m[0][1] = 0; m[1][0] = 0; m[1][1] = -1; break;
      case GateKind::H: m[0][0] = s2; m[0][1] = s2; m[1][0] = s2; m[1][1] = -s2; break;
      case GateKind::S: m[0][0] = 1; m[0][1] = 0; m[1][0] = 0; m[1][1] = 1i; break;
      case GateKind::Sdg: m[0][0] = 1; m[0][1] = 0; m[1][0] = 0; m[1][1] = -1i; break;
      case GateKind::Rx: {
        double t = g.params[0] / 2;
        m[0][0] = std::cos(t); m[0][1] = -1i * std::sin(t);
        m[1][0] = -1i * std::sin(t); m[1][1] = std::cos(t);
        break;
      }
      case GateKind::Ry: {
        double t = g.params[0] / 2;
        m[0][0] = std::cos(t); m[0][1] = -std::sin(t);
        m[1][0] = std::sin(t); m[1][1] = std::cos(t);
        break;
      }
      case GateKind::Rz: {
        double t = g.params[0] / 2;
        m[0][0] = std::exp(-1i * t); m[0][1] = 0;
        m[1][0] = 0; m[1][1] = std::exp(1i * t);
        break;
      }
      case GateKind::Cx: {
        std::complex<double> cm[4][4] = {};
        // basis order |t c>: index bit qa=control? apply_2q uses (qa, qb) with
        // qa as bit 0 of the local index; pass (control, target).
        cm[0][0] = 1; cm[1][3] = 1; cm[2][2] = 1; cm[3][1] = 1;
        apply_2q(g.qubits[0], g.qubits[1], cm);
        return;
      }
      case GateKind::Rxx: {
        double t = g.params[0] / 2;
        std::complex<double> c = std::cos(t), s = -1i * std::sin(t);
        std::complex<double> cm[4][4] = {};
        cm[0][0] = c; cm[0][3] = s;
        cm[1][1] = c; cm[1][2] = s;
        cm[2][1] = s; cm[2][2] = c;
        cm[3][0] = s; cm[3][3] = c;
        apply_2q(g.qubits[0], g.qubits[1], cm);
        return;
      }
    }
    apply_1q(g.qubits[0], m);
  }

  void apply_pauli(int q, int which) {  // 1=X, 2=Y, 3=Z
    Gate g{which == 1 ? GateKind::X : which == 2 ? GateKind::Y : GateKind::Z,
           {},
           {q}};
    apply_gate(g);
  }

  std::vector<double> probabilities() const {
    std::vector<double> p(amp_.size());
    for (std::size_t i = 0; i < amp_.size(); ++i) p[i] = std::norm(amp_[i]);
    return p;
  }

 private:
  int n_;
  std::vector<std::complex<double>> amp_;
};

inline std::string outcome_bits(std::size_t state_index,
                                const std::vector<std::pair<int, int>>& meas,
                                int n_clbits) {
  std::string bits(std::size_t(n_clbits), '0');
  for (auto [q, c] : meas)
    if ((state_index >> q) & 1) bits[std::size_t(c)] = '1';
  return bits;
}

/// Exact outcome distribution of a measurement-final circuit (noiseless).
inline std::map<std::string, double> exact_distribution(const Circuit& c) {
  Statevector sv(c.n_qubits);
  for (const auto& g : c.gates) sv.apply_gate(g);
  auto probs = sv.probabilities();
  std::map<std::string, double> dist;
  for (std::size_t i = 0; i < probs.size(); ++i)
    if (probs[i] > 0) dist[outcome_bits(i, c.measurements, c.n_clbits)] += probs[i];
  return dist;
}

/// <psi(c)|H|psi(c)> by dense linear algebra; circuit must be measurement-free.
inline double exact_expectation(const Circuit& c, const PauliHamiltonian& h) {
  if (!c.measurements.empty())
    throw std::invalid_argument("exact_expectation requires a measurement-free circuit");
  if (c.n_qubits != h.n_qubits) throw std::invalid_argument("dimension mismatch");
  Statevector sv(c.n_qubits);
  for (const auto& g : c.gates) sv.apply_gate(g);
  const auto& psi = sv.amplitudes();
  double energy = h.identity_offset;
  for (const auto& t : h.terms) {
    std::complex<double> acc = 0;
    for (std::size_t i = 0; i < psi.size(); ++i) {
      // P|i> = amp * |i ^ x_mask>
      std::size_t j = i ^ t.string.x;
      std::complex<double> amp = 1.0;
      for (int q = 0; q < c.n_qubits; ++q) {
        char p = t.string.at(q);
        bool bit = (i >> q) & 1;
        if (p == 'Y')
          amp *= bit ? std::complex<double>(0, -1) : std::complex<double>(0, 1);
        else if (p == 'Z' && bit)
          amp = -amp;
      }
      acc += std::conj(psi[j]) * amp * psi[i];
    }
    energy += t.coeff * acc.real();
  }
  return energy;
}

/// Executes a measurement-final circuit. Noise is applied as stochastic Pauli
/// errors after each gate (trajectory method) plus readout bit flips.
inline Histogram run_circuit(const Circuit& c, std::uint64_t shots,
                             const std::optional<NoiseModel>& noise,
                             std::uint64_t seed) {
  if (shots < 1) throw std::invalid_argument("shots must be >= 1");
  if (c.n_qubits > kMaxSimQubits) throw std::invalid_argument("too many qubits");
  if (c.measurements.empty())
    throw std::invalid_argument("circuit has no measurements");
  Histogram h;
  h.shots = shots;
  Rng rng(seed);

  if (!noise) {
    Statevector sv(c.n_qubits);
    for (const auto& g : c.gates) sv.apply_gate(g);
    auto probs = sv.probabilities();
    std::vector<double> cdf(probs.size());
    double acc = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      acc += probs[i];
      cdf[i] = acc;
    }
    for (std::uint64_t s = 0; s < shots; ++s) {
      double u = rng.next_double() * acc;
      std::size_t idx = std::size_t(
          std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
      if (idx >= probs.size()) idx = probs.size() - 1;
      ++h.counts[outcome_bits(idx, c.measurements, c.n_clbits)];
    }
    return h;
  }

  noise->validate();
  for (std::uint64_t s = 0; s < shots; ++s) {
    Statevector sv(c.n_qubits);
    for (const auto& g : c.gates) {
      sv.apply_gate(g);
      if (gate_arity(g.kind) == 1) {
        if (rng.next_double() < noise->p1)
          sv.apply_pauli(g.qubits[0], 1 + int(rng.next_below(3)));
      } else {
        if (rng.next_double() < noise->p2) {
          // uniform over the 15 non-identity two-qubit Paulis
          int e = 1 + int(rng.next_below(15));
          int pa = e & 3, pb = (e >> 2) & 3;
          if (pa) sv.apply_pauli(g.qubits[0], pa);
          if (pb) sv.apply_pauli(g.qubits[1], pb);
        }
      }
    }
    auto probs = sv.probabilities();
    double u = rng.next_double();
    std::size_t idx = 0;
    double acc = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      acc += probs[i];
      if (u < acc) {
        idx = i;
        break;
      }
      idx = i;
    }
    std::string bits = outcome_bits(idx, c.measurements, c.n_clbits);
    for (auto& b : bits)
      if (rng.next_double() < noise->p_spam) b = (b == '0') ? '1' : '0';
    ++h.counts[bits];
  }
  return h;
}

}  // namespace cafqa
