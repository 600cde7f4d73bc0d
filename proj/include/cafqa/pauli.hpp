#pragma once
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace cafqa {

struct ParseError : std::runtime_error {
  ParseError(const std::string& msg, int line, int col = -1)
      : std::runtime_error(col >= 0 ? "line " + std::to_string(line) + ", col " +
                                          std::to_string(col) + ": " + msg
                                    : "line " + std::to_string(line) + ": " + msg),
        line(line),
        col(col) {}
  int line;
  int col;
};

/// Tensor product of single-qubit Paulis, stored as x/z bitmasks
/// (bit q set in x and z -> Y on qubit q; identity iff both masks zero).
struct PauliString {
  std::uint64_t x = 0;
  std::uint64_t z = 0;
  int n = 0;

  bool is_identity() const { return x == 0 && z == 0; }

  char at(int q) const {
    bool bx = (x >> q) & 1, bz = (z >> q) & 1;
    if (bx && bz) return 'Y';
    if (bx) return 'X';
    if (bz) return 'Z';
    return 'I';
  }

  void set(int q, char p) {
    std::uint64_t bit = std::uint64_t(1) << q;
    x &= ~bit;
    z &= ~bit;
    switch (p) {
      case 'I': break;
      case 'X': x |= bit; break;
      case 'Y': x |= bit; z |= bit; break;
      case 'Z': z |= bit; break;
      default: throw std::invalid_argument("bad Pauli letter");
    }
  }

  std::string str() const {
    std::string s(n, 'I');
    for (int q = 0; q < n; ++q) s[q] = at(q);
    return s;
  }

  static PauliString from_str(const std::string& s) {
    if (s.size() > 64) throw std::invalid_argument("Pauli string too long");
    PauliString p;
    p.n = int(s.size());
    for (int q = 0; q < p.n; ++q) p.set(q, s[q]);
    return p;
  }

  bool commutes_with(const PauliString& o) const {
    auto parity = [](std::uint64_t v) { return __builtin_popcountll(v) & 1; };
    return (parity(x & o.z) ^ parity(z & o.x)) == 0;
  }

  bool operator==(const PauliString& o) const = default;
  bool operator<(const PauliString& o) const { return str() < o.str(); }
};

/// Observable H = identity_offset + sum_k coeff_k * P_k, coefficients in Hartree.
struct PauliHamiltonian {
  struct Term {
    double coeff;
    PauliString string;
  };

  int n_qubits = 0;
  std::vector<Term> terms;
  double identity_offset = 0.0;

  /// Sorts terms lexicographically and drops near-zero coefficients.
  void normalize() {
    std::map<std::string, double> merged;
    for (const auto& t : terms) merged[t.string.str()] += t.coeff;
    terms.clear();
    for (const auto& [s, c] : merged)
      terms.push_back({c, PauliString::from_str(s)});
  }
};

/// Per-qubit measurement setting plus the Hamiltonian term indices it covers.
struct MeasurementGroup {
  std::string basis;                // per-qubit label in {X,Y,Z}
  std::vector<std::size_t> members; // indices into PauliHamiltonian::terms
};

// --- Hamiltonian file format ---
// line 1: n_qubits; then "<coefficient> <pauli-string>" per line.
// '#' lines and blank lines are skipped. The all-I string feeds the offset.
inline PauliHamiltonian parse_hamiltonian(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  int n_qubits = -1;
  PauliHamiltonian h;
  std::map<std::pair<std::uint64_t, std::uint64_t>, double> merged;

  while (std::getline(in, line)) {
    ++lineno;
    std::size_t first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    if (n_qubits < 0) {
      if (!(ls >> n_qubits) || n_qubits < 1)
        throw ParseError("expected positive qubit count", lineno);
      std::string extra;
      if (ls >> extra) throw ParseError("trailing tokens after qubit count", lineno);
      if (n_qubits > 64) throw ParseError("qubit count exceeds 64", lineno);
      h.n_qubits = n_qubits;
      continue;
    }
    double coeff;
    std::string pstr;
    if (!(ls >> coeff >> pstr))
      throw ParseError("expected '<coefficient> <pauli-string>'", lineno);
    std::string extra;
    if (ls >> extra) throw ParseError("trailing tokens", lineno);
    if (!std::isfinite(coeff)) throw ParseError("non-finite coefficient", lineno);
    if (int(pstr.size()) != n_qubits)
      throw ParseError("string length " + std::to_string(pstr.size()) +
                           " != declared " + std::to_string(n_qubits),
                       lineno);
    PauliString p;
    try {
      p = PauliString::from_str(pstr);
    } catch (const std::exception&) {
      throw ParseError("invalid Pauli letter in '" + pstr + "'", lineno);
    }
    if (p.is_identity())
      h.identity_offset += coeff;
    else
      merged[{p.x, p.z}] += coeff;
  }
  if (n_qubits < 0) throw ParseError("empty Hamiltonian file", lineno);
  for (const auto& [key, c] : merged) {
    PauliString p;
    p.x = key.first;
    p.z = key.second;
    p.n = n_qubits;
    h.terms.push_back({c, p});
  }
  h.normalize();
  return h;
}

inline std::string serialize_hamiltonian(const PauliHamiltonian& h) {
  std::ostringstream out;
  out << h.n_qubits << "\n";
  char buf[64];
  if (h.identity_offset != 0.0) {
    std::snprintf(buf, sizeof buf, "%.17g", h.identity_offset);
    out << buf << " " << std::string(std::size_t(h.n_qubits), 'I') << "\n";
  }
  for (const auto& t : h.terms) {
    std::snprintf(buf, sizeof buf, "%.17g", t.coeff);
    out << buf << " " << t.string.str() << "\n";
  }
  return out.str();
}

/// Greedy first-fit grouping over terms sorted by descending |coefficient|
/// (ties by lexicographic string). Deterministic; partitions non-identity terms.
inline std::vector<MeasurementGroup> group_qubitwise_commuting(
    const PauliHamiltonian& h) {
  std::vector<std::size_t> order(h.terms.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    double ca = std::fabs(h.terms[a].coeff), cb = std::fabs(h.terms[b].coeff);
    if (ca != cb) return ca > cb;
    return h.terms[a].string.str() < h.terms[b].string.str();
  });

  std::vector<MeasurementGroup> groups;
  for (std::size_t idx : order) {
    const PauliString& p = h.terms[idx].string;
    if (p.is_identity()) continue;
    bool placed = false;
    for (auto& g : groups) {
      bool fits = true;
      for (int q = 0; q < h.n_qubits && fits; ++q) {
        char tp = p.at(q);
        if (tp == 'I') continue;
        char bp = g.basis[std::size_t(q)];
        if (bp != 'I' && bp != tp) fits = false;
      }
      if (fits) {
        for (int q = 0; q < h.n_qubits; ++q)
          if (p.at(q) != 'I') g.basis[std::size_t(q)] = p.at(q);
        g.members.push_back(idx);
        placed = true;
        break;
      }
    }
    if (!placed) {
      MeasurementGroup g;
      g.basis = std::string(std::size_t(h.n_qubits), 'I');
      for (int q = 0; q < h.n_qubits; ++q) g.basis[std::size_t(q)] = p.at(q);
      g.members.push_back(idx);
      groups.push_back(std::move(g));
    }
  }
  // Unconstrained positions default to Z measurement.
  for (auto& g : groups)
    for (auto& c : g.basis)
      if (c == 'I') c = 'Z';
  return groups;
}

/// Estimates <H> from per-group bitstring histograms. Bitstring position q is
/// the readout of qubit q (driver maps qubit i -> clbit i).
template <typename CountT>
double energy_from_counts(
    const PauliHamiltonian& h, const std::vector<MeasurementGroup>& groups,
    const std::vector<std::map<std::string, CountT>>& histograms) {
  if (histograms.size() != groups.size())
    throw std::invalid_argument("one histogram per group required");
  double energy = h.identity_offset;
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const auto& hist = histograms[gi];
    double total = 0;
    for (const auto& [bits, c] : hist) {
      if (int(bits.size()) != h.n_qubits)
        throw std::invalid_argument("bitstring length mismatch");
      if (double(c) < 0) throw std::invalid_argument("negative count");
      total += double(c);
    }
    if (total <= 0)
      throw std::invalid_argument("empty histogram for group " + std::to_string(gi));
    for (std::size_t idx : groups[gi].members) {
      const PauliString& p = h.terms[idx].string;
      double expect = 0;
      for (const auto& [bits, c] : hist) {
        int parity = 0;
        for (int q = 0; q < h.n_qubits; ++q)
          if (p.at(q) != 'I' && bits[std::size_t(q)] == '1') parity ^= 1;
        expect += (parity ? -1.0 : 1.0) * double(c);
      }
      energy += h.terms[idx].coeff * expect / total;
    }
  }
  return energy;
}

}  // namespace cafqa
