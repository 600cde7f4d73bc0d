#include <doctest.h>

#include <complex>
#include <numbers>

#include "cafqa/stabilizer.hpp"
#include "cafqa/statevector.hpp"
#include "test_util.hpp"

using namespace cafqa;

TEST_CASE("zero state stabilizers") {
  StabilizerTableau t(1);
  CHECK(t.expect_pauli(PauliString::from_str("Z")) == 1);
  CHECK(t.expect_pauli(PauliString::from_str("X")) == 0);
  StabilizerTableau t3(3);
  CHECK(t3.expect_pauli(PauliString::from_str("ZII")) == 1);
  CHECK(t3.expect_pauli(PauliString::from_str("IZI")) == 1);
  CHECK(t3.expect_pauli(PauliString::from_str("IIZ")) == 1);
  CHECK_THROWS(StabilizerTableau(0));
}

TEST_CASE("H makes |+>") {
  StabilizerTableau t(1);
  t.apply_h(0);
  CHECK(t.expect_pauli(PauliString::from_str("X")) == 1);
  CHECK(t.expect_pauli(PauliString::from_str("Z")) == 0);
}

TEST_CASE("Bell state expectations") {
  StabilizerTableau t(2);
  t.apply_h(0);
  t.apply_cnot(0, 1);
  CHECK(t.expect_pauli(PauliString::from_str("XX")) == 1);
  CHECK(t.expect_pauli(PauliString::from_str("ZZ")) == 1);
  CHECK(t.expect_pauli(PauliString::from_str("YY")) == -1);
  CHECK(t.expect_pauli(PauliString::from_str("ZI")) == 0);
}

TEST_CASE("Ry(pi/2) rotates |0> to |+>") {
  StabilizerTableau t(1);
  t.apply_gate({GateKind::Ry, {std::numbers::pi / 2}, {0}});
  CHECK(t.expect_pauli(PauliString::from_str("X")) == 1);
  CHECK(t.expect_pauli(PauliString::from_str("Z")) == 0);
}

TEST_CASE("non-Clifford angle is rejected") {
  StabilizerTableau t(1);
  CHECK_THROWS_AS(t.apply_gate({GateKind::Ry, {0.3}, {0}}), std::domain_error);
}

TEST_CASE("quarter-turn decompositions match the matrix oracle") {
  // Every rotation gate at every quarter turn, on random states.
  Rng rng(99);
  for (int trial = 0; trial < 60; ++trial) {
    int n = 1 + int(rng.next_below(3));
    Circuit prefix = testutil::random_clifford_circuit(rng, n, 12);
    GateKind axes[3] = {GateKind::Rx, GateKind::Ry, GateKind::Rz};
    GateKind k = axes[rng.next_below(3)];
    int turns = int(rng.next_below(4));
    int q = int(rng.next_below(std::uint64_t(n)));
    Circuit full = prefix;
    full.add(k, {q}, {turns * (std::numbers::pi / 2)});

    StabilizerTableau t(n);
    for (const auto& g : full.gates) t.apply_gate(g);
    for (int rep = 0; rep < 4; ++rep) {
      PauliString p = testutil::random_pauli(rng, n);
      double oracle = testutil::statevector_pauli_expect(full, p);
      CHECK(double(t.expect_pauli(p)) == doctest::Approx(oracle).epsilon(1e-9));
    }
  }
}

TEST_CASE("clifford_energy examples") {
  SUBCASE("|00> with local Z terms") {
    auto h = parse_hamiltonian("2\n-1 ZI\n-1 IZ\n");
    Circuit c;
    c.n_qubits = 2;
    CHECK(clifford_energy(c, h) == doctest::Approx(-2.0));
  }
  SUBCASE("Bell with XX+ZZ+YY") {
    auto h = parse_hamiltonian("2\n1 XX\n1 ZZ\n1 YY\n");
    Circuit c;
    c.n_qubits = 2;
    c.add(GateKind::H, {0});
    c.add(GateKind::Cx, {0, 1});
    CHECK(clifford_energy(c, h) == doctest::Approx(1.0));
  }
  SUBCASE("|0> with X observable") {
    auto h = parse_hamiltonian("1\n0.7 X\n");
    Circuit c;
    c.n_qubits = 1;
    CHECK(clifford_energy(c, h) == doctest::Approx(0.0));
  }
}

TEST_CASE("tableau invariants hold after every gate") {
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    int n = 2 + int(rng.next_below(3));
    StabilizerTableau t(n);
    Circuit c = testutil::random_clifford_circuit(rng, n, 25);
    for (const auto& g : c.gates) {
      t.apply_gate(g);
      CHECK(t.check_invariants());
    }
  }
}

TEST_CASE("gate followed by inverse restores expectations") {
  Rng rng(31);
  for (int trial = 0; trial < 40; ++trial) {
    int n = 2 + int(rng.next_below(2));
    Circuit prefix = testutil::random_clifford_circuit(rng, n, 10);
    StabilizerTableau t(n);
    for (const auto& g : prefix.gates) t.apply_gate(g);
    std::vector<PauliString> probes;
    std::vector<int> before;
    for (int i = 0; i < 6; ++i) {
      probes.push_back(testutil::random_pauli(rng, n));
      before.push_back(t.expect_pauli(probes.back()));
    }
    int q = int(rng.next_below(std::uint64_t(n)));
    switch (rng.next_below(5)) {
      case 0: t.apply_h(q); t.apply_h(q); break;
      case 1: t.apply_s(q); t.apply_sdg(q); break;
      case 2: t.apply_x(q); t.apply_x(q); break;
      case 3: {
        int k = 1 + int(rng.next_below(3));
        t.apply_ry(q, k);
        t.apply_ry(q, 4 - k);
        break;
      }
      default: {
        int u = int(rng.next_below(std::uint64_t(n - 1)));
        if (u >= q) ++u;
        t.apply_cnot(q, u);
        t.apply_cnot(q, u);
        break;
      }
    }
    for (std::size_t i = 0; i < probes.size(); ++i)
      CHECK(t.expect_pauli(probes[i]) == before[i]);
  }
}

TEST_CASE("operation-count scaling") {
  // gate application is O(n) row operations; expect_pauli O(n^3) worst case
  for (int n : {4, 8, 16}) {
    StabilizerTableau t(n);
    std::uint64_t before = t.row_ops();
    t.apply_h(0);
    std::uint64_t per_gate = t.row_ops() - before;
    CHECK(per_gate <= std::uint64_t(4 * n));
    PauliString all_z;
    all_z.n = n;
    for (int q = 0; q < n; ++q) all_z.set(q, 'Z');
    before = t.row_ops();
    t.expect_pauli(all_z);
    CHECK(t.row_ops() - before <= std::uint64_t(n) * std::uint64_t(n) *
                                      std::uint64_t(n));
  }
}

TEST_CASE("length mismatch rejected") {
  StabilizerTableau t(2);
  CHECK_THROWS(t.expect_pauli(PauliString::from_str("Z")));
}
