#pragma once
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "cafqa/ansatz.hpp"
#include "cafqa/pauli.hpp"
#include "cafqa/rng.hpp"
#include "cafqa/stabilizer.hpp"

namespace cafqa {

enum class SearchStrategy { Exhaustive, MultistartHillclimb, Random };

inline SearchStrategy strategy_from_name(const std::string& s) {
  if (s == "exhaustive") return SearchStrategy::Exhaustive;
  if (s == "multistart_hillclimb") return SearchStrategy::MultistartHillclimb;
  if (s == "random") return SearchStrategy::Random;
  throw std::invalid_argument("unknown search strategy '" + s + "'");
}

inline const char* strategy_name(SearchStrategy s) {
  switch (s) {
    case SearchStrategy::Exhaustive: return "exhaustive";
    case SearchStrategy::MultistartHillclimb: return "multistart_hillclimb";
    case SearchStrategy::Random: return "random";
  }
  return "?";
}

struct SearchBudget {
  std::uint64_t max_evaluations = 1000;
  std::uint64_t seed = 0;
  SearchStrategy strategy = SearchStrategy::MultistartHillclimb;
};

struct SearchResult {
  std::vector<int> best_point;
  double best_energy = 0;
  std::uint64_t evaluations_used = 0;
  std::vector<std::pair<std::uint64_t, double>> trace;  // (eval index, best-so-far)
};

namespace detail {

class GridEvaluator {
 public:
  GridEvaluator(const AnsatzSpec& spec, const PauliHamiltonian& h,
                std::uint64_t max_evals)
      : spec_(spec), h_(h), max_evals_(max_evals) {}

  bool exhausted() const { return used_ >= max_evals_; }
  std::uint64_t used() const { return used_; }

  double evaluate(const std::vector<int>& idx) {
    if (exhausted()) throw std::logic_error("budget exhausted");
    ++used_;
    Circuit c = build_circuit(spec_, grid_to_point(idx));
    double e = clifford_energy(c, h_);
    consider(idx, e);
    return e;
  }

  void consider(const std::vector<int>& idx, double e) {
    // ties resolved by lexicographically smallest index vector
    if (!has_best_ || e < best_.best_energy ||
        (e == best_.best_energy && idx < best_.best_point)) {
      bool improved = !has_best_ || e < best_.best_energy;
      best_.best_point = idx;
      best_.best_energy = e;
      has_best_ = true;
      if (improved) best_.trace.emplace_back(used_, e);
    }
  }

  SearchResult finish() {
    best_.evaluations_used = used_;
    return best_;
  }

 private:
  const AnsatzSpec& spec_;
  const PauliHamiltonian& h_;
  std::uint64_t max_evals_;
  std::uint64_t used_ = 0;
  SearchResult best_;
  bool has_best_ = false;
};

}  // namespace detail

/// Discrete search over the Clifford grid {0,1,2,3}^k minimizing the exact
/// stabilizer energy. The HF point is always evaluated first, so the result
/// never exceeds the HF energy. Deterministic for a fixed seed.
inline SearchResult cafqa_search(const AnsatzSpec& spec, const PauliHamiltonian& h,
                                 const SearchBudget& budget) {
  spec.validate();
  if (spec.n_qubits != h.n_qubits) throw std::invalid_argument("dimension mismatch");
  int k = spec.param_count();
  if (k < 1) throw std::invalid_argument("ansatz has no parameters");
  if (budget.max_evaluations < 1)
    throw std::invalid_argument("max_evaluations must be >= 1");

  detail::GridEvaluator eval(spec, h, budget.max_evaluations);
  std::vector<int> hf(std::size_t(k), 0);
  eval.evaluate(hf);

  Rng rng(budget.seed);
  auto random_point = [&] {
    std::vector<int> idx(std::size_t(k), 0);
    for (auto& v : idx) v = int(rng.next_below(4));
    return idx;
  };

  switch (budget.strategy) {
    case SearchStrategy::Exhaustive: {
      std::vector<int> idx(std::size_t(k), 0);
      while (!eval.exhausted()) {
        // next point in lexicographic order (HF = all zeros already done)
        int pos = k - 1;
        while (pos >= 0 && idx[std::size_t(pos)] == 3) idx[std::size_t(pos--)] = 0;
        if (pos < 0) break;  // full grid enumerated
        ++idx[std::size_t(pos)];
        eval.evaluate(idx);
      }
      break;
    }
    case SearchStrategy::Random: {
      while (!eval.exhausted()) eval.evaluate(random_point());
      break;
    }
    case SearchStrategy::MultistartHillclimb: {
      bool first_restart = true;
      while (!eval.exhausted()) {
        std::vector<int> cur = first_restart ? hf : random_point();
        double cur_e;
        if (first_restart) {
          // HF already evaluated as the forced first point
          Circuit c = build_circuit(spec, grid_to_point(cur));
          cur_e = clifford_energy(c, h);
          first_restart = false;
        } else {
          if (eval.exhausted()) break;
          cur_e = eval.evaluate(cur);
        }
        // steepest descent over single-coordinate +-1 neighbors
        bool moved = true;
        while (moved && !eval.exhausted()) {
          moved = false;
          std::vector<int> best_nb;
          double best_e = cur_e;
          for (int i = 0; i < k && !eval.exhausted(); ++i) {
            for (int d : {1, 3}) {
              if (eval.exhausted()) break;
              std::vector<int> nb = cur;
              nb[std::size_t(i)] = (nb[std::size_t(i)] + d) % 4;
              double e = eval.evaluate(nb);
              if (e < best_e || (e == best_e && best_e < cur_e && nb < best_nb)) {
                best_e = e;
                best_nb = nb;
              }
            }
          }
          if (best_e < cur_e) {
            cur = best_nb;
            cur_e = best_e;
            moved = true;
          }
        }
      }
      break;
    }
  }
  return eval.finish();
}

/// Hands the search outcome to the continuous optimizer: index i -> i * pi/2.
inline ParamPoint to_vqe_init(const SearchResult& r) {
  return grid_to_point(r.best_point);
}

}  // namespace cafqa
