#pragma once
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "cafqa/ansatz.hpp"
#include "cafqa/rng.hpp"

namespace cafqa {

/// Three-phase SPSA protocol: learning-rate calibration from perturbed pairs,
/// perturbed-pair iterations, last-60-points finalization.
struct SpsaConfig {
  int calibration_pairs = 25;
  int run_budget = 400;          // iterations, two evaluations each
  double c0 = 0.1;               // perturbation magnitude, radians
  double alpha = 0.602;          // learning-rate decay exponent
  double gamma = 0.101;          // perturbation decay exponent
  double target_first_step = 0.1;
  std::uint64_t seed = 0;

  void validate() const {
    if (calibration_pairs < 1 || run_budget < 30 || c0 <= 0 || alpha <= 0 ||
        gamma <= 0 || target_first_step <= 0)
      throw std::invalid_argument("invalid SPSA configuration");
  }
};

struct SpsaTrace {
  struct Eval {
    std::uint64_t index;            // 1-based evaluation counter
    std::vector<double> theta;
    double energy;
  };
  std::vector<Eval> evaluations;
  std::vector<std::pair<std::vector<double>, std::vector<double>>> iterate_pairs;
  ParamPoint final_point;
  double learning_rate = 0;        // calibrated a0
  bool aborted = false;
};

using EnergyFn = std::function<double(const std::vector<double>&)>;

namespace detail {

inline std::vector<int> rademacher_vector(Rng& rng, std::size_t k) {
  std::vector<int> d(k);
  for (auto& v : d) v = rng.rademacher();
  return d;
}

}  // namespace detail

/// Estimates the learning rate from 2*calibration_pairs evaluations around
/// `init`: a0 = target_first_step * c0 / mean(|E+ - E-| / 2). A zero mean
/// difference falls back to a0 = target_first_step.
inline double spsa_calibrate(const ParamPoint& init, const EnergyFn& evaluate,
                             const SpsaConfig& cfg, SpsaTrace* trace = nullptr) {
  cfg.validate();
  std::size_t k = init.size();
  Rng rng(derive_seed(cfg.seed, 0x5ca11b));
  double sum = 0;
  std::uint64_t base = trace ? trace->evaluations.size() : 0;
  for (int p = 0; p < cfg.calibration_pairs; ++p) {
    auto delta = detail::rademacher_vector(rng, k);
    std::vector<double> plus(init.values), minus(init.values);
    for (std::size_t i = 0; i < k; ++i) {
      plus[i] += cfg.c0 * delta[i];
      minus[i] -= cfg.c0 * delta[i];
    }
    double ep = evaluate(plus);
    if (trace) trace->evaluations.push_back({base + 2 * std::uint64_t(p) + 1, plus, ep});
    double em = evaluate(minus);
    if (trace) trace->evaluations.push_back({base + 2 * std::uint64_t(p) + 2, minus, em});
    sum += std::fabs(ep - em) / 2.0;
  }
  double mean = sum / cfg.calibration_pairs;
  double a0 = mean > 0 ? cfg.target_first_step * cfg.c0 / mean : cfg.target_first_step;
  if (trace) trace->learning_rate = a0;
  return a0;
}

/// Eq.-style finalization: mean of the last 30 iterations' perturbed pairs
/// (60 vectors total).
inline ParamPoint spsa_finalize(const SpsaTrace& trace) {
  constexpr std::size_t kWindow = 30;
  if (trace.iterate_pairs.size() < kWindow)
    throw std::invalid_argument("finalization needs >= 30 completed iterations");
  std::size_t k = trace.iterate_pairs.back().first.size();
  std::vector<double> mean(k, 0.0);
  std::size_t start = trace.iterate_pairs.size() - kWindow;
  for (std::size_t j = start; j < trace.iterate_pairs.size(); ++j) {
    for (std::size_t i = 0; i < k; ++i) {
      mean[i] += trace.iterate_pairs[j].first[i];
      mean[i] += trace.iterate_pairs[j].second[i];
    }
  }
  for (auto& v : mean) v /= double(2 * kWindow);
  return ParamPoint{std::move(mean)};
}

struct SpsaAborted : std::runtime_error {
  SpsaAborted(SpsaTrace t, const std::string& why)
      : std::runtime_error("SPSA aborted by evaluator failure: " + why),
        partial_trace(std::move(t)) {}
  SpsaTrace partial_trace;
};

/// Full run: calibration followed by run_budget iterations. Consumes exactly
/// 2*calibration_pairs + 2*run_budget evaluations. An evaluator exception
/// aborts with the partial trace preserved.
inline SpsaTrace spsa_run(const ParamPoint& init, const EnergyFn& evaluate,
                          const SpsaConfig& cfg) {
  cfg.validate();
  std::size_t k = init.size();
  if (k == 0) throw std::invalid_argument("empty parameter vector");
  SpsaTrace trace;
  try {
    double a0 = spsa_calibrate(init, evaluate, cfg, &trace);
    Rng rng(derive_seed(cfg.seed, 0x17e2a7e));
    double big_a = 0.1 * cfg.run_budget;
    std::vector<double> theta = init.values;
    std::uint64_t eval_idx = trace.evaluations.size();
    for (int j = 0; j < cfg.run_budget; ++j) {
      auto delta = detail::rademacher_vector(rng, k);
      double cj = cfg.c0 / std::pow(j + 1, cfg.gamma);
      double aj = a0 / std::pow(j + 1 + big_a, cfg.alpha);
      std::vector<double> plus(theta), minus(theta);
      for (std::size_t i = 0; i < k; ++i) {
        plus[i] += cj * delta[i];
        minus[i] -= cj * delta[i];
      }
      double ep = evaluate(plus);
      trace.evaluations.push_back({++eval_idx, plus, ep});
      double em = evaluate(minus);
      trace.evaluations.push_back({++eval_idx, minus, em});
      trace.iterate_pairs.emplace_back(plus, minus);
      double g = (ep - em) / (2 * cj);
      for (std::size_t i = 0; i < k; ++i) theta[i] -= aj * g * delta[i];
    }
  } catch (const std::exception& e) {
    trace.aborted = true;
    throw SpsaAborted(std::move(trace), e.what());
  }
  trace.final_point = spsa_finalize(trace);
  return trace;
}

}  // namespace cafqa
