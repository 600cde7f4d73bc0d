#pragma once
#include <chrono>
#include <ctime>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cafqa/ansatz.hpp"
#include "cafqa/broker.hpp"
#include "cafqa/cafqa_search.hpp"
#include "cafqa/kv.hpp"
#include "cafqa/pauli.hpp"
#include "cafqa/qasm.hpp"
#include "cafqa/spsa.hpp"
#include "cafqa/statevector.hpp"
#include "cafqa/transpile.hpp"

namespace cafqa {

struct BrokerError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Run configuration (flat key-value file, same parser as the broker files)
// ---------------------------------------------------------------------------

enum class InitMode { Hf, Cafqa, Explicit };

struct RunConfig {
  std::string hamiltonian_path;
  AnsatzSpec ansatz;
  InitMode init = InitMode::Cafqa;
  std::vector<double> explicit_init;
  SearchBudget cafqa;
  SpsaConfig spsa;
  std::string backend = "sim";  // sim | sim-noisy | sim-uniform | broker:<dir>
  NoiseModel noise;             // used by sim-noisy
  std::uint64_t shots = 300;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  std::string run_id = "run";
  bool attach_expected = true;  // include expected_distribution in job files
  int broker_poll_ms = 200;
  int broker_timeout_s = 3600;

  void validate() const {
    ansatz.validate();
    spsa.validate();
    if (shots < 1) throw std::invalid_argument("shots must be >= 1");
  }
};

inline std::vector<Axis> parse_axes(const std::string& s) {
  std::vector<Axis> axes;
  std::istringstream in(s);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    if (tok == "rx") axes.push_back(Axis::Rx);
    else if (tok == "ry") axes.push_back(Axis::Ry);
    else if (tok == "rz") axes.push_back(Axis::Rz);
    else throw std::invalid_argument("unknown rotation axis '" + tok + "'");
  }
  if (axes.empty()) throw std::invalid_argument("empty rotation axis list");
  return axes;
}

inline std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> out;
  std::istringstream in(s);
  std::string tok;
  while (std::getline(in, tok, ',')) out.push_back(std::stod(tok));
  return out;
}

inline std::vector<std::pair<int, int>> parse_pairs(const std::string& s) {
  // "0-1,1-2"
  std::vector<std::pair<int, int>> out;
  std::istringstream in(s);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    std::size_t dash = tok.find('-');
    if (dash == std::string::npos)
      throw std::invalid_argument("entangler pair must look like '0-1'");
    out.emplace_back(std::stoi(tok.substr(0, dash)), std::stoi(tok.substr(dash + 1)));
  }
  return out;
}

inline RunConfig parse_run_config(const KvDoc& doc) {
  RunConfig c;
  c.hamiltonian_path = doc.get("hamiltonian");
  c.ansatz.n_qubits = int(doc.get_int("ansatz.n_qubits"));
  if (doc.has("ansatz.n_occupied"))
    c.ansatz.n_occupied = int(doc.get_int("ansatz.n_occupied"));
  c.ansatz.n_layers =
      doc.has("ansatz.n_layers") ? int(doc.get_int("ansatz.n_layers")) : 2;
  if (doc.has("ansatz.axes")) c.ansatz.rotation_axes = parse_axes(doc.get("ansatz.axes"));
  if (doc.has("ansatz.entangler"))
    c.ansatz.entangler = parse_pairs(doc.get("ansatz.entangler"));
  if (doc.has("ansatz.final_rotation_layer"))
    c.ansatz.final_rotation_layer = doc.get("ansatz.final_rotation_layer") == "true";

  std::string init = doc.get_or("init", "cafqa");
  if (init == "hf") c.init = InitMode::Hf;
  else if (init == "cafqa") c.init = InitMode::Cafqa;
  else if (init.rfind("explicit:", 0) == 0) {
    c.init = InitMode::Explicit;
    c.explicit_init = parse_double_list(init.substr(9));
  } else {
    throw std::invalid_argument("init must be hf, cafqa or explicit:<values>");
  }

  if (doc.has("cafqa.max_evaluations"))
    c.cafqa.max_evaluations = std::uint64_t(doc.get_int("cafqa.max_evaluations"));
  if (doc.has("cafqa.strategy"))
    c.cafqa.strategy = strategy_from_name(doc.get("cafqa.strategy"));

  if (doc.has("spsa.calibration_pairs"))
    c.spsa.calibration_pairs = int(doc.get_int("spsa.calibration_pairs"));
  if (doc.has("spsa.run_budget"))
    c.spsa.run_budget = int(doc.get_int("spsa.run_budget"));
  if (doc.has("spsa.c0")) c.spsa.c0 = doc.get_double("spsa.c0");
  if (doc.has("spsa.alpha")) c.spsa.alpha = doc.get_double("spsa.alpha");
  if (doc.has("spsa.gamma")) c.spsa.gamma = doc.get_double("spsa.gamma");
  if (doc.has("spsa.target_first_step"))
    c.spsa.target_first_step = doc.get_double("spsa.target_first_step");

  c.backend = doc.get_or("backend", "sim");
  if (doc.has("noise.p1")) c.noise.p1 = doc.get_double("noise.p1");
  if (doc.has("noise.p2")) c.noise.p2 = doc.get_double("noise.p2");
  if (doc.has("noise.p_spam")) c.noise.p_spam = doc.get_double("noise.p_spam");
  if (doc.has("shots")) c.shots = std::uint64_t(doc.get_int("shots"));
  c.out_dir = doc.get_or("out", ".");
  if (doc.has("seed")) c.seed = std::uint64_t(doc.get_int("seed"));
  c.run_id = doc.get_or("run_id", "run");
  if (doc.has("broker.expected"))
    c.attach_expected = doc.get("broker.expected") == "true";
  if (doc.has("broker.poll_ms")) c.broker_poll_ms = int(doc.get_int("broker.poll_ms"));
  if (doc.has("broker.timeout_s"))
    c.broker_timeout_s = int(doc.get_int("broker.timeout_s"));
  return c;
}

// ---------------------------------------------------------------------------
// Circuit execution paths (direct backend vs broker client)
// ---------------------------------------------------------------------------

struct JobSpec {
  std::string qasm;
  std::uint64_t shots;
  std::uint64_t seed;
  std::map<std::string, double> expected;
  std::map<std::string, std::string> metadata;
};

struct BatchExecutor {
  virtual ~BatchExecutor() = default;
  virtual std::vector<Histogram> execute(const std::vector<JobSpec>& batch) = 0;
};

/// Runs each job on an in-process backend. Circuits pass through the QASM
/// round trip so both execution paths see bit-identical gate parameters.
class DirectExecutor : public BatchExecutor {
 public:
  explicit DirectExecutor(CircuitBackend& backend) : backend_(backend) {}

  std::vector<Histogram> execute(const std::vector<JobSpec>& batch) override {
    std::vector<Histogram> out;
    out.reserve(batch.size());
    for (const auto& j : batch)
      out.push_back(backend_.execute(parse_qasm(j.qasm), j.shots, j.seed));
    return out;
  }

 private:
  CircuitBackend& backend_;
};

/// Serializes jobs into dir1 and polls dir3 -- no other coupling to the host.
class BrokerExecutor : public BatchExecutor {
 public:
  BrokerExecutor(SessionPaths session, int poll_ms, int timeout_s)
      : session_(std::move(session)), poll_ms_(poll_ms), timeout_s_(timeout_s) {
    session_.create_dirs();
    next_id_ = 1 + existing_max_id();
  }

  std::vector<Histogram> execute(const std::vector<JobSpec>& batch) override {
    std::vector<JobRecord> jobs;
    std::vector<std::string> ids;
    for (const auto& spec : batch) {
      JobRecord j;
      j.job_id = format_job_id(next_id_++);
      j.circuit_qasm = spec.qasm;
      j.shots = spec.shots;
      j.expected_distribution = spec.expected;
      j.metadata = spec.metadata;
      j.metadata["seed"] = std::to_string(spec.seed);
      j.created_at = timestamp();
      ids.push_back(j.job_id);
      jobs.push_back(std::move(j));
    }
    client_submit(jobs, session_);
    AwaitOutcome got = client_await(ids, session_,
                                    std::chrono::milliseconds(poll_ms_),
                                    std::chrono::seconds(timeout_s_));
    if (!got.missing.empty()) {
      std::string msg = "broker timeout; missing results:";
      for (const auto& id : got.missing) msg += " " + id;
      throw BrokerError(msg);
    }
    std::map<std::string, const ResultRecord*> by_id;
    for (const auto& r : got.results) by_id[r.job_id] = &r;
    std::vector<Histogram> out;
    for (const auto& id : ids) {
      const ResultRecord* r = by_id.at(id);
      Histogram h;
      h.counts = r->counts;
      for (const auto& [bits, c] : r->counts) h.shots += c;
      out.push_back(std::move(h));
    }
    return out;
  }

 private:
  std::uint64_t existing_max_id() const {
    std::uint64_t max_id = 0;
    for (const auto& e : fs::directory_iterator(session_.dir1)) {
      std::string name = e.path().filename().string();
      if (name.rfind("job_", 0) != 0 || e.path().extension() != ".yaml") continue;
      try {
        max_id = std::max<std::uint64_t>(
            max_id, std::stoull(e.path().stem().string().substr(4)));
      } catch (const std::exception&) {
      }
    }
    return max_id;
  }

  static std::string timestamp() {
    auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", std::gmtime(&t));
    return buf;
  }

  SessionPaths session_;
  int poll_ms_;
  int timeout_s_;
  std::uint64_t next_id_;
};

// ---------------------------------------------------------------------------
// VQE driver
// ---------------------------------------------------------------------------

/// Appends basis pre-rotations (H for X, Sdg then H for Y) and measurements,
/// then lowers to the native gate set.
inline Circuit measurement_circuit(const AnsatzSpec& spec, const ParamPoint& p,
                                   const std::string& basis) {
  Circuit c = build_circuit(spec, p);
  for (int q = 0; q < c.n_qubits; ++q) {
    char b = basis[std::size_t(q)];
    if (b == 'X') {
      c.add(GateKind::H, {q});
    } else if (b == 'Y') {
      c.add(GateKind::Sdg, {q});
      c.add(GateKind::H, {q});
    }
  }
  c.measure_all();
  return transpile(c);
}

/// One energy evaluation = one circuit per measurement group, executed through
/// the configured path, assembled by the shot estimator. Streams one CSV row
/// per evaluation so interrupted runs keep their prefix.
class VqeDriver {
 public:
  VqeDriver(const RunConfig& cfg, const PauliHamiltonian& h, BatchExecutor& exec,
            std::ostream* csv = nullptr)
      : cfg_(cfg), h_(h), exec_(exec), csv_(csv) {
    groups_ = group_qubitwise_commuting(h_);
    if (groups_.empty())
      throw std::invalid_argument("Hamiltonian has no measurable terms");
  }

  const std::vector<MeasurementGroup>& groups() const { return groups_; }
  std::uint64_t evaluations() const { return eval_count_; }

  double evaluate(const std::vector<double>& theta) {
    auto t0 = std::chrono::steady_clock::now();
    ++eval_count_;
    ParamPoint p{theta};
    std::vector<JobSpec> batch;
    batch.reserve(groups_.size());
    for (std::size_t gi = 0; gi < groups_.size(); ++gi) {
      Circuit native = measurement_circuit(cfg_.ansatz, p, groups_[gi].basis);
      JobSpec spec;
      spec.qasm = serialize_qasm(native);
      spec.shots = cfg_.shots;
      spec.seed = derive_seed(cfg_.seed, eval_count_, gi);
      if (cfg_.attach_expected) spec.expected = exact_distribution(native);
      spec.metadata["run_id"] = cfg_.run_id;
      spec.metadata["eval_index"] = std::to_string(eval_count_);
      spec.metadata["basis"] = groups_[gi].basis;
      batch.push_back(std::move(spec));
    }
    std::vector<Histogram> hists = exec_.execute(batch);
    std::vector<std::map<std::string, std::uint64_t>> counts;
    counts.reserve(hists.size());
    for (auto& hgram : hists) counts.push_back(std::move(hgram.counts));
    double energy = energy_from_counts(h_, groups_, counts);
    if (csv_) {
      auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                    std::chrono::steady_clock::now() - t0)
                    .count();
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.17g", energy);
      *csv_ << eval_count_ << "," << buf;
      for (double v : theta) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        *csv_ << "," << buf;
      }
      *csv_ << "," << ms << "\n";
      csv_->flush();
    }
    return energy;
  }

  EnergyFn as_energy_fn() {
    return [this](const std::vector<double>& theta) { return evaluate(theta); };
  }

 private:
  RunConfig cfg_;
  PauliHamiltonian h_;
  BatchExecutor& exec_;
  std::ostream* csv_;
  std::vector<MeasurementGroup> groups_;
  std::uint64_t eval_count_ = 0;
};

inline std::string csv_header(int param_count) {
  std::string s = "eval_index,energy_hartree";
  for (int i = 0; i < param_count; ++i) s += ",theta_" + std::to_string(i);
  s += ",wallclock_ms";
  return s;
}

/// Circuit accounting: bases x inits x (2*calibration + 2*iterations).
inline std::uint64_t account_circuits(std::uint64_t bases, std::uint64_t calib_pairs,
                                      std::uint64_t iterations, std::uint64_t inits) {
  return bases * inits * (2 * calib_pairs + 2 * iterations);
}

/// Builds the configured direct backend, or null for broker selectors.
inline std::unique_ptr<CircuitBackend> make_backend(const RunConfig& cfg) {
  if (cfg.backend == "sim") return std::make_unique<SimCircuitBackend>();
  if (cfg.backend == "sim-noisy")
    return std::make_unique<SimCircuitBackend>(cfg.noise);
  if (cfg.backend == "sim-uniform")
    return std::make_unique<UniformCircuitBackend>();
  if (cfg.backend.rfind("broker:", 0) == 0) return nullptr;
  throw std::invalid_argument("unknown backend '" + cfg.backend + "'");
}

inline std::unique_ptr<BatchExecutor> make_executor(
    const RunConfig& cfg, std::unique_ptr<CircuitBackend>& backend_out) {
  backend_out = make_backend(cfg);
  if (backend_out) return std::make_unique<DirectExecutor>(*backend_out);
  SessionPaths session = SessionPaths::at(cfg.backend.substr(7));
  return std::make_unique<BrokerExecutor>(session, cfg.broker_poll_ms,
                                          cfg.broker_timeout_s);
}

}  // namespace cafqa
