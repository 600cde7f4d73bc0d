// cafqa-vqe: CAFQA-bootstrapped VQE runner with a file-based circuit broker.
//
// Subcommands:
//   cafqa    discrete Clifford-grid search, report + trace
//   vqe      full VQE run (direct backend or broker), convergence CSVs
//   account  circuit-count accounting
//   host     broker host daemon
//   status   session status snapshot
//   resume   clear a blocked session
//
// Exit codes: 0 ok, 1 usage, 2 config, 3 backend/broker failure,
// 4 blocked-awaiting-operator.

#include <atomic>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "cafqa/broker.hpp"
#include "cafqa/cafqa_search.hpp"
#include "cafqa/kv.hpp"
#include "cafqa/pauli.hpp"
#include "cafqa/spsa.hpp"
#include "cafqa/statevector.hpp"
#include "cafqa/vqe.hpp"

namespace fs = std::filesystem;
using namespace cafqa;

namespace {

std::atomic<bool> g_stop{false};

void handle_signal(int) { g_stop.store(true); }

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitConfig = 2;
constexpr int kExitBackend = 3;
constexpr int kExitBlocked = 4;

struct CommonOpts {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string backend_override;
  std::string out_override;
};

RunConfig load_config(const CommonOpts& opts) {
  RunConfig cfg = parse_run_config(KvDoc::parse(read_file(opts.config_path)));
  if (opts.seed) cfg.seed = *opts.seed;
  if (!opts.backend_override.empty()) cfg.backend = opts.backend_override;
  if (!opts.out_override.empty()) cfg.out_dir = opts.out_override;
  cfg.validate();
  return cfg;
}

PauliHamiltonian load_hamiltonian(const RunConfig& cfg) {
  return parse_hamiltonian(read_file(cfg.hamiltonian_path));
}

void write_cafqa_report(const fs::path& out_dir, const RunConfig& cfg,
                        const SearchResult& r) {
  KvDoc doc;
  doc.set("strategy", strategy_name(cfg.cafqa.strategy));
  doc.set_int("budget", (long long)cfg.cafqa.max_evaluations);
  doc.set_int("seed", (long long)cfg.cafqa.seed);
  doc.set_int("evaluations_used", (long long)r.evaluations_used);
  doc.set_double("best_energy", r.best_energy);
  std::string pt;
  for (std::size_t i = 0; i < r.best_point.size(); ++i) {
    if (i) pt += ",";
    pt += std::to_string(r.best_point[i]);
  }
  doc.set("best_point", pt);
  write_file_atomic(out_dir / "cafqa_report.yaml", doc.serialize());

  std::ofstream trace(out_dir / "cafqa_trace.csv");
  trace << "eval_index,best_energy\n";
  char buf[64];
  for (const auto& [idx, e] : r.trace) {
    std::snprintf(buf, sizeof buf, "%.17g", e);
    trace << idx << "," << buf << "\n";
  }
}

int cmd_cafqa(const CommonOpts& opts) {
  RunConfig cfg = load_config(opts);
  PauliHamiltonian h = load_hamiltonian(cfg);
  SearchBudget budget = cfg.cafqa;
  budget.seed = cfg.seed;
  SearchResult r = cafqa_search(cfg.ansatz, h, budget);
  fs::create_directories(cfg.out_dir);
  RunConfig reported = cfg;
  reported.cafqa = budget;
  write_cafqa_report(cfg.out_dir, reported, r);
  std::cout << "best_energy: " << r.best_energy << "\nbest_point:";
  for (int v : r.best_point) std::cout << " " << v;
  std::cout << "\nevaluations_used: " << r.evaluations_used << "\n";
  return kExitOk;
}

int cmd_vqe(const CommonOpts& opts) {
  RunConfig cfg = load_config(opts);
  PauliHamiltonian h = load_hamiltonian(cfg);
  fs::create_directories(cfg.out_dir);
  fs::path out_dir = cfg.out_dir;

  ParamPoint init;
  std::optional<SearchResult> search;
  switch (cfg.init) {
    case InitMode::Hf:
      init = hf_point(cfg.ansatz);
      break;
    case InitMode::Cafqa: {
      SearchBudget budget = cfg.cafqa;
      budget.seed = cfg.seed;
      search = cafqa_search(cfg.ansatz, h, budget);
      RunConfig reported = cfg;
      reported.cafqa = budget;
      write_cafqa_report(out_dir, reported, *search);
      init = to_vqe_init(*search);
      break;
    }
    case InitMode::Explicit:
      if (int(cfg.explicit_init.size()) != cfg.ansatz.param_count())
        throw std::invalid_argument("explicit init length mismatch");
      init.values = cfg.explicit_init;
      break;
  }

  std::unique_ptr<CircuitBackend> backend;
  std::unique_ptr<BatchExecutor> exec = make_executor(cfg, backend);

  std::ofstream csv(out_dir / "convergence.csv");
  csv << csv_header(cfg.ansatz.param_count()) << "\n";
  csv.flush();

  VqeDriver driver(cfg, h, *exec, &csv);
  SpsaConfig spsa = cfg.spsa;
  spsa.seed = cfg.seed;
  SpsaTrace trace = spsa_run(init, driver.as_energy_fn(), spsa);

  // angle CSV: theta per evaluation
  {
    std::ofstream angles(out_dir / "angles.csv");
    angles << "eval_index";
    for (int i = 0; i < cfg.ansatz.param_count(); ++i) angles << ",theta_" << i;
    angles << "\n";
    char buf[64];
    for (const auto& ev : trace.evaluations) {
      angles << ev.index;
      for (double v : ev.theta) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        angles << "," << buf;
      }
      angles << "\n";
    }
  }

  Circuit final_circuit = build_circuit(cfg.ansatz, trace.final_point);
  double final_energy = exact_expectation(final_circuit, h);

  KvDoc summary;
  summary.set("init", cfg.init == InitMode::Hf       ? "hf"
                      : cfg.init == InitMode::Cafqa ? "cafqa"
                                                     : "explicit");
  summary.set_int("groups", (long long)driver.groups().size());
  summary.set_int("evaluations", (long long)driver.evaluations());
  summary.set_int("circuits",
                  (long long)(driver.evaluations() * driver.groups().size()));
  summary.set_double("learning_rate", trace.learning_rate);
  summary.set_double("final_energy_exact", final_energy);
  std::string pt;
  char buf[64];
  for (std::size_t i = 0; i < trace.final_point.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", trace.final_point.values[i]);
    if (i) pt += ",";
    pt += buf;
  }
  summary.set("final_point", pt);
  if (search) summary.set_double("cafqa_energy", search->best_energy);
  write_file_atomic(out_dir / "summary.yaml", summary.serialize());

  std::cout << "evaluations: " << driver.evaluations()
            << "\ncircuits: " << driver.evaluations() * driver.groups().size()
            << "\nfinal_energy_exact: " << final_energy << "\n";
  return kExitOk;
}

int cmd_account(std::uint64_t bases, std::uint64_t calib, std::uint64_t iters,
                std::uint64_t inits) {
  std::cout << account_circuits(bases, calib, iters, inits) << "\n";
  return kExitOk;
}

int cmd_host(const std::string& session_dir, const std::string& backend_name,
             const NoiseModel& noise, HostConfig host_cfg) {
  SessionPaths session = SessionPaths::at(session_dir);
  std::unique_ptr<CircuitBackend> backend;
  if (backend_name == "sim")
    backend = std::make_unique<SimCircuitBackend>();
  else if (backend_name == "sim-noisy")
    backend = std::make_unique<SimCircuitBackend>(noise);
  else if (backend_name == "sim-uniform")
    backend = std::make_unique<UniformCircuitBackend>();
  else
    throw std::invalid_argument("host backend must be sim, sim-noisy or sim-uniform");

  std::signal(SIGINT, handle_signal);
  std::signal(SIGTERM, handle_signal);
  Host host(session, *backend, host_cfg);
  std::cerr << "[host] monitoring " << session.dir1.string() << "\n";
  host.run(g_stop);
  std::cerr << "[host] stopped\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CAFQA-bootstrapped VQE with a file-based circuit broker"};
  app.require_subcommand(1);

  CommonOpts common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config_path, "run config file")->required();
    sub->add_option("--seed", common.seed, "override config seed");
    sub->add_option("--backend", common.backend_override, "override config backend");
    sub->add_option("--out", common.out_override, "override output directory");
  };

  auto* sc_cafqa = app.add_subcommand("cafqa", "run the Clifford-grid search");
  add_common(sc_cafqa);

  auto* sc_vqe = app.add_subcommand("vqe", "run a full VQE experiment");
  add_common(sc_vqe);

  std::uint64_t bases = 0, calib = 0, iters = 0, inits = 0;
  auto* sc_account = app.add_subcommand("account", "circuit-count accounting");
  sc_account->add_option("--bases", bases, "measurement bases per evaluation")->required();
  sc_account->add_option("--calib-pairs", calib, "SPSA calibration pairs")->required();
  sc_account->add_option("--iterations", iters, "SPSA iterations")->required();
  sc_account->add_option("--inits", inits, "number of initializations")->required();

  std::string session_dir, host_backend = "sim";
  NoiseModel noise;
  HostConfig host_cfg;
  auto* sc_host = app.add_subcommand("host", "run the broker host daemon");
  sc_host->add_option("--session", session_dir, "session directory")->required();
  sc_host->add_option("--backend", host_backend, "sim | sim-noisy | sim-uniform");
  sc_host->add_option("--poll-ms", host_cfg.poll_ms, "dir1 poll interval");
  sc_host->add_option("--max-in-flight", host_cfg.max_in_flight, "parallel jobs");
  sc_host->add_option("--retry-limit", host_cfg.retry_limit, "criteria retries");
  sc_host->add_option("--threshold", host_cfg.deviation_threshold,
                      "return-criteria TV threshold");
  sc_host->add_option("--p1", noise.p1, "single-qubit depolarizing probability");
  sc_host->add_option("--p2", noise.p2, "two-qubit depolarizing probability");
  sc_host->add_option("--p-spam", noise.p_spam, "readout flip probability");
  sc_host->add_flag("--verbose", host_cfg.verbose, "log per-job events");

  auto* sc_status = app.add_subcommand("status", "print a session snapshot");
  sc_status->add_option("--session", session_dir, "session directory")->required();

  auto* sc_resume = app.add_subcommand("resume", "clear a blocked session");
  sc_resume->add_option("--session", session_dir, "session directory")->required();

  auto* sc_qlist = app.add_subcommand("quarantine-list", "list quarantined job files");
  sc_qlist->add_option("--session", session_dir, "session directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (sc_cafqa->parsed()) return cmd_cafqa(common);
    if (sc_vqe->parsed()) return cmd_vqe(common);
    if (sc_account->parsed()) return cmd_account(bases, calib, iters, inits);
    if (sc_host->parsed()) return cmd_host(session_dir, host_backend, noise, host_cfg);
    if (sc_status->parsed()) {
      std::cout << Host::status_snapshot(SessionPaths::at(session_dir));
      return kExitOk;
    }
    if (sc_resume->parsed()) {
      bool cleared = host_resume(SessionPaths::at(session_dir));
      std::cout << (cleared ? "resumed\n" : "session was not blocked\n");
      return kExitOk;
    }
    if (sc_qlist->parsed()) {
      for (const auto& f : quarantine_list(SessionPaths::at(session_dir)))
        std::cout << f << "\n";
      return kExitOk;
    }
  } catch (const BrokerError& e) {
    std::cerr << "error: " << e.what() << "\n";
    // distinguish an operator-blocked session from a plain failure
    try {
      RunConfig cfg = load_config(common);
      if (cfg.backend.rfind("broker:", 0) == 0) {
        SessionPaths s = SessionPaths::at(cfg.backend.substr(7));
        if (fs::exists(s.blocked_marker())) return kExitBlocked;
      }
    } catch (...) {
    }
    return kExitBackend;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBackend;
  }
  return kExitUsage;
}
