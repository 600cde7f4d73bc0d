#pragma once
#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "cafqa/kv.hpp"
#include "cafqa/qasm.hpp"
#include "cafqa/rng.hpp"
#include "cafqa/statevector.hpp"

namespace cafqa {

namespace fs = std::filesystem;

inline std::string format_job_id(std::uint64_t n) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%06llu", (unsigned long long)n);
  return buf;
}

/// On-disk request unit written by the client into dir1.
struct JobRecord {
  int schema_version = 1;
  std::string job_id;  // zero-padded, monotonically increasing
  std::string circuit_qasm;
  std::uint64_t shots = 0;
  std::map<std::string, double> expected_distribution;  // empty -> criteria skipped
  std::map<std::string, std::string> metadata;
  std::string created_at;

  KvDoc to_kv() const {
    KvDoc doc;
    doc.set_int("schema_version", schema_version);
    doc.set("job_id", job_id);
    doc.set_int("shots", (long long)shots);
    if (!created_at.empty()) doc.set("created_at", created_at);
    for (const auto& [k, v] : metadata) doc.set("metadata." + k, v);
    for (const auto& [bits, p] : expected_distribution)
      doc.set_double("expected_distribution." + bits, p);
    doc.set("circuit_qasm", circuit_qasm);
    return doc;
  }

  static JobRecord from_kv(const KvDoc& doc) {
    JobRecord j;
    j.schema_version = int(doc.get_int("schema_version"));
    j.job_id = doc.get("job_id");
    long long shots = doc.get_int("shots");
    if (shots < 1) throw std::invalid_argument("shots must be >= 1");
    j.shots = std::uint64_t(shots);
    j.created_at = doc.get_or("created_at", "");
    j.circuit_qasm = doc.get("circuit_qasm");
    for (const auto& [k, v] : doc.section("metadata")) j.metadata[k] = v;
    double total = 0;
    for (const auto& [bits, v] : doc.section("expected_distribution")) {
      double p = std::stod(v);
      j.expected_distribution[bits] = p;
      total += p;
    }
    if (!j.expected_distribution.empty() && std::fabs(total - 1.0) > 1e-9)
      throw std::invalid_argument("expected_distribution does not sum to 1");
    return j;
  }

  void validate() const {
    if (job_id.empty() ||
        job_id.find_first_not_of("0123456789") != std::string::npos)
      throw std::invalid_argument("job_id must be numeric");
    if (shots < 1) throw std::invalid_argument("shots must be >= 1");
  }
};

/// On-disk response unit written by the host into dir3.
struct ResultRecord {
  std::string job_id;
  std::string status;  // ok | failed_criteria | blocked
  std::map<std::string, std::uint64_t> counts;
  int attempts = 0;
  std::uint64_t queued_ms = 0;
  std::uint64_t exec_ms = 0;

  KvDoc to_kv() const {
    KvDoc doc;
    doc.set("job_id", job_id);
    doc.set("status", status);
    doc.set_int("attempts", attempts);
    for (const auto& [bits, c] : counts)
      doc.set_int("counts." + bits, (long long)c);
    doc.set_int("timing.queued_ms", (long long)queued_ms);
    doc.set_int("timing.exec_ms", (long long)exec_ms);
    return doc;
  }

  static ResultRecord from_kv(const KvDoc& doc) {
    ResultRecord r;
    r.job_id = doc.get("job_id");
    r.status = doc.get("status");
    r.attempts = int(doc.get_int("attempts"));
    for (const auto& [bits, v] : doc.section("counts"))
      r.counts[bits] = std::uint64_t(std::stoll(v));
    r.queued_ms = std::uint64_t(doc.get_int("timing.queued_ms"));
    r.exec_ms = std::uint64_t(doc.get_int("timing.exec_ms"));
    return r;
  }
};

/// Directory layout of one broker session.
struct SessionPaths {
  fs::path root, dir1, dir3, quarantine;

  static SessionPaths at(const fs::path& root) {
    return {root, root / "dir1", root / "dir3", root / "quarantine"};
  }

  void create_dirs() const {
    fs::create_directories(dir1);
    fs::create_directories(dir3);
    fs::create_directories(quarantine);
  }

  fs::path job_file(const std::string& id) const {
    return dir1 / ("job_" + id + ".yaml");
  }
  fs::path result_file(const std::string& id) const {
    return dir3 / ("result_" + id + ".yaml");
  }
  fs::path journal() const { return dir3 / "completed.log"; }
  fs::path exec_log() const { return dir3 / "exec.log"; }
  fs::path blocked_marker() const { return root / "blocked"; }
  fs::path quarantine_log() const { return quarantine / "quarantine.log"; }
};

// ---------------------------------------------------------------------------
// Client end: file writes and polling reads only.
// ---------------------------------------------------------------------------

inline void client_submit(const std::vector<JobRecord>& jobs,
                          const SessionPaths& session) {
  std::set<std::string> batch_ids;
  for (const auto& j : jobs) {
    j.validate();
    if (!batch_ids.insert(j.job_id).second)
      throw std::invalid_argument("duplicate job_id in batch: " + j.job_id);
    if (fs::exists(session.job_file(j.job_id)))
      throw std::invalid_argument("job_id already submitted: " + j.job_id);
  }
  std::vector<const JobRecord*> ordered;
  for (const auto& j : jobs) ordered.push_back(&j);
  std::sort(ordered.begin(), ordered.end(),
            [](auto* a, auto* b) { return a->job_id < b->job_id; });
  for (const JobRecord* j : ordered)
    write_file_atomic(session.job_file(j->job_id), j->to_kv().serialize());
}

struct AwaitOutcome {
  std::vector<ResultRecord> results;       // in job_id order
  std::vector<std::string> missing;        // non-empty on timeout
};

/// Polls dir3 until every requested result exists (blocked results count as
/// still pending) or the timeout expires; partial results are returned with
/// the missing ids reported.
inline AwaitOutcome client_await(const std::vector<std::string>& job_ids,
                                 const SessionPaths& session,
                                 std::chrono::milliseconds poll_interval,
                                 std::chrono::milliseconds timeout) {
  auto deadline = std::chrono::steady_clock::now() + timeout;
  std::map<std::string, ResultRecord> done;
  for (;;) {
    for (const auto& id : job_ids) {
      if (done.count(id)) continue;
      fs::path p = session.result_file(id);
      if (!fs::exists(p)) continue;
      ResultRecord r = ResultRecord::from_kv(KvDoc::parse(read_file(p)));
      if (r.status == "blocked") continue;  // host will rerun after resume
      done[id] = std::move(r);
    }
    if (done.size() == job_ids.size() ||
        std::chrono::steady_clock::now() >= deadline)
      break;
    std::this_thread::sleep_for(poll_interval);
  }
  AwaitOutcome out;
  std::vector<std::string> sorted_ids = job_ids;
  std::sort(sorted_ids.begin(), sorted_ids.end());
  for (const auto& id : sorted_ids) {
    auto it = done.find(id);
    if (it != done.end())
      out.results.push_back(it->second);
    else
      out.missing.push_back(id);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Return criteria
// ---------------------------------------------------------------------------

struct CriteriaOutcome {
  bool pass;
  double deviation;  // total variation distance
};

/// TV = 0.5 * sum |observed_freq - expected_prob|; fail iff TV > threshold.
/// An absent expected distribution auto-passes.
inline CriteriaOutcome check_return_criteria(
    const Histogram& observed, const std::map<std::string, double>& expected,
    double threshold) {
  if (expected.empty()) return {true, 0.0};
  std::set<std::string> keys;
  for (const auto& [k, v] : observed.counts) keys.insert(k);
  for (const auto& [k, v] : expected) keys.insert(k);
  double tv = 0;
  double total = double(observed.shots);
  for (const auto& k : keys) {
    double f = 0, p = 0;
    auto io = observed.counts.find(k);
    if (io != observed.counts.end()) f = double(io->second) / total;
    auto ie = expected.find(k);
    if (ie != expected.end()) p = ie->second;
    tv += std::fabs(f - p);
  }
  tv *= 0.5;
  return {tv <= threshold, tv};
}

// ---------------------------------------------------------------------------
// Host end
// ---------------------------------------------------------------------------

/// Backend executing one circuit; the stand-in for the hardware stack.
struct CircuitBackend {
  virtual ~CircuitBackend() = default;
  virtual Histogram execute(const Circuit& c, std::uint64_t shots,
                            std::uint64_t seed) = 0;
};

class SimCircuitBackend : public CircuitBackend {
 public:
  explicit SimCircuitBackend(std::optional<NoiseModel> noise = std::nullopt)
      : noise_(noise) {}
  Histogram execute(const Circuit& c, std::uint64_t shots,
                    std::uint64_t seed) override {
    return run_circuit(c, shots, noise_, seed);
  }

 private:
  std::optional<NoiseModel> noise_;
};

/// Fault-injection backend: uniform histogram regardless of the circuit.
/// Exercises the job-return criteria path.
class UniformCircuitBackend : public CircuitBackend {
 public:
  Histogram execute(const Circuit& c, std::uint64_t shots,
                    std::uint64_t /*seed*/) override {
    Histogram h;
    h.shots = shots;
    std::size_t outcomes = std::size_t(1) << c.n_clbits;
    for (std::size_t i = 0; i < outcomes; ++i) {
      std::string bits(std::size_t(c.n_clbits), '0');
      for (int b = 0; b < c.n_clbits; ++b)
        if ((i >> b) & 1) bits[std::size_t(b)] = '1';
      h.counts[bits] = shots / outcomes + (i < shots % outcomes ? 1 : 0);
    }
    return h;
  }
};

struct HostConfig {
  int max_in_flight = 3;
  int retry_limit = 3;
  double deviation_threshold = 0.5;
  int poll_ms = 200;
  bool verbose = false;
};

/// Host end of the circuit interface: monitors dir1, keeps up to
/// max_in_flight jobs at the backend, applies return criteria, journals
/// completions so a restart resumes at the first unfinished job.
class Host {
 public:
  Host(SessionPaths session, CircuitBackend& backend, HostConfig cfg = {})
      : session_(std::move(session)), backend_(backend), cfg_(cfg) {
    session_.create_dirs();
    recover();
  }

  /// Supervisor loop; returns when `stop` becomes true.
  void run(const std::atomic<bool>& stop) {
    while (!stop.load()) {
      step();
      std::this_thread::sleep_for(std::chrono::milliseconds(cfg_.poll_ms));
    }
    drain();
  }

  /// One supervisor round: scan, dispatch, reap. Exposed for tests.
  void step() {
    if (blocked_) {
      reap();
      if (!fs::exists(session_.blocked_marker())) {
        // operator resume: rerun the failed circuit with a fresh attempt count
        alert("resume: job " + blocked_->job_id + " requeued");
        attempts_.erase(blocked_->job_id);
        pending_.push_front(*blocked_);
        blocked_.reset();
      } else {
        return;
      }
    }
    scan_dir1();
    dispatch();
    reap();
  }

  std::size_t completed_count() const { return completed_.size(); }
  bool is_blocked() const { return blocked_.has_value(); }

  /// Per-job state lines plus counts; stable job_id ordering.
  std::string status_text() const {
    std::map<std::string, std::string> state;
    for (const auto& j : pending_) state[j.job_id] = "queued";
    for (const auto& slot : in_flight_) state[slot.job.job_id] = "in_flight";
    return render_status(session_, state, blocked_ ? blocked_->job_id : "",
                         attempts_);
  }

  /// File-derived snapshot for an external `status` command.
  static std::string status_snapshot(const SessionPaths& session) {
    return render_status(session, {}, "", {});
  }

 private:
  struct InFlight {
    JobRecord job;
    std::future<Histogram> future;
    std::chrono::steady_clock::time_point dispatched;
    std::uint64_t queued_ms;
  };

  void recover() {
    // journal first, then reconcile result files written without a journal line
    if (fs::exists(session_.journal())) {
      std::ifstream in(session_.journal());
      std::string id;
      while (std::getline(in, id))
        if (!id.empty()) completed_.insert(id);
    }
    for (const auto& e : fs::directory_iterator(session_.dir3)) {
      std::string name = e.path().filename().string();
      if (name.rfind("result_", 0) != 0 || e.path().extension() != ".yaml") continue;
      try {
        ResultRecord r = ResultRecord::from_kv(KvDoc::parse(read_file(e.path())));
        if (r.status == "ok" && !completed_.count(r.job_id)) {
          append_journal(r.job_id);
          completed_.insert(r.job_id);
        }
      } catch (const std::exception&) {
        // partially written result without rename cannot occur; ignore stray file
      }
    }
    if (fs::exists(session_.blocked_marker())) {
      try {
        KvDoc doc = KvDoc::parse(read_file(session_.blocked_marker()));
        std::string id = doc.get("job_id");
        fs::path jf = session_.job_file(id);
        if (fs::exists(jf)) {
          JobRecord j = JobRecord::from_kv(KvDoc::parse(read_file(jf)));
          blocked_ = j;
          attempts_[id] = int(doc.get_int("attempts"));
          seen_.insert(id);
          alert("restart: session blocked on job " + id + "; awaiting resume");
        }
      } catch (const std::exception&) {
        fs::remove(session_.blocked_marker());
      }
    }
  }

  void scan_dir1() {
    std::vector<fs::path> found;
    for (const auto& e : fs::directory_iterator(session_.dir1)) {
      std::string name = e.path().filename().string();
      if (name.rfind("job_", 0) != 0 || e.path().extension() != ".yaml") continue;
      found.push_back(e.path());
    }
    std::sort(found.begin(), found.end());  // job_id order
    for (const auto& p : found) {
      std::string id = p.stem().string().substr(4);
      if (seen_.count(id) || completed_.count(id)) continue;
      try {
        JobRecord j = JobRecord::from_kv(KvDoc::parse(read_file(p)));
        j.validate();
        if (j.job_id != id) throw std::invalid_argument("job_id/filename mismatch");
        parse_qasm(j.circuit_qasm);  // reject unreadable payloads up front
        discovered_[id] = std::chrono::steady_clock::now();
        pending_.push_back(std::move(j));
        seen_.insert(id);
      } catch (const std::exception& ex) {
        quarantine(p, ex.what());
        seen_.insert(id);
      }
    }
  }

  void dispatch() {
    while (!blocked_ && int(in_flight_.size()) < cfg_.max_in_flight &&
           !pending_.empty()) {
      JobRecord j = pending_.front();
      pending_.pop_front();
      int attempt = ++attempts_[j.job_id];
      append_line(session_.exec_log(), j.job_id + " " + std::to_string(attempt));
      auto now = std::chrono::steady_clock::now();
      std::uint64_t queued_ms = 0;
      auto di = discovered_.find(j.job_id);
      if (di != discovered_.end())
        queued_ms = std::uint64_t(
            std::chrono::duration_cast<std::chrono::milliseconds>(now - di->second)
                .count());
      Circuit circuit = parse_qasm(j.circuit_qasm);
      std::uint64_t shots = j.shots;
      std::uint64_t seed = job_seed(j);
      CircuitBackend* backend = &backend_;
      auto fut = std::async(std::launch::async, [backend, circuit, shots, seed] {
        return backend->execute(circuit, shots, seed);
      });
      in_flight_.push_back({std::move(j), std::move(fut), now, queued_ms});
    }
  }

  void reap() {
    for (std::size_t i = 0; i < in_flight_.size();) {
      auto& slot = in_flight_[i];
      if (slot.future.wait_for(std::chrono::milliseconds(0)) !=
          std::future_status::ready) {
        ++i;
        continue;
      }
      InFlight done = std::move(slot);
      in_flight_.erase(in_flight_.begin() + std::ptrdiff_t(i));
      finish(std::move(done));
    }
  }

  void drain() {
    while (!in_flight_.empty()) reap();
  }

  void finish(InFlight slot) {
    const std::string& id = slot.job.job_id;
    std::uint64_t exec_ms = std::uint64_t(
        std::chrono::duration_cast<std::chrono::milliseconds>(
            std::chrono::steady_clock::now() - slot.dispatched)
            .count());
    Histogram hist;
    bool backend_failed = false;
    std::string why;
    try {
      hist = slot.future.get();
    } catch (const std::exception& ex) {
      backend_failed = true;
      why = ex.what();
    }
    CriteriaOutcome crit{true, 0.0};
    if (!backend_failed)
      crit = check_return_criteria(hist, slot.job.expected_distribution,
                                   cfg_.deviation_threshold);
    int attempts = attempts_[id];
    if (!backend_failed && crit.pass) {
      ResultRecord r;
      r.job_id = id;
      r.status = "ok";
      r.counts = hist.counts;
      r.attempts = attempts;
      r.queued_ms = slot.queued_ms;
      r.exec_ms = exec_ms;
      write_file_atomic(session_.result_file(id), r.to_kv().serialize());
      append_journal(id);
      completed_.insert(id);
      if (cfg_.verbose)
        std::cerr << "[host] job " << id << " ok (attempt " << attempts << ")\n";
      return;
    }
    std::ostringstream reason;
    if (backend_failed)
      reason << "backend failure: " << why;
    else
      reason << "histogram deviation " << crit.deviation << " > "
             << cfg_.deviation_threshold;
    if (attempts <= cfg_.retry_limit) {
      if (cfg_.verbose)
        std::cerr << "[host] job " << id << " attempt " << attempts
                  << " failed (" << reason.str() << "); retrying\n";
      pending_.push_front(slot.job);
      return;
    }
    // retries exhausted: record the failure, halt and alert
    ResultRecord r;
    r.job_id = id;
    r.status = "blocked";
    r.counts = hist.counts;
    r.attempts = attempts;
    r.queued_ms = slot.queued_ms;
    r.exec_ms = exec_ms;
    write_file_atomic(session_.result_file(id), r.to_kv().serialize());
    KvDoc marker;
    marker.set("job_id", id);
    marker.set_int("attempts", attempts);
    marker.set("reason", reason.str());
    write_file_atomic(session_.blocked_marker(), marker.serialize());
    blocked_ = slot.job;
    alert("job " + id + " failed return criteria " + std::to_string(attempts) +
          " times (" + reason.str() +
          "); halting queue -- check the hardware, then run `resume`");
  }

  void quarantine(const fs::path& p, const std::string& why) {
    fs::path dest = session_.quarantine / p.filename();
    try {
      fs::rename(p, dest);
    } catch (const std::exception&) {
      fs::copy_file(p, dest, fs::copy_options::overwrite_existing);
      fs::remove(p);
    }
    append_line(session_.quarantine_log(), p.filename().string() + ": " + why);
    alert("quarantined " + p.filename().string() + ": " + why);
  }

  void append_journal(const std::string& id) { append_line(session_.journal(), id); }

  static void append_line(const fs::path& p, const std::string& line) {
    std::ofstream out(p, std::ios::app);
    out << line << "\n";
    out.flush();
  }

  std::uint64_t job_seed(const JobRecord& j) const {
    auto it = j.metadata.find("seed");
    if (it != j.metadata.end()) return std::stoull(it->second);
    return derive_seed(0x9a5eed, std::stoull(j.job_id));
  }

  void alert(const std::string& msg) { std::cerr << "[host] " << msg << "\n"; }

  static std::string render_status(
      const SessionPaths& session, std::map<std::string, std::string> state,
      const std::string& blocked_id,
      const std::map<std::string, int>& attempts) {
    // file-derived states override/extend the in-memory view
    std::map<std::string, ResultRecord> results;
    if (fs::exists(session.dir3)) {
      for (const auto& e : fs::directory_iterator(session.dir3)) {
        std::string name = e.path().filename().string();
        if (name.rfind("result_", 0) != 0 || e.path().extension() != ".yaml")
          continue;
        try {
          ResultRecord r = ResultRecord::from_kv(KvDoc::parse(read_file(e.path())));
          results[r.job_id] = r;
          state[r.job_id] = r.status;
        } catch (const std::exception&) {
        }
      }
    }
    std::string marker_id = blocked_id;
    if (marker_id.empty() && fs::exists(session.blocked_marker())) {
      try {
        marker_id = KvDoc::parse(read_file(session.blocked_marker())).get("job_id");
      } catch (const std::exception&) {
      }
    }
    if (fs::exists(session.dir1)) {
      for (const auto& e : fs::directory_iterator(session.dir1)) {
        std::string name = e.path().filename().string();
        if (name.rfind("job_", 0) != 0 || e.path().extension() != ".yaml") continue;
        std::string id = e.path().stem().string().substr(4);
        if (!state.count(id)) state[id] = "queued";
      }
    }
    if (!marker_id.empty()) state[marker_id] = "blocked";
    std::map<std::string, int> tally;
    std::ostringstream out;
    for (const auto& [id, st] : state) {
      out << "job " << id << ": " << st;
      auto ri = results.find(id);
      if (ri != results.end())
        out << " attempts=" << ri->second.attempts;
      else if (attempts.count(id))
        out << " attempts=" << attempts.at(id);
      if (id == marker_id) out << " (awaiting operator resume)";
      out << "\n";
      ++tally[st];
    }
    out << "total: " << state.size();
    for (const char* s : {"queued", "in_flight", "ok", "failed_criteria", "blocked"})
      out << " " << s << ": " << (tally.count(s) ? tally[s] : 0);
    out << "\n";
    // throughput: ok results completed within the last minute
    int recent = 0;
    auto now = std::chrono::system_clock::now();
    if (fs::exists(session.dir3)) {
      for (const auto& e : fs::directory_iterator(session.dir3)) {
        std::string name = e.path().filename().string();
        if (name.rfind("result_", 0) != 0 || e.path().extension() != ".yaml")
          continue;
        auto mtime = fs::last_write_time(e.path());
        auto age = std::chrono::duration_cast<std::chrono::seconds>(
            fs::file_time_type::clock::now() - mtime);
        if (age.count() <= 60) ++recent;
      }
    }
    (void)now;
    out << "throughput: " << recent << " results/min\n";
    return out.str();
  }

  SessionPaths session_;
  CircuitBackend& backend_;
  HostConfig cfg_;
  std::deque<JobRecord> pending_;
  std::vector<InFlight> in_flight_;
  std::set<std::string> completed_;
  std::set<std::string> seen_;
  std::map<std::string, int> attempts_;
  std::map<std::string, std::chrono::steady_clock::time_point> discovered_;
  std::optional<JobRecord> blocked_;
};

/// Operator command: clear the blocked marker so the host retries the failed
/// circuit.
inline bool host_resume(const SessionPaths& session) {
  if (!fs::exists(session.blocked_marker())) return false;
  fs::remove(session.blocked_marker());
  return true;
}

inline std::vector<std::string> quarantine_list(const SessionPaths& session) {
  std::vector<std::string> out;
  if (!fs::exists(session.quarantine)) return out;
  for (const auto& e : fs::directory_iterator(session.quarantine)) {
    if (e.path().filename() == "quarantine.log") continue;
    out.push_back(e.path().filename().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace cafqa
