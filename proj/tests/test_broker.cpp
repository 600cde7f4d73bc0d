#include <doctest.h>

#include <filesystem>

#include "cafqa/broker.hpp"
#include "cafqa/qasm.hpp"
#include "test_util.hpp"

using namespace cafqa;
namespace fsys = std::filesystem;

namespace {

struct TempSession {
  SessionPaths paths;
  TempSession() {
    static int counter = 0;
    fsys::path root = fsys::temp_directory_path() /
                      ("broker_test_" + std::to_string(::getpid()) + "_" +
                       std::to_string(counter++));
    paths = SessionPaths::at(root);
    paths.create_dirs();
  }
  ~TempSession() { fsys::remove_all(paths.root); }
};

std::string bell_qasm() {
  Circuit c;
  c.n_qubits = 2;
  c.n_clbits = 2;
  c.add(GateKind::H, {0});
  c.add(GateKind::Cx, {0, 1});
  c.measure_all();
  return serialize_qasm(c);
}

JobRecord make_job(std::uint64_t n, std::uint64_t shots = 300) {
  JobRecord j;
  j.job_id = format_job_id(n);
  j.circuit_qasm = bell_qasm();
  j.shots = shots;
  j.metadata["seed"] = std::to_string(1000 + n);
  return j;
}

void run_until(Host& host, std::size_t target_completed, int max_rounds = 3000) {
  for (int i = 0; i < max_rounds; ++i) {
    host.step();
    if (host.completed_count() >= target_completed || host.is_blocked()) return;
    std::this_thread::sleep_for(std::chrono::milliseconds(1));
  }
}

// Backend that fails the first `n_failures` executions, then delegates.
class FlakyBackend : public CircuitBackend {
 public:
  explicit FlakyBackend(int n_failures) : remaining_(n_failures) {}
  Histogram execute(const Circuit& c, std::uint64_t shots,
                    std::uint64_t seed) override {
    ++calls_;
    if (remaining_-- > 0) throw std::runtime_error("transient device fault");
    return run_circuit(c, shots, std::nullopt, seed);
  }
  int calls() const { return calls_; }

 private:
  std::atomic<int> remaining_;
  std::atomic<int> calls_{0};
};

}  // namespace

TEST_CASE("job id formatting") {
  CHECK(format_job_id(0) == "000000");
  CHECK(format_job_id(42) == "000042");
  CHECK(format_job_id(123456) == "123456");
}

TEST_CASE("JobRecord kv round-trip") {
  JobRecord j = make_job(7);
  j.expected_distribution = {{"00", 0.5}, {"11", 0.5}};
  j.created_at = "2024-01-01T00:00:00Z";
  KvDoc doc = KvDoc::parse(j.to_kv().serialize());
  JobRecord back = JobRecord::from_kv(doc);
  CHECK(back.job_id == j.job_id);
  CHECK(back.shots == j.shots);
  CHECK(back.circuit_qasm == j.circuit_qasm);
  CHECK(back.metadata == j.metadata);
  CHECK(back.expected_distribution == j.expected_distribution);
  CHECK(back.created_at == j.created_at);
}

TEST_CASE("JobRecord validation") {
  JobRecord j = make_job(1);
  j.job_id = "12ab";
  CHECK_THROWS_AS(j.validate(), std::invalid_argument);
  j = make_job(1);
  j.shots = 0;
  CHECK_THROWS_AS(j.validate(), std::invalid_argument);
  j = make_job(1);
  j.expected_distribution = {{"00", 0.7}, {"11", 0.7}};  // sums to 1.4
  CHECK_THROWS_AS(JobRecord::from_kv(KvDoc::parse(j.to_kv().serialize())),
                  std::invalid_argument);
}

TEST_CASE("ResultRecord kv round-trip") {
  ResultRecord r;
  r.job_id = "000003";
  r.status = "ok";
  r.counts = {{"00", 151}, {"11", 149}};
  r.attempts = 2;
  r.queued_ms = 12;
  r.exec_ms = 345;
  ResultRecord back = ResultRecord::from_kv(KvDoc::parse(r.to_kv().serialize()));
  CHECK(back.job_id == r.job_id);
  CHECK(back.status == r.status);
  CHECK(back.counts == r.counts);
  CHECK(back.attempts == r.attempts);
  CHECK(back.queued_ms == r.queued_ms);
  CHECK(back.exec_ms == r.exec_ms);
}

TEST_CASE("client_submit writes one file per job and rejects duplicates") {
  TempSession s;
  std::vector<JobRecord> jobs{make_job(1), make_job(2)};
  client_submit(jobs, s.paths);
  CHECK(fsys::exists(s.paths.job_file("000001")));
  CHECK(fsys::exists(s.paths.job_file("000002")));
  CHECK_THROWS_AS(client_submit({make_job(2)}, s.paths), std::invalid_argument);
  std::vector<JobRecord> dup{make_job(5), make_job(5)};
  CHECK_THROWS_AS(client_submit(dup, s.paths), std::invalid_argument);
  // the failed batches must not have left partial files
  CHECK_FALSE(fsys::exists(s.paths.job_file("000005")));
}

TEST_CASE("return criteria TV computation") {
  Histogram h;
  h.shots = 300;
  h.counts = {{"00", 150}, {"11", 150}};
  SUBCASE("perfect match passes") {
    auto out = check_return_criteria(h, {{"00", 0.5}, {"11", 0.5}}, 0.5);
    CHECK(out.pass);
    CHECK(out.deviation == doctest::Approx(0.0));
  }
  SUBCASE("uniform-vs-peaked example exceeds the threshold") {
    Histogram u;
    u.shots = 400;
    u.counts = {{"00", 100}, {"01", 100}, {"10", 100}, {"11", 100}};
    auto out = check_return_criteria(u, {{"00", 1.0}}, 0.5);
    CHECK_FALSE(out.pass);
    CHECK(out.deviation == doctest::Approx(0.75));
  }
  SUBCASE("deviation exactly at the threshold passes") {
    Histogram u;
    u.shots = 100;
    u.counts = {{"0", 50}, {"1", 50}};
    auto out = check_return_criteria(u, {{"0", 1.0}}, 0.5);
    CHECK(out.pass);
    CHECK(out.deviation == doctest::Approx(0.5));
  }
  SUBCASE("empty expected distribution auto-passes") {
    auto out = check_return_criteria(h, {}, 0.5);
    CHECK(out.pass);
    CHECK(out.deviation == 0.0);
  }
  SUBCASE("disjoint supports give TV 1") {
    Histogram d;
    d.shots = 10;
    d.counts = {{"01", 10}};
    auto out = check_return_criteria(d, {{"10", 1.0}}, 0.5);
    CHECK_FALSE(out.pass);
    CHECK(out.deviation == doctest::Approx(1.0));
  }
}

TEST_CASE("host executes submitted jobs end to end") {
  TempSession s;
  std::vector<JobRecord> jobs;
  for (int i = 1; i <= 5; ++i) jobs.push_back(make_job(std::uint64_t(i)));
  client_submit(jobs, s.paths);
  SimCircuitBackend backend;
  Host host(s.paths, backend);
  run_until(host, 5);
  CHECK(host.completed_count() == 5);
  std::vector<std::string> ids;
  for (const auto& j : jobs) ids.push_back(j.job_id);
  auto out = client_await(ids, s.paths, std::chrono::milliseconds(1),
                          std::chrono::milliseconds(2000));
  CHECK(out.missing.empty());
  REQUIRE(out.results.size() == 5);
  for (const auto& r : out.results) {
    CHECK(r.status == "ok");
    CHECK(r.attempts == 1);
    std::uint64_t total = 0;
    for (const auto& [k, v] : r.counts) {
      CHECK((k == "00" || k == "11"));
      total += v;
    }
    CHECK(total == 300);
  }
  // journal has one line per completed job
  std::istringstream journal(read_file(s.paths.journal()));
  std::set<std::string> logged;
  std::string line;
  while (std::getline(journal, line))
    if (!line.empty()) logged.insert(line);
  CHECK(logged == std::set<std::string>(ids.begin(), ids.end()));
}

TEST_CASE("per-circuit seeds make host results reproducible") {
  Histogram first;
  for (int round = 0; round < 2; ++round) {
    TempSession s;
    client_submit({make_job(1)}, s.paths);
    SimCircuitBackend backend;
    Host host(s.paths, backend);
    run_until(host, 1);
    auto r = ResultRecord::from_kv(
        KvDoc::parse(read_file(s.paths.result_file("000001"))));
    if (round == 0)
      first.counts = r.counts;
    else
      CHECK(r.counts == first.counts);
  }
}

TEST_CASE("transient backend failures are retried") {
  TempSession s;
  client_submit({make_job(1)}, s.paths);
  FlakyBackend backend(2);  // fail twice, succeed on attempt 3
  Host host(s.paths, backend, HostConfig{});
  run_until(host, 1);
  CHECK(host.completed_count() == 1);
  CHECK_FALSE(host.is_blocked());
  auto r = ResultRecord::from_kv(
      KvDoc::parse(read_file(s.paths.result_file("000001"))));
  CHECK(r.status == "ok");
  CHECK(r.attempts == 3);
}

TEST_CASE("persistent criteria failure blocks the session after retries") {
  TempSession s;
  JobRecord j = make_job(1);
  j.expected_distribution = {{"00", 1.0}};  // uniform backend deviates by 0.75
  client_submit({j}, s.paths);
  UniformCircuitBackend backend;
  HostConfig cfg;
  cfg.deviation_threshold = 0.5;
  cfg.retry_limit = 3;
  Host host(s.paths, backend, cfg);
  for (int i = 0; i < 200 && !host.is_blocked(); ++i) {
    host.step();
    std::this_thread::sleep_for(std::chrono::milliseconds(1));
  }
  CHECK(host.is_blocked());
  CHECK(fsys::exists(s.paths.blocked_marker()));
  auto r = ResultRecord::from_kv(
      KvDoc::parse(read_file(s.paths.result_file("000001"))));
  CHECK(r.status == "blocked");
  CHECK(r.attempts == 4);  // initial attempt + retry_limit retries
  // the queue is halted: a job submitted now must not run while blocked
  client_submit({make_job(2)}, s.paths);
  for (int i = 0; i < 20; ++i) host.step();
  CHECK_FALSE(fsys::exists(s.paths.result_file("000002")));
  // client_await treats blocked results as still pending
  auto out = client_await({"000001"}, s.paths, std::chrono::milliseconds(1),
                          std::chrono::milliseconds(30));
  CHECK(out.results.empty());
  REQUIRE(out.missing.size() == 1);
}

TEST_CASE("resume requeues the blocked job with a fresh attempt count") {
  TempSession s;
  client_submit({make_job(1)}, s.paths);
  FlakyBackend backend(4);  // exhausts the initial attempt plus 3 retries
  Host host(s.paths, backend);
  for (int i = 0; i < 200 && !host.is_blocked(); ++i) {
    host.step();
    std::this_thread::sleep_for(std::chrono::milliseconds(1));
  }
  REQUIRE(host.is_blocked());
  CHECK(host_resume(s.paths));
  CHECK_FALSE(host_resume(s.paths));  // second resume is a no-op
  client_submit({make_job(2)}, s.paths);  // the queue continues after resume
  run_until(host, 2);
  CHECK(host.completed_count() == 2);
  auto r1 = ResultRecord::from_kv(
      KvDoc::parse(read_file(s.paths.result_file("000001"))));
  CHECK(r1.status == "ok");
  CHECK(r1.attempts == 1);  // attempt count restarted after resume
  auto r2 = ResultRecord::from_kv(
      KvDoc::parse(read_file(s.paths.result_file("000002"))));
  CHECK(r2.status == "ok");
}

TEST_CASE("restart resumes at the first unfinished job without re-execution") {
  TempSession s;
  std::vector<JobRecord> jobs;
  std::vector<std::string> ids;
  for (int i = 1; i <= 4; ++i) {
    jobs.push_back(make_job(std::uint64_t(i)));
    ids.push_back(jobs.back().job_id);
  }
  client_submit(jobs, s.paths);
  SimCircuitBackend backend;
  HostConfig serial;
  serial.max_in_flight = 1;  // deterministic exec.log for the re-run check
  {
    Host first(s.paths, backend, serial);
    run_until(first, 2);  // partial progress, then "crash"
  }
  Host second(s.paths, backend, serial);
  run_until(second, 4);
  auto out = client_await(ids, s.paths, std::chrono::milliseconds(1),
                          std::chrono::milliseconds(2000));
  CHECK(out.missing.empty());
  CHECK(out.results.size() == 4);
  // completed jobs were not re-executed: the exec log only grew by the
  // remaining jobs
  std::map<std::string, int> runs;
  {
    std::istringstream in(read_file(s.paths.exec_log()));
    std::string id, attempt;
    while (in >> id >> attempt) ++runs[id];
  }
  for (const auto& id : ids) CHECK(runs[id] == 1);
}

TEST_CASE("recovery journals ok results that missed their journal line") {
  TempSession s;
  // simulate a crash between the result write and the journal append
  ResultRecord r;
  r.job_id = "000001";
  r.status = "ok";
  r.counts = {{"00", 300}};
  r.attempts = 1;
  write_file_atomic(s.paths.result_file(r.job_id), r.to_kv().serialize());
  client_submit({make_job(1)}, s.paths);
  SimCircuitBackend backend;
  Host host(s.paths, backend);
  CHECK(host.completed_count() == 1);
  for (int i = 0; i < 10; ++i) host.step();
  // the stored result is untouched (not re-executed)
  auto back = ResultRecord::from_kv(
      KvDoc::parse(read_file(s.paths.result_file("000001"))));
  CHECK(back.counts == r.counts);
  std::string journal = read_file(s.paths.journal());
  CHECK(journal.find("000001") != std::string::npos);
}

TEST_CASE("unparseable job files are quarantined") {
  TempSession s;
  write_file_atomic(s.paths.job_file("000001"), "schema_version: 1\n");  // incomplete
  write_file_atomic(s.paths.dir1 / "job_000002.yaml",
                    "this is not a kv document at all\n");
  JobRecord bad_qasm = make_job(3);
  bad_qasm.circuit_qasm = "OPENQASM 2.0;\nqreg q[1];\ncreg c[1];\nbogus q[0];\n";
  write_file_atomic(s.paths.job_file(bad_qasm.job_id),
                    bad_qasm.to_kv().serialize());
  client_submit({make_job(4)}, s.paths);
  SimCircuitBackend backend;
  Host host(s.paths, backend);
  run_until(host, 1);
  CHECK(host.completed_count() == 1);
  auto q = quarantine_list(s.paths);
  CHECK(q == std::vector<std::string>{"job_000001.yaml", "job_000002.yaml",
                                      "job_000003.yaml"});
  CHECK_FALSE(fsys::exists(s.paths.job_file("000001")));
  std::string log = read_file(s.paths.quarantine_log());
  CHECK(log.find("job_000002.yaml") != std::string::npos);
}

TEST_CASE("max_in_flight bounds concurrent dispatch") {
  TempSession s;
  std::vector<JobRecord> jobs;
  for (int i = 1; i <= 6; ++i) jobs.push_back(make_job(std::uint64_t(i)));
  client_submit(jobs, s.paths);

  // backend that records its peak concurrency
  class CountingBackend : public CircuitBackend {
   public:
    Histogram execute(const Circuit& c, std::uint64_t shots,
                      std::uint64_t seed) override {
      int now = ++active_;
      int prev = peak_.load();
      while (now > prev && !peak_.compare_exchange_weak(prev, now)) {
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
      --active_;
      return run_circuit(c, shots, std::nullopt, seed);
    }
    int peak() const { return peak_.load(); }

   private:
    std::atomic<int> active_{0};
    std::atomic<int> peak_{0};
  } backend;

  HostConfig cfg;
  cfg.max_in_flight = 2;
  Host host(s.paths, backend, cfg);
  run_until(host, 6);
  CHECK(host.completed_count() == 6);
  CHECK(backend.peak() <= 2);
  CHECK(backend.peak() >= 1);
}

TEST_CASE("status report lists jobs, tally, and throughput") {
  TempSession s;
  client_submit({make_job(1), make_job(2)}, s.paths);
  SimCircuitBackend backend;
  Host host(s.paths, backend);
  run_until(host, 2);
  std::string st = host.status_text();
  CHECK(st.find("job 000001: ok") != std::string::npos);
  CHECK(st.find("job 000002: ok") != std::string::npos);
  CHECK(st.find("total: 2") != std::string::npos);
  CHECK(st.find("ok: 2") != std::string::npos);
  CHECK(st.find("throughput:") != std::string::npos);
  // the external snapshot sees the same files
  std::string snap = Host::status_snapshot(s.paths);
  CHECK(snap.find("job 000001: ok") != std::string::npos);
}

TEST_CASE("client_await reports missing jobs on timeout") {
  TempSession s;
  auto out = client_await({"000009"}, s.paths, std::chrono::milliseconds(1),
                          std::chrono::milliseconds(20));
  CHECK(out.results.empty());
  CHECK(out.missing == std::vector<std::string>{"000009"});
}
