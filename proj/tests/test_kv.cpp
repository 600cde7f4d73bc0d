#include <doctest.h>

#include <filesystem>
#include <thread>

#include "cafqa/kv.hpp"
#include "cafqa/rng.hpp"

using namespace cafqa;
namespace fs = std::filesystem;

TEST_CASE("set/get round-trip with order preserved") {
  KvDoc doc;
  doc.set("schema_version", "1");
  doc.set_int("shots", 300);
  doc.set_double("threshold", 0.5);
  doc.set("metadata.seed", "12345");
  CHECK(doc.get("schema_version") == "1");
  CHECK(doc.get_int("shots") == 300);
  CHECK(doc.get_double("threshold") == 0.5);
  CHECK(doc.serialize() ==
        "schema_version: 1\n"
        "shots: 300\n"
        "threshold: 0.5\n"
        "metadata.seed: 12345\n");
}

TEST_CASE("overwrite keeps the original position") {
  KvDoc doc;
  doc.set("a", "1");
  doc.set("b", "2");
  doc.set("a", "3");
  CHECK(doc.serialize() == "a: 3\nb: 2\n");
}

TEST_CASE("missing and mistyped keys") {
  KvDoc doc;
  doc.set("x", "hello");
  CHECK_THROWS_AS(doc.get("y"), std::out_of_range);
  CHECK(doc.get_or("y", "dflt") == "dflt");
  CHECK_THROWS_AS(doc.get_int("x"), std::invalid_argument);
  CHECK_THROWS_AS(doc.get_double("x"), std::invalid_argument);
  CHECK_FALSE(doc.has("y"));
  CHECK(doc.has("x"));
}

TEST_CASE("parse handles comments, blanks, and CRLF") {
  KvDoc doc = KvDoc::parse("# header\r\n\r\na: 1\r\nb:  spaced value\r\n");
  CHECK(doc.get("a") == "1");
  CHECK(doc.get("b") == "spaced value");
}

TEST_CASE("block strings round-trip") {
  KvDoc doc;
  doc.set("circuit", "OPENQASM 2.0;\nqreg q[2];\ncreg c[2];\n");
  doc.set("after", "yes");
  std::string text = doc.serialize();
  KvDoc back = KvDoc::parse(text);
  CHECK(back.get("circuit") == "OPENQASM 2.0;\nqreg q[2];\ncreg c[2];\n");
  CHECK(back.get("after") == "yes");
  CHECK(back.serialize() == text);
}

TEST_CASE("doubles survive serialization bit-for-bit") {
  KvDoc doc;
  double vals[] = {0.1 + 0.2, -1.0 / 3.0, 1e-300, 6.022e23};
  for (int i = 0; i < 4; ++i) doc.set_double("v" + std::to_string(i), vals[i]);
  KvDoc back = KvDoc::parse(doc.serialize());
  for (int i = 0; i < 4; ++i)
    CHECK(back.get_double("v" + std::to_string(i)) == vals[i]);
}

TEST_CASE("section extracts dotted keys in order") {
  KvDoc doc;
  doc.set("counts.00", "150");
  doc.set("other", "x");
  doc.set("counts.11", "150");
  auto sec = doc.section("counts");
  REQUIRE(sec.size() == 2);
  CHECK(sec[0] == std::pair<std::string, std::string>{"00", "150"});
  CHECK(sec[1] == std::pair<std::string, std::string>{"11", "150"});
  CHECK(doc.section("count").empty());
}

TEST_CASE("malformed lines are rejected with a line number") {
  try {
    KvDoc::parse("a: 1\nnot a kv line\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line == 2);
  }
  CHECK_THROWS_AS(KvDoc::parse(": novalue\n"), ParseError);
}

TEST_CASE("atomic writes leave no temp files and replace contents") {
  fs::path dir = fs::temp_directory_path() /
                 ("kvtest_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  fs::path f = dir / "doc.yaml";
  write_file_atomic(f, "a: 1\n");
  write_file_atomic(f, "a: 2\n");
  CHECK(read_file(f) == "a: 2\n");
  int entries = 0;
  for (const auto& e : fs::directory_iterator(dir)) {
    (void)e;
    ++entries;
  }
  CHECK(entries == 1);
  fs::remove_all(dir);
}

TEST_CASE("concurrent atomic writers never corrupt the file") {
  fs::path dir = fs::temp_directory_path() /
                 ("kvtest_mt_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  fs::path f = dir / "shared.yaml";
  auto writer = [&](int id) {
    for (int i = 0; i < 50; ++i)
      write_file_atomic(f, "writer: " + std::to_string(id) + "\nvalue: " +
                               std::to_string(i) + "\n");
  };
  std::thread t1(writer, 1), t2(writer, 2);
  t1.join();
  t2.join();
  KvDoc doc = KvDoc::parse(read_file(f));
  CHECK(doc.has("writer"));
  CHECK(doc.has("value"));
  fs::remove_all(dir);
}

TEST_CASE("read_file on a missing path throws") {
  CHECK_THROWS_AS(read_file("/nonexistent/definitely/missing.yaml"),
                  std::runtime_error);
}
