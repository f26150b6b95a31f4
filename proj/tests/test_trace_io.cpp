#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "bugloc/errors.hpp"
#include "bugloc/trace_io.hpp"

using namespace bugloc;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("bugloc-io-" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream(p) << content;
}

CounterTrace random_trace(std::mt19937_64& rng, Eigen::Index t, Eigen::Index c) {
  CounterTrace trace;
  std::uniform_real_distribution<double> u(0.0, 1e6);
  trace.samples.resize(t, c);
  trace.ipc.resize(t);
  for (Eigen::Index i = 0; i < t; ++i) {
    for (Eigen::Index j = 0; j < c; ++j) trace.samples(i, j) = u(rng);
    trace.ipc[i] = u(rng) / 1e6;
  }
  for (Eigen::Index j = 0; j < c; ++j)
    trace.counter_names.push_back("ctr" + std::to_string(j));
  trace.window_cycles = 100000;
  return trace;
}

}  // namespace

TEST_CASE("trace round trip preserves every value exactly") {
  TempDir dir;
  std::mt19937_64 rng(42);
  for (int rep = 0; rep < 5; ++rep) {
    CounterTrace t = random_trace(rng, 17 + rep, 4);
    const fs::path p = dir.path / "t.csv";
    write_trace(t, p);
    CounterTrace back = load_trace(p);
    back.window_cycles = t.window_cycles;
    REQUIRE(back.steps() == t.steps());
    REQUIRE(back.counters() == t.counters());
    CHECK(back.counter_names == t.counter_names);
    CHECK((back.samples - t.samples).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.ipc - t.ipc).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("trace writer emits byte-identical files on rewrite") {
  TempDir dir;
  std::mt19937_64 rng(7);
  CounterTrace t = random_trace(rng, 9, 3);
  write_trace(t, dir.path / "a.csv");
  CounterTrace back = load_trace(dir.path / "a.csv");
  back.window_cycles = t.window_cycles;
  write_trace(back, dir.path / "b.csv");
  std::ifstream fa(dir.path / "a.csv"), fb(dir.path / "b.csv");
  std::string a((std::istreambuf_iterator<char>(fa)), {});
  std::string b((std::istreambuf_iterator<char>(fb)), {});
  CHECK(a == b);
}

TEST_CASE("trace loader rejects malformed files") {
  TempDir dir;
  const fs::path p = dir.path / "bad.csv";

  write_file(p, "");
  CHECK_THROWS_AS(load_trace(p), ParseError);  // empty file

  write_file(p, "a,b,ipc\n");
  CHECK_THROWS_AS(load_trace(p), ParseError);  // header only

  write_file(p, "a,b\n1,2\n");
  CHECK_THROWS_AS(load_trace(p), ParseError);  // missing ipc column

  write_file(p, "a,ipc\n1,2,3\n");
  CHECK_THROWS_AS(load_trace(p), SchemaError);  // ragged row

  write_file(p, "a,ipc\n1,x\n");
  CHECK_THROWS_AS(load_trace(p), ParseError);  // non-numeric field

  write_file(p, "a,ipc\n-3,0.5\n");
  CHECK_THROWS_AS(load_trace(p), ValueError);  // negative counter

  CHECK_THROWS_AS(load_trace(dir.path / "absent.csv"), ManifestError);
}

TEST_CASE("trace loader tolerates CRLF and blank lines") {
  TempDir dir;
  const fs::path p = dir.path / "crlf.csv";
  write_file(p, "a,ipc\r\n1,0.5\r\n\r\n2,0.75\r\n");
  CounterTrace t = load_trace(p);
  REQUIRE(t.steps() == 2);
  CHECK(t.samples(1, 0) == 2.0);
  CHECK(t.ipc[1] == 0.75);
}

TEST_CASE("manifest round trip") {
  TempDir dir;
  Manifest m;
  m.window_cycles = 50000;
  m.splits["arch00"] = Split::Train;
  m.splits["arch01"] = Split::Test;
  m.categories["bugA-v1"] = BugCategory::SeenVariation;
  m.categories["bugA-v3"] = BugCategory::UnseenVariation;
  m.categories["bugB-v1"] = BugCategory::UnseenType;
  ManifestEntry e;
  e.path = "arch00/w00__bugA-v1.csv";
  e.workload_id = "w00";
  e.arch_id = "arch00";
  e.label = UnitLabel::Memory;
  e.bug_id = "bugA-v1";
  m.traces.push_back(e);
  e.path = "arch00/w00__bugfree.csv";
  e.label = UnitLabel::BugFree;
  e.bug_id.reset();
  m.traces.push_back(e);

  save_manifest(m, dir.path / "manifest.json");
  Manifest back = load_manifest(dir.path / "manifest.json");
  CHECK(back.window_cycles == m.window_cycles);
  CHECK(back.splits == m.splits);
  CHECK(back.categories == m.categories);
  REQUIRE(back.traces.size() == 2);
  CHECK(back.traces[0].path == m.traces[0].path);
  CHECK(back.traces[0].label == UnitLabel::Memory);
  CHECK(back.traces[0].bug_id == m.traces[0].bug_id);
  CHECK_FALSE(back.traces[1].bug_id.has_value());
}

TEST_CASE("manifest loader rejects schema violations") {
  TempDir dir;
  const fs::path p = dir.path / "m.json";
  write_file(p, "{not json");
  CHECK_THROWS_AS(load_manifest(p), ParseError);
  write_file(p, "{\"version\":1}");
  CHECK_THROWS_AS(load_manifest(p), ManifestError);
  write_file(p,
             "{\"version\":1,\"window_cycles\":0,\"traces\":[{\"path\":\"x\","
             "\"workload_id\":\"w\",\"arch_id\":\"a\",\"label\":\"Fetch\"}],"
             "\"splits\":{},\"categories\":{}}");
  CHECK_THROWS_AS(load_manifest(p), ManifestError);  // non-positive window
  CHECK_THROWS_AS(load_manifest(dir.path / "absent.json"), ManifestError);
}

TEST_CASE("dataset loader stamps ids, sorts traces and enforces invariants") {
  TempDir dir;
  std::mt19937_64 rng(3);
  fs::create_directories(dir.path / "arch00");
  CounterTrace t = random_trace(rng, 8, 2);
  write_trace(t, dir.path / "arch00" / "w01__bugfree.csv");
  write_trace(t, dir.path / "arch00" / "w00__bugfree.csv");

  Manifest m;
  m.window_cycles = 100000;
  m.splits["arch00"] = Split::Train;
  for (const char* w : {"w01", "w00"}) {
    ManifestEntry e;
    e.path = std::string("arch00/") + w + "__bugfree.csv";
    e.workload_id = w;
    e.arch_id = "arch00";
    e.label = UnitLabel::BugFree;
    m.traces.push_back(e);
  }
  save_manifest(m, dir.path / "manifest.json");

  Dataset ds = load_dataset(dir.path / "manifest.json");
  REQUIRE(ds.traces.size() == 2);
  CHECK(ds.traces[0].workload_id == "w00");  // sorted
  CHECK(ds.traces[1].workload_id == "w01");
  CHECK(ds.workloads == std::vector<std::string>{"w00", "w01"});
  CHECK(ds.traces[0].window_cycles == 100000);
  CHECK(ds.units.size() == kNumUnits);

  // missing trace file
  m.traces[0].path = "arch00/nonexistent.csv";
  save_manifest(m, dir.path / "manifest.json");
  CHECK_THROWS_AS(load_dataset(dir.path / "manifest.json"), ManifestError);

  // architecture without split assignment
  m.traces[0].path = "arch00/w01__bugfree.csv";
  m.traces[0].arch_id = "arch77";
  save_manifest(m, dir.path / "manifest.json");
  CHECK_THROWS_AS(load_dataset(dir.path / "manifest.json"), ManifestError);
}
