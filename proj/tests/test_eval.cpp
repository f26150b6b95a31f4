#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include <nlohmann/json.hpp>

#include "bugloc/cbc.hpp"
#include "bugloc/errors.hpp"
#include "bugloc/eval.hpp"

using namespace bugloc;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("bugloc-eval-" + std::to_string(::getpid()) + "-" +
            std::to_string(counter++));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  static inline int counter = 0;
};

CounterTrace make_trace(std::mt19937_64& rng, const std::string& arch,
                        const std::string& workload, UnitLabel label,
                        int steps = 24) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  CounterTrace t;
  t.arch_id = arch;
  t.workload_id = workload;
  t.label = label;
  if (label == UnitLabel::Fetch) t.bug_id = "fetch-bug";
  if (label == UnitLabel::Memory) t.bug_id = "mem-bug";
  t.window_cycles = 1000;
  t.counter_names = {"a", "b", "c"};
  t.samples.resize(steps, 3);
  t.ipc.resize(steps);
  for (int i = 0; i < steps; ++i) {
    t.samples(i, 0) = 10.0 + (label == UnitLabel::Fetch ? 40.0 : 0.0) + gauss(rng);
    t.samples(i, 1) = 10.0 + (label == UnitLabel::Memory ? 40.0 : 0.0) + gauss(rng);
    t.samples(i, 2) = 5.0 + std::abs(gauss(rng));
    t.ipc[i] = (label == UnitLabel::BugFree ? 1.6 : 1.3) + 0.05 * gauss(rng);
  }
  return t;
}

Dataset make_dataset(std::uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  Dataset ds;
  ds.workloads = {"w0", "w1"};
  ds.units = all_units();
  ds.window_cycles = 1000;
  ds.splits = {{"a0", Split::Train}, {"a1", Split::Train}, {"a2", Split::Test}};
  ds.categories = {{"fetch-bug", BugCategory::SeenVariation},
                   {"mem-bug", BugCategory::UnseenVariation}};
  for (const std::string& arch : {"a0", "a1", "a2"})
    for (const std::string& w : {"w0", "w1"})
      for (UnitLabel label :
           {UnitLabel::BugFree, UnitLabel::Fetch, UnitLabel::Memory})
        ds.traces.push_back(make_trace(rng, arch, w, label));
  return ds;
}

// Constant ranking: Fetch first, Memory second, everything else after.
Verdict fixed_verdict(const std::vector<CounterTrace>&) {
  Verdict v;
  double s = double(kNumUnits) + 2.0;
  v.scores.scores[UnitLabel::Fetch] = s--;
  v.scores.scores[UnitLabel::Memory] = s--;
  for (UnitLabel u : all_units())
    if (!v.scores.scores.count(u)) v.scores.scores[u] = s--;
  v.ranking = rank_units(v.scores.scores);
  return v;
}

LabeledVerdict verdict_with(UnitLabel truth, std::vector<UnitLabel> ranking) {
  LabeledVerdict v;
  v.truth = truth;
  v.ranking = std::move(ranking);
  return v;
}

}  // namespace

TEST_CASE("topk accuracy matches manual enumeration") {
  std::vector<LabeledVerdict> vs = {
      verdict_with(UnitLabel::Fetch, {UnitLabel::Fetch, UnitLabel::Decode}),
      verdict_with(UnitLabel::Decode, {UnitLabel::Fetch, UnitLabel::Decode}),
      verdict_with(UnitLabel::Memory, {UnitLabel::Fetch, UnitLabel::Decode}),
      verdict_with(UnitLabel::Commit,
                   {UnitLabel::Commit, UnitLabel::Fetch, UnitLabel::Memory}),
  };
  // by hand: verdicts 0 and 3 hit at k=1; verdict 1 joins at k=2; verdict 2 never
  CHECK(topk_accuracy(vs, 1) == doctest::Approx(2.0 / 4.0));
  CHECK(topk_accuracy(vs, 2) == doctest::Approx(3.0 / 4.0));
  CHECK(topk_accuracy(vs, 3) == doctest::Approx(3.0 / 4.0));
  // k beyond the ranking length cannot invent hits
  CHECK(topk_accuracy(vs, 50) == doctest::Approx(3.0 / 4.0));

  CHECK_THROWS_AS(topk_accuracy({}, 1), EmptyInput);
  CHECK_THROWS_AS(topk_accuracy(vs, 0), ValueError);
}

TEST_CASE("verdict collection groups each test bug across workloads") {
  Dataset ds = make_dataset();
  std::vector<size_t> batch_sizes;
  Localizer spy = [&](const std::vector<CounterTrace>& traces) {
    batch_sizes.push_back(traces.size());
    std::set<std::string> workloads;
    for (const auto& t : traces) {
      CHECK(t.arch_id == "a2");  // only the test split is scored
      workloads.insert(t.workload_id);
    }
    CHECK(workloads.size() == traces.size());  // one trace per workload
    return fixed_verdict(traces);
  };

  EvalConfig cfg;
  cfg.impacts[{"a2", "fetch-bug"}] = 0.03;
  auto verdicts = collect_verdicts(ds, spy, cfg);
  CHECK(verdicts.size() == 2);  // fetch-bug and mem-bug, no bug-free case
  for (size_t n : batch_sizes) CHECK(n == ds.workloads.size());
  for (const auto& v : verdicts) {
    REQUIRE(v.bug_id.has_value());
    if (*v.bug_id == "fetch-bug") {
      CHECK(v.truth == UnitLabel::Fetch);
      CHECK(v.category == BugCategory::SeenVariation);
      REQUIRE(v.impact.has_value());
      CHECK(*v.impact == doctest::Approx(0.03));
    } else {
      CHECK(v.truth == UnitLabel::Memory);
      CHECK(v.category == BugCategory::UnseenVariation);
      CHECK_FALSE(v.impact.has_value());
    }
  }

  EvalConfig with_free = cfg;
  with_free.include_bugfree_cases = true;
  CHECK(collect_verdicts(ds, spy, with_free).size() == 3);

  Dataset no_test = ds;
  no_test.splits["a2"] = Split::Train;
  CHECK_THROWS_AS(collect_verdicts(no_test, spy, cfg), NoTestData);
}

TEST_CASE("evaluation rows follow directly from the fixed ranking") {
  Dataset ds = make_dataset();
  EvalConfig cfg;
  cfg.impacts[{"a2", "fetch-bug"}] = 0.03;  // 1-5% band
  cfg.impacts[{"a2", "mem-bug"}] = 0.2;     // >5% band
  EvalReport report = evaluate(ds, fixed_verdict, cfg);

  // Fetch is always ranked first, Memory second
  REQUIRE(report.topk.count("overall") == 1);
  CHECK(report.topk.at("overall")[0] == doctest::Approx(0.5));
  CHECK(report.topk.at("overall")[1] == doctest::Approx(1.0));
  CHECK(report.counts.at("overall") == 2);
  CHECK(report.topk.at("seen")[0] == doctest::Approx(1.0));
  CHECK(report.topk.at("unseen_variation")[0] == doctest::Approx(0.0));
  CHECK(report.topk.at("unseen_variation")[1] == doctest::Approx(1.0));

  REQUIRE(report.topk.count("impact1-5%") == 1);
  CHECK(report.counts.at("impact1-5%") == 1);
  REQUIRE(report.topk.count("impact>5%") == 1);
  CHECK(report.counts.at("impact>5%") == 1);

  REQUIRE(report.random_baseline.size() == size_t(report.max_k));
  for (int k = 1; k <= report.max_k; ++k)
    CHECK(report.random_baseline[k - 1] ==
          doctest::Approx(double(k) / double(kNumUnits)));

  CHECK(report.unit_recall.at(UnitLabel::Fetch) == doctest::Approx(1.0));
  CHECK(report.unit_recall.at(UnitLabel::Memory) == doctest::Approx(0.0));
  CHECK(report.seconds >= 0.0);
}

TEST_CASE("report writers emit parseable files") {
  TempDir tmp;
  Dataset ds = make_dataset();
  EvalReport report = evaluate(ds, fixed_verdict, EvalConfig{});

  write_report_json(report, tmp.path / "report.json");
  std::ifstream in(tmp.path / "report.json");
  nlohmann::json j = nlohmann::json::parse(in);
  CHECK(j.at("max_k").get<int>() == report.max_k);
  CHECK(j.at("topk").count("overall") == 1);
  CHECK(j.at("verdicts").size() == report.verdicts.size());

  write_report_csv(report, tmp.path / "report.csv");
  std::ifstream csv(tmp.path / "report.csv");
  std::string header;
  std::getline(csv, header);
  CHECK(header == "row,k,accuracy,count");

  CHECK_THROWS_AS(write_report_json(report, tmp.path / "no-dir" / "x.json"),
                  IoError);
}

TEST_CASE("workload sensitivity shrinks the grid and stays in bounds") {
  Dataset ds = make_dataset();
  CbcConfig ccfg;
  ccfg.gbdt.n_trees = 20;
  CbcModelBank bank = train_cbc(ds, {"a", "b", "c"}, ccfg);

  SensitivityConfig cfg;
  cfg.batch = 1;
  cfg.repetitions = 3;
  SensitivityResult result = workload_sensitivity(bank, ds, cfg);
  REQUIRE(result.grid == std::vector<int>{2, 1});
  for (size_t g = 0; g < result.grid.size(); ++g) {
    CHECK(result.min_top1[g] <= result.mean_top1[g] + 1e-12);
    CHECK(result.mean_top1[g] <= result.max_top1[g] + 1e-12);
    CHECK(result.mean_top1[g] >= 0.0);
    CHECK(result.max_top1[g] <= 1.0);
  }
  // this dataset is trivially separable, so the full set of workloads wins
  CHECK(result.mean_top1[0] == doctest::Approx(1.0));

  TempDir tmp;
  write_sensitivity_csv(result, tmp.path / "curve.csv");
  std::ifstream in(tmp.path / "curve.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "workloads,mean_top1,min_top1,max_top1");

  SensitivityConfig bad;
  bad.batch = 0;
  CHECK_THROWS_AS(workload_sensitivity(bank, ds, bad), GridError);
  bad = SensitivityConfig{};
  bad.repetitions = 0;
  CHECK_THROWS_AS(workload_sensitivity(bank, ds, bad), GridError);
}

TEST_CASE("the clean-design audit tallies ranks and offenders") {
  Dataset ds = make_dataset();
  CbcConfig plain;
  plain.gbdt.n_trees = 20;
  CbcModelBank no_free = train_cbc(ds, {"a", "b", "c"}, plain);
  CHECK_THROWS_AS(bugfree_audit(no_free, ds), MissingClass);

  CbcConfig with_free = plain;
  with_free.include_bugfree_class = true;
  CbcModelBank bank = train_cbc(ds, {"a", "b", "c"}, with_free);
  BugFreeAudit audit = bugfree_audit(bank, ds);
  CHECK(audit.bugfree_ranks.size() == 1);  // one clean test design
  CHECK(audit.buggy_cases == 2);
  CHECK(audit.offenders.size() == size_t(audit.buggy_with_bugfree_top5));
  // trivially separable data: the clean case is recognized as clean and the
  // clean class never crowds the top-5 of a buggy verdict
  CHECK(audit.bugfree_first == 1);
  CHECK(audit.buggy_with_bugfree_top5 == 0);
}
