#include <doctest.h>

#include <cmath>
#include <random>

#include "bugloc/counter_select.hpp"
#include "bugloc/errors.hpp"

using namespace bugloc;

namespace {

// Straight-line Pearson written independently of the library implementation.
double naive_pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const size_t n = x.size();
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= double(n);
  my /= double(n);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  double r = sxy / std::sqrt(sxx * syy);
  if (r > 1.0) r = 1.0;
  if (r < -1.0) r = -1.0;
  return r;
}

std::vector<double> col(const CounterTrace& t, const std::string& name) {
  size_t j = 0;
  while (t.counter_names[j] != name) ++j;
  std::vector<double> out(t.steps());
  for (Eigen::Index i = 0; i < t.steps(); ++i) out[i] = t.samples(i, j);
  return out;
}

std::vector<double> ipc_of(const CounterTrace& t) {
  return std::vector<double>(t.ipc.data(), t.ipc.data() + t.ipc.size());
}

// A dataset with one workload, several train architectures, and counters that
// mix the IPC signal with noise at random strengths (plus exact duplicates to
// exercise the redundancy step).
Dataset random_dataset(std::mt19937_64& rng, int n_archs, int n_counters,
                       int steps) {
  Dataset ds;
  ds.workloads = {"w00"};
  ds.units = all_units();
  ds.window_cycles = 1000;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int a = 0; a < n_archs; ++a) {
    const std::string arch = "arch" + std::to_string(a);
    ds.splits[arch] = a + 1 < n_archs ? Split::Train : Split::Test;
    CounterTrace t;
    t.workload_id = "w00";
    t.arch_id = arch;
    t.label = UnitLabel::BugFree;
    t.window_cycles = 1000;
    t.ipc.resize(steps);
    for (int i = 0; i < steps; ++i) t.ipc[i] = 1.0 + 0.3 * gauss(rng);
    t.samples.resize(steps, n_counters);
    for (int j = 0; j < n_counters; ++j) {
      t.counter_names.push_back("c" + std::to_string(j));
      const double mix = unif(rng);  // signal strength
      if (j > 0 && unif(rng) < 0.2) {
        t.samples.col(j) = t.samples.col(j - 1) * 2.0;  // exact duplicate
      } else {
        for (int i = 0; i < steps; ++i)
          t.samples(i, j) =
              10.0 + mix * t.ipc[i] + (1.0 - mix) * 0.3 * std::abs(gauss(rng));
      }
    }
    ds.traces.push_back(std::move(t));
  }
  return ds;
}

// Full reimplementation of the two-step selection used as an oracle.
std::vector<std::string> oracle_select(const Dataset& ds, const std::string& w,
                                       double alpha, double beta) {
  std::map<std::string, std::vector<const CounterTrace*>> by_arch;
  for (const auto& t : ds.traces)
    if (t.workload_id == w && t.label == UnitLabel::BugFree &&
        ds.splits.at(t.arch_id) == Split::Train)
      by_arch[t.arch_id].push_back(&t);

  const auto& names = by_arch.begin()->second.front()->counter_names;
  auto avg_abs = [&](auto&& f) {
    double total = 0.0;
    for (const auto& [arch, traces] : by_arch) {
      double s = 0.0;
      for (const auto* t : traces) s += std::abs(f(*t));
      total += s / double(traces.size());
    }
    return total / double(by_arch.size());
  };

  std::map<std::string, double> corr;
  for (const auto& c : names)
    corr[c] = avg_abs(
        [&](const CounterTrace& t) { return naive_pearson(col(t, c), ipc_of(t)); });

  std::vector<std::string> survivors;
  for (const auto& c : names)
    if (corr[c] >= alpha) survivors.push_back(c);
  std::sort(survivors.begin(), survivors.end(),
            [&](const std::string& a, const std::string& b) {
              if (corr[a] != corr[b]) return corr[a] > corr[b];
              return a < b;
            });

  std::vector<std::string> kept;
  for (const auto& c : survivors) {
    bool redundant = false;
    for (const auto& k : kept) {
      double pair = avg_abs([&](const CounterTrace& t) {
        return naive_pearson(col(t, c), col(t, k));
      });
      if (pair > beta) redundant = true;
    }
    if (!redundant) kept.push_back(c);
  }
  return kept;
}

}  // namespace

TEST_CASE("pearson matches a naive implementation and handles edge cases") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int rep = 0; rep < 100; ++rep) {
    const int n = 2 + rep % 40;
    Eigen::VectorXd x(n), y(n);
    for (int i = 0; i < n; ++i) {
      x[i] = gauss(rng);
      y[i] = 0.5 * x[i] + gauss(rng);
    }
    std::vector<double> xv(x.data(), x.data() + n), yv(y.data(), y.data() + n);
    CHECK(pearson(x, y) == doctest::Approx(naive_pearson(xv, yv)).epsilon(1e-12));
  }

  Eigen::VectorXd a = Eigen::VectorXd::LinSpaced(5, 0, 4);
  CHECK(pearson(a, a) == doctest::Approx(1.0));
  CHECK(pearson(a, (-a).eval()) == doctest::Approx(-1.0));
  CHECK(pearson(a, Eigen::VectorXd::Constant(5, 3.0)) == 0.0);  // zero variance
  CHECK_THROWS_AS(pearson(a, Eigen::VectorXd::Zero(4)), LengthMismatch);
  CHECK_THROWS_AS(pearson(Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1)),
                  LengthMismatch);
}

TEST_CASE("two-step selection equals the brute-force oracle on random data") {
  std::mt19937_64 rng(2024);
  SelectionConfig cfg;  // alpha 0.7, beta 0.95
  for (int rep = 0; rep < 25; ++rep) {
    Dataset ds = random_dataset(rng, 3 + rep % 3, 6 + rep % 8, 30 + rep);
    auto got = select_counters(ds, "w00", cfg);
    auto want = oracle_select(ds, "w00", cfg.alpha, cfg.beta);
    CHECK(got == want);
  }
}

TEST_CASE("selection respects alpha and beta monotonically") {
  std::mt19937_64 rng(5);
  Dataset ds = random_dataset(rng, 4, 10, 60);
  SelectionConfig loose{0.0, 1.0};
  SelectionConfig tight{0.9, 0.5};
  auto all = select_counters(ds, "w00", loose);
  auto few = select_counters(ds, "w00", tight);
  CHECK(few.size() <= all.size());
  // everything tightly selected must also appear under the loose config
  for (const auto& c : few)
    CHECK(std::find(all.begin(), all.end(), c) != all.end());
}

TEST_CASE("selection error paths") {
  std::mt19937_64 rng(6);
  Dataset ds = random_dataset(rng, 3, 4, 20);
  SelectionConfig cfg;
  CHECK_THROWS_AS(select_counters(ds, "w99", cfg), InsufficientData);
  SelectionConfig bad;
  bad.alpha = 1.5;
  CHECK_THROWS_AS(select_counters(ds, "w00", bad), ConfigError);
  bad = SelectionConfig{};
  bad.beta = -0.1;
  CHECK_THROWS_AS(select_counters(ds, "w00", bad), ConfigError);

  // single-window traces cannot support a correlation
  for (auto& t : ds.traces) {
    t.samples.conservativeResize(1, Eigen::NoChange);
    t.ipc.conservativeResize(1);
  }
  CHECK_THROWS_AS(select_counters(ds, "w00", cfg), InsufficientData);
}

TEST_CASE("superset preserves first-appearance order without duplicates") {
  std::map<std::string, std::vector<std::string>> per = {
      {"w00", {"b", "a"}},
      {"w01", {"a", "c"}},
      {"w02", {"c", "d", "b"}},
  };
  auto s = build_superset(per);
  CHECK(s == std::vector<std::string>{"b", "a", "c", "d"});
  CHECK_THROWS_AS(build_superset({}), EmptyInput);
}

TEST_CASE("select_all covers every workload and unions the selections") {
  std::mt19937_64 rng(7);
  Dataset ds = random_dataset(rng, 4, 8, 40);
  // add a second workload by cloning with relabeled ids
  std::vector<CounterTrace> extra;
  for (const auto& t : ds.traces) {
    CounterTrace c = t;
    c.workload_id = "w01";
    extra.push_back(std::move(c));
  }
  ds.traces.insert(ds.traces.end(), extra.begin(), extra.end());
  ds.workloads = {"w00", "w01"};

  auto result = select_all(ds, SelectionConfig{});
  REQUIRE(result.per_workload.size() == 2);
  CHECK(result.per_workload.at("w00") == result.per_workload.at("w01"));
  CHECK(result.superset == build_superset(result.per_workload));
  for (const auto& [w, sel] : result.per_workload)
    for (const auto& c : sel)
      CHECK(std::find(result.superset.begin(), result.superset.end(), c) !=
            result.superset.end());
}
