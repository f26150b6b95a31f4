#include "bugloc/counter_select.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>

#include "bugloc/errors.hpp"

namespace bugloc {

void SelectionConfig::validate() const {
  if (alpha < 0.0 || alpha > 1.0) throw ConfigError("alpha must be in [0,1]");
  if (beta < 0.0 || beta > 1.0) throw ConfigError("beta must be in [0,1]");
}

double pearson(const Eigen::Ref<const Eigen::VectorXd>& x,
               const Eigen::Ref<const Eigen::VectorXd>& y) {
  if (x.size() != y.size())
    throw LengthMismatch("pearson inputs differ in length");
  if (x.size() < 2) throw LengthMismatch("pearson needs at least 2 samples");
  const double n = static_cast<double>(x.size());
  const Eigen::ArrayXd xc = x.array() - x.mean();
  const Eigen::ArrayXd yc = y.array() - y.mean();
  const double sx = std::sqrt((xc * xc).sum() / n);
  const double sy = std::sqrt((yc * yc).sum() / n);
  if (sx == 0.0 || sy == 0.0) return 0.0;  // degenerate, flagged as zero
  const double cov = (xc * yc).sum() / n;
  return std::clamp(cov / (sx * sy), -1.0, 1.0);
}

namespace {

// Bug-free traces of `workload` from Train architectures, grouped by arch.
std::map<std::string, std::vector<const CounterTrace*>> legacy_traces(
    const Dataset& dataset, const std::string& workload) {
  std::map<std::string, std::vector<const CounterTrace*>> by_arch;
  for (const auto& t : dataset.traces) {
    if (t.workload_id != workload) continue;
    if (t.label != UnitLabel::BugFree) continue;
    if (dataset.split_of(t.arch_id) != Split::Train) continue;
    by_arch[t.arch_id].push_back(&t);
  }
  return by_arch;
}

// Average of |pearson| per architecture, then across architectures.
double averaged_abs_corr(
    const std::map<std::string, std::vector<const CounterTrace*>>& by_arch,
    const std::function<double(const CounterTrace&)>& per_trace) {
  double arch_sum = 0.0;
  for (const auto& [arch, traces] : by_arch) {
    double s = 0.0;
    for (const auto* t : traces) s += per_trace(*t);
    arch_sum += s / static_cast<double>(traces.size());
  }
  return arch_sum / static_cast<double>(by_arch.size());
}

}  // namespace

std::vector<std::string> select_counters(const Dataset& dataset,
                                         const std::string& workload,
                                         const SelectionConfig& cfg) {
  cfg.validate();
  auto by_arch = legacy_traces(dataset, workload);
  if (by_arch.empty())
    throw InsufficientData("no bug-free train traces for workload " + workload);
  for (const auto& [arch, traces] : by_arch)
    for (const auto* t : traces)
      if (t->steps() < 2)
        throw InsufficientData("trace with fewer than 2 windows for " + workload);

  // Counters present in every legacy trace, with per-trace column lookup.
  std::vector<std::string> counters = by_arch.begin()->second.front()->counter_names;
  for (const auto& [arch, traces] : by_arch) {
    for (const auto* t : traces) {
      std::set<std::string> names(t->counter_names.begin(), t->counter_names.end());
      std::erase_if(counters, [&](const std::string& c) { return !names.count(c); });
    }
  }

  auto column_of = [](const CounterTrace& t, const std::string& name) {
    auto it = std::find(t.counter_names.begin(), t.counter_names.end(), name);
    return static_cast<Eigen::Index>(it - t.counter_names.begin());
  };

  // Step 1: IPC-correlation screen.
  std::map<std::string, double> ipc_corr;
  for (const auto& c : counters) {
    ipc_corr[c] = averaged_abs_corr(by_arch, [&](const CounterTrace& t) {
      return std::abs(pearson(t.samples.col(column_of(t, c)), t.ipc));
    });
  }
  std::vector<std::string> survivors;
  for (const auto& c : counters)
    if (ipc_corr[c] >= cfg.alpha) survivors.push_back(c);

  // Descending IPC-correlation magnitude; exact ties by name.
  std::sort(survivors.begin(), survivors.end(),
            [&](const std::string& a, const std::string& b) {
              if (ipc_corr[a] != ipc_corr[b]) return ipc_corr[a] > ipc_corr[b];
              return a < b;
            });

  // Step 2: redundancy pruning against already-kept counters.
  std::vector<std::string> kept;
  for (const auto& c : survivors) {
    bool redundant = false;
    for (const auto& k : kept) {
      double pair = averaged_abs_corr(by_arch, [&](const CounterTrace& t) {
        return std::abs(pearson(t.samples.col(column_of(t, c)),
                                t.samples.col(column_of(t, k))));
      });
      if (pair > cfg.beta) {
        redundant = true;
        break;
      }
    }
    if (!redundant) kept.push_back(c);
  }
  return kept;
}

std::vector<std::string> build_superset(
    const std::map<std::string, std::vector<std::string>>& per_workload) {
  if (per_workload.empty())
    throw EmptyInput("build_superset needs at least one workload selection");
  std::vector<std::string> superset;
  std::set<std::string> seen;
  for (const auto& [w, selection] : per_workload) {  // map is workload-sorted
    for (const auto& c : selection)
      if (seen.insert(c).second) superset.push_back(c);
  }
  return superset;
}

SelectionResult select_all(const Dataset& dataset, const SelectionConfig& cfg) {
  SelectionResult result;
  for (const auto& w : dataset.workloads)
    result.per_workload[w] = select_counters(dataset, w, cfg);
  result.superset = build_superset(result.per_workload);
  return result;
}

}  // namespace bugloc
