#include "bugloc/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "bugloc/errors.hpp"

namespace bugloc {

namespace {

using nlohmann::json;

bool in_top_k(const LabeledVerdict& v, int k) {
  const auto end = v.ranking.begin() + std::min<size_t>(k, v.ranking.size());
  return std::find(v.ranking.begin(), end, v.truth) != end;
}

std::string category_row(const LabeledVerdict& v) {
  if (v.truth == UnitLabel::BugFree) return "bugfree";
  if (!v.category) return "uncategorized";
  switch (*v.category) {
    case BugCategory::SeenVariation: return "seen";
    case BugCategory::UnseenVariation: return "unseen_variation";
    case BugCategory::UnseenType: return "unseen_type";
  }
  return "uncategorized";
}

std::string pct(double x) {
  std::ostringstream o;
  o << 100.0 * x;
  return o.str();
}

std::string band_row(double impact, const std::vector<double>& edges) {
  std::vector<double> e = edges;
  std::sort(e.begin(), e.end());
  std::string row = "impact<=" + pct(e.front()) + "%";
  for (size_t i = 0; i < e.size(); ++i) {
    if (impact > e[i]) {
      row = i + 1 < e.size()
                ? "impact" + pct(e[i]) + "-" + pct(e[i + 1]) + "%"
                : "impact>" + pct(e[i]) + "%";
    }
  }
  return row;
}

std::vector<double> topk_curve(const std::vector<LabeledVerdict>& verdicts,
                               int max_k) {
  std::vector<double> curve;
  for (int k = 1; k <= max_k; ++k) curve.push_back(topk_accuracy(verdicts, k));
  return curve;
}

// All cases of one dataset grouped as (arch, bug-or-bugfree) -> traces.
std::map<std::pair<std::string, std::string>, std::vector<const CounterTrace*>>
test_groups(const Dataset& dataset, bool include_bugfree) {
  std::map<std::pair<std::string, std::string>, std::vector<const CounterTrace*>>
      groups;
  for (const auto& t : dataset.traces) {
    if (dataset.split_of(t.arch_id) != Split::Test) continue;
    if (t.label == UnitLabel::BugFree && !include_bugfree) continue;
    groups[{t.arch_id, t.bug_id.value_or("")}].push_back(&t);
  }
  return groups;
}

}  // namespace

double topk_accuracy(const std::vector<LabeledVerdict>& verdicts, int k) {
  if (verdicts.empty()) throw EmptyInput("topk_accuracy over zero verdicts");
  if (k < 1) throw ValueError("k must be >= 1");
  long hits = 0;
  for (const auto& v : verdicts) hits += in_top_k(v, k) ? 1 : 0;
  return double(hits) / double(verdicts.size());
}

std::vector<LabeledVerdict> collect_verdicts(const Dataset& dataset,
                                             const Localizer& localizer,
                                             const EvalConfig& cfg) {
  const auto groups = test_groups(dataset, cfg.include_bugfree_cases);
  if (groups.empty()) throw NoTestData("dataset has no test-split instances");

  std::vector<LabeledVerdict> out;
  for (const auto& [key, traces] : groups) {
    std::vector<CounterTrace> batch;
    for (const auto* t : traces) batch.push_back(*t);
    Verdict verdict = localizer(batch);

    LabeledVerdict lv;
    lv.arch_id = key.first;
    if (!key.second.empty()) lv.bug_id = key.second;
    lv.truth = traces.front()->label;
    if (lv.bug_id) lv.category = dataset.category_of(*lv.bug_id);
    lv.ranking = std::move(verdict.ranking);
    lv.scores = std::move(verdict.scores);
    if (lv.bug_id) {
      auto it = cfg.impacts.find({lv.arch_id, *lv.bug_id});
      if (it != cfg.impacts.end()) lv.impact = it->second;
    }
    out.push_back(std::move(lv));
  }
  return out;
}

EvalReport evaluate(const Dataset& dataset, const Localizer& localizer,
                    const EvalConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  EvalReport report;
  report.max_k = cfg.max_k;
  report.verdicts = collect_verdicts(dataset, localizer, cfg);

  std::map<std::string, std::vector<LabeledVerdict>> rows;
  rows["overall"] = report.verdicts;
  for (const auto& v : report.verdicts) {
    rows[category_row(v)].push_back(v);
    if (v.impact) rows[band_row(*v.impact, cfg.band_edges)].push_back(v);
  }
  for (const auto& [name, vs] : rows) {
    report.topk[name] = topk_curve(vs, cfg.max_k);
    report.counts[name] = static_cast<long>(vs.size());
  }
  for (int k = 1; k <= cfg.max_k; ++k)
    report.random_baseline.push_back(double(k) / double(kNumUnits));

  std::map<UnitLabel, std::pair<long, long>> per_unit;  // hits, total
  for (const auto& v : report.verdicts) {
    per_unit[v.truth].second += 1;
    if (!v.ranking.empty() && v.ranking.front() == v.truth)
      per_unit[v.truth].first += 1;
  }
  for (const auto& [u, ht] : per_unit)
    report.unit_recall[u] = double(ht.first) / double(ht.second);

  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

void write_report_json(const EvalReport& report, const std::filesystem::path& path) {
  json j;
  j["max_k"] = report.max_k;
  j["seconds"] = report.seconds;
  j["random_baseline"] = report.random_baseline;
  j["note"] = "impact band edges are approximate";
  for (const auto& [name, curve] : report.topk) {
    j["topk"][name] = curve;
    j["counts"][name] = report.counts.at(name);
  }
  for (const auto& [u, r] : report.unit_recall) j["unit_recall"][to_string(u)] = r;
  json verdicts = json::array();
  for (const auto& v : report.verdicts) {
    json jv;
    jv["arch_id"] = v.arch_id;
    if (v.bug_id) jv["bug_id"] = *v.bug_id;
    jv["truth"] = to_string(v.truth);
    json ranking = json::array();
    for (UnitLabel u : v.ranking) ranking.push_back(to_string(u));
    jv["ranking"] = ranking;
    json scores = json::object();
    for (const auto& [u, s] : v.scores.scores) scores[to_string(u)] = s;
    jv["scores"] = scores;
    if (v.impact) jv["impact"] = *v.impact;
    verdicts.push_back(std::move(jv));
  }
  j["verdicts"] = verdicts;
  std::ofstream out(path);
  if (!out) throw IoError("cannot write report to " + path.string());
  out << j.dump(2) << '\n';
}

void write_report_csv(const EvalReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write report to " + path.string());
  out << "row,k,accuracy,count\n";
  for (const auto& [name, curve] : report.topk)
    for (size_t k = 0; k < curve.size(); ++k)
      out << name << ',' << k + 1 << ',' << curve[k] << ','
          << report.counts.at(name) << '\n';
  for (size_t k = 0; k < report.random_baseline.size(); ++k)
    out << "random_baseline," << k + 1 << ',' << report.random_baseline[k]
        << ",0\n";
}

void SensitivityConfig::validate() const {
  if (batch < 1) throw GridError("sensitivity batch must be >= 1");
  if (repetitions < 1) throw GridError("sensitivity repetitions must be >= 1");
}

SensitivityResult workload_sensitivity(const CbcModelBank& bank,
                                       const Dataset& dataset,
                                       const SensitivityConfig& cfg) {
  cfg.validate();
  const int n_workloads = static_cast<int>(bank.workloads.size());
  if (n_workloads < 1) throw GridError("bank covers no workloads");

  SensitivityResult result;
  for (int n = n_workloads; n > 0; n -= cfg.batch) result.grid.push_back(n);
  result.mean_top1.assign(result.grid.size(), 0.0);
  result.min_top1.assign(result.grid.size(), 1.0);
  result.max_top1.assign(result.grid.size(), 0.0);

  const auto groups = test_groups(dataset, false);
  if (groups.empty()) throw NoTestData("dataset has no buggy test instances");

  std::mt19937_64 rng(cfg.seed);
  for (int rep = 0; rep < cfg.repetitions; ++rep) {
    std::vector<std::string> order = bank.workloads;
    std::shuffle(order.begin(), order.end(), rng);
    for (size_t g = 0; g < result.grid.size(); ++g) {
      const std::set<std::string> kept(order.begin(),
                                       order.begin() + result.grid[g]);
      long hits = 0;
      for (const auto& [key, traces] : groups) {
        std::vector<CounterTrace> batch;
        for (const auto* t : traces)
          if (kept.count(t->workload_id)) batch.push_back(*t);
        if (batch.empty()) continue;
        const Verdict v = localize_cbc(bank, batch);
        if (!v.ranking.empty() && v.ranking.front() == traces.front()->label)
          ++hits;
      }
      const double top1 = double(hits) / double(groups.size());
      result.mean_top1[g] += top1 / double(cfg.repetitions);
      result.min_top1[g] = std::min(result.min_top1[g], top1);
      result.max_top1[g] = std::max(result.max_top1[g], top1);
    }
  }
  return result;
}

void write_sensitivity_csv(const SensitivityResult& result,
                           const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write sensitivity curve to " + path.string());
  out << "workloads,mean_top1,min_top1,max_top1\n";
  for (size_t i = 0; i < result.grid.size(); ++i)
    out << result.grid[i] << ',' << result.mean_top1[i] << ','
        << result.min_top1[i] << ',' << result.max_top1[i] << '\n';
}

BugFreeAudit bugfree_audit(const CbcModelBank& bank, const Dataset& dataset) {
  if (!bank.include_bugfree_class)
    throw MissingClass("bank was trained without the BugFree class");

  BugFreeAudit audit;
  for (const auto& [key, traces] : test_groups(dataset, true)) {
    std::vector<CounterTrace> batch;
    for (const auto* t : traces) batch.push_back(*t);
    const Verdict v = localize_cbc(bank, batch);
    const auto pos =
        std::find(v.ranking.begin(), v.ranking.end(), UnitLabel::BugFree);
    const int rank = pos == v.ranking.end()
                         ? static_cast<int>(v.ranking.size()) + 1
                         : static_cast<int>(pos - v.ranking.begin()) + 1;
    if (traces.front()->label == UnitLabel::BugFree) {
      audit.bugfree_ranks.push_back(rank);
      if (rank == 1) ++audit.bugfree_first;
    } else {
      ++audit.buggy_cases;
      if (rank <= 5) {
        ++audit.buggy_with_bugfree_top5;
        audit.offenders.push_back(key.first + "/" + key.second + ":" +
                                  std::to_string(rank));
      }
    }
  }
  if (audit.bugfree_ranks.empty() && audit.buggy_cases == 0)
    throw EmptyInput("no test traces to audit");
  return audit;
}

}  // namespace bugloc
