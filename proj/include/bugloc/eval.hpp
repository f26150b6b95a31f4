#ifndef BUGLOC_EVAL_HPP
#define BUGLOC_EVAL_HPP

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bugloc/cbc.hpp"
#include "bugloc/types.hpp"

namespace bugloc {

// Anything that turns a set of per-workload traces into a Verdict. CBC, P2BC,
// the ensemble and synthetic baselines all plug in here.
using Localizer = std::function<Verdict(const std::vector<CounterTrace>&)>;

// One scored test instance: every available workload trace of one bug (or of
// a bug-free design) on one test architecture.
struct LabeledVerdict {
  std::string arch_id;
  std::optional<std::string> bug_id;
  UnitLabel truth = UnitLabel::Unknown;
  std::optional<BugCategory> category;
  std::vector<UnitLabel> ranking;
  ScoreVector scores;
  std::optional<double> impact;  // mean relative IPC impact, when known
};

// Fraction of verdicts whose truth appears within the first k ranks.
double topk_accuracy(const std::vector<LabeledVerdict>& verdicts, int k);

struct EvalConfig {
  int max_k = 5;
  bool include_bugfree_cases = false;
  // (arch_id, bug_id) -> measured IPC impact; enables the per-band rows
  std::map<std::pair<std::string, std::string>, double> impacts;
  std::vector<double> band_edges = {0.001, 0.01, 0.05};  // approximate bands
};

struct EvalReport {
  std::vector<LabeledVerdict> verdicts;
  // row name ("overall", "seen", "unseen_variation", "unseen_type",
  // "bugfree", "impact>5%", ...) -> accuracy at k = 1..max_k
  std::map<std::string, std::vector<double>> topk;
  std::map<std::string, long> counts;
  std::vector<double> random_baseline;       // k / 11
  std::map<UnitLabel, double> unit_recall;   // top-1 recall per true unit
  int max_k = 5;
  double seconds = 0.0;
};

// Groups the test split into (architecture, bug instance) cases and scores
// each with the localizer.
std::vector<LabeledVerdict> collect_verdicts(const Dataset& dataset,
                                             const Localizer& localizer,
                                             const EvalConfig& cfg);

EvalReport evaluate(const Dataset& dataset, const Localizer& localizer,
                    const EvalConfig& cfg = {});

void write_report_json(const EvalReport& report, const std::filesystem::path& path);
// Plot-ready rows: row,k,accuracy
void write_report_csv(const EvalReport& report, const std::filesystem::path& path);

struct SensitivityConfig {
  int batch = 5;
  int repetitions = 100;
  std::uint64_t seed = 1;

  void validate() const;
};

struct SensitivityResult {
  std::vector<int> grid;  // strictly decreasing workload counts
  std::vector<double> mean_top1;
  std::vector<double> min_top1;
  std::vector<double> max_top1;
};

// Iteratively discards random workload batches and re-localizes with the
// remaining traces; no retraining, aggregation just sums fewer workloads.
SensitivityResult workload_sensitivity(const CbcModelBank& bank,
                                       const Dataset& dataset,
                                       const SensitivityConfig& cfg);

void write_sensitivity_csv(const SensitivityResult& result,
                           const std::filesystem::path& path);

struct BugFreeAudit {
  std::vector<int> bugfree_ranks;     // 1-based BugFree rank per bug-free case
  long bugfree_first = 0;             // bug-free cases with BugFree ranked first
  long buggy_cases = 0;
  long buggy_with_bugfree_top5 = 0;
  // "arch/bug:rank" for each buggy case with BugFree in the top 5
  std::vector<std::string> offenders;
};

BugFreeAudit bugfree_audit(const CbcModelBank& bank, const Dataset& dataset);

}  // namespace bugloc

#endif
