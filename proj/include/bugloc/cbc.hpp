#ifndef BUGLOC_CBC_HPP
#define BUGLOC_CBC_HPP

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "bugloc/convnet.hpp"
#include "bugloc/gbdt.hpp"
#include "bugloc/types.hpp"

namespace bugloc {

// One-vs-all bank over the counter superset: one Logistic GBDT per
// (workload, unit) scoring each time step, plus optional per-trace convnets.
struct CbcConfig {
  GbdtConfig gbdt;                     // n_trees defaults to 100
  bool include_bugfree_class = false;
  bool auto_positive_weight = true;    // weight positives by neg/pos ratio
  bool train_trace_models = false;     // per-trace convnet mode
  ConvNetArch convnet_arch;
  ConvTrainConfig convnet_cfg;
  Eigen::Index trace_model_length = 0;  // 0: mean of training lengths
};

struct CbcModelBank {
  std::map<std::pair<std::string, UnitLabel>, GbdtModel> models;
  std::map<std::pair<std::string, UnitLabel>, ConvNet1D> trace_models;
  std::vector<std::string> superset;
  std::vector<std::string> workloads;
  std::vector<UnitLabel> classes;  // the 11 units, plus BugFree when enabled
  bool include_bugfree_class = false;
  Eigen::Index trace_model_length = 0;
  std::vector<std::string> warnings;  // degenerate fits etc.

  void save(const std::filesystem::path& dir) const;
  static CbcModelBank load(const std::filesystem::path& dir);
};

// Rows = time steps, columns = superset counters; counters absent from the
// trace are zero-filled and recorded in `zero_filled`.
Eigen::MatrixXd superset_features(const CounterTrace& trace,
                                  const std::vector<std::string>& superset,
                                  std::set<std::string>* zero_filled = nullptr);

CbcModelBank train_cbc(const Dataset& dataset,
                       const std::vector<std::string>& superset,
                       const CbcConfig& cfg);

enum class CbcMode { PerTimeStep, PerTrace };

// Per-class confidence for one trace: mean per-time-step GBDT score, or the
// convnet's single score in per-trace mode.
std::map<UnitLabel, double> score_trace(const CbcModelBank& bank,
                                        const CounterTrace& trace,
                                        CbcMode mode = CbcMode::PerTimeStep,
                                        std::set<std::string>* zero_filled = nullptr);

struct Verdict {
  ScoreVector scores;
  std::vector<UnitLabel> ranking;
  std::vector<std::string> zero_filled_counters;
};

// Sums per-workload scores across the supplied traces (at most one per
// workload) and ranks descending.
Verdict localize_cbc(const CbcModelBank& bank,
                     const std::vector<CounterTrace>& traces,
                     CbcMode mode = CbcMode::PerTimeStep);

}  // namespace bugloc

#endif
