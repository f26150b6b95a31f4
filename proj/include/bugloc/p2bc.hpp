#ifndef BUGLOC_P2BC_HPP
#define BUGLOC_P2BC_HPP

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "bugloc/cbc.hpp"  // Verdict
#include "bugloc/convnet.hpp"
#include "bugloc/gbdt.hpp"
#include "bugloc/resample.hpp"
#include "bugloc/types.hpp"

namespace bugloc {

// Stage 1: per-workload bug-free IPC regressors over that workload's own
// selected counters (not the superset).
struct IpcModelSet {
  std::map<std::string, GbdtModel> models;                       // workload -> model
  std::map<std::string, std::vector<std::string>> counter_lists; // workload -> counters
  std::map<std::string, double> holdout_rrmse;                   // reported, not asserted

  double average_rrmse() const;
};

struct ErrorTrace {
  std::string workload_id;
  Eigen::VectorXd values;  // predicted - observed IPC per window
};

// Stage 2: per-unit convnets over workload-as-channel error tensors.
struct P2bcStage2 {
  std::map<UnitLabel, ConvNet1D> classifiers;
  std::vector<std::string> channel_order;  // fixed workload list
  Eigen::Index target_length = 0;          // T_R
  bool include_bugfree_class = false;
  std::vector<std::string> warnings;
};

struct P2bcConfig {
  GbdtConfig stage1_gbdt;  // Squared loss, 250 trees default
  ConvNetArch convnet_arch;
  ConvTrainConfig convnet_cfg;
  ResampleConfig resample;
  bool include_bugfree_class = false;
  bool auto_positive_weight = true;

  P2bcConfig() { stage1_gbdt.n_trees = 250; }
};

struct P2bcModel {
  IpcModelSet stage1;
  P2bcStage2 stage2;

  void save(const std::filesystem::path& dir) const;
  static P2bcModel load(const std::filesystem::path& dir);
};

IpcModelSet train_ipc_models(
    const Dataset& dataset,
    const std::map<std::string, std::vector<std::string>>& selections,
    const GbdtConfig& cfg);

ErrorTrace error_trace(const IpcModelSet& models, const CounterTrace& trace);

// Resampled error traces in fixed channel order; missing workloads become
// zero columns and are reported through `missing`.
Eigen::MatrixXd assemble_channels(const std::map<std::string, ErrorTrace>& traces,
                                  const std::vector<std::string>& channel_order,
                                  Eigen::Index target_length,
                                  std::vector<std::string>* missing = nullptr);

P2bcStage2 train_stage2(const Dataset& dataset, const IpcModelSet& models,
                        const P2bcConfig& cfg);

P2bcModel train_p2bc(const Dataset& dataset,
                     const std::map<std::string, std::vector<std::string>>& selections,
                     const P2bcConfig& cfg);

Verdict localize_p2bc(const P2bcModel& model,
                      const std::vector<CounterTrace>& traces);

}  // namespace bugloc

#endif
