#include "bugloc/p2bc.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "bugloc/errors.hpp"

namespace bugloc {

namespace {

using nlohmann::json;

Eigen::MatrixXd named_features(const CounterTrace& trace,
                               const std::vector<std::string>& names) {
  return superset_features(trace, names);
}

std::vector<UnitLabel> stage2_classes(bool include_bugfree) {
  std::vector<UnitLabel> classes = all_units();
  if (include_bugfree) classes.push_back(UnitLabel::BugFree);
  return classes;
}

}  // namespace

double IpcModelSet::average_rrmse() const {
  if (holdout_rrmse.empty()) return 0.0;
  double s = 0.0;
  for (const auto& [w, v] : holdout_rrmse) s += v;
  return s / double(holdout_rrmse.size());
}

IpcModelSet train_ipc_models(
    const Dataset& dataset,
    const std::map<std::string, std::vector<std::string>>& selections,
    const GbdtConfig& cfg) {
  IpcModelSet set;
  for (const auto& w : dataset.workloads) {
    auto sel = selections.find(w);
    if (sel == selections.end() || sel->second.empty())
      throw MissingWorkload("no counter selection for workload " + w);
    const auto& counters = sel->second;

    std::map<std::string, std::vector<const CounterTrace*>> by_arch;
    for (const auto& t : dataset.traces) {
      if (t.workload_id != w || t.label != UnitLabel::BugFree) continue;
      if (dataset.split_of(t.arch_id) != Split::Train) continue;
      by_arch[t.arch_id].push_back(&t);
    }
    if (by_arch.size() < 2)
      throw NoBugFreeData("workload " + w +
                          " needs bug-free train traces from >= 2 architectures");

    auto stack = [&](const std::set<std::string>& archs) {
      Eigen::Index rows = 0;
      for (const auto& [a, ts] : by_arch)
        if (archs.count(a))
          for (const auto* t : ts) rows += t->steps();
      Eigen::MatrixXd x(rows, static_cast<Eigen::Index>(counters.size()));
      Eigen::VectorXd y(rows);
      Eigen::Index r = 0;
      for (const auto& [a, ts] : by_arch) {
        if (!archs.count(a)) continue;
        for (const auto* t : ts) {
          x.middleRows(r, t->steps()) = named_features(*t, counters);
          y.segment(r, t->steps()) = t->ipc;
          r += t->steps();
        }
      }
      return std::make_pair(x, y);
    };

    std::set<std::string> all_archs, fit_archs;
    for (const auto& [a, ts] : by_arch) all_archs.insert(a);
    fit_archs = all_archs;
    const std::string holdout = *all_archs.rbegin();
    fit_archs.erase(holdout);

    // Holdout RRMSE on the last architecture, then refit on everything.
    auto [xh, yh] = stack({holdout});
    auto [xf, yf] = stack(fit_archs);
    GbdtModel probe = fit_gbdt(xf, yf, GbdtLoss::Squared, cfg, counters);
    const Eigen::VectorXd pred = probe.predict(xh);
    const double mean_ipc = yh.mean();
    const double rmse = std::sqrt((pred - yh).array().square().mean());
    set.holdout_rrmse[w] = mean_ipc > 0.0 ? rmse / mean_ipc : rmse;

    auto [xa, ya] = stack(all_archs);
    set.models.emplace(w, fit_gbdt(xa, ya, GbdtLoss::Squared, cfg, counters));
    set.counter_lists[w] = counters;
  }
  return set;
}

ErrorTrace error_trace(const IpcModelSet& models, const CounterTrace& trace) {
  auto it = models.models.find(trace.workload_id);
  if (it == models.models.end())
    throw UnknownWorkload("no IPC model for workload " + trace.workload_id);
  ErrorTrace e;
  e.workload_id = trace.workload_id;
  const Eigen::MatrixXd x =
      named_features(trace, models.counter_lists.at(trace.workload_id));
  e.values = it->second.predict(x) - trace.ipc;
  return e;
}

Eigen::MatrixXd assemble_channels(const std::map<std::string, ErrorTrace>& traces,
                                  const std::vector<std::string>& channel_order,
                                  Eigen::Index target_length,
                                  std::vector<std::string>* missing) {
  std::set<std::string> known(channel_order.begin(), channel_order.end());
  for (const auto& [w, e] : traces)
    if (!known.count(w))
      throw UnknownWorkload("error trace for unknown workload " + w);

  Eigen::MatrixXd tensor = Eigen::MatrixXd::Zero(
      target_length, static_cast<Eigen::Index>(channel_order.size()));
  for (size_t c = 0; c < channel_order.size(); ++c) {
    auto it = traces.find(channel_order[c]);
    if (it == traces.end()) {
      if (missing) missing->push_back(channel_order[c]);
      continue;
    }
    tensor.col(static_cast<Eigen::Index>(c)) =
        resample(it->second.values, target_length);
  }
  return tensor;
}

P2bcStage2 train_stage2(const Dataset& dataset, const IpcModelSet& models,
                        const P2bcConfig& cfg) {
  cfg.resample.validate();
  P2bcStage2 stage2;
  stage2.channel_order = dataset.workloads;
  stage2.include_bugfree_class = cfg.include_bugfree_class;

  // One training sample per (architecture, bug instance) across workloads.
  std::map<std::pair<std::string, std::string>, std::map<std::string, ErrorTrace>>
      groups;
  std::map<std::pair<std::string, std::string>, UnitLabel> group_label;
  std::vector<Eigen::Index> lengths;
  for (const auto& t : dataset.traces) {
    if (dataset.split_of(t.arch_id) != Split::Train) continue;
    if (t.label == UnitLabel::Unknown)
      throw ValueError("Unknown-labeled trace in stage-2 training data");
    if (t.label == UnitLabel::BugFree && !cfg.include_bugfree_class) {
      // bug-free instances still help as negatives
    }
    const std::pair<std::string, std::string> key{t.arch_id, t.bug_id.value_or("")};
    groups[key].emplace(t.workload_id, error_trace(models, t));
    group_label[key] = t.label;
    lengths.push_back(t.steps());
  }
  if (groups.empty()) throw InsufficientData("no train instances for stage 2");

  stage2.target_length = cfg.resample.policy == ResampleConfig::Policy::Explicit
                             ? cfg.resample.target_length
                             : mean_target_length(lengths);

  std::vector<Eigen::MatrixXd> tensors;
  std::vector<UnitLabel> tensor_label;
  for (const auto& [key, per_workload] : groups) {
    tensors.push_back(assemble_channels(per_workload, stage2.channel_order,
                                        stage2.target_length));
    tensor_label.push_back(group_label.at(key));
  }

  for (UnitLabel u : stage2_classes(cfg.include_bugfree_class)) {
    std::vector<double> labels;
    for (UnitLabel l : tensor_label) labels.push_back(l == u ? 1.0 : 0.0);
    const auto pos =
        static_cast<long>(std::count(labels.begin(), labels.end(), 1.0));
    if (pos < 2)
      stage2.warnings.push_back("unit " + to_string(u) + " has " +
                                std::to_string(pos) +
                                " positive instances; reduced confidence");
    ConvTrainConfig ccfg = cfg.convnet_cfg;
    if (cfg.auto_positive_weight && pos > 0 &&
        pos < static_cast<long>(labels.size()))
      ccfg.positive_weight = double(labels.size() - pos) / double(pos);
    stage2.classifiers.emplace(u,
                               fit_convnet(tensors, labels, cfg.convnet_arch, ccfg));
  }
  return stage2;
}

P2bcModel train_p2bc(const Dataset& dataset,
                     const std::map<std::string, std::vector<std::string>>& selections,
                     const P2bcConfig& cfg) {
  P2bcModel model;
  model.stage1 = train_ipc_models(dataset, selections, cfg.stage1_gbdt);
  model.stage2 = train_stage2(dataset, model.stage1, cfg);
  return model;
}

Verdict localize_p2bc(const P2bcModel& model,
                      const std::vector<CounterTrace>& traces) {
  if (traces.empty()) throw EmptyInput("localize_p2bc needs at least one trace");
  std::map<std::string, ErrorTrace> errors;
  for (const auto& t : traces) {
    if (errors.count(t.workload_id))
      throw DuplicateWorkload("duplicate trace for workload " + t.workload_id);
    errors.emplace(t.workload_id, error_trace(model.stage1, t));
  }
  Verdict v;
  std::vector<std::string> missing;
  const Eigen::MatrixXd tensor = assemble_channels(
      errors, model.stage2.channel_order, model.stage2.target_length, &missing);
  for (const auto& [u, net] : model.stage2.classifiers)
    v.scores.scores[u] = net.predict(tensor);
  v.scores.normalized = false;
  v.ranking = rank_units(v.scores.scores);
  v.zero_filled_counters = missing;  // absent workload channels
  return v;
}

void P2bcModel::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir / "ipc");
  std::filesystem::create_directories(dir / "stage2");
  json meta;
  meta["format"] = "bugloc-p2bc";
  meta["version"] = 1;
  meta["channel_order"] = stage2.channel_order;
  meta["target_length"] = stage2.target_length;
  meta["include_bugfree_class"] = stage2.include_bugfree_class;
  meta["warnings"] = stage2.warnings;
  json rrmse = json::object();
  for (const auto& [w, v] : stage1.holdout_rrmse) rrmse[w] = v;
  meta["holdout_rrmse"] = rrmse;
  json lists = json::object();
  for (const auto& [w, c] : stage1.counter_lists) lists[w] = c;
  meta["counter_lists"] = lists;
  std::ofstream(dir / "meta.json") << meta.dump(2) << '\n';

  size_t i = 0;
  for (const auto& w : stage2.channel_order) {
    std::ofstream(dir / "ipc" / ("w" + std::to_string(i) + ".json"))
        << stage1.models.at(w).to_json().dump() << '\n';
    ++i;
  }
  for (const auto& [u, net] : stage2.classifiers)
    std::ofstream(dir / "stage2" / (to_string(u) + ".json"))
        << net.to_json().dump() << '\n';
}

P2bcModel P2bcModel::load(const std::filesystem::path& dir) {
  std::ifstream meta_in(dir / "meta.json");
  if (!meta_in) throw IoError("cannot open p2bc meta " + (dir / "meta.json").string());
  json meta;
  meta_in >> meta;
  if (meta.value("format", "") != "bugloc-p2bc")
    throw ParseError("not a P2BC model directory: " + dir.string());

  P2bcModel model;
  model.stage2.channel_order =
      meta.at("channel_order").get<std::vector<std::string>>();
  model.stage2.target_length = meta.at("target_length").get<Eigen::Index>();
  model.stage2.include_bugfree_class = meta.at("include_bugfree_class").get<bool>();
  model.stage2.warnings = meta.at("warnings").get<std::vector<std::string>>();
  for (const auto& [w, v] : meta.at("holdout_rrmse").items())
    model.stage1.holdout_rrmse[w] = v.get<double>();
  for (const auto& [w, c] : meta.at("counter_lists").items())
    model.stage1.counter_lists[w] = c.get<std::vector<std::string>>();

  size_t i = 0;
  for (const auto& w : model.stage2.channel_order) {
    std::ifstream in(dir / "ipc" / ("w" + std::to_string(i) + ".json"));
    if (!in) throw IoError("missing IPC model for workload " + w);
    json j;
    in >> j;
    model.stage1.models.emplace(w, GbdtModel::from_json(j));
    ++i;
  }
  for (UnitLabel u : stage2_classes(model.stage2.include_bugfree_class)) {
    std::ifstream in(dir / "stage2" / (to_string(u) + ".json"));
    if (!in) throw IoError("missing stage-2 classifier for " + to_string(u));
    json j;
    in >> j;
    model.stage2.classifiers.emplace(u, ConvNet1D::from_json(j));
  }
  return model;
}

}  // namespace bugloc
