// bugloc: command-line front end for the localization toolkit.

#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "bugloc/cbc.hpp"
#include "bugloc/counter_select.hpp"
#include "bugloc/ensemble.hpp"
#include "bugloc/errors.hpp"
#include "bugloc/eval.hpp"
#include "bugloc/p2bc.hpp"
#include "bugloc/simgen.hpp"
#include "bugloc/trace_io.hpp"

namespace {

using nlohmann::json;
namespace fs = std::filesystem;
using namespace bugloc;

struct GlobalOpts {
  std::uint64_t seed = 1;
  int threads = 1;  // accepted for interface stability; evaluation is serial
  std::string out = ".";
};

json load_json(const fs::path& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw IoError(std::string("cannot open ") + what + ": " + path.string());
  json j;
  in >> j;
  return j;
}

SelectionResult load_selection(const fs::path& path) {
  const json j = load_json(path, "selection file");
  SelectionResult sel;
  for (const auto& [w, c] : j.at("per_workload").items())
    sel.per_workload[w] = c.get<std::vector<std::string>>();
  sel.superset = j.at("superset").get<std::vector<std::string>>();
  return sel;
}

// Directory-of-CSVs convention: each file "<workload_id>.csv" is one trace.
std::vector<CounterTrace> load_trace_dir(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".csv") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw EmptyInput("no .csv traces in " + dir.string());
  std::vector<CounterTrace> traces;
  for (const auto& f : files) {
    CounterTrace t = load_trace(f);
    t.workload_id = f.stem().string();
    traces.push_back(std::move(t));
  }
  return traces;
}

json verdict_json(const Verdict& v) {
  json j;
  json scores = json::object(), normalized = json::object();
  double total = 0.0;
  for (const auto& [u, s] : v.scores.scores) total += s;
  for (const auto& [u, s] : v.scores.scores) {
    scores[to_string(u)] = s;
    normalized[to_string(u)] =
        total > 0.0 ? s / total : 1.0 / double(v.scores.scores.size());
  }
  j["scores"] = scores;
  j["normalized"] = normalized;
  json ranking = json::array();
  for (UnitLabel u : v.ranking) ranking.push_back(to_string(u));
  j["ranking"] = ranking;
  j["zero_filled_counters"] = v.zero_filled_counters;
  return j;
}

std::map<std::pair<std::string, std::string>, double> load_impacts(
    const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open impacts file: " + path.string());
  std::map<std::pair<std::string, std::string>, double> impacts;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    const auto c1 = line.find(','), c2 = line.find(',', line.find(',') + 1);
    if (c1 == std::string::npos || c2 == std::string::npos)
      throw ParseError("bad impacts row: " + line);
    impacts[{line.substr(0, c1), line.substr(c1 + 1, c2 - c1 - 1)}] =
        std::stod(line.substr(c2 + 1));
  }
  return impacts;
}

Localizer make_localizer(const std::string& method,
                         const std::optional<CbcModelBank>& cbc,
                         const std::optional<P2bcModel>& p2bc) {
  if (method == "cbc") {
    if (!cbc) throw ConfigError("method cbc requires --cbc-model");
    return [&cbc](const std::vector<CounterTrace>& ts) {
      return localize_cbc(*cbc, ts);
    };
  }
  if (method == "p2bc") {
    if (!p2bc) throw ConfigError("method p2bc requires --p2bc-model");
    return [&p2bc](const std::vector<CounterTrace>& ts) {
      return localize_p2bc(*p2bc, ts);
    };
  }
  if (method == "ensemble") {
    if (!cbc || !p2bc)
      throw ConfigError("method ensemble requires --cbc-model and --p2bc-model");
    return [&cbc, &p2bc](const std::vector<CounterTrace>& ts) {
      const Verdict a = localize_cbc(*cbc, ts);
      const Verdict b = localize_p2bc(*p2bc, ts);
      // the ensemble combines the 11 unit classes only
      ScoreVector sa, sb;
      for (UnitLabel u : all_units()) {
        sa.scores[u] = a.scores.scores.at(u);
        sb.scores[u] = b.scores.scores.at(u);
      }
      const EnsembleVerdict ev = combine(sa, sb);
      Verdict v;
      v.scores = ev.combined;
      v.ranking = ev.ranking;
      v.zero_filled_counters = a.zero_filled_counters;
      return v;
    };
  }
  throw ConfigError("unknown method: " + method);
}

int run(int argc, char** argv) {
  CLI::App app{"performance-bug localization toolkit"};
  app.require_subcommand(1);
  GlobalOpts g;
  app.add_option("--seed", g.seed, "global random seed");
  app.add_option("--threads", g.threads, "worker threads (currently serial)");
  app.add_option("--out", g.out, "output directory or file");

  // simgen
  auto* sim = app.add_subcommand("simgen", "generate a synthetic labeled corpus");
  int n_archs = 6, n_workloads = 12, n_train = 4;
  double impact_lo = 0.012, impact_hi = 0.045;
  bool no_bugfree = false;
  sim->add_option("--archs", n_archs, "number of architectures");
  sim->add_option("--workloads", n_workloads, "number of workloads");
  sim->add_option("--train-archs", n_train, "architectures in the train split");
  sim->add_option("--impact-lo", impact_lo, "lower IPC-impact bound");
  sim->add_option("--impact-hi", impact_hi, "upper IPC-impact bound");
  sim->add_flag("--no-bugfree", no_bugfree, "skip bug-free trace emission");

  // select
  auto* sel = app.add_subcommand("select", "two-step counter selection");
  std::string manifest_path, selection_path, model_dir, cbc_dir, p2bc_dir;
  double alpha = 0.7, beta = 0.95;
  sel->add_option("--manifest", manifest_path, "dataset manifest")->required();
  sel->add_option("--alpha", alpha, "step-1 correlation threshold");
  sel->add_option("--beta", beta, "step-2 redundancy threshold");

  // train-cbc
  auto* tcbc = app.add_subcommand("train-cbc", "train the per-time-step bank");
  int trees = 100;
  bool with_bugfree = false;
  tcbc->add_option("--manifest", manifest_path, "dataset manifest")->required();
  tcbc->add_option("--selection", selection_path, "selection JSON")->required();
  tcbc->add_option("--trees", trees, "boosting rounds per model");
  tcbc->add_flag("--bugfree", with_bugfree, "include the BugFree class");

  // train-p2bc
  auto* tp2bc = app.add_subcommand("train-p2bc", "train the two-phase pipeline");
  int stage1_trees = 250, epochs = 40;
  tp2bc->add_option("--manifest", manifest_path, "dataset manifest")->required();
  tp2bc->add_option("--selection", selection_path, "selection JSON")->required();
  tp2bc->add_option("--trees", stage1_trees, "stage-1 boosting rounds");
  tp2bc->add_option("--epochs", epochs, "stage-2 training epochs");

  // localize
  auto* loc = app.add_subcommand("localize", "rank units for one design");
  std::string traces_dir, method = "cbc";
  loc->add_option("--traces", traces_dir, "directory of <workload>.csv traces")
      ->required();
  loc->add_option("--method", method, "cbc | p2bc | ensemble");
  loc->add_option("--cbc-model", cbc_dir, "CBC model directory");
  loc->add_option("--p2bc-model", p2bc_dir, "P2BC model directory");

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "top-k accuracy over the test split");
  std::string impacts_path;
  ev->add_option("--manifest", manifest_path, "dataset manifest")->required();
  ev->add_option("--method", method, "cbc | p2bc | ensemble");
  ev->add_option("--cbc-model", cbc_dir, "CBC model directory");
  ev->add_option("--p2bc-model", p2bc_dir, "P2BC model directory");
  ev->add_option("--impacts", impacts_path, "impacts.csv for band rows");

  // sensitivity
  auto* sen = app.add_subcommand("sensitivity", "workload-count sensitivity study");
  int batch = 5, reps = 100;
  sen->add_option("--manifest", manifest_path, "dataset manifest")->required();
  sen->add_option("--cbc-model", cbc_dir, "CBC model directory")->required();
  sen->add_option("--batch", batch, "workloads discarded per step");
  sen->add_option("--reps", reps, "repetitions");

  // audit-bugfree
  auto* aud = app.add_subcommand("audit-bugfree", "BugFree-class rank audit");
  aud->add_option("--manifest", manifest_path, "dataset manifest")->required();
  aud->add_option("--cbc-model", cbc_dir, "CBC model directory")->required();

  CLI11_PARSE(app, argc, argv);

  if (sim->parsed()) {
    GeneratorConfig cfg;
    cfg.rng_seed = g.seed;
    cfg.archs = default_archs(n_archs, g.seed);
    cfg.workloads = default_workloads(n_workloads, g.seed);
    cfg.n_train_archs = n_train;
    cfg.impact_lo = impact_lo;
    cfg.impact_hi = impact_hi;
    cfg.emit_bugfree = !no_bugfree;
    const CorpusResult r = generate_corpus(cfg, g.out);
    std::cout << "wrote " << r.manifest.traces.size() << " traces to " << g.out
              << '\n';
    return 0;
  }

  if (sel->parsed()) {
    const Dataset ds = load_dataset(manifest_path);
    SelectionConfig cfg{alpha, beta};
    const SelectionResult r = select_all(ds, cfg);
    json j;
    j["per_workload"] = json::object();
    for (const auto& [w, c] : r.per_workload) j["per_workload"][w] = c;
    j["superset"] = r.superset;
    const fs::path out = fs::path(g.out).extension() == ".json"
                             ? fs::path(g.out)
                             : fs::path(g.out) / "selection.json";
    fs::create_directories(out.parent_path().empty() ? "." : out.parent_path());
    std::ofstream(out) << j.dump(2) << '\n';
    std::cout << "superset size " << r.superset.size() << " -> " << out << '\n';
    return 0;
  }

  if (tcbc->parsed()) {
    const Dataset ds = load_dataset(manifest_path);
    const SelectionResult selres = load_selection(selection_path);
    CbcConfig cfg;
    cfg.gbdt.n_trees = trees;
    cfg.include_bugfree_class = with_bugfree;
    const CbcModelBank bank = train_cbc(ds, selres.superset, cfg);
    bank.save(g.out);
    std::cout << "trained " << bank.models.size() << " models -> " << g.out << '\n';
    for (const auto& w : bank.warnings) std::cerr << "warning: " << w << '\n';
    return 0;
  }

  if (tp2bc->parsed()) {
    const Dataset ds = load_dataset(manifest_path);
    const SelectionResult selres = load_selection(selection_path);
    P2bcConfig cfg;
    cfg.stage1_gbdt.n_trees = stage1_trees;
    cfg.convnet_cfg.epochs = epochs;
    cfg.convnet_cfg.rng_seed = g.seed;
    const P2bcModel model = train_p2bc(ds, selres.per_workload, cfg);
    model.save(g.out);
    std::cout << "trained " << model.stage1.models.size() << "+"
              << model.stage2.classifiers.size() << " models -> " << g.out
              << " (mean holdout rrmse " << model.stage1.average_rrmse() << ")\n";
    for (const auto& w : model.stage2.warnings) std::cerr << "warning: " << w << '\n';
    return 0;
  }

  std::optional<CbcModelBank> cbc;
  std::optional<P2bcModel> p2bc;
  if (!cbc_dir.empty()) cbc = CbcModelBank::load(cbc_dir);
  if (!p2bc_dir.empty()) p2bc = P2bcModel::load(p2bc_dir);

  if (loc->parsed()) {
    const Localizer localizer = make_localizer(method, cbc, p2bc);
    const Verdict v = localizer(load_trace_dir(traces_dir));
    std::cout << verdict_json(v).dump(2) << '\n';
    return 0;
  }

  if (ev->parsed()) {
    const Dataset ds = load_dataset(manifest_path);
    const Localizer localizer = make_localizer(method, cbc, p2bc);
    EvalConfig cfg;
    if (!impacts_path.empty()) cfg.impacts = load_impacts(impacts_path);
    const EvalReport report = evaluate(ds, localizer, cfg);
    fs::create_directories(g.out);
    write_report_json(report, fs::path(g.out) / "report.json");
    write_report_csv(report, fs::path(g.out) / "report.csv");
    std::cout << "top-1 " << report.topk.at("overall")[0] << ", top-3 "
              << report.topk.at("overall")[2] << " over "
              << report.counts.at("overall") << " verdicts -> " << g.out << '\n';
    return 0;
  }

  if (sen->parsed()) {
    const Dataset ds = load_dataset(manifest_path);
    SensitivityConfig cfg{batch, reps, g.seed};
    const SensitivityResult r = workload_sensitivity(*cbc, ds, cfg);
    fs::create_directories(g.out);
    write_sensitivity_csv(r, fs::path(g.out) / "sensitivity.csv");
    std::cout << "full-count mean top-1 " << r.mean_top1.front() << " -> " << g.out
              << '\n';
    return 0;
  }

  if (aud->parsed()) {
    const Dataset ds = load_dataset(manifest_path);
    const BugFreeAudit a = bugfree_audit(*cbc, ds);
    json j;
    j["bugfree_ranks"] = a.bugfree_ranks;
    j["bugfree_first"] = a.bugfree_first;
    j["buggy_cases"] = a.buggy_cases;
    j["buggy_with_bugfree_top5"] = a.buggy_with_bugfree_top5;
    j["offenders"] = a.offenders;
    std::cout << j.dump(2) << '\n';
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const Error& e) {
    nlohmann::json j{{"error", e.kind()}, {"message", e.what()}};
    std::cerr << j.dump() << '\n';
    return 1;
  } catch (const std::exception& e) {
    nlohmann::json j{{"error", "Unhandled"}, {"message", e.what()}};
    std::cerr << j.dump() << '\n';
    return 1;
  }
}
