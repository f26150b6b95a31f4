#ifndef BUGLOC_SIMGEN_HPP
#define BUGLOC_SIMGEN_HPP

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bugloc/types.hpp"

namespace bugloc {

// Latent microarchitecture parameters driving the analytic bottleneck model.
struct ArchConfig {
  std::string arch_id;
  double pipeline_width = 4.0;
  double rob_size = 128.0;
  double lsq_size = 48.0;
  double iq_size = 64.0;
  double branch_accuracy = 0.94;       // in (0,1)
  double cache_latency_cycles = 14.0;
  std::map<std::string, double> fu_latency = {
      {"int", 1.0}, {"fp", 4.0}, {"mem", 2.0}};

  void validate() const;
};

struct WorkloadPhase {
  long length_windows = 8;
  double branch_frac = 0.12;
  double load_frac = 0.22;
  double store_frac = 0.10;
  double int_frac = 0.40;
  double fp_frac = 0.16;  // fractions sum to 1
  double locality = 0.8;  // in (0,1)
};

struct WorkloadProfile {
  std::string workload_id;
  std::vector<WorkloadPhase> phases;

  long total_windows() const;
  void validate() const;
};

// One injected bug: a unit-specific mechanism family plus magnitude knobs.
// params: "impact" (target mean relative IPC drop), "period" (windows, for
// periodic families), "gain_scale" (signature-counter gain multiplier).
struct BugSpec {
  std::string bug_id;
  UnitLabel unit = UnitLabel::Unknown;
  std::string family;
  std::map<std::string, double> params;
  BugCategory category = BugCategory::SeenVariation;

  void validate() const;
};

struct GeneratorConfig {
  std::uint64_t rng_seed = 1;
  std::vector<ArchConfig> archs;            // empty: default_archs(6)
  std::vector<WorkloadProfile> workloads;   // empty: default_workloads(12)
  int n_train_archs = 4;                    // first n archs form the train split
  double noise_sigma = 0.02;                // window-to-window IPC noise
  double trace_level_sigma = 0.04;          // per-trace IPC level spread
  double counter_noise_sigma = 0.05;        // independent per-counter noise
  long window_cycles = 100000;
  double impact_lo = 0.012;                 // target IPC-impact band
  double impact_hi = 0.045;
  int variations_per_family = 3;
  int unseen_type_families = 6;             // at most one per unit
  bool emit_bugfree = true;
  int bugfree_replicas = 3;  // extra noise draws per train (arch, workload)

  void validate() const;
};

std::vector<ArchConfig> default_archs(int n, std::uint64_t seed);
std::vector<WorkloadProfile> default_workloads(int n, std::uint64_t seed);

// Full bug roster: two families per unit, `variations_per_family` variations
// each, partitioned into seen / unseen-variation / unseen-type categories.
std::vector<BugSpec> default_bugs(const GeneratorConfig& cfg);

// All counter names the generator emits, in column order.
const std::vector<std::string>& generator_counter_names();

// Deterministic given (configs, seed); the bug-free twin under the same seed
// differs only through the bug's perturbation.
CounterTrace generate_trace(const ArchConfig& arch, const WorkloadProfile& workload,
                            const std::optional<BugSpec>& bug,
                            const GeneratorConfig& cfg);

struct CorpusResult {
  Manifest manifest;
  // (arch_id, bug_id) -> measured mean relative IPC impact vs the twin
  std::map<std::pair<std::string, std::string>, double> impacts;
  std::vector<BugSpec> bugs;
};

// Writes trace CSVs, manifest.json and impacts.csv under out_dir.
CorpusResult generate_corpus(const GeneratorConfig& cfg,
                             const std::filesystem::path& out_dir);

}  // namespace bugloc

#endif
