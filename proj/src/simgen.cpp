#include "bugloc/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <random>
#include <set>

#include "bugloc/errors.hpp"
#include "bugloc/trace_io.hpp"

namespace bugloc {

namespace {

double get_param(const std::map<std::string, double>& params, const std::string& key,
                 double fallback) {
  auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t hash_str(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) h = (h ^ c) * 0x100000001b3ULL;
  return h;
}

// Per-window model state feeding the counter formulas.
struct WindowCtx {
  const ArchConfig* arch = nullptr;
  const WorkloadPhase* ph = nullptr;
  double ipc = 0.0;
  double util = 0.0;   // ipc / pipeline_width
  double stall = 0.0;  // 1 - util
  double insts = 0.0;
};

struct CounterDef {
  std::string name;
  std::function<double(const WindowCtx&)> value;
};

const std::vector<CounterDef>& counter_defs() {
  auto fu = [](const WindowCtx& c, const char* k) {
    return c.arch->fu_latency.at(k);
  };
  static const std::vector<CounterDef> defs = {
      {"fetched_insts", [](const WindowCtx& c) { return c.insts * 1.05; }},
      {"decoded_insts", [](const WindowCtx& c) { return c.insts * 1.03; }},
      {"issued_insts", [](const WindowCtx& c) { return c.insts * 1.04; }},
      {"committed_insts", [](const WindowCtx& c) { return c.insts; }},
      {"branch_insts", [](const WindowCtx& c) { return c.ph->branch_frac * c.insts; }},
      {"branch_mispredicts",
       [](const WindowCtx& c) {
         return c.ph->branch_frac * c.insts * (1.0 - c.arch->branch_accuracy);
       }},
      {"btb_miss_rate",
       [](const WindowCtx& c) {
         return (1.0 - c.arch->branch_accuracy) * (0.4 + 0.5 * c.stall);
       }},
      {"indirect_correct_pct",
       [](const WindowCtx& c) {
         return 100.0 * c.arch->branch_accuracy * (0.75 + 0.25 * c.util);
       }},
      {"loads", [](const WindowCtx& c) { return c.ph->load_frac * c.insts; }},
      {"stores", [](const WindowCtx& c) { return c.ph->store_frac * c.insts; }},
      {"dcache_accesses",
       [](const WindowCtx& c) {
         return (c.ph->load_frac + c.ph->store_frac) * c.insts;
       }},
      {"l1d_misses",
       [](const WindowCtx& c) {
         return (c.ph->load_frac + c.ph->store_frac) * c.insts *
                (1.0 - c.ph->locality) * 0.12;
       }},
      {"l2_misses",
       [](const WindowCtx& c) {
         return (c.ph->load_frac + c.ph->store_frac) * c.insts *
                (1.0 - c.ph->locality) * 0.05;
       }},
      {"l2_latency_avg",
       [&fu](const WindowCtx& c) {
         return c.arch->cache_latency_cycles * (0.8 + 0.4 * c.stall);
       }},
      {"mem_stall_cycles",
       [](const WindowCtx& c) {
         return (c.ph->load_frac + c.ph->store_frac) * c.insts *
                (1.0 - c.ph->locality) * 0.05 * c.arch->cache_latency_cycles;
       }},
      {"icache_misses", [](const WindowCtx& c) { return c.insts * 0.003 * (0.5 + c.stall); }},
      {"fetch_stall_pct", [](const WindowCtx& c) { return 100.0 * c.stall * 0.18; }},
      {"fetch_bubbles", [](const WindowCtx& c) { return c.stall * 0.18 * 1e4; }},
      {"decode_stall_pct", [](const WindowCtx& c) { return 100.0 * c.stall * 0.08; }},
      {"issue_stall_pct", [](const WindowCtx& c) { return 100.0 * c.stall * 0.22; }},
      {"iq_full_events",
       [](const WindowCtx& c) {
         return c.stall * c.insts * 0.05 * (64.0 / c.arch->iq_size);
       }},
      {"iq_occupancy_pct", [](const WindowCtx& c) { return 20.0 + 55.0 * c.util; }},
      {"rob_occupancy_pct", [](const WindowCtx& c) { return 25.0 + 50.0 * c.util; }},
      {"rob_full_events",
       [](const WindowCtx& c) {
         return c.stall * c.insts * 0.04 * (128.0 / c.arch->rob_size);
       }},
      {"rob_stall_pct", [](const WindowCtx& c) { return 100.0 * c.stall * 0.12; }},
      {"lsq_occupancy_pct",
       [](const WindowCtx& c) {
         return std::min(100.0, 120.0 * (c.ph->load_frac + c.ph->store_frac) * c.util +
                                    10.0);
       }},
      {"lq_reject_events",
       [](const WindowCtx& c) { return c.ph->load_frac * c.insts * 0.004 * (0.5 + c.stall); }},
      {"sq_reject_events",
       [](const WindowCtx& c) { return c.ph->store_frac * c.insts * 0.004 * (0.5 + c.stall); }},
      {"rename_stall_pct", [](const WindowCtx& c) { return 100.0 * c.stall * 0.06; }},
      {"serializing_insts",
       [](const WindowCtx& c) { return c.insts * 0.002 * (0.5 + c.stall); }},
      {"phys_reg_writes", [](const WindowCtx& c) { return c.insts * 0.82; }},
      {"reg_write_stall_events",
       [](const WindowCtx& c) { return c.insts * 0.002 * (0.5 + c.stall); }},
      {"reg_pressure_pct", [](const WindowCtx& c) { return 20.0 + 60.0 * c.util; }},
      {"int_ops", [](const WindowCtx& c) { return c.ph->int_frac * c.insts; }},
      {"fp_ops", [](const WindowCtx& c) { return c.ph->fp_frac * c.insts; }},
      {"fu_busy_int_pct",
       [&fu](const WindowCtx& c) {
         return std::min(100.0, 100.0 * c.ph->int_frac * c.util * fu(c, "int") * 1.2);
       }},
      {"fu_busy_fp_pct",
       [&fu](const WindowCtx& c) {
         return std::min(100.0, 100.0 * c.ph->fp_frac * c.util * fu(c, "fp") * 0.5);
       }},
      {"exec_latency_avg",
       [&fu](const WindowCtx& c) {
         return (c.ph->int_frac * fu(c, "int") + c.ph->fp_frac * fu(c, "fp") +
                 (c.ph->load_frac + c.ph->store_frac) * fu(c, "mem")) *
                (0.8 + 0.4 * c.stall);
       }},
      {"commit_stall_pct", [](const WindowCtx& c) { return 100.0 * c.stall * 0.10; }},
      {"commit_bw_drops",
       [](const WindowCtx& c) { return c.stall * c.insts * 0.015; }},
  };
  return defs;
}

enum class BugShape { Constant, Periodic };

struct Signature {
  std::string counter;
  double gain;        // relative movement per unit of impact
  bool reduce = false;  // true: counter shrinks instead of growing
};

struct FamilyDef {
  UnitLabel unit;
  std::string name;
  BugShape shape = BugShape::Constant;
  std::vector<Signature> signatures;
};

// Two mechanism families per unit. Family signatures overlap within a unit
// so a never-trained family still moves the counters its unit owns. Branch
// and Memory each carry a deliberately low-gain family.
const std::vector<FamilyDef>& family_defs() {
  static const std::vector<FamilyDef> defs = {
      {UnitLabel::Fetch, "fetch_icache_delay", BugShape::Constant,
       {{"fetch_stall_pct", 20}, {"fetch_bubbles", 20}, {"icache_misses", 25}}},
      {UnitLabel::Fetch, "fetch_width_glitch", BugShape::Periodic,
       {{"fetch_stall_pct", 12}, {"fetch_bubbles", 12}, {"fetched_insts", 4, true}}},
      {UnitLabel::Decode, "decode_nosrc_delay", BugShape::Constant,
       {{"decode_stall_pct", 25}, {"decoded_insts", 3, true}}},
      {UnitLabel::Decode, "decode_throughput_drop", BugShape::Periodic,
       {{"decode_stall_pct", 24}, {"decoded_insts", 3, true}}},
      {UnitLabel::Issue, "iq_head_stall", BugShape::Constant,
       {{"issue_stall_pct", 18}, {"iq_full_events", 22}, {"iq_occupancy_pct", 3}}},
      {UnitLabel::Issue, "iq_pointer_shift", BugShape::Periodic,
       {{"issue_stall_pct", 12}, {"iq_full_events", 10}, {"iq_occupancy_pct", 5}}},
      {UnitLabel::Rename, "serializing_opcode", BugShape::Constant,
       {{"serializing_insts", 40}, {"rename_stall_pct", 20}}},
      {UnitLabel::Rename, "rename_throughput_drop", BugShape::Periodic,
       {{"rename_stall_pct", 15}, {"serializing_insts", 15}}},
      {UnitLabel::Execute, "int_fu_latency", BugShape::Constant,
       {{"exec_latency_avg", 12}, {"fu_busy_int_pct", 14}}},
      {UnitLabel::Execute, "fp_fu_latency", BugShape::Constant,
       {{"exec_latency_avg", 10}, {"fu_busy_fp_pct", 16}}},
      {UnitLabel::Branch, "btb_shrink", BugShape::Constant,
       {{"branch_mispredicts", 18}, {"btb_miss_rate", 18}}},
      {UnitLabel::Branch, "indirect_predictor_fault", BugShape::Constant,
       {{"indirect_correct_pct", 0.8, true},
        {"branch_mispredicts", 22},
        {"btb_miss_rate", 10}}},
      {UnitLabel::Registers, "reg_write_stall", BugShape::Constant,
       {{"reg_write_stall_events", 35}, {"reg_pressure_pct", 4}}},
      {UnitLabel::Registers, "reg_file_shrink", BugShape::Constant,
       {{"reg_pressure_pct", 8}, {"reg_write_stall_events", 20}}},
      {UnitLabel::LoadStoreQueue, "lq_false_full", BugShape::Constant,
       {{"lq_reject_events", 55}, {"lsq_occupancy_pct", 14}}},
      {UnitLabel::LoadStoreQueue, "sq_false_full", BugShape::Periodic,
       {{"sq_reject_events", 55}, {"lsq_occupancy_pct", 14}}},
      {UnitLabel::Memory, "store_line_delay", BugShape::Constant,
       {{"mem_stall_cycles", 14}, {"l2_latency_avg", 8}}},
      {UnitLabel::Memory, "l2_latency_excess", BugShape::Constant,
       {{"l2_latency_avg", 16}, {"mem_stall_cycles", 10}}},
      {UnitLabel::ReOrderBuffer, "rob_nearfull_delay", BugShape::Constant,
       {{"rob_full_events", 25}, {"rob_stall_pct", 12}, {"rob_occupancy_pct", 3}}},
      {UnitLabel::ReOrderBuffer, "rob_pressure_stall", BugShape::Periodic,
       {{"rob_stall_pct", 18}, {"rob_full_events", 18}}},
      {UnitLabel::Commit, "commit_bw_drop", BugShape::Periodic,
       {{"commit_stall_pct", 20}, {"commit_bw_drops", 30}}},
      {UnitLabel::Commit, "commit_delay", BugShape::Constant,
       {{"commit_stall_pct", 15}, {"commit_bw_drops", 18}}},
  };
  return defs;
}

const FamilyDef& family_by_name(const std::string& name) {
  for (const auto& f : family_defs())
    if (f.name == name) return f;
  throw ConfigError("unknown bug family: " + name);
}

// Temporal impact shape with mean exactly 1 over a period.
double shape_at(BugShape shape, long t, double period) {
  if (shape == BugShape::Constant) return 1.0;
  const long p = std::max<long>(2, static_cast<long>(period));
  const double hi = 1.0 + 0.8 * double(p - 1);
  const double lo = 0.2;
  return (t % p == 0) ? hi : lo;
}

}  // namespace

void ArchConfig::validate() const {
  if (arch_id.empty()) throw ConfigError("arch_id must be non-empty");
  if (pipeline_width < 1.0 || pipeline_width > 12.0)
    throw ConfigError("pipeline_width out of range");
  if (rob_size < 16.0 || lsq_size < 8.0 || iq_size < 8.0)
    throw ConfigError("queue sizes out of range");
  if (branch_accuracy <= 0.0 || branch_accuracy >= 1.0)
    throw ConfigError("branch_accuracy must be in (0,1)");
  if (cache_latency_cycles < 1.0) throw ConfigError("cache_latency out of range");
  for (const char* k : {"int", "fp", "mem"})
    if (!fu_latency.count(k) || fu_latency.at(k) <= 0.0)
      throw ConfigError("fu_latency must define positive int/fp/mem entries");
}

long WorkloadProfile::total_windows() const {
  long t = 0;
  for (const auto& p : phases) t += p.length_windows;
  return t;
}

void WorkloadProfile::validate() const {
  if (workload_id.empty()) throw ConfigError("workload_id must be non-empty");
  if (phases.empty()) throw ConfigError("workload needs at least one phase");
  for (const auto& p : phases) {
    if (p.length_windows < 1) throw ConfigError("phase length must be >= 1");
    const double sum =
        p.branch_frac + p.load_frac + p.store_frac + p.int_frac + p.fp_frac;
    if (std::abs(sum - 1.0) > 1e-9)
      throw ConfigError("phase instruction mix must sum to 1");
    if (p.locality <= 0.0 || p.locality >= 1.0)
      throw ConfigError("locality must be in (0,1)");
  }
}

void BugSpec::validate() const {
  const FamilyDef& fam = family_by_name(family);
  if (fam.unit != unit)
    throw ConfigError("family " + family + " does not belong to unit " +
                      to_string(unit));
  const double impact = get_param(params, "impact", -1.0);
  if (impact <= 0.0 || impact >= 0.5)
    throw ConfigError("bug impact must be in (0, 0.5)");
}

void GeneratorConfig::validate() const {
  if (n_train_archs < 1) throw ConfigError("need at least one train architecture");
  if (noise_sigma < 0.0 || counter_noise_sigma < 0.0 || trace_level_sigma < 0.0)
    throw ConfigError("noise sigmas must be >= 0");
  if (window_cycles < 1) throw ConfigError("window_cycles must be positive");
  if (impact_lo <= 0.0 || impact_hi <= impact_lo || impact_hi >= 0.5)
    throw ConfigError("impact band must satisfy 0 < lo < hi < 0.5");
  if (variations_per_family < 1) throw ConfigError("variations_per_family >= 1");
  if (unseen_type_families < 0 || unseen_type_families > kNumUnits)
    throw ConfigError("unseen_type_families must be in [0, 11]");
  if (bugfree_replicas < 0) throw ConfigError("bugfree_replicas must be >= 0");
}

std::vector<ArchConfig> default_archs(int n, std::uint64_t seed) {
  std::mt19937_64 rng(mix64(seed ^ 0xa5c1d3u));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<ArchConfig> archs;
  for (int i = 0; i < n; ++i) {
    ArchConfig a;
    char buf[16];
    std::snprintf(buf, sizeof(buf), "arch%02d", i);
    a.arch_id = buf;
    a.pipeline_width = 2.0 + 1.0 * (i % 4) + 0.15 * unit(rng);
    a.rob_size = 64.0 + 32.0 * (i % 4) + 4.0 * unit(rng);
    a.lsq_size = 24.0 + 12.0 * (i % 4) + 2.0 * unit(rng);
    a.iq_size = 32.0 + 16.0 * (i % 4) + 2.0 * unit(rng);
    // latency and predictor quality stay near-constant across designs: their
    // counters are bug signatures, and a per-arch baseline spread would make a
    // perturbed trace on one arch mimic a clean trace on another
    a.branch_accuracy = 0.938 + 0.004 * unit(rng);
    a.cache_latency_cycles = 13.0 + 0.3 * unit(rng);
    a.fu_latency = {{"int", 1.0 + 0.1 * unit(rng)},
                    {"fp", 3.5 + 0.2 * unit(rng)},
                    {"mem", 2.0 + 0.2 * unit(rng)}};
    a.validate();
    archs.push_back(std::move(a));
  }
  return archs;
}

std::vector<WorkloadProfile> default_workloads(int n, std::uint64_t seed) {
  std::mt19937_64 rng(mix64(seed ^ 0x770ad5u));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> n_phases(2, 4);
  std::uniform_int_distribution<long> phase_len(6, 14);
  std::vector<WorkloadProfile> profiles;
  for (int i = 0; i < n; ++i) {
    WorkloadProfile w;
    char buf[16];
    std::snprintf(buf, sizeof(buf), "w%02d", i);
    w.workload_id = buf;
    const int phases = n_phases(rng);
    for (int p = 0; p < phases; ++p) {
      WorkloadPhase ph;
      ph.length_windows = phase_len(rng);
      // alternate cache-hostile / cache-friendly phases so every workload's
      // IPC swings well clear of the per-counter noise floor
      const double swing = (p % 2 == 0) ? 0.0 : 1.0;
      ph.branch_frac = 0.05 + 0.12 * unit(rng);
      ph.load_frac = 0.15 + 0.12 * unit(rng);
      ph.store_frac = 0.05 + 0.08 * unit(rng);
      ph.fp_frac = 0.05 + 0.15 * unit(rng);
      ph.int_frac = 1.0 - ph.branch_frac - ph.load_frac - ph.store_frac - ph.fp_frac;
      ph.locality = 0.52 + 0.38 * swing + 0.05 * unit(rng);
      w.phases.push_back(ph);
    }
    w.validate();
    profiles.push_back(std::move(w));
  }
  return profiles;
}

std::vector<BugSpec> default_bugs(const GeneratorConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(mix64(cfg.rng_seed ^ 0xb065eedULL));
  std::uniform_real_distribution<double> impact(cfg.impact_lo, cfg.impact_hi);

  // family 1 of evenly spread units becomes a fully unseen type; family 0
  // of every unit always stays trainable
  std::set<int> unseen_units;
  for (int j = 0; j < cfg.unseen_type_families; ++j)
    unseen_units.insert(j * kNumUnits / std::max(1, cfg.unseen_type_families));

  const double periods[] = {4.0, 6.0, 8.0};
  const double gain_scales[] = {1.0, 1.3, 0.95};
  std::vector<BugSpec> bugs;
  const auto& fams = family_defs();
  for (size_t f = 0; f < fams.size(); ++f) {
    const FamilyDef& fam = fams[f];
    const int unit_idx = static_cast<int>(f / 2);
    const bool unseen_type = (f % 2 == 1) && unseen_units.count(unit_idx);
    for (int v = 0; v < cfg.variations_per_family; ++v) {
      BugSpec b;
      b.unit = fam.unit;
      b.family = fam.name;
      b.bug_id = fam.name + "-v" + std::to_string(v + 1);
      b.params = {{"impact", impact(rng)},
                  {"period", periods[v % 3]},
                  {"gain_scale", gain_scales[v % 3]}};
      if (unseen_type)
        b.category = BugCategory::UnseenType;
      else if (v == cfg.variations_per_family - 1)
        b.category = BugCategory::UnseenVariation;
      else
        b.category = BugCategory::SeenVariation;
      b.validate();
      bugs.push_back(std::move(b));
    }
  }
  return bugs;
}

const std::vector<std::string>& generator_counter_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const auto& d : counter_defs()) n.push_back(d.name);
    return n;
  }();
  return names;
}

CounterTrace generate_trace(const ArchConfig& arch, const WorkloadProfile& workload,
                            const std::optional<BugSpec>& bug,
                            const GeneratorConfig& cfg) {
  arch.validate();
  workload.validate();
  cfg.validate();
  if (bug) bug->validate();

  // The noise stream depends only on (seed, arch, workload) so a buggy trace
  // and its bug-free twin share every random draw.
  std::mt19937_64 rng(mix64(cfg.rng_seed ^ mix64(hash_str(arch.arch_id)) ^
                            mix64(hash_str(workload.workload_id) << 1)));
  std::normal_distribution<double> normal(0.0, 1.0);

  const auto& defs = counter_defs();
  const long total = workload.total_windows();
  CounterTrace trace;
  trace.workload_id = workload.workload_id;
  trace.arch_id = arch.arch_id;
  trace.label = bug ? bug->unit : UnitLabel::BugFree;
  if (bug) trace.bug_id = bug->bug_id;
  trace.window_cycles = cfg.window_cycles;
  trace.counter_names = generator_counter_names();
  trace.samples.resize(total, static_cast<Eigen::Index>(defs.size()));
  trace.ipc.resize(total);

  const FamilyDef* fam = bug ? &family_by_name(bug->family) : nullptr;
  const double impact = bug ? get_param(bug->params, "impact", 0.02) : 0.0;
  const double period = bug ? get_param(bug->params, "period", 6.0) : 6.0;
  const double gain_scale = bug ? get_param(bug->params, "gain_scale", 1.0) : 1.0;

  // per-trace level factor (input-set / configuration drift): keeps the
  // absolute IPC level uninformative about bug presence
  const double speed = std::exp(cfg.trace_level_sigma * normal(rng));

  long t = 0;
  for (const auto& ph : workload.phases) {
    // analytic bottleneck model: width-, branch- and memory-limited throughput
    const double mispredict_penalty = 10.0 + 2.0 * arch.pipeline_width;
    const double width_limit =
        arch.pipeline_width * (0.30 + 0.45 * ph.locality + 0.25 * ph.int_frac) *
        (1.0 - 6.0 / arch.iq_size) * (1.0 - 16.0 / arch.rob_size) *
        (1.0 - 4.0 / arch.lsq_size);
    const double branch_limit =
        1.0 / std::max(1e-6, ph.branch_frac * (1.0 - arch.branch_accuracy) *
                                 mispredict_penalty);
    const double miss_rate = (1.0 - ph.locality) * 0.12;
    const double mem_limit =
        1.0 / std::max(1e-6, (ph.load_frac + ph.store_frac) * miss_rate *
                                 arch.cache_latency_cycles);
    const double exec_drag =
        1.0 / (1.0 + 0.05 * (arch.fu_latency.at("int") - 1.0) * ph.int_frac +
               0.04 * (arch.fu_latency.at("fp") - 3.0) * ph.fp_frac);
    const double base_ipc =
        std::min({width_limit, branch_limit, mem_limit}) * exec_drag * speed;

    for (long i = 0; i < ph.length_windows; ++i, ++t) {
      double ipc = base_ipc * std::exp(cfg.noise_sigma * normal(rng));
      double perturb = 0.0;
      if (bug) {
        perturb = std::min(0.9, impact * shape_at(fam->shape, t, period));
        ipc *= (1.0 - perturb);
      }
      WindowCtx ctx{&arch, &ph, ipc, ipc / arch.pipeline_width,
                    1.0 - ipc / arch.pipeline_width,
                    ipc * double(cfg.window_cycles)};

      for (size_t c = 0; c < defs.size(); ++c) {
        double v = defs[c].value(ctx) *
                   std::exp(cfg.counter_noise_sigma * normal(rng));
        if (bug) {
          for (const auto& sig : fam->signatures) {
            if (sig.counter != defs[c].name) continue;
            const double move = 1.0 + sig.gain * gain_scale * perturb;
            v = sig.reduce ? v / move : v * move;
          }
        }
        trace.samples(t, static_cast<Eigen::Index>(c)) = std::max(0.0, v);
      }
      trace.ipc[t] = std::max(0.0, ipc);
    }
  }
  trace.validate();
  return trace;
}

CorpusResult generate_corpus(const GeneratorConfig& cfg_in,
                             const std::filesystem::path& out_dir) {
  GeneratorConfig cfg = cfg_in;
  cfg.validate();
  if (cfg.archs.empty()) cfg.archs = default_archs(6, cfg.rng_seed);
  if (cfg.workloads.empty()) cfg.workloads = default_workloads(12, cfg.rng_seed);
  if (cfg.n_train_archs >= static_cast<int>(cfg.archs.size()))
    throw ConfigError("n_train_archs must leave at least one test architecture");

  CorpusResult result;
  result.bugs = default_bugs(cfg);
  Manifest& manifest = result.manifest;
  manifest.version = 1;
  manifest.window_cycles = cfg.window_cycles;

  for (size_t i = 0; i < cfg.archs.size(); ++i)
    manifest.splits[cfg.archs[i].arch_id] =
        static_cast<int>(i) < cfg.n_train_archs ? Split::Train : Split::Test;
  for (const auto& b : result.bugs) manifest.categories[b.bug_id] = b.category;

  std::filesystem::create_directories(out_dir);

  auto emit = [&](const ArchConfig& arch, const WorkloadProfile& w,
                  const std::optional<BugSpec>& bug,
                  const GeneratorConfig& use_cfg, const std::string& tag) {
    CounterTrace trace = generate_trace(arch, w, bug, use_cfg);
    const std::string name = w.workload_id + "__" + tag + ".csv";
    const std::filesystem::path rel = std::filesystem::path(arch.arch_id) / name;
    std::filesystem::create_directories(out_dir / arch.arch_id);
    write_trace(trace, out_dir / rel);
    ManifestEntry e;
    e.path = rel.generic_string();
    e.workload_id = w.workload_id;
    e.arch_id = arch.arch_id;
    e.label = trace.label;
    e.bug_id = trace.bug_id;
    manifest.traces.push_back(std::move(e));
    return trace;
  };

  for (size_t i = 0; i < cfg.archs.size(); ++i) {
    const ArchConfig& arch = cfg.archs[i];
    const bool is_train = static_cast<int>(i) < cfg.n_train_archs;
    std::map<std::string, double> bugfree_mean;
    for (const auto& w : cfg.workloads) {
      if (cfg.emit_bugfree)
        bugfree_mean[w.workload_id] =
            emit(arch, w, std::nullopt, cfg, "bugfree").ipc.mean();
      else
        bugfree_mean[w.workload_id] =
            generate_trace(arch, w, std::nullopt, cfg).ipc.mean();
      if (is_train && cfg.emit_bugfree) {
        for (int r = 1; r <= cfg.bugfree_replicas; ++r) {
          GeneratorConfig rc = cfg;
          rc.rng_seed = mix64(cfg.rng_seed + 0x51abULL * std::uint64_t(r));
          emit(arch, w, std::nullopt, rc, "bugfree-r" + std::to_string(r));
        }
      }
    }
    for (const auto& b : result.bugs) {
      if (is_train && b.category != BugCategory::SeenVariation) continue;
      double impact_sum = 0.0;
      for (const auto& w : cfg.workloads) {
        const CounterTrace trace = emit(arch, w, b, cfg, b.bug_id);
        const double free_mean = bugfree_mean[w.workload_id];
        impact_sum += free_mean > 0.0 ? (free_mean - trace.ipc.mean()) / free_mean
                                      : 0.0;
      }
      result.impacts[{arch.arch_id, b.bug_id}] =
          impact_sum / double(cfg.workloads.size());
    }
  }

  save_manifest(manifest, out_dir / "manifest.json");

  std::ofstream imp(out_dir / "impacts.csv");
  imp << "arch_id,bug_id,mean_ipc_impact\n";
  for (const auto& [key, v] : result.impacts)
    imp << key.first << ',' << key.second << ',' << v << '\n';

  // audit: the corpus must reload as a valid dataset
  load_dataset(out_dir / "manifest.json");
  return result;
}

}  // namespace bugloc
