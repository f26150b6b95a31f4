#ifndef BUGLOC_TYPES_HPP
#define BUGLOC_TYPES_HPP

#include <Eigen/Dense>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace bugloc {

// The 11 microarchitectural unit classes, plus two sentinels. BugFree is a
// trainable extra class when enabled; Unknown is inference-only.
enum class UnitLabel {
  Fetch,
  Decode,
  Issue,
  Rename,
  Execute,
  Branch,
  Registers,
  LoadStoreQueue,
  Memory,
  ReOrderBuffer,
  Commit,
  BugFree,
  Unknown,
};

inline constexpr int kNumUnits = 11;

// The 11 unit classes in their fixed canonical order. This order also breaks
// score ties during ranking.
const std::vector<UnitLabel>& all_units();

std::string to_string(UnitLabel u);
UnitLabel unit_from_string(const std::string& s);

// One workload execution on one architecture: a T x C counter matrix sampled
// and reset per window, the matching IPC series, and a label.
struct CounterTrace {
  std::string workload_id;
  std::string arch_id;
  UnitLabel label = UnitLabel::Unknown;
  std::optional<std::string> bug_id;
  Eigen::MatrixXd samples;  // T x C, counter deltas per window
  std::vector<std::string> counter_names;
  Eigen::VectorXd ipc;  // length T
  long window_cycles = 0;

  Eigen::Index steps() const { return samples.rows(); }
  Eigen::Index counters() const { return samples.cols(); }

  // Throws SchemaError / ValueError on any invariant violation.
  void validate() const;
};

enum class Split { Train, Test };
enum class BugCategory { SeenVariation, UnseenVariation, UnseenType };

struct ManifestEntry {
  std::string path;
  std::string workload_id;
  std::string arch_id;
  UnitLabel label = UnitLabel::Unknown;
  std::optional<std::string> bug_id;
};

struct Manifest {
  int version = 1;
  long window_cycles = 0;
  std::vector<ManifestEntry> traces;
  std::map<std::string, Split> splits;           // arch_id -> split
  std::map<std::string, BugCategory> categories;  // bug_id -> category
};

// Immutable after construction; loaders enforce the split/category
// leakage rules and the single-bug assumption.
struct Dataset {
  std::vector<CounterTrace> traces;  // sorted by (arch_id, workload_id, bug)
  std::vector<std::string> workloads;  // ordered set W
  std::vector<UnitLabel> units;        // ordered set U (the 11 classes)
  std::map<std::string, Split> splits;
  std::map<std::string, BugCategory> categories;
  long window_cycles = 0;

  Split split_of(const std::string& arch_id) const;
  std::optional<BugCategory> category_of(const std::string& bug_id) const;
  void validate() const;
};

// Per-unit confidence scores, rankable into a localization verdict.
struct ScoreVector {
  std::map<UnitLabel, double> scores;
  bool normalized = false;
};

// Descending-score ranking over the keys of `scores`; ties broken by the
// canonical unit order (BugFree last).
std::vector<UnitLabel> rank_units(const std::map<UnitLabel, double>& scores);

}  // namespace bugloc

#endif
