#include "bugloc/types.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "bugloc/errors.hpp"

namespace bugloc {

const std::vector<UnitLabel>& all_units() {
  static const std::vector<UnitLabel> units = {
      UnitLabel::Fetch,     UnitLabel::Decode,        UnitLabel::Issue,
      UnitLabel::Rename,    UnitLabel::Execute,       UnitLabel::Branch,
      UnitLabel::Registers, UnitLabel::LoadStoreQueue, UnitLabel::Memory,
      UnitLabel::ReOrderBuffer, UnitLabel::Commit};
  return units;
}

std::string to_string(UnitLabel u) {
  switch (u) {
    case UnitLabel::Fetch: return "Fetch";
    case UnitLabel::Decode: return "Decode";
    case UnitLabel::Issue: return "Issue";
    case UnitLabel::Rename: return "Rename";
    case UnitLabel::Execute: return "Execute";
    case UnitLabel::Branch: return "Branch";
    case UnitLabel::Registers: return "Registers";
    case UnitLabel::LoadStoreQueue: return "LoadStoreQueue";
    case UnitLabel::Memory: return "Memory";
    case UnitLabel::ReOrderBuffer: return "ReOrderBuffer";
    case UnitLabel::Commit: return "Commit";
    case UnitLabel::BugFree: return "BugFree";
    case UnitLabel::Unknown: return "Unknown";
  }
  throw ValueError("invalid UnitLabel");
}

UnitLabel unit_from_string(const std::string& s) {
  for (UnitLabel u : all_units()) {
    if (to_string(u) == s) return u;
  }
  if (s == "BugFree") return UnitLabel::BugFree;
  if (s == "Unknown") return UnitLabel::Unknown;
  throw ParseError("unknown unit label: " + s);
}

void CounterTrace::validate() const {
  if (samples.rows() < 1) throw SchemaError("trace must have at least one window");
  if (samples.rows() != ipc.size())
    throw SchemaError("samples row count does not match ipc length");
  if (static_cast<Eigen::Index>(counter_names.size()) != samples.cols())
    throw SchemaError("counter_names length does not match column count");
  std::set<std::string> seen;
  for (const auto& n : counter_names) {
    if (!seen.insert(n).second)
      throw SchemaError("duplicate counter name: " + n);
  }
  if (window_cycles <= 0) throw SchemaError("window_cycles must be positive");
  if (!samples.allFinite() || (samples.array() < 0.0).any())
    throw ValueError("counter values must be finite and non-negative");
  if (!ipc.allFinite() || (ipc.array() < 0.0).any())
    throw ValueError("ipc values must be finite and non-negative");
}

Split Dataset::split_of(const std::string& arch_id) const {
  auto it = splits.find(arch_id);
  if (it == splits.end())
    throw ManifestError("no split assignment for architecture " + arch_id);
  return it->second;
}

std::optional<BugCategory> Dataset::category_of(const std::string& bug_id) const {
  auto it = categories.find(bug_id);
  if (it == categories.end()) return std::nullopt;
  return it->second;
}

void Dataset::validate() const {
  std::set<std::string> wset(workloads.begin(), workloads.end());
  for (const auto& t : traces) {
    t.validate();
    if (!wset.count(t.workload_id))
      throw ManifestError("trace workload " + t.workload_id + " not in W");
    if (t.bug_id && t.label == UnitLabel::BugFree)
      throw ManifestError("BugFree trace carries a bug_id");
    if (!t.bug_id && t.label != UnitLabel::BugFree && t.label != UnitLabel::Unknown)
      throw ManifestError("buggy trace without bug_id for workload " + t.workload_id);
    if (t.bug_id) {
      auto cat = category_of(*t.bug_id);
      if (!cat) throw ManifestError("bug " + *t.bug_id + " has no category");
      if (split_of(t.arch_id) == Split::Train &&
          (*cat == BugCategory::UnseenVariation || *cat == BugCategory::UnseenType)) {
        throw LeakageError("unseen bug " + *t.bug_id + " appears in train architecture " +
                           t.arch_id);
      }
    }
  }
}

std::vector<UnitLabel> rank_units(const std::map<UnitLabel, double>& scores) {
  // Tie order: canonical unit order, BugFree after the 11 units.
  auto tie_index = [](UnitLabel u) {
    const auto& units = all_units();
    auto it = std::find(units.begin(), units.end(), u);
    if (it != units.end()) return static_cast<int>(it - units.begin());
    return u == UnitLabel::BugFree ? kNumUnits : kNumUnits + 1;
  };
  std::vector<UnitLabel> order;
  order.reserve(scores.size());
  for (const auto& [u, s] : scores) order.push_back(u);
  std::stable_sort(order.begin(), order.end(), [&](UnitLabel a, UnitLabel b) {
    double sa = scores.at(a), sb = scores.at(b);
    if (sa != sb) return sa > sb;
    return tie_index(a) < tie_index(b);
  });
  return order;
}

}  // namespace bugloc
