#ifndef BUGLOC_COUNTER_SELECT_HPP
#define BUGLOC_COUNTER_SELECT_HPP

#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bugloc/types.hpp"

namespace bugloc {

// Two-step correlation-based counter selection. Step 1 keeps counters whose
// average |corr(counter, IPC)| over bug-free train-architecture traces
// reaches alpha; step 2 prunes redundant counters whose pairwise correlation
// with an already-kept counter exceeds beta.
struct SelectionConfig {
  double alpha = 0.7;
  double beta = 0.95;

  void validate() const;
};

struct SelectionResult {
  std::map<std::string, std::vector<std::string>> per_workload;
  std::vector<std::string> superset;
};

// Pearson correlation coefficient; 0 when either input has zero variance.
// Throws LengthMismatch on unequal or too-short inputs.
double pearson(const Eigen::Ref<const Eigen::VectorXd>& x,
               const Eigen::Ref<const Eigen::VectorXd>& y);

std::vector<std::string> select_counters(const Dataset& dataset,
                                         const std::string& workload,
                                         const SelectionConfig& cfg);

// De-duplicated union, ordered by first appearance across workloads sorted
// by workload_id.
std::vector<std::string> build_superset(
    const std::map<std::string, std::vector<std::string>>& per_workload);

SelectionResult select_all(const Dataset& dataset, const SelectionConfig& cfg);

}  // namespace bugloc

#endif
