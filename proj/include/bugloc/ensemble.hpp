#ifndef BUGLOC_ENSEMBLE_HPP
#define BUGLOC_ENSEMBLE_HPP

#include "bugloc/types.hpp"

namespace bugloc {

struct EnsembleVerdict {
  ScoreVector cbc_normalized;
  ScoreVector p2bc_normalized;
  ScoreVector combined;
  std::vector<UnitLabel> ranking;
  bool uniform_fallback = false;  // an all-zero input was normalized uniformly
};

// Divides every score by the total so the vector sums to one. All-zero input
// falls back to the uniform vector and sets `normalized` with a flag via
// the second overload.
ScoreVector normalize(const ScoreVector& scores);
ScoreVector normalize(const ScoreVector& scores, bool& uniform_fallback);

// Elementwise mean of the two normalized vectors, ranked descending.
EnsembleVerdict combine(const ScoreVector& cbc, const ScoreVector& p2bc);

}  // namespace bugloc

#endif
