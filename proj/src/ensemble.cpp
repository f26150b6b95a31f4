#include "bugloc/ensemble.hpp"

#include "bugloc/errors.hpp"

namespace bugloc {

ScoreVector normalize(const ScoreVector& scores, bool& uniform_fallback) {
  if (scores.scores.empty()) throw EmptyInput("normalize over empty score vector");
  double total = 0.0;
  for (const auto& [u, s] : scores.scores) {
    if (s < 0.0) throw ValueError("negative score for " + to_string(u));
    total += s;
  }
  ScoreVector out;
  out.normalized = true;
  uniform_fallback = total == 0.0;
  const double n = static_cast<double>(scores.scores.size());
  for (const auto& [u, s] : scores.scores)
    out.scores[u] = uniform_fallback ? 1.0 / n : s / total;
  return out;
}

ScoreVector normalize(const ScoreVector& scores) {
  bool fallback = false;
  return normalize(scores, fallback);
}

EnsembleVerdict combine(const ScoreVector& cbc, const ScoreVector& p2bc) {
  if (cbc.scores.size() != p2bc.scores.size())
    throw KeyMismatch("score vectors differ in unit set");
  for (const auto& [u, s] : cbc.scores)
    if (!p2bc.scores.count(u))
      throw KeyMismatch("unit " + to_string(u) + " missing from p2bc scores");

  EnsembleVerdict v;
  bool fb_cbc = false, fb_p2bc = false;
  v.cbc_normalized = normalize(cbc, fb_cbc);
  v.p2bc_normalized = normalize(p2bc, fb_p2bc);
  v.uniform_fallback = fb_cbc || fb_p2bc;
  v.combined.normalized = true;
  for (const auto& [u, s] : v.cbc_normalized.scores)
    v.combined.scores[u] = 0.5 * (s + v.p2bc_normalized.scores.at(u));
  v.ranking = rank_units(v.combined.scores);
  return v;
}

}  // namespace bugloc
