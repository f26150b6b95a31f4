#include "bugloc/gbdt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

#include "bugloc/errors.hpp"

namespace bugloc {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

void GbdtConfig::validate() const {
  if (n_trees < 0) throw ConfigError("n_trees must be >= 0");
  if (learning_rate <= 0.0) throw ConfigError("learning_rate must be positive");
  if (max_depth < 1) throw ConfigError("max_depth must be >= 1");
  if (reg_lambda < 0.0) throw ConfigError("reg_lambda must be >= 0");
  if (positive_weight <= 0.0) throw ConfigError("positive_weight must be positive");
}

double Tree::evaluate(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
  int node = 0;
  while (!nodes[node].is_leaf()) {
    const TreeNode& n = nodes[node];
    node = (row[n.feature] < n.threshold) ? n.left : n.right;
  }
  return nodes[node].value;
}

double GbdtModel::margin_one(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
  if (row.size() != num_features)
    throw ShapeMismatch("feature count mismatch: got " + std::to_string(row.size()) +
                        ", model expects " + std::to_string(num_features));
  double margin = base_score;
  for (const auto& t : trees) margin += learning_rate * t.evaluate(row);
  return margin;
}

double GbdtModel::predict_one(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
  const double m = margin_one(row);
  return loss == GbdtLoss::Logistic ? sigmoid(m) : m;
}

Eigen::VectorXd GbdtModel::predict(
    const Eigen::Ref<const Eigen::MatrixXd>& features) const {
  Eigen::VectorXd out(features.rows());
  for (Eigen::Index i = 0; i < features.rows(); ++i)
    out[i] = predict_one(features.row(i));
  return out;
}

Eigen::VectorXd predict_gbdt(const GbdtModel& model,
                             const Eigen::Ref<const Eigen::MatrixXd>& features) {
  return model.predict(features);
}

namespace {

struct SplitCandidate {
  double gain = 0.0;
  int feature = -1;
  double threshold = 0.0;
  double grad_left = 0.0;
  double hess_left = 0.0;
};

struct NodeBuild {
  int id = 0;
  double grad = 0.0;
  double hess = 0.0;
  SplitCandidate best;
};

double leaf_value(double grad, double hess, double lambda) {
  return -grad / (hess + lambda);
}

double score(double grad, double hess, double lambda) {
  return grad * grad / (hess + lambda);
}

// One boosting round: exact greedy, level-wise growth over presorted columns.
Tree build_tree(const Eigen::Ref<const Eigen::MatrixXd>& features,
                const Eigen::VectorXd& grad, const Eigen::VectorXd& hess,
                const std::vector<std::vector<int>>& sorted_idx,
                const GbdtConfig& cfg, std::vector<int>& node_of) {
  const auto n = static_cast<int>(features.rows());
  const auto n_feat = static_cast<int>(features.cols());
  constexpr double kMinGain = 1e-12;

  Tree tree;
  tree.nodes.emplace_back();
  std::fill(node_of.begin(), node_of.end(), 0);

  std::vector<NodeBuild> level(1);
  level[0].id = 0;
  level[0].grad = grad.sum();
  level[0].hess = hess.sum();

  // slot_of[node id] -> index in `level`, or -1 when the node is settled
  std::vector<int> slot_of{0};

  for (int depth = 0; depth < cfg.max_depth && !level.empty(); ++depth) {
    const auto n_slots = static_cast<int>(level.size());
    std::vector<double> acc_grad(n_slots), acc_hess(n_slots), last_val(n_slots);
    std::vector<int> acc_count(n_slots);

    for (int f = 0; f < n_feat; ++f) {
      std::fill(acc_grad.begin(), acc_grad.end(), 0.0);
      std::fill(acc_hess.begin(), acc_hess.end(), 0.0);
      std::fill(acc_count.begin(), acc_count.end(), 0);
      for (int i : sorted_idx[f]) {
        const int slot = slot_of[node_of[i]];
        if (slot < 0) continue;
        const double v = features(i, f);
        NodeBuild& nb = level[slot];
        if (acc_count[slot] > 0 && v > last_val[slot]) {
          const double gl = acc_grad[slot], hl = acc_hess[slot];
          const double gr = nb.grad - gl, hr = nb.hess - hl;
          if (hl >= cfg.min_child_weight && hr >= cfg.min_child_weight) {
            const double gain = 0.5 * (score(gl, hl, cfg.reg_lambda) +
                                       score(gr, hr, cfg.reg_lambda) -
                                       score(nb.grad, nb.hess, cfg.reg_lambda));
            if (gain > nb.best.gain + kMinGain ||
                (gain > kMinGain && nb.best.feature < 0)) {
              nb.best = {gain, f, 0.5 * (v + last_val[slot]), gl, hl};
            }
          }
        }
        acc_grad[slot] += grad[i];
        acc_hess[slot] += hess[i];
        acc_count[slot] += 1;
        last_val[slot] = v;
      }
    }

    // Materialize accepted splits and prepare the next level.
    std::vector<NodeBuild> next;
    for (NodeBuild& nb : level) {
      TreeNode& node = tree.nodes[nb.id];
      if (nb.best.feature < 0 || depth + 1 > cfg.max_depth) {
        node.value = leaf_value(nb.grad, nb.hess, cfg.reg_lambda);
        continue;
      }
      node.feature = nb.best.feature;
      node.threshold = nb.best.threshold;
      node.left = static_cast<int>(tree.nodes.size());
      node.right = node.left + 1;
      tree.nodes.emplace_back();
      tree.nodes.emplace_back();

      NodeBuild l, r;
      l.id = node.left;
      l.grad = nb.best.grad_left;
      l.hess = nb.best.hess_left;
      r.id = node.right;
      r.grad = nb.grad - l.grad;
      r.hess = nb.hess - l.hess;
      next.push_back(l);
      next.push_back(r);
    }
    if (next.empty()) break;

    slot_of.assign(tree.nodes.size(), -1);
    for (int s = 0; s < static_cast<int>(next.size()); ++s)
      slot_of[next[s].id] = s;
    for (int i = 0; i < n; ++i) {
      const TreeNode& node = tree.nodes[node_of[i]];
      if (!node.is_leaf())
        node_of[i] = (features(i, node.feature) < node.threshold) ? node.left
                                                                  : node.right;
    }
    level = std::move(next);
    if (depth + 1 == cfg.max_depth) {
      for (NodeBuild& nb : level)
        tree.nodes[nb.id].value = leaf_value(nb.grad, nb.hess, cfg.reg_lambda);
      level.clear();
    }
  }
  return tree;
}

}  // namespace

GbdtModel fit_gbdt(const Eigen::Ref<const Eigen::MatrixXd>& features,
                   const Eigen::Ref<const Eigen::VectorXd>& targets,
                   GbdtLoss loss, const GbdtConfig& cfg,
                   std::vector<std::string> feature_names) {
  cfg.validate();
  const auto n = static_cast<int>(features.rows());
  const auto n_feat = static_cast<int>(features.cols());
  if (n < 2) throw InsufficientData("fit_gbdt needs at least 2 samples");
  if (targets.size() != n) throw ShapeMismatch("targets length != sample count");
  if (!features.allFinite() || !targets.allFinite())
    throw ValueError("fit_gbdt inputs must be finite");
  if (!feature_names.empty() &&
      static_cast<int>(feature_names.size()) != n_feat)
    throw ShapeMismatch("feature_names length != feature count");

  GbdtModel model;
  model.loss = loss;
  model.learning_rate = cfg.learning_rate;
  model.feature_names = std::move(feature_names);
  model.num_features = n_feat;

  Eigen::VectorXd weight = Eigen::VectorXd::Ones(n);
  if (loss == GbdtLoss::Logistic) {
    for (int i = 0; i < n; ++i) {
      if (targets[i] != 0.0 && targets[i] != 1.0)
        throw ValueError("Logistic targets must be 0 or 1");
      if (targets[i] == 1.0) weight[i] = cfg.positive_weight;
    }
    const double wsum = weight.sum();
    const double p = std::clamp(weight.dot(targets) / wsum, 1e-6, 1.0 - 1e-6);
    model.base_score = std::log(p / (1.0 - p));
    const double mean_y = targets.mean();
    if (mean_y == 0.0 || mean_y == 1.0) {
      model.degenerate = true;  // single class: constant model
      return model;
    }
  } else {
    model.base_score = targets.mean();
  }

  // Presort each column once; stable order keeps the fit deterministic.
  std::vector<std::vector<int>> sorted_idx(n_feat);
  for (int f = 0; f < n_feat; ++f) {
    auto& idx = sorted_idx[f];
    idx.resize(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
      return features(a, f) < features(b, f);
    });
  }

  Eigen::VectorXd margin = Eigen::VectorXd::Constant(n, model.base_score);
  Eigen::VectorXd grad(n), hess(n);
  std::vector<int> node_of(n);

  for (int round = 0; round < cfg.n_trees; ++round) {
    if (loss == GbdtLoss::Logistic) {
      for (int i = 0; i < n; ++i) {
        const double p = sigmoid(margin[i]);
        grad[i] = weight[i] * (p - targets[i]);
        hess[i] = weight[i] * p * (1.0 - p);
      }
    } else {
      grad = margin - targets;
      hess.setOnes();
    }
    Tree tree = build_tree(features, grad, hess, sorted_idx, cfg, node_of);
    for (int i = 0; i < n; ++i)
      margin[i] += cfg.learning_rate * tree.nodes[node_of[i]].value;
    model.trees.push_back(std::move(tree));
  }
  return model;
}

nlohmann::json GbdtModel::to_json() const {
  nlohmann::json j;
  j["format"] = "bugloc-gbdt";
  j["version"] = 1;
  j["loss"] = loss == GbdtLoss::Logistic ? "logistic" : "squared";
  j["base_score"] = base_score;
  j["learning_rate"] = learning_rate;
  j["num_features"] = num_features;
  j["feature_names"] = feature_names;
  j["degenerate"] = degenerate;
  nlohmann::json jtrees = nlohmann::json::array();
  for (const auto& t : trees) {
    nlohmann::json jt = nlohmann::json::array();
    for (const auto& nd : t.nodes) {
      if (nd.is_leaf())
        jt.push_back({{"value", nd.value}});
      else
        jt.push_back({{"feature", nd.feature},
                      {"threshold", nd.threshold},
                      {"left", nd.left},
                      {"right", nd.right}});
    }
    jtrees.push_back(std::move(jt));
  }
  j["trees"] = std::move(jtrees);
  return j;
}

GbdtModel GbdtModel::from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "bugloc-gbdt")
    throw ParseError("not a bugloc-gbdt model");
  GbdtModel m;
  m.loss = j.at("loss") == "logistic" ? GbdtLoss::Logistic : GbdtLoss::Squared;
  m.base_score = j.at("base_score").get<double>();
  m.learning_rate = j.at("learning_rate").get<double>();
  m.num_features = j.at("num_features").get<int>();
  m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
  m.degenerate = j.at("degenerate").get<bool>();
  for (const auto& jt : j.at("trees")) {
    Tree t;
    for (const auto& jn : jt) {
      TreeNode nd;
      if (jn.contains("value")) {
        nd.value = jn.at("value").get<double>();
      } else {
        nd.feature = jn.at("feature").get<int>();
        nd.threshold = jn.at("threshold").get<double>();
        nd.left = jn.at("left").get<int>();
        nd.right = jn.at("right").get<int>();
      }
      t.nodes.push_back(nd);
    }
    m.trees.push_back(std::move(t));
  }
  return m;
}

}  // namespace bugloc
