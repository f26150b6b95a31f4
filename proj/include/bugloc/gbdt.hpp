#ifndef BUGLOC_GBDT_HPP
#define BUGLOC_GBDT_HPP

#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

namespace bugloc {

enum class GbdtLoss { Logistic, Squared };

// Flat node array; split nodes point at children, leaves carry the raw
// (unshrunk) value. Prediction = base_score + learning_rate * sum of leaves.
struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;  // leaf value
  bool is_leaf() const { return feature < 0; }
};

struct Tree {
  std::vector<TreeNode> nodes;  // node 0 is the root
  double evaluate(const Eigen::Ref<const Eigen::RowVectorXd>& row) const;
};

struct GbdtConfig {
  int n_trees = 100;
  double learning_rate = 0.3;
  int max_depth = 6;
  double reg_lambda = 1.0;
  double min_child_weight = 1.0;
  double positive_weight = 1.0;  // weight applied to y == 1 rows (Logistic)

  void validate() const;
};

struct GbdtModel {
  std::vector<Tree> trees;
  GbdtLoss loss = GbdtLoss::Logistic;
  double base_score = 0.0;  // in margin space
  double learning_rate = 0.3;
  std::vector<std::string> feature_names;  // may be empty
  int num_features = 0;
  bool degenerate = false;  // single-class Logistic fit, base_score only

  Eigen::Index n_features() const { return num_features; }
  // Logistic: probability in (0,1); Squared: raw value.
  double predict_one(const Eigen::Ref<const Eigen::RowVectorXd>& row) const;
  Eigen::VectorXd predict(const Eigen::Ref<const Eigen::MatrixXd>& features) const;
  // Margin (pre-sigmoid) prediction.
  double margin_one(const Eigen::Ref<const Eigen::RowVectorXd>& row) const;

  nlohmann::json to_json() const;
  static GbdtModel from_json(const nlohmann::json& j);
};

// Stagewise Newton boosting with exact greedy splits over sorted feature
// values. Deterministic; single-threaded.
GbdtModel fit_gbdt(const Eigen::Ref<const Eigen::MatrixXd>& features,
                   const Eigen::Ref<const Eigen::VectorXd>& targets,
                   GbdtLoss loss, const GbdtConfig& cfg,
                   std::vector<std::string> feature_names = {});

Eigen::VectorXd predict_gbdt(const GbdtModel& model,
                             const Eigen::Ref<const Eigen::MatrixXd>& features);

double sigmoid(double z);

}  // namespace bugloc

#endif
