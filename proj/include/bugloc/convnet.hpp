#ifndef BUGLOC_CONVNET_HPP
#define BUGLOC_CONVNET_HPP

#include <cstdint>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

namespace bugloc {

// Binary 1D convolutional classifier. Convolutions run strictly along the
// time axis (valid padding, stride 1); channels mix only through filter
// depth. Default shape: 2 conv layers of 100 filters, dense 300/100/50 with
// ReLU, one sigmoid output unit.
struct ConvLayerSpec {
  int filters = 100;
  int kernel_width = 3;
};

struct ConvNetArch {
  std::vector<ConvLayerSpec> conv = {{100, 3}, {100, 3}};
  std::vector<int> dense = {300, 100, 50};
};

struct ConvTrainConfig {
  int epochs = 40;
  int batch_size = 16;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int early_stop_patience = 0;  // 0 disables early stopping
  std::uint64_t rng_seed = 0;
  bool standardize_inputs = true;
  double positive_weight = 1.0;

  void validate() const;
};

class ConvNet1D {
public:
  ConvNet1D() = default;
  // Randomly initialized network for time_steps x channels inputs.
  ConvNet1D(Eigen::Index time_steps, Eigen::Index channels,
            const ConvNetArch& arch, std::uint64_t seed);

  Eigen::Index time_steps() const { return time_steps_; }
  Eigen::Index channels() const { return channels_; }

  // Sigmoid confidence in (0,1) for one T x Ch input.
  double predict(const Eigen::Ref<const Eigen::MatrixXd>& input) const;
  // Pre-sigmoid output.
  double logit(const Eigen::Ref<const Eigen::MatrixXd>& input) const;

  // Weighted binary cross-entropy over a batch plus parameter gradients,
  // laid out in the same order as parameters().
  double loss_and_gradients(const std::vector<Eigen::MatrixXd>& inputs,
                            const std::vector<double>& labels,
                            const std::vector<double>& weights,
                            std::vector<Eigen::MatrixXd>& grads) const;

  std::vector<Eigen::MatrixXd>& parameters() { return params_; }
  const std::vector<Eigen::MatrixXd>& parameters() const { return params_; }

  void set_standardizer(const Eigen::VectorXd& mean, const Eigen::VectorXd& std);

  nlohmann::json to_json() const;
  static ConvNet1D from_json(const nlohmann::json& j);

private:
  friend ConvNet1D fit_convnet(const std::vector<Eigen::MatrixXd>&,
                               const std::vector<double>&, const ConvNetArch&,
                               const ConvTrainConfig&);

  Eigen::MatrixXd standardize(
      const Eigen::Ref<const Eigen::MatrixXd>& input) const;

  Eigen::Index time_steps_ = 0;
  Eigen::Index channels_ = 0;
  ConvNetArch arch_;
  // Per conv layer: weight (filters x kernel*in_ch) then bias (filters x 1);
  // per dense layer: weight (out x in) then bias (out x 1); final unit last.
  std::vector<Eigen::MatrixXd> params_;
  Eigen::VectorXd chan_mean_;  // per-channel z-score statistics
  Eigen::VectorXd chan_std_;
};

// Mini-batch Adam on weighted binary cross-entropy. Deterministic for a
// fixed seed on one thread.
ConvNet1D fit_convnet(const std::vector<Eigen::MatrixXd>& inputs,
                      const std::vector<double>& labels,
                      const ConvNetArch& arch, const ConvTrainConfig& cfg);

// Worst relative error of backprop gradients vs central finite differences
// (epsilon 1e-4) on the given batch.
double grad_check(const ConvNet1D& net, const std::vector<Eigen::MatrixXd>& inputs,
                  const std::vector<double>& labels, double epsilon = 1e-4);

}  // namespace bugloc

#endif
