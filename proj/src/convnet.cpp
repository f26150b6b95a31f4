#include "bugloc/convnet.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

#include "bugloc/errors.hpp"
#include "bugloc/gbdt.hpp"  // sigmoid

namespace bugloc {

void ConvTrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (learning_rate <= 0.0) throw ConfigError("learning_rate must be positive");
  if (early_stop_patience < 0) throw ConfigError("patience must be >= 0");
  if (positive_weight <= 0.0) throw ConfigError("positive_weight must be positive");
}

namespace {

Eigen::MatrixXd im2col(const Eigen::Ref<const Eigen::MatrixXd>& x, int kernel) {
  const Eigen::Index t_out = x.rows() - kernel + 1;
  const Eigen::Index ch = x.cols();
  Eigen::MatrixXd m(t_out, kernel * ch);
  for (int dt = 0; dt < kernel; ++dt)
    m.block(0, dt * ch, t_out, ch) = x.block(dt, 0, t_out, ch);
  return m;
}

struct ForwardCache {
  std::vector<Eigen::MatrixXd> conv_cols;  // im2col inputs per conv layer
  std::vector<Eigen::MatrixXd> conv_pre;   // pre-activation per conv layer
  std::vector<Eigen::VectorXd> dense_in;   // input vector per dense layer
  std::vector<Eigen::VectorXd> dense_pre;  // pre-activation per dense layer
  double logit = 0.0;
};

}  // namespace

ConvNet1D::ConvNet1D(Eigen::Index time_steps, Eigen::Index channels,
                     const ConvNetArch& arch, std::uint64_t seed)
    : time_steps_(time_steps), channels_(channels), arch_(arch) {
  if (time_steps < 1 || channels < 1)
    throw ShapeMismatch("convnet input dimensions must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto he_matrix = [&](Eigen::Index rows, Eigen::Index cols, double fan_in) {
    Eigen::MatrixXd w(rows, cols);
    const double s = std::sqrt(2.0 / fan_in);
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i) w(i, j) = s * normal(rng);
    return w;
  };

  Eigen::Index t = time_steps, ch = channels;
  for (const auto& layer : arch_.conv) {
    if (t - layer.kernel_width + 1 < 1)
      throw ShapeMismatch("conv kernel wider than remaining time steps");
    const Eigen::Index fan_in = layer.kernel_width * ch;
    params_.push_back(he_matrix(layer.filters, fan_in, double(fan_in)));
    params_.push_back(Eigen::MatrixXd::Zero(layer.filters, 1));
    t = t - layer.kernel_width + 1;
    ch = layer.filters;
  }
  Eigen::Index width = t * ch;
  for (int units : arch_.dense) {
    params_.push_back(he_matrix(units, width, double(width)));
    params_.push_back(Eigen::MatrixXd::Zero(units, 1));
    width = units;
  }
  // output unit, Glorot scale
  Eigen::MatrixXd wout(1, width);
  const double s = std::sqrt(1.0 / double(width));
  for (Eigen::Index i = 0; i < width; ++i) wout(0, i) = s * normal(rng);
  params_.push_back(wout);
  params_.push_back(Eigen::MatrixXd::Zero(1, 1));

  chan_mean_ = Eigen::VectorXd::Zero(channels);
  chan_std_ = Eigen::VectorXd::Ones(channels);
}

void ConvNet1D::set_standardizer(const Eigen::VectorXd& mean,
                                 const Eigen::VectorXd& std) {
  if (mean.size() != channels_ || std.size() != channels_)
    throw ShapeMismatch("standardizer size != channel count");
  chan_mean_ = mean;
  chan_std_ = std;
}

Eigen::MatrixXd ConvNet1D::standardize(
    const Eigen::Ref<const Eigen::MatrixXd>& input) const {
  Eigen::MatrixXd x = input;
  for (Eigen::Index c = 0; c < channels_; ++c) {
    const double s = chan_std_[c] > 0.0 ? chan_std_[c] : 1.0;
    x.col(c) = (x.col(c).array() - chan_mean_[c]) / s;
  }
  return x;
}

namespace {

ForwardCache forward_pass(const std::vector<Eigen::MatrixXd>& params,
                          const ConvNetArch& arch, const Eigen::MatrixXd& x0) {
  ForwardCache cache;
  Eigen::MatrixXd a = x0;
  size_t p = 0;
  for (const auto& layer : arch.conv) {
    Eigen::MatrixXd cols = im2col(a, layer.kernel_width);
    Eigen::MatrixXd z = cols * params[p].transpose();
    z.rowwise() += params[p + 1].col(0).transpose();
    cache.conv_cols.push_back(std::move(cols));
    cache.conv_pre.push_back(z);
    a = z.cwiseMax(0.0);
    p += 2;
  }
  Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(a.data(), a.size());
  for (size_t d = 0; d < arch.dense.size(); ++d) {
    cache.dense_in.push_back(v);
    Eigen::VectorXd z = params[p] * v + params[p + 1].col(0);
    cache.dense_pre.push_back(z);
    v = z.cwiseMax(0.0);
    p += 2;
  }
  cache.dense_in.push_back(v);
  cache.logit = (params[p] * v)(0) + params[p + 1](0, 0);
  return cache;
}

}  // namespace

double ConvNet1D::logit(const Eigen::Ref<const Eigen::MatrixXd>& input) const {
  if (input.rows() != time_steps_ || input.cols() != channels_)
    throw ShapeMismatch("convnet input shape mismatch");
  return forward_pass(params_, arch_, standardize(input)).logit;
}

double ConvNet1D::predict(const Eigen::Ref<const Eigen::MatrixXd>& input) const {
  return sigmoid(logit(input));
}

double ConvNet1D::loss_and_gradients(const std::vector<Eigen::MatrixXd>& inputs,
                                     const std::vector<double>& labels,
                                     const std::vector<double>& weights,
                                     std::vector<Eigen::MatrixXd>& grads) const {
  const size_t n = inputs.size();
  if (n == 0) throw EmptyInput("empty convnet batch");
  if (labels.size() != n || weights.size() != n)
    throw ShapeMismatch("labels/weights length mismatch");

  grads.clear();
  for (const auto& pmat : params_)
    grads.push_back(Eigen::MatrixXd::Zero(pmat.rows(), pmat.cols()));

  double total_loss = 0.0;
  const double inv_n = 1.0 / double(n);
  const size_t n_conv = arch_.conv.size();
  const size_t n_dense = arch_.dense.size();

  for (size_t s = 0; s < n; ++s) {
    const Eigen::MatrixXd x0 = standardize(inputs[s]);
    ForwardCache cache = forward_pass(params_, arch_, x0);
    const double z = cache.logit;
    const double y = labels[s];
    const double w = weights[s];
    total_loss +=
        w * (std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z))));

    double dz = w * (sigmoid(z) - y) * inv_n;

    // output unit
    size_t p = params_.size() - 2;
    const Eigen::VectorXd& last = cache.dense_in.back();
    grads[p] += dz * last.transpose();
    grads[p + 1](0, 0) += dz;
    Eigen::VectorXd dv = dz * params_[p].row(0).transpose();

    // hidden dense layers
    for (size_t d = n_dense; d-- > 0;) {
      p -= 2;
      Eigen::VectorXd dzv = dv.cwiseProduct(
          (cache.dense_pre[d].array() > 0.0).cast<double>().matrix());
      grads[p] += dzv * cache.dense_in[d].transpose();
      grads[p + 1].col(0) += dzv;
      dv = params_[p].transpose() * dzv;
    }

    // conv layers
    for (size_t l = n_conv; l-- > 0;) {
      p -= 2;
      const Eigen::MatrixXd& pre = cache.conv_pre[l];
      Eigen::MatrixXd da =
          Eigen::Map<const Eigen::MatrixXd>(dv.data(), pre.rows(), pre.cols());
      Eigen::MatrixXd dzm =
          da.cwiseProduct((pre.array() > 0.0).cast<double>().matrix());
      grads[p] += dzm.transpose() * cache.conv_cols[l];
      grads[p + 1].col(0) += dzm.colwise().sum().transpose();
      if (l > 0) {
        Eigen::MatrixXd dcols = dzm * params_[p];
        const int kernel = arch_.conv[l].kernel_width;
        const Eigen::Index ch = cache.conv_cols[l].cols() / kernel;
        Eigen::MatrixXd dx = Eigen::MatrixXd::Zero(pre.rows() + kernel - 1, ch);
        for (int dt = 0; dt < kernel; ++dt)
          dx.block(dt, 0, pre.rows(), ch) += dcols.block(0, dt * ch, pre.rows(), ch);
        dv = Eigen::Map<Eigen::VectorXd>(dx.data(), dx.size());
      }
    }
  }
  return total_loss * inv_n;
}

ConvNet1D fit_convnet(const std::vector<Eigen::MatrixXd>& inputs,
                      const std::vector<double>& labels, const ConvNetArch& arch,
                      const ConvTrainConfig& cfg) {
  cfg.validate();
  const size_t n = inputs.size();
  if (n < 2) throw InsufficientData("fit_convnet needs at least 2 samples");
  if (labels.size() != n) throw ShapeMismatch("labels length != sample count");
  const Eigen::Index t = inputs[0].rows();
  const Eigen::Index ch = inputs[0].cols();
  for (const auto& x : inputs)
    if (x.rows() != t || x.cols() != ch)
      throw ShapeMismatch("convnet inputs must share one T x Ch shape");
  for (double y : labels)
    if (y != 0.0 && y != 1.0) throw ValueError("convnet labels must be 0 or 1");

  ConvNet1D net(t, ch, arch, cfg.rng_seed);

  if (cfg.standardize_inputs) {
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(ch);
    Eigen::VectorXd var = Eigen::VectorXd::Zero(ch);
    const double count = double(n) * double(t);
    for (const auto& x : inputs) mean += x.colwise().sum().transpose();
    mean /= count;
    for (const auto& x : inputs)
      var += (x.rowwise() - mean.transpose()).array().square().colwise().sum().matrix().transpose();
    var /= count;
    net.set_standardizer(mean, var.array().sqrt().matrix());
  }

  std::vector<double> weights(n, 1.0);
  for (size_t i = 0; i < n; ++i)
    if (labels[i] == 1.0) weights[i] = cfg.positive_weight;

  // Adam state
  std::vector<Eigen::MatrixXd> m1, m2;
  for (const auto& pmat : net.parameters()) {
    m1.push_back(Eigen::MatrixXd::Zero(pmat.rows(), pmat.cols()));
    m2.push_back(Eigen::MatrixXd::Zero(pmat.rows(), pmat.cols()));
  }

  std::mt19937_64 rng(cfg.rng_seed + 0x9e3779b97f4a7c15ULL);
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  std::vector<Eigen::MatrixXd> grads;
  std::vector<Eigen::MatrixXd> batch_x;
  std::vector<double> batch_y, batch_w;
  long step = 0;
  double best_loss = std::numeric_limits<double>::infinity();
  int stall = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    size_t batches = 0;
    for (size_t start = 0; start < n; start += cfg.batch_size) {
      batch_x.clear();
      batch_y.clear();
      batch_w.clear();
      for (size_t i = start; i < std::min(n, start + cfg.batch_size); ++i) {
        batch_x.push_back(inputs[order[i]]);
        batch_y.push_back(labels[order[i]]);
        batch_w.push_back(weights[order[i]]);
      }
      const double loss = net.loss_and_gradients(batch_x, batch_y, batch_w, grads);
      if (!std::isfinite(loss))
        throw NonFiniteLoss("training loss became non-finite at epoch " +
                            std::to_string(epoch));
      epoch_loss += loss;
      ++batches;
      ++step;
      const double bc1 = 1.0 - std::pow(cfg.adam_beta1, double(step));
      const double bc2 = 1.0 - std::pow(cfg.adam_beta2, double(step));
      auto& params = net.parameters();
      for (size_t p = 0; p < params.size(); ++p) {
        m1[p] = cfg.adam_beta1 * m1[p] + (1.0 - cfg.adam_beta1) * grads[p];
        m2[p] = cfg.adam_beta2 * m2[p].array().matrix() +
                (1.0 - cfg.adam_beta2) * grads[p].array().square().matrix();
        params[p].array() -= cfg.learning_rate * (m1[p].array() / bc1) /
                             ((m2[p].array() / bc2).sqrt() + cfg.adam_eps);
      }
    }
    epoch_loss /= double(batches);
    if (cfg.early_stop_patience > 0) {
      if (epoch_loss < best_loss - 1e-9) {
        best_loss = epoch_loss;
        stall = 0;
      } else if (++stall >= cfg.early_stop_patience) {
        break;
      }
    }
  }
  return net;
}

double grad_check(const ConvNet1D& net, const std::vector<Eigen::MatrixXd>& inputs,
                  const std::vector<double>& labels, double epsilon) {
  std::vector<double> weights(inputs.size(), 1.0);
  std::vector<Eigen::MatrixXd> analytic;
  ConvNet1D work = net;
  work.loss_and_gradients(inputs, labels, weights, analytic);

  double worst = 0.0;
  std::vector<Eigen::MatrixXd> scratch;
  auto& params = work.parameters();
  for (size_t p = 0; p < params.size(); ++p) {
    for (Eigen::Index j = 0; j < params[p].cols(); ++j) {
      for (Eigen::Index i = 0; i < params[p].rows(); ++i) {
        const double saved = params[p](i, j);
        params[p](i, j) = saved + epsilon;
        const double lp = work.loss_and_gradients(inputs, labels, weights, scratch);
        params[p](i, j) = saved - epsilon;
        const double lm = work.loss_and_gradients(inputs, labels, weights, scratch);
        params[p](i, j) = saved;
        const double numeric = (lp - lm) / (2.0 * epsilon);
        const double a = analytic[p](i, j);
        const double rel =
            std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
        worst = std::max(worst, rel);
      }
    }
  }
  return worst;
}

nlohmann::json ConvNet1D::to_json() const {
  nlohmann::json j;
  j["format"] = "bugloc-convnet";
  j["version"] = 1;
  j["time_steps"] = time_steps_;
  j["channels"] = channels_;
  j["conv"] = nlohmann::json::array();
  for (const auto& l : arch_.conv)
    j["conv"].push_back({{"filters", l.filters}, {"kernel_width", l.kernel_width}});
  j["dense"] = arch_.dense;
  j["chan_mean"] = std::vector<double>(chan_mean_.data(),
                                      chan_mean_.data() + chan_mean_.size());
  j["chan_std"] =
      std::vector<double>(chan_std_.data(), chan_std_.data() + chan_std_.size());
  j["params"] = nlohmann::json::array();
  for (const auto& pmat : params_) {
    j["params"].push_back(
        {{"rows", pmat.rows()},
         {"cols", pmat.cols()},
         {"data", std::vector<double>(pmat.data(), pmat.data() + pmat.size())}});
  }
  return j;
}

ConvNet1D ConvNet1D::from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "bugloc-convnet")
    throw ParseError("not a bugloc-convnet model");
  ConvNetArch arch;
  arch.conv.clear();
  for (const auto& l : j.at("conv"))
    arch.conv.push_back({l.at("filters").get<int>(), l.at("kernel_width").get<int>()});
  arch.dense = j.at("dense").get<std::vector<int>>();
  ConvNet1D net(j.at("time_steps").get<Eigen::Index>(),
                j.at("channels").get<Eigen::Index>(), arch, 0);
  auto mean = j.at("chan_mean").get<std::vector<double>>();
  auto stdv = j.at("chan_std").get<std::vector<double>>();
  net.chan_mean_ = Eigen::Map<Eigen::VectorXd>(mean.data(), mean.size());
  net.chan_std_ = Eigen::Map<Eigen::VectorXd>(stdv.data(), stdv.size());
  const auto& jp = j.at("params");
  if (jp.size() != net.params_.size())
    throw ParseError("convnet parameter count mismatch");
  for (size_t p = 0; p < net.params_.size(); ++p) {
    const auto rows = jp[p].at("rows").get<Eigen::Index>();
    const auto cols = jp[p].at("cols").get<Eigen::Index>();
    auto data = jp[p].at("data").get<std::vector<double>>();
    if (rows != net.params_[p].rows() || cols != net.params_[p].cols() ||
        static_cast<Eigen::Index>(data.size()) != rows * cols)
      throw ParseError("convnet parameter shape mismatch");
    net.params_[p] = Eigen::Map<Eigen::MatrixXd>(data.data(), rows, cols);
  }
  return net;
}

}  // namespace bugloc
