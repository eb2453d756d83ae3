#include "fedgru/trainer.h"

#include <cmath>
#include <string>

#include "fedgru/errors.h"
#include "fedgru/rng.h"

namespace fedgru::grunet {

void TrainConfig::validate() const {
  if (batch_len < 2) throw ConfigError("batch_len must be at least 2");
  if (horizon < 1) throw ConfigError("horizon must be at least 1");
  if (horizon > batch_len) throw ConfigError("horizon must not exceed batch_len");
  if (epochs < 0) throw ConfigError("epochs must be non-negative");
  if (!(lr > 0.0)) throw ConfigError("lr must be positive");
  if (!(lr_drop_factor > 0.0) || lr_drop_factor > 1.0) throw ConfigError("lr_drop_factor must lie in (0,1]");
  if (lr_drop_period < 1) throw ConfigError("lr_drop_period must be at least 1");
  if (!(grad_threshold > 0.0)) throw ConfigError("grad_threshold must be positive");
  if (dropout_p < 0.0 || dropout_p >= 1.0) throw ConfigError("dropout_p must lie in [0,1)");
  if (adam.beta1 < 0.0 || adam.beta1 >= 1.0 || adam.beta2 < 0.0 || adam.beta2 >= 1.0)
    throw ConfigError("adam betas must lie in [0,1)");
  if (!(adam.epsilon > 0.0)) throw ConfigError("adam epsilon must be positive");
}

double clip_gradients(std::span<double> grad, double threshold) {
  if (!(threshold > 0.0)) throw ConfigError("gradient threshold must be positive");
  double ss = 0.0;
  for (double g : grad) ss += g * g;
  const double norm = std::sqrt(ss);
  if (norm > threshold) {
    const double scale = threshold / norm;
    for (auto& g : grad) g *= scale;
  }
  return norm;
}

void adam_step(std::span<double> params,
               std::span<const double> grad,
               AdamState& state,
               double lr,
               const AdamHyper& hyper) {
  if (grad.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size())
    throw StructuralError("adam_step: parameter, gradient and state sizes differ");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(hyper.beta1, t);
  const double c2 = 1.0 - std::pow(hyper.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = hyper.beta1 * state.m[i] + (1.0 - hyper.beta1) * grad[i];
    state.v[i] = hyper.beta2 * state.v[i] + (1.0 - hyper.beta2) * grad[i] * grad[i];
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + hyper.epsilon);
  }
}

double learning_rate_at(const TrainConfig& config, int epoch) {
  const int drops = epoch <= 1 ? 0 : (epoch - 1) / config.lr_drop_period;
  return config.lr * std::pow(config.lr_drop_factor, drops);
}

TrainResult train_epochs(std::span<const double> series, ModelParams params, const TrainConfig& config) {
  if (series.size() < 2) throw DataError("training series needs at least 2 values, got " + std::to_string(series.size()));

  const auto inputs = series.first(series.size() - 1);
  const auto targets = series.subspan(1);

  TrainResult result{std::move(params), {}};
  result.loss_trace.reserve(static_cast<std::size_t>(config.epochs));
  AdamState adam(result.params.layout().size());
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto fwd = forward_sequence(inputs, result.params, config.dropout_p, Mode::train,
                                      config.seed ^ (0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(epoch)));
    result.loss_trace.push_back(hmse_loss(fwd.outputs, targets));
    auto grad = backward(result.params, fwd.cache, targets);
    clip_gradients(grad, config.grad_threshold);
    adam_step(result.params.flat(), grad, adam, learning_rate_at(config, epoch), config.adam);
  }
  return result;
}

std::vector<double> predict_future(std::span<const double> series, const ModelParams& params, long horizon) {
  if (horizon < 1) throw StructuralError("prediction horizon must be at least 1");
  if (series.empty()) throw StructuralError("predict_future: empty warm-up series");

  std::vector<Eigen::VectorXd> h;
  std::vector<GruLayerParams> layers;
  for (std::size_t l = 0; l < params.num_layers(); ++l) {
    layers.push_back(params.layer(l));
    h.push_back(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(params.shape().hidden[l])));
  }
  const Eigen::RowVectorXd w = params.dense_w();
  const double b = params.dense_b();

  auto step = [&](double x) {
    Eigen::VectorXd in(1);
    in(0) = x;
    for (std::size_t l = 0; l < layers.size(); ++l) {
      h[l] = gru_cell_step(in, h[l], layers[l]);
      in = h[l];
    }
    return w.dot(in) + b;
  };

  double next = 0.0;
  for (double x : series) next = step(x);
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(horizon));
  out.push_back(next);
  for (long k = 1; k < horizon; ++k) {
    next = step(next);
    out.push_back(next);
  }
  return out;
}

double evaluate_loss(std::span<const double> series, const ModelParams& params) {
  if (series.size() < 2) throw DataError("evaluation series needs at least 2 values");
  const auto fwd = forward_sequence(series.first(series.size() - 1), params, 0.0, Mode::eval, 0);
  return hmse_loss(fwd.outputs, series.subspan(1));
}

}  // namespace fedgru::grunet
