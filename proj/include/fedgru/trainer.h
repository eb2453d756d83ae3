#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fedgru/gru.h"

namespace fedgru::grunet {

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct TrainConfig {
  long batch_len = 200;  // S, slots per training window
  long horizon = 20;     // t', slots predicted past the window
  int epochs = 200;
  double lr = 0.01;
  double lr_drop_factor = 0.2;
  int lr_drop_period = 125;
  double grad_threshold = 1.0;  // global L2 norm
  double dropout_p = 0.2;
  AdamHyper adam;
  std::uint64_t seed = 0;

  // Throws ConfigError naming the violated bound.
  void validate() const;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long step = 0;

  explicit AdamState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

// Rescales `grad` in place so that its L2 norm is at most `threshold`.
// Returns the norm before clipping.
double clip_gradients(std::span<double> grad, double threshold);

// One bias-corrected Adam update of `params` in place.
void adam_step(std::span<double> params,
               std::span<const double> grad,
               AdamState& state,
               double lr,
               const AdamHyper& hyper = {});

// Learning rate in effect during 1-based `epoch`.
double learning_rate_at(const TrainConfig& config, int epoch);

struct TrainResult {
  ModelParams params;
  std::vector<double> loss_trace;  // one entry per epoch, train-mode loss
};

// Full-sequence epochs of seq2seq regression on `series` (already
// normalized): inputs series[0..S-2], targets series[1..S-1]. Each epoch is
// one forward/backward pass, clipping and one Adam step.
// Throws DataError when the series has fewer than two values.
TrainResult train_epochs(std::span<const double> series, ModelParams params, const TrainConfig& config);

// Warms the hidden state over `series` in eval mode, then feeds each
// prediction back as the next input for `horizon` steps.
std::vector<double> predict_future(std::span<const double> series, const ModelParams& params, long horizon);

// Eval-mode one-step-ahead loss of `params` on `series`.
double evaluate_loss(std::span<const double> series, const ModelParams& params);

}  // namespace fedgru::grunet
