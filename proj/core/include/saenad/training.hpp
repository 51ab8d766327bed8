#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "saenad/data_ingest.hpp"
#include "saenad/geo_kernel.hpp"
#include "saenad/model.hpp"

namespace saenad {

struct TrainConfig {
  double learning_rate = 1e-3;
  double lambda = 1e-3;
  double alpha = 2.0;
  double epsilon = 1e-5;
  std::size_t batch_size = 256;
  std::size_t num_iterations = 100;
  std::uint64_t seed = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  // 2 squares the confidence with the residual, (c (x - x_hat))^2; 1 weights
  // the squared residual by c alone.
  int weight_exponent = 2;
  unsigned threads = 1;

  void validate() const;
};

using Gradients = TensorSet;

struct AdamState {
  TensorSet m;
  TensorSet v;
  std::uint64_t step = 0;

  static AdamState zeros(const Architecture& arch);
};

struct TrainHistory {
  std::vector<double> batch_objectives;       // in the order batches ran
  std::vector<std::size_t> batches_per_epoch;  // one entry per iteration
  std::vector<double> epoch_mean_objective;    // mean of that iteration's batch objectives
  std::vector<double> epoch_seconds;
};

// sum_i (c_i (x_i - x_hat_i))^2 for exponent 2, sum_i c_i (x_i - x_hat_i)^2 for 1.
// Throws NumericError on non-finite input.
double weighted_loss(const Eigen::VectorXd& x, const Eigen::VectorXd& x_hat, const Eigen::VectorXd& c,
                     int weight_exponent = 2);

// lambda * (|W1|^2 + |W2|^2 + |W3|^2 + |W4|^2 + |Wa|^2 + |wt|^2). Biases are not penalised.
double regularization(const ModelParams& params, double lambda);

inline double objective(double reconstruction_loss, const ModelParams& params, double lambda) {
  return reconstruction_loss + regularization(params, lambda);
}

// Dense targets for a batch: binary x and confidence c, one column per user.
struct BatchTargets {
  Eigen::MatrixXd x;
  Eigen::MatrixXd confidence;
};

BatchTargets batch_targets(const InteractionData& data, std::span<const UserIndex> users);

// Sum over batch columns of weighted_loss, in column order.
double batch_loss(const BatchForward& fwd, const BatchTargets& targets, int weight_exponent);

// Gradient of batch_loss + regularization with respect to every tensor, for the
// masks recorded in `fwd`. Both uses of W1 (encoder and neighbour term) and of
// W4 (output weights and neighbour term) are accumulated. Throws NumericError
// naming the first tensor with a non-finite gradient.
Gradients backward(const ModelParams& params, const GeoKernel& kernel, const BatchForward& fwd,
                   const BatchTargets& targets, double lambda, int weight_exponent, unsigned threads = 1);

// One bias-corrected Adam update of every tensor.
void adam_step(AdamState& state, ModelParams& params, const Gradients& grads, const TrainConfig& config);

struct TrainHooks {
  std::function<void(std::size_t iteration, std::size_t batch, double objective)> on_batch;
  std::function<void(std::size_t iteration, const ModelParams&)> on_iteration_end;
};

struct TrainResult {
  ModelParams params;
  TrainHistory history;
};

// Mini-batch training: each iteration shuffles the users, splits them into
// ceil(M / batch_size) batches (the last may be partial), and runs forward,
// objective, backward and Adam per batch. Users with an empty check-in row are
// left out. Throws DivergenceError if an objective turns non-finite.
TrainResult train(const TrainConfig& config, const InteractionData& data, const GeoKernel& kernel,
                  const Architecture& architecture, const TrainHooks& hooks = {});

// Same loop starting from existing parameters with a fresh optimiser.
TrainResult train_from(ModelParams params, const TrainConfig& config, const InteractionData& data,
                       const GeoKernel& kernel, const TrainHooks& hooks = {});

struct GradCheckOptions {
  Architecture arch{20, 8, 5, 3, Variant::SAE_NAD, 0.0};
  std::size_t users = 5;
  std::size_t max_coords_per_tensor = 2000;
  double step = 1e-5;
  double lambda = 1e-3;
  double alpha = 2.0;
  double epsilon = 1e-5;
  int weight_exponent = 2;
  double gamma = 60.0;
  std::uint64_t seed = 0;
  // Test hook: doubles the analytic gradient.
  bool corrupt_gradient = false;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_tensor;
  std::map<std::string, double> per_tensor;  // max relative error per tensor
  std::size_t coordinates_checked = 0;
};

// |g_a - g_n| / max(|g_a|, |g_n|, 1e-8)
double relative_error(double analytic, double numeric);

// Compares backward against central differences on a seeded random instance
// (dropout off). Tensors larger than max_coords_per_tensor are subsampled.
GradCheckResult grad_check(const GradCheckOptions& options);

}  // namespace saenad
