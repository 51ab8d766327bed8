#include "saenad/training.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

#include "saenad/error.hpp"
#include "saenad/parallel.hpp"

namespace saenad {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

Index idx(std::size_t n) { return static_cast<Index>(n); }

// d/dx_hat of the weighted loss: -2 w (x - x_hat) with w = c^exponent.
MatrixXd loss_gradient(const MatrixXd& x, const MatrixXd& x_hat, const MatrixXd& c, int weight_exponent) {
  const auto weight = weight_exponent == 2 ? (c.array() * c.array()).eval() : c.array().eval();
  return (-2.0 * weight * (x - x_hat).array()).matrix();
}

struct AttentionGrads {
  MatrixXd dWa;  // d_a x H1
  VectorXd dwt;  // d_a
  MatrixXd dE;   // H1 x n
};

// Backpropagates dz1_pre (gradient at the pre-activation of z1) through
//   z1_pre = Z1^T wt + bt,  Z1 = A E^T,  A = softmax_rows(T),  T = tanh(Wa E).
AttentionGrads attention_backward(const ModelParams& params, const BatchForward::AttentionCache& c,
                                  const VectorXd& dpre1) {
  AttentionGrads g;
  g.dwt = c.Z1 * dpre1;
  const MatrixXd dZ1 = params.w.wt * dpre1.transpose();  // d_a x H1
  const MatrixXd dA = dZ1 * c.E;                         // d_a x n
  g.dE = dZ1.transpose() * c.A;                          // H1 x n
  // Softmax Jacobian per row: dT = A .* (dA - sum_j dA_j A_j).
  const VectorXd inner = (dA.array() * c.A.array()).rowwise().sum();
  const MatrixXd dT = (c.A.array() * (dA.colwise() - inner).array()).matrix();
  const MatrixXd dS = (dT.array() * (1.0 - c.T.array().square())).matrix();
  g.dWa = dS * c.E.transpose();
  g.dE += params.w.Wa.transpose() * dS;
  return g;
}

void check_finite(const Gradients& g) {
  for_each_tensor(g, [](std::string_view name, const auto& t) {
    if (!t.allFinite()) throw NumericError("non-finite gradient in " + std::string(name));
  });
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ValidationError("learning_rate must be positive");
  if (!(lambda >= 0.0)) throw ValidationError("lambda must be non-negative");
  if (!(alpha > 0.0) || !(epsilon > 0.0)) throw ValidationError("alpha and epsilon must be positive");
  if (batch_size == 0) throw ValidationError("batch_size must be positive");
  if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0) || !(adam_beta2 > 0.0 && adam_beta2 < 1.0)) {
    throw ValidationError("Adam betas must lie in (0, 1)");
  }
  if (!(adam_eps > 0.0)) throw ValidationError("adam_eps must be positive");
  if (weight_exponent != 1 && weight_exponent != 2) throw ValidationError("weight_exponent must be 1 or 2");
}

AdamState AdamState::zeros(const Architecture& arch) {
  return AdamState{TensorSet::zeros(arch), TensorSet::zeros(arch), 0};
}

double weighted_loss(const VectorXd& x, const VectorXd& x_hat, const VectorXd& c, int weight_exponent) {
  if (x.size() != x_hat.size() || x.size() != c.size()) throw ShapeError("weighted_loss: length mismatch");
  if (!x.allFinite() || !x_hat.allFinite() || !c.allFinite()) throw NumericError("weighted_loss: non-finite input");
  double total = 0.0;
  for (Index i = 0; i < x.size(); ++i) {
    const double r = x[i] - x_hat[i];
    if (weight_exponent == 2) {
      const double t = c[i] * r;
      total += t * t;
    } else {
      total += c[i] * r * r;
    }
  }
  return total;
}

double regularization(const ModelParams& params, double lambda) {
  const auto& w = params.w;
  const double sq = w.W1.squaredNorm() + w.W2.squaredNorm() + w.W3.squaredNorm() + w.W4.squaredNorm() +
                    w.Wa.squaredNorm() + w.wt.squaredNorm();
  return lambda * sq;
}

BatchTargets batch_targets(const InteractionData& data, std::span<const UserIndex> users) {
  const Index N = idx(data.poi_count());
  BatchTargets t{MatrixXd::Zero(N, idx(users.size())), MatrixXd::Ones(N, idx(users.size()))};
  for (std::size_t b = 0; b < users.size(); ++b) {
    const auto cols = data.checkins(users[b]);
    const auto conf = data.confidences(users[b]);
    for (std::size_t k = 0; k < cols.size(); ++k) {
      t.x(cols[k], idx(b)) = 1.0;
      t.confidence(cols[k], idx(b)) = conf[k];
    }
  }
  return t;
}

double batch_loss(const BatchForward& fwd, const BatchTargets& targets, int weight_exponent) {
  if (targets.x.rows() != fwd.Xhat.rows() || targets.x.cols() != fwd.Xhat.cols()) {
    throw ShapeError("batch_loss: targets do not match the forward batch");
  }
  double total = 0.0;
  for (Index b = 0; b < fwd.Xhat.cols(); ++b) {
    total += weighted_loss(targets.x.col(b), fwd.Xhat.col(b), targets.confidence.col(b), weight_exponent);
  }
  return total;
}

Gradients backward(const ModelParams& params, const GeoKernel& kernel, const BatchForward& fwd,
                   const BatchTargets& targets, double lambda, int weight_exponent, unsigned threads) {
  const auto& w = params.w;
  Gradients g = TensorSet::zeros(params.arch);
  const bool dropped = fwd.M1.size() != 0;

  // Output layer: x_hat = sigmoid(out).
  const MatrixXd dXhat = loss_gradient(targets.x, fwd.Xhat, targets.confidence, weight_exponent);
  const MatrixXd dOut = (dXhat.array() * fwd.Xhat.array() * (1.0 - fwd.Xhat.array())).matrix();

  g.b4 = dOut.rowwise().sum();
  g.W4 = dOut * fwd.H3.transpose();

  MatrixXd d = w.W4.transpose() * dOut;  // dH3
  if (dropped) d = d.cwiseProduct(fwd.M3);
  d = (d.array() * (1.0 - fwd.Z3.array().square())).matrix();  // dPre3
  g.b3 = d.rowwise().sum();
  g.W3 = d * fwd.H2.transpose();

  d = w.W3.transpose() * d;  // dH2
  if (dropped) d = d.cwiseProduct(fwd.M2);
  d = (d.array() * (1.0 - fwd.Z2.array().square())).matrix();  // dPre2
  g.b2 = d.rowwise().sum();
  g.W2 = d * fwd.H1.transpose();

  d = w.W2.transpose() * d;  // dH1
  if (dropped) d = d.cwiseProduct(fwd.M1);
  const MatrixXd dPre1 = (d.array() * (1.0 - fwd.Z1.array().square())).matrix();

  const std::size_t B = fwd.batch_size();
  if (fwd.attention_path()) {
    std::vector<AttentionGrads> per_user(B);
    parallel_for(B, threads, [&](std::size_t b) {
      per_user[b] = attention_backward(params, fwd.attention[b], dPre1.col(idx(b)));
    });
    g.bt = dPre1.rowwise().sum();
    for (std::size_t b = 0; b < B; ++b) {
      g.Wa += per_user[b].dWa;
      g.wt += per_user[b].dwt;
      const auto& L = fwd.checkins[b];
      for (std::size_t j = 0; j < L.size(); ++j) g.W1.col(L[j]) += per_user[b].dE.col(idx(j));
    }
  } else {
    g.b1 = dPre1.rowwise().sum();
    for (std::size_t b = 0; b < B; ++b)
      for (auto l : fwd.checkins[b]) g.W1.col(l) += dPre1.col(idx(b));
  }

  // Neighbour term: out_i += sum_j K(i, l_j) <W4 row i, W1 column l_j>.
  if (fwd.neighbor_path()) {
    for (std::size_t b = 0; b < B; ++b) {
      for (auto l : fwd.checkins[b]) {
        const auto col = kernel.column(l);
        for (std::size_t k = 0; k < col.rows.size(); ++k) {
          const auto i = col.rows[k];
          const double s = dOut(i, idx(b)) * col.values[k];
          if (s == 0.0) continue;
          g.W4.row(i) += s * w.W1.col(l).transpose();
          g.W1.col(l) += s * w.W4.row(i).transpose();
        }
      }
    }
  }

  if (lambda != 0.0) {
    g.W1 += 2.0 * lambda * w.W1;
    g.W2 += 2.0 * lambda * w.W2;
    g.W3 += 2.0 * lambda * w.W3;
    g.W4 += 2.0 * lambda * w.W4;
    g.Wa += 2.0 * lambda * w.Wa;
    g.wt += 2.0 * lambda * w.wt;
  }
  check_finite(g);
  return g;
}

void adam_step(AdamState& state, ModelParams& params, const Gradients& grads, const TrainConfig& config) {
  ++state.step;
  const double b1 = config.adam_beta1;
  const double b2 = config.adam_beta2;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(b1, t);
  const double c2 = 1.0 - std::pow(b2, t);
  const double lr = config.learning_rate;
  const double eps = config.adam_eps;

  auto update = [&](auto& theta, const auto& g, auto& m, auto& v) {
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
    theta.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  };
  update(params.w.W1, grads.W1, state.m.W1, state.v.W1);
  update(params.w.W2, grads.W2, state.m.W2, state.v.W2);
  update(params.w.W3, grads.W3, state.m.W3, state.v.W3);
  update(params.w.W4, grads.W4, state.m.W4, state.v.W4);
  update(params.w.b1, grads.b1, state.m.b1, state.v.b1);
  update(params.w.b2, grads.b2, state.m.b2, state.v.b2);
  update(params.w.b3, grads.b3, state.m.b3, state.v.b3);
  update(params.w.b4, grads.b4, state.m.b4, state.v.b4);
  update(params.w.Wa, grads.Wa, state.m.Wa, state.v.Wa);
  update(params.w.wt, grads.wt, state.m.wt, state.v.wt);
  update(params.w.bt, grads.bt, state.m.bt, state.v.bt);
}

TrainResult train(const TrainConfig& config, const InteractionData& data, const GeoKernel& kernel,
                  const Architecture& architecture, const TrainHooks& hooks) {
  return train_from(ModelParams::initialize(architecture, config.seed), config, data, kernel, hooks);
}

TrainResult train_from(ModelParams params, const TrainConfig& config, const InteractionData& data,
                       const GeoKernel& kernel, const TrainHooks& hooks) {
  config.validate();
  params.validate();
  if (data.poi_count() != params.arch.pois) {
    throw ShapeError("data has N=" + std::to_string(data.poi_count()) + " but the model has N=" +
                     std::to_string(params.arch.pois));
  }
  if (uses_neighbors(params.arch.variant) && kernel.size() != params.arch.pois) {
    throw ShapeError("kernel has N=" + std::to_string(kernel.size()) + " but the model has N=" +
                     std::to_string(params.arch.pois));
  }

  std::vector<UserIndex> order;
  for (UserIndex u = 0; u < data.user_count(); ++u)
    if (!data.checkins(u).empty()) order.push_back(u);

  TrainResult result{std::move(params), {}};
  auto& model = result.params;
  auto& history = result.history;
  AdamState adam = AdamState::zeros(model.arch);
  Rng shuffle_rng(substream_seed(config.seed, "shuffle"));
  Rng dropout_rng(substream_seed(config.seed, "dropout"));

  const std::size_t batches = (order.size() + config.batch_size - 1) / config.batch_size;
  std::vector<std::span<const PoiIndex>> lists;

  for (std::size_t iter = 0; iter < config.num_iterations; ++iter) {
    const auto started = std::chrono::steady_clock::now();
    shuffle_rng.shuffle(std::span<UserIndex>(order));
    double epoch_total = 0.0;
    for (std::size_t b = 0; b < batches; ++b) {
      const auto begin = b * config.batch_size;
      const auto end = std::min(order.size(), begin + config.batch_size);
      const std::span<const UserIndex> users(order.data() + begin, end - begin);

      lists.clear();
      for (auto u : users) lists.push_back(data.checkins(u));
      const auto fwd = forward_batch(model, kernel, lists, Mode::Train, &dropout_rng, {}, config.threads);
      const auto targets = batch_targets(data, users);
      double obj;
      try {
        obj = objective(batch_loss(fwd, targets, config.weight_exponent), model, config.lambda);
      } catch (const NumericError& e) {
        throw DivergenceError(iter, e.what());
      }
      if (!std::isfinite(obj)) throw DivergenceError(iter, "objective is not finite");

      Gradients grads;
      try {
        grads = backward(model, kernel, fwd, targets, config.lambda, config.weight_exponent, config.threads);
      } catch (const NumericError& e) {
        throw DivergenceError(iter, e.what());
      }
      adam_step(adam, model, grads, config);

      history.batch_objectives.push_back(obj);
      epoch_total += obj;
      if (hooks.on_batch) hooks.on_batch(iter, b, obj);
    }
    history.batches_per_epoch.push_back(batches);
    history.epoch_mean_objective.push_back(batches ? epoch_total / static_cast<double>(batches) : 0.0);
    history.epoch_seconds.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count());
    if (hooks.on_iteration_end) hooks.on_iteration_end(iter, model);
  }
  return result;
}

}  // namespace saenad
