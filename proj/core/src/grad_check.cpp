#include <algorithm>
#include <cmath>
#include <numeric>

#include "saenad/error.hpp"
#include "saenad/training.hpp"

namespace saenad {

namespace {

using Eigen::Index;

struct Instance {
  ModelParams params;
  InteractionData data;
  GeoKernel kernel;
  std::vector<UserIndex> users;
};

// Random POIs in a half-degree box (dense enough for kernel neighbours at
// gamma = 60), users with 2..6 distinct POIs and 1..4 check-ins each, and
// parameters with non-zero biases so every term carries signal.
Instance random_instance(const GradCheckOptions& o) {
  Rng rng(substream_seed(o.seed, "gradcheck"));
  const auto N = o.arch.pois;

  std::vector<GeoPoint> points(N);
  for (auto& p : points) p = {30.0 + rng.uniform(0.0, 0.5), -97.0 + rng.uniform(0.0, 0.5)};

  std::vector<InteractionData::Entry> entries;
  for (UserIndex u = 0; u < o.users; ++u) {
    std::vector<PoiIndex> pois(N);
    std::iota(pois.begin(), pois.end(), PoiIndex{0});
    rng.shuffle(std::span<PoiIndex>(pois));
    const auto n = std::min<std::size_t>(N, 2 + rng.below(5));
    for (std::size_t k = 0; k < n; ++k) entries.push_back({u, pois[k], static_cast<std::uint32_t>(1 + rng.below(4))});
  }

  Instance inst{ModelParams::initialize(o.arch, o.seed),
                InteractionData::from_counts(o.users, N, std::move(entries), o.alpha, o.epsilon),
                build_kernel(points, KernelOptions{o.gamma, 0.1, DistanceMetric::EuclideanDegrees, false, 1}),
                {}};
  auto jitter = [&rng](auto& v) {
    for (Index i = 0; i < v.size(); ++i) v[i] = rng.uniform(-0.5, 0.5);
  };
  jitter(inst.params.w.b1);
  jitter(inst.params.w.b2);
  jitter(inst.params.w.b3);
  jitter(inst.params.w.b4);
  jitter(inst.params.w.bt);
  inst.users.resize(o.users);
  std::iota(inst.users.begin(), inst.users.end(), UserIndex{0});
  return inst;
}

}  // namespace

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

GradCheckResult grad_check(const GradCheckOptions& o) {
  auto arch = o.arch;
  arch.dropout = 0.0;
  auto opts = o;
  opts.arch = arch;
  Instance inst = random_instance(opts);

  std::vector<std::span<const PoiIndex>> lists;
  for (auto u : inst.users) lists.push_back(inst.data.checkins(u));
  const auto targets = batch_targets(inst.data, inst.users);

  // Loss as an N x B matrix of per-entry terms. The numeric gradient sums
  // term-wise differences plus the perturbed coordinate's penalty difference.
  auto loss_terms = [&](const ModelParams& p) -> Eigen::MatrixXd {
    const auto fwd = forward_batch(p, inst.kernel, lists, Mode::Eval, nullptr);
    const Eigen::ArrayXXd r = targets.x.array() - fwd.Xhat.array();
    if (o.weight_exponent == 2) return (targets.confidence.array() * r).square().matrix();
    return (targets.confidence.array() * r.square()).matrix();
  };
  const auto fwd = forward_batch(inst.params, inst.kernel, lists, Mode::Eval, nullptr);
  Gradients analytic = backward(inst.params, inst.kernel, fwd, targets, o.lambda, o.weight_exponent);
  if (o.corrupt_gradient) {
    for_each_tensor(analytic, [](std::string_view, auto& t) { t *= 2.0; });
  }

  GradCheckResult result;
  Rng pick(substream_seed(o.seed, "gradcheck-sample"));
  ModelParams probe = inst.params;

  for_each_tensor_pair(probe.w, analytic, [&](std::string_view name, auto& theta, const auto& grad) {
    const bool penalised = name.front() == 'W' || name == "wt";
    const auto size = static_cast<std::size_t>(theta.size());
    std::vector<std::size_t> coords(size);
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (size > o.max_coords_per_tensor) {
      pick.shuffle(std::span<std::size_t>(coords));
      coords.resize(o.max_coords_per_tensor);
      std::sort(coords.begin(), coords.end());
    }
    double worst = 0.0;
    for (auto k : coords) {
      double& slot = theta.data()[k];
      const double saved = slot;
      const double up_value = saved + o.step;
      const double down_value = saved - o.step;
      slot = up_value;
      const Eigen::MatrixXd up = loss_terms(probe);
      slot = down_value;
      const Eigen::MatrixXd down = loss_terms(probe);
      slot = saved;
      double diff = (up - down).sum();
      if (penalised) diff += o.lambda * (up_value * up_value - down_value * down_value);
      const double numeric = diff / (2.0 * o.step);
      worst = std::max(worst, relative_error(grad.data()[k], numeric));
    }
    result.per_tensor[std::string(name)] = worst;
    result.coordinates_checked += coords.size();
    if (worst >= result.max_relative_error) {
      result.max_relative_error = worst;
      result.worst_tensor = std::string(name);
    }
  });
  return result;
}

}  // namespace saenad
