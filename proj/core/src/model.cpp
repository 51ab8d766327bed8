#include "saenad/model.hpp"

#include <algorithm>
#include <cmath>

#include "saenad/error.hpp"
#include "saenad/parallel.hpp"

namespace saenad {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

Index idx(std::size_t n) { return static_cast<Index>(n); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Softmax over each row, max-shifted.
MatrixXd row_softmax(const MatrixXd& logits) {
  MatrixXd out(logits.rows(), logits.cols());
  for (Index r = 0; r < logits.rows(); ++r) {
    const double m = logits.row(r).maxCoeff();
    out.row(r) = (logits.row(r).array() - m).exp();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

void check_index(const ModelParams& params, PoiIndex i) {
  if (i >= params.arch.pois) {
    throw IndexError("POI index " + std::to_string(i) + " out of range for N=" + std::to_string(params.arch.pois));
  }
}

VectorXd attention_first_layer(const ModelParams& params, std::span<const PoiIndex> checkins,
                               BatchForward::AttentionCache& cache) {
  cache.E = embed_slice(params, checkins);
  cache.T = (params.w.Wa * cache.E).array().tanh();
  cache.A = row_softmax(cache.T);
  cache.Z1 = cache.A * cache.E.transpose();
  return ((cache.Z1.transpose() * params.w.wt) + params.w.bt).array().tanh();
}

// W1 x_u for a multi-hot x_u is the sum of the checked-in columns.
VectorXd multi_hot_first_layer(const ModelParams& params, std::span<const PoiIndex> checkins) {
  VectorXd pre = VectorXd::Zero(idx(params.arch.hidden1));
  for (auto l : checkins) {
    check_index(params, l);
    pre += params.w.W1.col(l);
  }
  return (pre + params.w.b1).array().tanh();
}

MatrixXd dropout_mask(Index rows, Index cols, double p, Rng& rng) {
  MatrixXd m(rows, cols);
  const double keep_scale = 1.0 / (1.0 - p);
  for (Index c = 0; c < cols; ++c)
    for (Index r = 0; r < rows; ++r) m(r, c) = rng.uniform() < p ? 0.0 : keep_scale;
  return m;
}

}  // namespace

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::WAE:
      return "WAE";
    case Variant::SAE_WAE:
      return "SAE-WAE";
    case Variant::NAD_WAE:
      return "NAD-WAE";
    case Variant::SAE_NAD:
      return "SAE-NAD";
  }
  return "?";
}

Variant parse_variant(std::string_view text) {
  for (auto v : kAllVariants)
    if (to_string(v) == text) return v;
  throw ValidationError("unknown variant '" + std::string(text) + "' (expected WAE, SAE-WAE, NAD-WAE or SAE-NAD)");
}

void Architecture::validate() const {
  if (pois == 0 || hidden1 == 0 || hidden == 0 || aspects == 0) {
    throw ValidationError("architecture sizes N, H1, H and d_a must be positive");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ValidationError("dropout must lie in [0, 1)");
}

TensorSet TensorSet::zeros(const Architecture& a) {
  TensorSet t;
  t.W1 = MatrixXd::Zero(idx(a.hidden1), idx(a.pois));
  t.W2 = MatrixXd::Zero(idx(a.hidden), idx(a.hidden1));
  t.W3 = MatrixXd::Zero(idx(a.hidden1), idx(a.hidden));
  t.W4 = MatrixXd::Zero(idx(a.pois), idx(a.hidden1));
  t.b1 = VectorXd::Zero(idx(a.hidden1));
  t.b2 = VectorXd::Zero(idx(a.hidden));
  t.b3 = VectorXd::Zero(idx(a.hidden1));
  t.b4 = VectorXd::Zero(idx(a.pois));
  t.Wa = MatrixXd::Zero(idx(a.aspects), idx(a.hidden1));
  t.wt = VectorXd::Zero(idx(a.aspects));
  t.bt = VectorXd::Zero(idx(a.hidden1));
  return t;
}

ModelParams ModelParams::initialize(const Architecture& arch, std::uint64_t seed) {
  arch.validate();
  ModelParams p{arch, TensorSet::zeros(arch)};
  Rng rng(substream_seed(seed, "init"));
  auto glorot = [&rng](auto& m) {
    const double bound = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
    for (Index c = 0; c < m.cols(); ++c)
      for (Index r = 0; r < m.rows(); ++r) m(r, c) = rng.uniform(-bound, bound);
  };
  glorot(p.w.W1);
  glorot(p.w.W2);
  glorot(p.w.W3);
  glorot(p.w.W4);
  glorot(p.w.Wa);
  glorot(p.w.wt);
  return p;
}

void ModelParams::validate() const {
  arch.validate();
  const auto expected = TensorSet::zeros(arch);
  for_each_tensor_pair(w, expected, [](std::string_view name, const auto& have, const auto& want) {
    if (have.rows() != want.rows() || have.cols() != want.cols()) {
      throw ShapeError("tensor " + std::string(name) + " is " + std::to_string(have.rows()) + "x" +
                       std::to_string(have.cols()) + ", expected " + std::to_string(want.rows()) + "x" +
                       std::to_string(want.cols()));
    }
    if (!have.allFinite()) throw NumericError("tensor " + std::string(name) + " has non-finite entries");
  });
}

std::vector<PoiIndex> normalize_checkins(std::span<const PoiIndex> checkins) {
  std::vector<PoiIndex> out(checkins.begin(), checkins.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

MatrixXd embed_slice(const ModelParams& params, std::span<const PoiIndex> checkins) {
  if (checkins.empty()) throw DegenerateUserError("empty check-in set: attention over zero POIs is undefined");
  MatrixXd e(idx(params.arch.hidden1), idx(checkins.size()));
  for (std::size_t j = 0; j < checkins.size(); ++j) {
    check_index(params, checkins[j]);
    e.col(idx(j)) = params.w.W1.col(checkins[j]);
  }
  return e;
}

MatrixXd attention(const ModelParams& params, const MatrixXd& embeddings) {
  if (embeddings.cols() == 0) throw DegenerateUserError("attention over zero POIs is undefined");
  if (embeddings.rows() != idx(params.arch.hidden1)) throw ShapeError("embedding height must equal H1");
  return row_softmax((params.w.Wa * embeddings).array().tanh().matrix());
}

Encoding encode(const ModelParams& params, std::span<const PoiIndex> checkins, const ForwardOverrides& overrides) {
  Encoding enc;
  const auto set = normalize_checkins(checkins);
  if (uses_attention(params.arch.variant) && !overrides.multi_hot_encoder) {
    BatchForward::AttentionCache cache;
    enc.z1 = attention_first_layer(params, set, cache);
    enc.A = std::move(cache.A);
    enc.Z1 = std::move(cache.Z1);
  } else {
    enc.z1 = multi_hot_first_layer(params, set);
  }
  enc.z2 = ((params.w.W2 * enc.z1) + params.w.b2).array().tanh();
  return enc;
}

VectorXd neighbor_influence(const ModelParams& params, const GeoKernel& kernel, std::span<const PoiIndex> checkins) {
  if (kernel.size() != params.arch.pois) {
    throw ShapeError("kernel has N=" + std::to_string(kernel.size()) + " but the model has N=" +
                     std::to_string(params.arch.pois));
  }
  VectorXd p = VectorXd::Zero(idx(params.arch.pois));
  for (auto l : checkins) {
    check_index(params, l);
    const auto col = kernel.column(l);
    const auto embedding = params.w.W1.col(l);
    for (std::size_t k = 0; k < col.rows.size(); ++k) {
      const auto i = col.rows[k];
      p[i] += col.values[k] * params.w.W4.row(i).dot(embedding);
    }
  }
  return p;
}

VectorXd decode(const ModelParams& params, const VectorXd& z2, const VectorXd& p) {
  if (z2.size() != idx(params.arch.hidden)) throw ShapeError("decode: z2 must have H entries");
  if (p.size() != 0 && p.size() != idx(params.arch.pois)) throw ShapeError("decode: p must have N entries");
  const VectorXd z3 = ((params.w.W3 * z2) + params.w.b3).array().tanh();
  VectorXd out = (params.w.W4 * z3) + params.w.b4;
  if (p.size() != 0) out += p;
  return out.unaryExpr([](double x) { return sigmoid(x); });
}

BatchForward forward_batch(const ModelParams& params, const GeoKernel& kernel,
                           std::span<const std::span<const PoiIndex>> checkin_lists, Mode mode, Rng* dropout_rng,
                           const ForwardOverrides& overrides, unsigned threads) {
  const auto& arch = params.arch;
  const Index B = idx(checkin_lists.size());
  const Index N = idx(arch.pois);

  BatchForward f;
  f.mode = mode;
  f.variant = arch.variant;
  f.overrides = overrides;
  f.checkins.reserve(checkin_lists.size());
  for (const auto& l : checkin_lists) f.checkins.push_back(normalize_checkins(l));
  if (uses_neighbors(arch.variant) && kernel.size() != arch.pois) {
    throw ShapeError("kernel has N=" + std::to_string(kernel.size()) + " but the model has N=" + std::to_string(arch.pois));
  }

  f.Z1.resize(idx(arch.hidden1), B);
  if (f.attention_path()) {
    f.attention.resize(checkin_lists.size());
    parallel_for(checkin_lists.size(), threads, [&](std::size_t b) {
      f.Z1.col(idx(b)) = attention_first_layer(params, f.checkins[b], f.attention[b]);
    });
  } else {
    for (Index b = 0; b < B; ++b) f.Z1.col(b) = multi_hot_first_layer(params, f.checkins[static_cast<std::size_t>(b)]);
  }

  const bool drop = mode == Mode::Train && arch.dropout > 0.0;
  if (drop) {
    if (!dropout_rng) throw ValidationError("train-mode dropout needs a random stream");
    f.M1 = dropout_mask(idx(arch.hidden1), B, arch.dropout, *dropout_rng);
    f.M2 = dropout_mask(idx(arch.hidden), B, arch.dropout, *dropout_rng);
    f.M3 = dropout_mask(idx(arch.hidden1), B, arch.dropout, *dropout_rng);
  }

  f.H1 = drop ? MatrixXd(f.Z1.cwiseProduct(f.M1)) : f.Z1;
  f.Z2 = ((params.w.W2 * f.H1).colwise() + params.w.b2).array().tanh();
  f.H2 = drop ? MatrixXd(f.Z2.cwiseProduct(f.M2)) : f.Z2;
  f.Z3 = ((params.w.W3 * f.H2).colwise() + params.w.b3).array().tanh();
  f.H3 = drop ? MatrixXd(f.Z3.cwiseProduct(f.M3)) : f.Z3;

  MatrixXd out = (params.w.W4 * f.H3).colwise() + params.w.b4;
  if (uses_neighbors(arch.variant)) {
    f.P.resize(N, B);
    parallel_for(checkin_lists.size(), threads, [&](std::size_t b) {
      f.P.col(idx(b)) = neighbor_influence(params, kernel, f.checkins[b]);
    });
    if (overrides.zero_neighbor_influence) f.P.setZero();
    out += f.P;
  }
  f.Xhat = out.unaryExpr([](double x) { return sigmoid(x); });
  return f;
}

ForwardTrace forward(const ModelParams& params, const GeoKernel& kernel, std::span<const PoiIndex> checkins, Mode mode,
                     Rng* dropout_rng, const ForwardOverrides& overrides) {
  const std::span<const PoiIndex> lists[] = {checkins};
  auto f = forward_batch(params, kernel, lists, mode, dropout_rng, overrides, 1);
  ForwardTrace t;
  t.checkins = std::move(f.checkins.front());
  if (!f.attention.empty()) {
    t.A = std::move(f.attention.front().A);
    t.Z1 = std::move(f.attention.front().Z1);
  }
  t.z1 = f.Z1.col(0);
  t.z2 = f.Z2.col(0);
  t.z3 = f.Z3.col(0);
  t.p = f.P.size() ? VectorXd(f.P.col(0)) : VectorXd::Zero(idx(params.arch.pois));
  t.x_hat = f.Xhat.col(0);
  if (f.M1.size()) {
    t.mask1 = f.M1.col(0);
    t.mask2 = f.M2.col(0);
    t.mask3 = f.M3.col(0);
  }
  return t;
}

}  // namespace saenad
