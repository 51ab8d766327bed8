#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "saenad/data_ingest.hpp"
#include "saenad/geo_kernel.hpp"
#include "saenad/random.hpp"

namespace saenad {

// Ablation variants. WAE is the weighted stacked autoencoder; SAE swaps its
// multi-hot first layer for the self-attentive encoder; NAD adds the
// neighbour-influence term to the output layer.
enum class Variant { WAE, SAE_WAE, NAD_WAE, SAE_NAD };

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view text);
constexpr bool uses_attention(Variant v) { return v == Variant::SAE_WAE || v == Variant::SAE_NAD; }
constexpr bool uses_neighbors(Variant v) { return v == Variant::NAD_WAE || v == Variant::SAE_NAD; }

inline constexpr Variant kAllVariants[] = {Variant::WAE, Variant::SAE_WAE, Variant::NAD_WAE, Variant::SAE_NAD};

// Layer sizes [N, H1, H, H1, N] plus d_a attention aspects.
struct Architecture {
  std::size_t pois = 0;
  std::size_t hidden1 = 200;
  std::size_t hidden = 50;
  std::size_t aspects = 20;
  Variant variant = Variant::SAE_NAD;
  double dropout = 0.5;

  void validate() const;
  friend bool operator==(const Architecture&, const Architecture&) = default;
};

// All learnable tensors. b1 only feeds the multi-hot first layer (WAE and
// NAD-WAE); Wa, wt and bt only feed the attention path. Every variant keeps
// the full set so checkpoints and gradients share one layout.
struct TensorSet {
  Eigen::MatrixXd W1;  // H1 x N, also the POI embedding table
  Eigen::MatrixXd W2;  // H x H1
  Eigen::MatrixXd W3;  // H1 x H
  Eigen::MatrixXd W4;  // N x H1
  Eigen::VectorXd b1;  // H1
  Eigen::VectorXd b2;  // H
  Eigen::VectorXd b3;  // H1
  Eigen::VectorXd b4;  // N
  Eigen::MatrixXd Wa;  // d_a x H1
  Eigen::VectorXd wt;  // d_a
  Eigen::VectorXd bt;  // H1

  static TensorSet zeros(const Architecture& arch);
};

// Visits tensors in the fixed declared order used by checkpoints.
template <class Set, class Fn>
void for_each_tensor(Set& s, Fn&& fn) {
  fn("W1", s.W1);
  fn("W2", s.W2);
  fn("W3", s.W3);
  fn("W4", s.W4);
  fn("b1", s.b1);
  fn("b2", s.b2);
  fn("b3", s.b3);
  fn("b4", s.b4);
  fn("Wa", s.Wa);
  fn("wt", s.wt);
  fn("bt", s.bt);
}

// Visits two sets in lockstep.
template <class A, class B, class Fn>
void for_each_tensor_pair(A& a, B& b, Fn&& fn) {
  fn("W1", a.W1, b.W1);
  fn("W2", a.W2, b.W2);
  fn("W3", a.W3, b.W3);
  fn("W4", a.W4, b.W4);
  fn("b1", a.b1, b.b1);
  fn("b2", a.b2, b.b2);
  fn("b3", a.b3, b.b3);
  fn("b4", a.b4, b.b4);
  fn("Wa", a.Wa, b.Wa);
  fn("wt", a.wt, b.wt);
  fn("bt", a.bt, b.bt);
}

struct ModelParams {
  Architecture arch;
  TensorSet w;

  // Glorot-uniform weights, zero biases, drawn from the "init" sub-stream of `seed`.
  static ModelParams initialize(const Architecture& arch, std::uint64_t seed);

  // Throws ShapeError on a shape mismatch and NumericError on non-finite entries.
  void validate() const;
};

enum class Mode { Train, Eval };

// Test hooks for the variant-reduction checks.
struct ForwardOverrides {
  bool zero_neighbor_influence = false;  // compute p_u, then replace it with 0
  bool multi_hot_encoder = false;        // use W1 x_u + b1 even for SAE variants
};

// Sorted, deduplicated check-in set.
std::vector<PoiIndex> normalize_checkins(std::span<const PoiIndex> checkins);

// W1[L_u]: column j is W1 column L_u[j], repeats kept. Throws
// DegenerateUserError for an empty list and IndexError for a bad index.
Eigen::MatrixXd embed_slice(const ModelParams& params, std::span<const PoiIndex> checkins);

// softmax(tanh(Wa E)) along the POI axis, one distribution per aspect row.
Eigen::MatrixXd attention(const ModelParams& params, const Eigen::MatrixXd& embeddings);

struct Encoding {
  Eigen::MatrixXd A;   // d_a x n (attention path only)
  Eigen::MatrixXd Z1;  // d_a x H1 (attention path only)
  Eigen::VectorXd z1;  // H1
  Eigen::VectorXd z2;  // H
};

// Encoder without dropout. Attention variants: z1 = tanh((A E^T)^T wt + bt);
// multi-hot variants: z1 = tanh(W1 x_u + b1). Then z2 = tanh(W2 z1 + b2).
// Only the attention path rejects an empty check-in set.
Encoding encode(const ModelParams& params, std::span<const PoiIndex> checkins, const ForwardOverrides& overrides = {});

// p_u[i] = sum_j K(i, l_j) * <W4 row i, W1 column l_j>, touching only stored kernel entries.
Eigen::VectorXd neighbor_influence(const ModelParams& params, const GeoKernel& kernel,
                                   std::span<const PoiIndex> checkins);

// sigmoid(W4 tanh(W3 z2 + b3) + b4 + p). An empty p means no neighbour term.
Eigen::VectorXd decode(const ModelParams& params, const Eigen::VectorXd& z2, const Eigen::VectorXd& p);

// Activations for a batch of users, one column per user. Keeps everything the
// backward pass needs.
struct BatchForward {
  struct AttentionCache {
    Eigen::MatrixXd E;   // H1 x n
    Eigen::MatrixXd T;   // tanh(Wa E), d_a x n
    Eigen::MatrixXd A;   // d_a x n
    Eigen::MatrixXd Z1;  // d_a x H1
  };

  Mode mode = Mode::Eval;
  Variant variant = Variant::SAE_NAD;
  ForwardOverrides overrides;
  std::vector<std::vector<PoiIndex>> checkins;  // normalised L_u per column
  std::vector<AttentionCache> attention;        // empty unless the attention path ran

  Eigen::MatrixXd Z1, Z2, Z3;  // activations before dropout
  Eigen::MatrixXd M1, M2, M3;  // inverted-dropout scales; empty in eval mode
  Eigen::MatrixXd H1, H2, H3;  // activations after dropout
  Eigen::MatrixXd P;           // N x B neighbour influence; empty when unused
  Eigen::MatrixXd Xhat;        // N x B reconstruction

  bool attention_path() const { return uses_attention(variant) && !overrides.multi_hot_encoder; }
  bool neighbor_path() const { return uses_neighbors(variant) && !overrides.zero_neighbor_influence; }
  std::size_t batch_size() const { return checkins.size(); }
};

// `dropout_rng` is required in train mode with dropout > 0.
BatchForward forward_batch(const ModelParams& params, const GeoKernel& kernel,
                           std::span<const std::span<const PoiIndex>> checkin_lists, Mode mode, Rng* dropout_rng,
                           const ForwardOverrides& overrides = {}, unsigned threads = 1);

struct ForwardTrace {
  std::vector<PoiIndex> checkins;
  Eigen::MatrixXd A;   // d_a x n; empty for multi-hot encoders
  Eigen::MatrixXd Z1;  // d_a x H1; empty for multi-hot encoders
  Eigen::VectorXd z1, z2, z3;
  Eigen::VectorXd p;  // zeros when the variant has no neighbour term
  Eigen::VectorXd x_hat;
  Eigen::VectorXd mask1, mask2, mask3;  // empty in eval mode
};

ForwardTrace forward(const ModelParams& params, const GeoKernel& kernel, std::span<const PoiIndex> checkins, Mode mode,
                     Rng* dropout_rng = nullptr, const ForwardOverrides& overrides = {});

// Versioned checkpoint: architecture, tensors in declared order, training seed.
struct Checkpoint {
  ModelParams params;
  std::uint64_t seed = 0;
};

void write_checkpoint(std::ostream& out, const ModelParams& params, std::uint64_t seed);
Checkpoint read_checkpoint(std::istream& in, const std::string& source);
void save_checkpoint(const std::filesystem::path& path, const ModelParams& params, std::uint64_t seed);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace saenad
