#include "oracles.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <unistd.h>

namespace saenad::oracle {

std::vector<std::vector<double>> brute_force_kernel(std::span<const GeoPoint> points, double gamma, double threshold) {
  const auto n = points.size();
  std::vector<std::vector<double>> k(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double dlat = points[i].lat - points[j].lat;
      const double dlon = points[i].lon - points[j].lon;
      const double v = std::exp(-gamma * (dlat * dlat + dlon * dlon));
      k[i][j] = v < threshold ? 0.0 : v;
    }
  }
  return k;
}

namespace {

double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

std::vector<double> layer(const Eigen::MatrixXd& W, const std::vector<double>& in, const Eigen::VectorXd& b) {
  std::vector<double> out(static_cast<std::size_t>(W.rows()));
  for (Eigen::Index r = 0; r < W.rows(); ++r) {
    double s = b[r];
    for (Eigen::Index c = 0; c < W.cols(); ++c) s += W(r, c) * in[static_cast<std::size_t>(c)];
    out[static_cast<std::size_t>(r)] = s;
  }
  return out;
}

}  // namespace

std::vector<double> reference_decode(const ModelParams& params, const std::vector<double>& z2) {
  const auto& w = params.w;
  auto z3 = layer(w.W3, z2, w.b3);
  for (auto& v : z3) v = std::tanh(v);
  auto out = layer(w.W4, z3, w.b4);
  for (auto& v : out) v = sigmoid(v);
  return out;
}

ReferenceForward reference_forward(const ModelParams& params, const std::vector<std::vector<double>>& dense_kernel,
                                   std::vector<PoiIndex> L, bool zero_neighbor, bool multi_hot) {
  const auto& w = params.w;
  const auto& arch = params.arch;
  std::sort(L.begin(), L.end());
  L.erase(std::unique(L.begin(), L.end()), L.end());
  const auto h1 = arch.hidden1;
  const auto n = L.size();
  ReferenceForward out;

  if (uses_attention(arch.variant) && !multi_hot) {
    const auto da = arch.aspects;
    out.A.assign(da, std::vector<double>(n));
    for (std::size_t a = 0; a < da; ++a) {
      double mx = -1e300;
      std::vector<double> t(n);
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t h = 0; h < h1; ++h) s += w.Wa(a, h) * w.W1(h, L[j]);
        t[j] = std::tanh(s);
        mx = std::max(mx, t[j]);
      }
      double total = 0.0;
      for (std::size_t j = 0; j < n; ++j) total += std::exp(t[j] - mx);
      for (std::size_t j = 0; j < n; ++j) out.A[a][j] = std::exp(t[j] - mx) / total;
    }
    out.z1.assign(h1, 0.0);
    for (std::size_t h = 0; h < h1; ++h) {
      double s = w.bt[h];
      for (std::size_t a = 0; a < da; ++a) {
        double z = 0.0;
        for (std::size_t j = 0; j < n; ++j) z += out.A[a][j] * w.W1(h, L[j]);
        s += w.wt[a] * z;
      }
      out.z1[h] = std::tanh(s);
    }
  } else {
    out.z1.assign(h1, 0.0);
    for (std::size_t h = 0; h < h1; ++h) {
      double s = w.b1[h];
      for (auto l : L) s += w.W1(h, l);
      out.z1[h] = std::tanh(s);
    }
  }

  out.z2 = layer(w.W2, out.z1, w.b2);
  for (auto& v : out.z2) v = std::tanh(v);
  out.z3 = layer(w.W3, out.z2, w.b3);
  for (auto& v : out.z3) v = std::tanh(v);

  const auto N = arch.pois;
  out.p.assign(N, 0.0);
  if (uses_neighbors(arch.variant) && !zero_neighbor) {
    for (std::size_t i = 0; i < N; ++i) {
      double s = 0.0;
      for (auto l : L) {
        double dot = 0.0;
        for (std::size_t h = 0; h < h1; ++h) dot += w.W4(i, h) * w.W1(h, l);
        s += dense_kernel[i][l] * dot;
      }
      out.p[i] = s;
    }
  }
  out.x_hat = layer(w.W4, out.z3, w.b4);
  for (std::size_t i = 0; i < N; ++i) out.x_hat[i] = sigmoid(out.x_hat[i] + out.p[i]);
  return out;
}

ReferenceMetrics reference_metrics(const std::vector<double>& scores, const std::vector<PoiIndex>& visited,
                                   const std::vector<PoiIndex>& test, std::size_t k, bool min_cutoff_denominator) {
  std::vector<PoiIndex> ranked;
  for (PoiIndex i = 0; i < scores.size(); ++i) {
    if (std::find(visited.begin(), visited.end(), i) == visited.end()) ranked.push_back(i);
  }
  std::stable_sort(ranked.begin(), ranked.end(), [&](PoiIndex a, PoiIndex b) { return scores[a] > scores[b]; });
  if (k > ranked.size()) throw std::invalid_argument("k too large");
  double hits = 0.0;
  double ap = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    if (std::find(test.begin(), test.end(), ranked[j]) != test.end()) {
      hits += 1.0;
      ap += hits / static_cast<double>(j + 1);
    }
  }
  const double t = static_cast<double>(test.size());
  const double denom = min_cutoff_denominator ? std::min(static_cast<double>(k), t) : t;
  return {hits / static_cast<double>(k), hits / t, ap / denom};
}

double pairwise_auc(std::span<const double> scores, std::span<const PoiIndex> positives) {
  std::vector<bool> pos(scores.size(), false);
  for (auto p : positives) pos[p] = true;
  double wins = 0.0;
  double pairs = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!pos[i]) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (pos[j]) continue;
      pairs += 1.0;
      if (scores[i] > scores[j]) {
        wins += 1.0;
      } else if (scores[i] == scores[j]) {
        wins += 0.5;
      }
    }
  }
  return pairs > 0.0 ? wins / pairs : 1.0;
}

TempDir::TempDir(const std::string& tag) {
  static std::atomic<unsigned> counter{0};
  path_ = std::filesystem::temp_directory_path() /
          ("saenad-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  std::filesystem::remove_all(path_);
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

}  // namespace saenad::oracle
