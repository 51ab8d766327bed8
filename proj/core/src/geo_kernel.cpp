#include "saenad/geo_kernel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>

#include "saenad/binary_io.hpp"
#include "saenad/error.hpp"
#include "saenad/parallel.hpp"
#include "saenad/random.hpp"

namespace saenad {

namespace {

constexpr double kEarthRadiusKm = 6371.0;
constexpr double kKmPerDegree = kEarthRadiusKm * std::numbers::pi / 180.0;

double radians(double deg) { return deg * std::numbers::pi / 180.0; }

// Bit-identical kernel values for (i, j) and (j, i).
double canonical_rbf(std::span<const GeoPoint> pts, PoiIndex i, PoiIndex j, double gamma, DistanceMetric metric) {
  return i < j ? rbf(pts[i], pts[j], gamma, metric) : rbf(pts[j], pts[i], gamma, metric);
}

// Candidate neighbours per POI from a uniform grid whose cell edge is the
// largest distance that can still clear the threshold. Euclidean mode buckets
// (lat, lon); haversine buckets latitude bands only.
class CandidateGrid {
 public:
  CandidateGrid(std::span<const GeoPoint> pts, double cell, bool two_dimensional)
      : cell_(cell), two_d_(two_dimensional) {
    for (PoiIndex i = 0; i < pts.size(); ++i) buckets_[key(pts[i])].push_back(i);
  }

  void candidates(const GeoPoint& p, std::vector<PoiIndex>& out) const {
    out.clear();
    const auto [r, c] = key(p);
    for (std::int64_t dr = -1; dr <= 1; ++dr) {
      for (std::int64_t dc = -1; dc <= 1; ++dc) {
        if (!two_d_ && dc != 0) continue;
        const auto it = buckets_.find({r + dr, c + dc});
        if (it != buckets_.end()) out.insert(out.end(), it->second.begin(), it->second.end());
      }
    }
    std::sort(out.begin(), out.end());
  }

 private:
  using Key = std::pair<std::int64_t, std::int64_t>;
  Key key(const GeoPoint& p) const {
    const auto r = static_cast<std::int64_t>(std::floor(p.lat / cell_));
    const auto c = two_d_ ? static_cast<std::int64_t>(std::floor(p.lon / cell_)) : 0;
    return {r, c};
  }

  double cell_;
  bool two_d_;
  std::map<Key, std::vector<PoiIndex>> buckets_;
};

}  // namespace

std::string_view to_string(DistanceMetric m) {
  switch (m) {
    case DistanceMetric::EuclideanDegrees:
      return "euclidean-degrees";
    case DistanceMetric::HaversineKm:
      return "haversine-km";
  }
  return "?";
}

DistanceMetric parse_metric(std::string_view text) {
  if (text == "euclidean-degrees") return DistanceMetric::EuclideanDegrees;
  if (text == "haversine-km") return DistanceMetric::HaversineKm;
  throw ValidationError("unknown distance metric '" + std::string(text) + "'");
}

double default_gamma(DistanceMetric m) {
  return m == DistanceMetric::EuclideanDegrees ? 60.0 : 60.0 / (kKmPerDegree * kKmPerDegree);
}

double distance(const GeoPoint& a, const GeoPoint& b, DistanceMetric metric) {
  if (metric == DistanceMetric::EuclideanDegrees) return std::hypot(a.lat - b.lat, a.lon - b.lon);
  const double dlat = radians(b.lat - a.lat);
  const double dlon = radians(b.lon - a.lon);
  const double s1 = std::sin(dlat / 2.0);
  const double s2 = std::sin(dlon / 2.0);
  const double h = s1 * s1 + std::cos(radians(a.lat)) * std::cos(radians(b.lat)) * s2 * s2;
  return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(h)));
}

double rbf(const GeoPoint& a, const GeoPoint& b, double gamma, DistanceMetric metric) {
  if (!std::isfinite(a.lat) || !std::isfinite(a.lon) || !std::isfinite(b.lat) || !std::isfinite(b.lon)) {
    throw ValidationError("rbf: non-finite coordinate");
  }
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ValidationError("rbf: gamma must be positive and finite");
  double d2;
  if (metric == DistanceMetric::EuclideanDegrees) {
    const double dlat = a.lat - b.lat;
    const double dlon = a.lon - b.lon;
    d2 = dlat * dlat + dlon * dlon;
  } else {
    const double d = distance(a, b, metric);
    d2 = d * d;
  }
  return std::exp(-gamma * d2);
}

GeoKernel::Column GeoKernel::column(PoiIndex j) const {
  if (j >= n_) throw IndexError("kernel column " + std::to_string(j) + " out of range for N=" + std::to_string(n_));
  const auto b = col_ptr_[j];
  const auto e = col_ptr_[j + 1];
  return {std::span<const PoiIndex>(rows_).subspan(b, e - b), std::span<const double>(values_).subspan(b, e - b)};
}

double GeoKernel::value(PoiIndex i, PoiIndex j) const {
  if (i >= n_) throw IndexError("kernel row out of range");
  const auto col = column(j);
  const auto it = std::lower_bound(col.rows.begin(), col.rows.end(), i);
  if (it == col.rows.end() || *it != i) return 0.0;
  return col.values[static_cast<std::size_t>(it - col.rows.begin())];
}

Eigen::MatrixXd GeoKernel::to_dense() const {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(n_));
  for (PoiIndex j = 0; j < n_; ++j) {
    const auto col = column(j);
    for (std::size_t k = 0; k < col.rows.size(); ++k) m(col.rows[k], j) = col.values[k];
  }
  return m;
}

GeoKernel build_kernel(std::span<const GeoPoint> points, const KernelOptions& options) {
  if (points.empty()) throw ValidationError("build_kernel: empty catalog");
  if (!(options.gamma > 0.0) || !std::isfinite(options.gamma)) throw ValidationError("build_kernel: gamma must be positive");
  if (!(options.threshold >= 0.0 && options.threshold <= 1.0)) throw ValidationError("build_kernel: threshold must be in [0, 1]");
  for (const auto& p : points) validate_point(p);

  const auto n = points.size();
  std::vector<std::vector<PoiIndex>> rows(n);
  std::vector<std::vector<double>> vals(n);

  std::unique_ptr<CandidateGrid> grid;
  if (options.grid_index && options.threshold > 0.0) {
    // exp(-gamma d^2) >= t  <=>  d <= sqrt(ln(1/t) / gamma); the slack keeps boundary pairs.
    const double reach = std::sqrt(std::log(1.0 / options.threshold) / options.gamma) * (1.0 + 1e-9);
    const bool euclid = options.metric == DistanceMetric::EuclideanDegrees;
    const double cell = euclid ? reach : reach / kKmPerDegree;
    if (cell > 0.0 && std::isfinite(cell)) grid = std::make_unique<CandidateGrid>(points, cell, euclid);
  }

  parallel_for(n, options.threads, [&](std::size_t j) {
    const auto col = static_cast<PoiIndex>(j);
    auto consider = [&](PoiIndex i) {
      if (i == col) return;
      const double v = canonical_rbf(points, i, col, options.gamma, options.metric);
      if (v >= options.threshold && v > 0.0) {
        rows[j].push_back(i);
        vals[j].push_back(v);
      }
    };
    if (grid) {
      std::vector<PoiIndex> cand;
      grid->candidates(points[j], cand);
      for (auto i : cand) consider(i);
    } else {
      for (PoiIndex i = 0; i < n; ++i) consider(i);
    }
  });

  GeoKernel k;
  k.n_ = n;
  k.gamma_ = options.gamma;
  k.threshold_ = options.threshold;
  k.metric_ = options.metric;
  k.col_ptr_.assign(n + 1, 0);
  for (std::size_t j = 0; j < n; ++j) k.col_ptr_[j + 1] = k.col_ptr_[j] + rows[j].size();
  k.rows_.reserve(k.col_ptr_.back());
  k.values_.reserve(k.col_ptr_.back());
  for (std::size_t j = 0; j < n; ++j) {
    k.rows_.insert(k.rows_.end(), rows[j].begin(), rows[j].end());
    k.values_.insert(k.values_.end(), vals[j].begin(), vals[j].end());
  }
  return k;
}

double KernelSlice::value(PoiIndex i, std::size_t j) const {
  if (i >= rows_) throw IndexError("slice row out of range");
  const auto& col = columns_.at(j);
  const auto it = std::lower_bound(col.rows.begin(), col.rows.end(), i);
  if (it == col.rows.end() || *it != i) return 0.0;
  return col.values[static_cast<std::size_t>(it - col.rows.begin())];
}

Eigen::MatrixXd KernelSlice::to_dense() const {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows_), static_cast<Eigen::Index>(cols()));
  for (std::size_t j = 0; j < columns_.size(); ++j) {
    const auto& col = columns_[j];
    for (std::size_t k = 0; k < col.rows.size(); ++k) m(col.rows[k], static_cast<Eigen::Index>(j)) = col.values[k];
  }
  return m;
}

KernelSlice slice_columns(const GeoKernel& kernel, std::span<const PoiIndex> checkins) {
  KernelSlice s;
  s.rows_ = kernel.size();
  s.columns_.reserve(checkins.size());
  for (auto j : checkins) s.columns_.push_back(kernel.column(j));
  return s;
}

namespace {
constexpr std::string_view kKernelMagic = "SAENADGK";
constexpr std::uint32_t kKernelVersion = 1;
}  // namespace

void GeoKernelCodec::write(std::ostream& out, const GeoKernel& k, std::uint64_t key) {
  BinaryWriter w(out);
  w.magic(kKernelMagic);
  w.u32(kKernelVersion);
  w.u64(key);
  w.u64(k.n_);
  w.f64(k.gamma_);
  w.f64(k.threshold_);
  w.u32(static_cast<std::uint32_t>(k.metric_));
  w.vec(k.col_ptr_);
  w.vec(k.rows_);
  w.vec(k.values_);
}

GeoKernel GeoKernelCodec::read(std::istream& in, const std::string& source, std::uint64_t* key) {
  BinaryReader r(in, source);
  r.expect_magic(kKernelMagic);
  if (const auto v = r.u32(); v != kKernelVersion) throw IoError(source + ": unsupported kernel version");
  const auto stored_key = r.u64();
  if (key) *key = stored_key;
  GeoKernel k;
  k.n_ = r.u64();
  k.gamma_ = r.f64();
  k.threshold_ = r.f64();
  const auto metric = r.u32();
  if (metric > 1) throw IoError(source + ": unknown metric tag");
  k.metric_ = static_cast<DistanceMetric>(metric);
  k.col_ptr_ = r.vec<std::uint64_t>();
  k.rows_ = r.vec<PoiIndex>();
  k.values_ = r.vec<double>();
  r.expect_end();
  if (k.col_ptr_.size() != k.n_ + 1 || k.col_ptr_.back() != k.rows_.size() || k.values_.size() != k.rows_.size()) {
    throw IoError(source + ": inconsistent kernel layout");
  }
  return k;
}

std::uint64_t kernel_cache_key(std::uint64_t catalog_hash, const KernelOptions& options) {
  std::uint64_t h = fnv1a64("kernel");
  auto mix = [&h](const auto& v) { h = fnv1a64(std::string_view(reinterpret_cast<const char*>(&v), sizeof v), h); };
  mix(catalog_hash);
  mix(options.gamma);
  mix(options.threshold);
  mix(static_cast<std::uint32_t>(options.metric));
  return h;
}

void save_kernel(const std::filesystem::path& path, const GeoKernel& k, std::uint64_t key) {
  write_file_atomically(path, [&](std::ostream& out) { GeoKernelCodec::write(out, k, key); });
}

GeoKernel load_kernel(const std::filesystem::path& path, std::uint64_t* key) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return GeoKernelCodec::read(in, path.string(), key);
}

}  // namespace saenad
