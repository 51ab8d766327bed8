#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "saenad/data_ingest.hpp"

namespace saenad {

enum class DistanceMetric {
  EuclideanDegrees,  // ||(lat, lon)_i - (lat, lon)_j|| in raw degrees
  HaversineKm,       // great-circle distance in kilometres
};

std::string_view to_string(DistanceMetric m);
DistanceMetric parse_metric(std::string_view text);

// gamma = 60 over degrees; the haversine default is the same scale expressed per km^2.
double default_gamma(DistanceMetric m);

double distance(const GeoPoint& a, const GeoPoint& b, DistanceMetric metric);

// exp(-gamma * d^2), no thresholding. Throws ValidationError on non-finite
// input or gamma <= 0.
double rbf(const GeoPoint& a, const GeoPoint& b, double gamma, DistanceMetric metric);

struct KernelOptions {
  double gamma = 60.0;
  double threshold = 0.1;
  DistanceMetric metric = DistanceMetric::EuclideanDegrees;
  bool grid_index = false;  // prune pairs that cannot reach the threshold
  unsigned threads = 1;
};

// Symmetric sparse N x N matrix of thresholded RBF similarities with no
// diagonal. Stored column-compressed; by symmetry a column is also a row.
class GeoKernel {
 public:
  struct Column {
    std::span<const PoiIndex> rows;
    std::span<const double> values;
  };

  GeoKernel() = default;

  std::size_t size() const noexcept { return n_; }
  double gamma() const noexcept { return gamma_; }
  double threshold() const noexcept { return threshold_; }
  DistanceMetric metric() const noexcept { return metric_; }
  std::size_t stored_entries() const noexcept { return rows_.size(); }

  Column column(PoiIndex j) const;
  // 0 for absent entries and the diagonal.
  double value(PoiIndex i, PoiIndex j) const;

  Eigen::MatrixXd to_dense() const;

  friend bool operator==(const GeoKernel&, const GeoKernel&) = default;

 private:
  std::size_t n_ = 0;
  double gamma_ = 0.0;
  double threshold_ = 0.0;
  DistanceMetric metric_ = DistanceMetric::EuclideanDegrees;
  std::vector<std::uint64_t> col_ptr_{0};
  std::vector<PoiIndex> rows_;
  std::vector<double> values_;

  friend GeoKernel build_kernel(std::span<const GeoPoint>, const KernelOptions&);
  friend class GeoKernelCodec;
};

GeoKernel build_kernel(std::span<const GeoPoint> points, const KernelOptions& options);
inline GeoKernel build_kernel(const PoiCatalog& catalog, const KernelOptions& options) {
  return build_kernel(catalog.points(), options);
}

// K[L_u]: an N x n view whose column j is kernel column L_u[j].
class KernelSlice {
 public:
  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return columns_.size(); }
  const GeoKernel::Column& column(std::size_t j) const { return columns_.at(j); }
  double value(PoiIndex i, std::size_t j) const;
  Eigen::MatrixXd to_dense() const;

 private:
  friend KernelSlice slice_columns(const GeoKernel&, std::span<const PoiIndex>);
  std::size_t rows_ = 0;
  std::vector<GeoKernel::Column> columns_;
};

// Throws IndexError for an index outside [0, N). Repeated indices repeat columns.
KernelSlice slice_columns(const GeoKernel& kernel, std::span<const PoiIndex> checkins);

class GeoKernelCodec {
 public:
  static void write(std::ostream& out, const GeoKernel& k, std::uint64_t key);
  static GeoKernel read(std::istream& in, const std::string& source, std::uint64_t* key = nullptr);
};

// Cache key over (catalog hash, gamma, threshold, metric).
std::uint64_t kernel_cache_key(std::uint64_t catalog_hash, const KernelOptions& options);

void save_kernel(const std::filesystem::path& path, const GeoKernel& k, std::uint64_t key);
GeoKernel load_kernel(const std::filesystem::path& path, std::uint64_t* key = nullptr);

}  // namespace saenad
