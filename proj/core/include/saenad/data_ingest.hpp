#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace saenad {

using UserIndex = std::uint32_t;
using PoiIndex = std::uint32_t;

struct GeoPoint {
  double lat = 0.0;  // degrees, [-90, 90]
  double lon = 0.0;  // degrees, [-180, 180]
};

// POI identifiers and coordinates with a dense index in [0, N).
class PoiCatalog {
 public:
  // Throws ValidationError on a duplicate id, an empty id, or a non-finite or
  // out-of-range coordinate.
  PoiIndex add(std::string id, GeoPoint where);

  std::size_t size() const noexcept { return ids_.size(); }
  bool empty() const noexcept { return ids_.empty(); }
  std::optional<PoiIndex> find(std::string_view id) const;
  const std::string& id(PoiIndex i) const { return ids_.at(i); }
  const GeoPoint& point(PoiIndex i) const { return points_.at(i); }
  std::span<const GeoPoint> points() const noexcept { return points_; }
  std::span<const std::string> ids() const noexcept { return ids_; }

  // Order-sensitive hash of ids and coordinate bit patterns.
  std::uint64_t content_hash() const;

 private:
  std::vector<std::string> ids_;
  std::vector<GeoPoint> points_;
  std::unordered_map<std::string, PoiIndex> index_;
};

void validate_point(const GeoPoint& p);

// A check-in with dense indices; the ids resolve through the owning log.
struct CheckInRecord {
  UserIndex user = 0;
  PoiIndex poi = 0;
  std::int64_t timestamp = 0;  // seconds since epoch; kept but unused by the model

  friend bool operator==(const CheckInRecord&, const CheckInRecord&) = default;
};

struct CheckInLog {
  std::vector<CheckInRecord> records;
  PoiCatalog catalog;
  std::vector<std::string> user_ids;

  std::size_t user_count() const noexcept { return user_ids.size(); }
  std::size_t poi_count() const noexcept { return catalog.size(); }
  const std::string& user_id(UserIndex u) const { return user_ids.at(u); }
};

// Tab-separated `user<TAB>poi<TAB>timestamp` and `poi<TAB>lat<TAB>lon`, no
// header. POI indices follow first appearance in the coordinate stream, user
// indices first appearance in the check-in stream. Blank lines are skipped.
CheckInLog parse_checkins(std::istream& checkins, std::istream& coords,
                          std::string_view checkin_source = "checkins",
                          std::string_view coord_source = "coords");

// Alternates a user pass and a POI pass (counting records, duplicates
// included) until neither removes anything, then re-densifies indices.
// Surviving POIs keep catalog order; users keep first-appearance order.
CheckInLog filter_sparse(const CheckInLog& log, std::size_t min_user_checkins, std::size_t min_poi_visits);

struct SplitSpec {
  double test_fraction = 0.2;
  std::uint64_t seed = 0;
  std::uint32_t partition_count = 1;
};

struct TrainTestSplit {
  CheckInLog train;                          // same users and catalog as the input
  std::vector<std::vector<PoiIndex>> test;   // T_u per user, ascending
};

// Number of held-out POIs for a user with `distinct` POIs: round half-up of
// fraction * distinct, clamped to [1, distinct - 1].
std::size_t test_size_for(std::size_t distinct, double fraction);

// Per-user random hold-out of distinct POIs. The choice for a user depends only
// on (seed, partition, user_id). All records of held-out POIs leave the train log.
TrainTestSplit split_train_test(const CheckInLog& log, const SplitSpec& spec, std::uint32_t partition = 0);

// c(r) = 1 + alpha * ln(1 + r / epsilon) for r > 0, 1 otherwise.
double confidence_weight(std::uint32_t frequency, double alpha, double epsilon);

// Sparse user x POI interaction matrices: R (counts), X = 1[R > 0] and C
// (confidence) share one CSR pattern; C is 1 off-pattern.
class InteractionData {
 public:
  struct Entry {
    UserIndex user;
    PoiIndex poi;
    std::uint32_t count;
  };

  InteractionData() = default;

  // Entries may come in any order; repeated (user, poi) pairs are summed.
  // Zero counts are dropped.
  static InteractionData from_counts(std::size_t users, std::size_t pois, std::vector<Entry> entries, double alpha,
                                     double epsilon);

  std::size_t user_count() const noexcept { return users_; }
  std::size_t poi_count() const noexcept { return pois_; }
  std::size_t nonzeros() const noexcept { return cols_.size(); }
  double alpha() const noexcept { return alpha_; }
  double epsilon() const noexcept { return epsilon_; }

  // L_u: ascending POI indices with r > 0.
  std::span<const PoiIndex> checkins(UserIndex u) const;
  std::span<const std::uint32_t> counts(UserIndex u) const;
  std::span<const double> confidences(UserIndex u) const;

  std::uint32_t frequency(UserIndex u, PoiIndex i) const;
  bool visited(UserIndex u, PoiIndex i) const { return frequency(u, i) > 0; }
  double confidence(UserIndex u, PoiIndex i) const;

  std::span<const std::uint64_t> row_offsets() const noexcept { return row_ptr_; }

  friend bool operator==(const InteractionData&, const InteractionData&) = default;

 private:
  std::size_t users_ = 0;
  std::size_t pois_ = 0;
  double alpha_ = 0.0;
  double epsilon_ = 0.0;
  std::vector<std::uint64_t> row_ptr_{0};
  std::vector<PoiIndex> cols_;
  std::vector<std::uint32_t> counts_;
  std::vector<double> confidence_;

  friend class InteractionDataCodec;
};

InteractionData build_matrices(const CheckInLog& train, double alpha, double epsilon);

}  // namespace saenad
