#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "saenad/cli/config.hpp"
#include "saenad/data_ingest.hpp"

namespace saenad::cli {

// Geo-clustered check-ins. Cluster centres are uniform in a 2 x 2 degree box,
// POIs are Gaussian around their centre, and each user has a home cluster and
// a home point inside it. A check-in lands in the home cluster with
// probability intra_cluster_prob (POIs weighted by closeness to the home point
// when locality > 0), otherwise on a uniformly chosen POI of another cluster.
struct SyntheticData {
  struct Visit {
    UserIndex user;
    PoiIndex poi;
    std::int64_t timestamp;
  };

  PoiCatalog catalog;
  std::vector<std::size_t> cluster_of;   // per POI
  std::vector<std::size_t> home_cluster;  // per user
  std::vector<std::string> user_ids;
  std::vector<Visit> visits;

  CheckInLog to_log() const;
};

SyntheticData generate_synthetic(const SyntheticSpec& spec);

void write_checkins(std::ostream& out, const SyntheticData& data);
void write_coords(std::ostream& out, const SyntheticData& data);

}  // namespace saenad::cli
