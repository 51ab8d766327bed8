#include "saenad/cli/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "saenad/random.hpp"

namespace saenad::cli {

namespace {

constexpr double kBoxLat = 30.0;
constexpr double kBoxLon = -98.0;
constexpr double kBoxSize = 2.0;
constexpr std::int64_t kEpoch = 1262304000;

std::string numbered(char prefix, std::size_t i, std::size_t total) {
  const int width = static_cast<int>(std::to_string(total).size());
  char buf[32];
  std::snprintf(buf, sizeof buf, "%c%0*zu", prefix, width, i);
  return buf;
}

}  // namespace

CheckInLog SyntheticData::to_log() const {
  CheckInLog log;
  log.catalog = catalog;
  log.user_ids = user_ids;
  log.records.reserve(visits.size());
  for (const auto& v : visits) log.records.push_back({v.user, v.poi, v.timestamp});
  return log;
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(substream_seed(spec.seed, "synth"));
  SyntheticData out;

  std::vector<GeoPoint> centres(spec.clusters);
  for (auto& c : centres) c = {kBoxLat + rng.uniform(0.0, kBoxSize), kBoxLon + rng.uniform(0.0, kBoxSize)};

  const auto n = spec.clusters * spec.pois_per_cluster;
  for (std::size_t c = 0; c < spec.clusters; ++c) {
    for (std::size_t k = 0; k < spec.pois_per_cluster; ++k) {
      const GeoPoint p{std::clamp(centres[c].lat + spec.spread * rng.normal(), -90.0, 90.0),
                       std::clamp(centres[c].lon + spec.spread * rng.normal(), -180.0, 180.0)};
      out.catalog.add(numbered('p', out.cluster_of.size(), n), p);
      out.cluster_of.push_back(c);
    }
  }

  std::vector<double> weights(spec.pois_per_cluster);
  for (UserIndex u = 0; u < spec.users; ++u) {
    out.user_ids.push_back(numbered('u', u, spec.users));
    const auto home = static_cast<std::size_t>(rng.below(spec.clusters));
    out.home_cluster.push_back(home);
    const GeoPoint anchor{centres[home].lat + spec.spread * rng.normal(),
                          centres[home].lon + spec.spread * rng.normal()};
    const auto first = home * spec.pois_per_cluster;

    double total = 0.0;
    for (std::size_t k = 0; k < spec.pois_per_cluster; ++k) {
      double w = 1.0;
      if (spec.locality > 0.0) {
        const auto& p = out.catalog.point(static_cast<PoiIndex>(first + k));
        const double d2 = (p.lat - anchor.lat) * (p.lat - anchor.lat) + (p.lon - anchor.lon) * (p.lon - anchor.lon);
        w = std::exp(-d2 / (2.0 * spec.locality * spec.locality));
      }
      total += w;
      weights[k] = total;
    }

    for (std::size_t v = 0; v < spec.checkins_per_user; ++v) {
      PoiIndex poi = 0;
      if (spec.clusters == 1 || rng.uniform() < spec.intra_cluster_prob) {
        const double r = rng.uniform() * total;
        const auto k = std::min<std::size_t>(
            static_cast<std::size_t>(std::upper_bound(weights.begin(), weights.end(), r) - weights.begin()),
            spec.pois_per_cluster - 1);
        poi = static_cast<PoiIndex>(first + k);
      } else {
        auto pick = static_cast<std::size_t>(rng.below(n - spec.pois_per_cluster));
        if (pick >= first) pick += spec.pois_per_cluster;
        poi = static_cast<PoiIndex>(pick);
      }
      out.visits.push_back({u, poi, kEpoch + static_cast<std::int64_t>(u) * 1000000 + static_cast<std::int64_t>(v) * 3600});
    }
  }
  return out;
}

void write_checkins(std::ostream& out, const SyntheticData& data) {
  for (const auto& v : data.visits) {
    out << data.user_ids[v.user] << '\t' << data.catalog.id(v.poi) << '\t' << v.timestamp << '\n';
  }
}

void write_coords(std::ostream& out, const SyntheticData& data) {
  char buf[64];
  for (PoiIndex i = 0; i < data.catalog.size(); ++i) {
    const auto& p = data.catalog.point(i);
    std::snprintf(buf, sizeof buf, "\t%.9f\t%.9f\n", p.lat, p.lon);
    out << data.catalog.id(i) << buf;
  }
}

}  // namespace saenad::cli
