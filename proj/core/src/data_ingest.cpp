#include "saenad/data_ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <numeric>

#include "saenad/error.hpp"
#include "saenad/random.hpp"

namespace saenad {

namespace {

// Splits on tabs; returns false when the field count differs from `expected`.
bool split_tabs(std::string_view line, std::size_t expected, std::vector<std::string_view>& out) {
  out.clear();
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  return out.size() == expected;
}

template <class T>
bool parse_number(std::string_view text, T& value) {
  if (text.empty()) return false;
  const char* first = text.data();
  const char* last = first + text.size();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  return ec == std::errc{} && ptr == last;
}

// Iterates non-blank lines, stripping a trailing CR.
template <class Fn>
void for_each_line(std::istream& in, Fn&& fn) {
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    fn(std::string_view(line), number);
  }
}

}  // namespace

void validate_point(const GeoPoint& p) {
  if (!std::isfinite(p.lat) || !std::isfinite(p.lon)) throw ValidationError("non-finite coordinate");
  if (p.lat < -90.0 || p.lat > 90.0) throw ValidationError("latitude out of range: " + std::to_string(p.lat));
  if (p.lon < -180.0 || p.lon > 180.0) throw ValidationError("longitude out of range: " + std::to_string(p.lon));
}

PoiIndex PoiCatalog::add(std::string id, GeoPoint where) {
  if (id.empty()) throw ValidationError("empty poi_id");
  validate_point(where);
  if (index_.contains(id)) throw ValidationError("duplicate poi_id '" + id + "'");
  const auto idx = static_cast<PoiIndex>(ids_.size());
  index_.emplace(id, idx);
  ids_.push_back(std::move(id));
  points_.push_back(where);
  return idx;
}

std::optional<PoiIndex> PoiCatalog::find(std::string_view id) const {
  const auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::uint64_t PoiCatalog::content_hash() const {
  std::uint64_t h = fnv1a64("catalog");
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    h = fnv1a64(ids_[i], h);
    h = fnv1a64(std::string_view("\t", 1), h);
    h = fnv1a64(std::string_view(reinterpret_cast<const char*>(&points_[i]), sizeof(GeoPoint)), h);
  }
  return h;
}

CheckInLog parse_checkins(std::istream& checkins, std::istream& coords, std::string_view checkin_source,
                          std::string_view coord_source) {
  CheckInLog log;
  std::vector<std::string_view> fields;
  const std::string coord_name(coord_source);
  const std::string checkin_name(checkin_source);

  for_each_line(coords, [&](std::string_view line, std::size_t number) {
    if (!split_tabs(line, 3, fields)) throw ParseError(coord_name, number, "expected poi_id<TAB>lat<TAB>lon");
    GeoPoint p;
    if (!parse_number(fields[1], p.lat) || !parse_number(fields[2], p.lon)) {
      throw ParseError(coord_name, number, "malformed coordinate");
    }
    try {
      log.catalog.add(std::string(fields[0]), p);
    } catch (const ValidationError& e) {
      throw ValidationError(coord_name + ":" + std::to_string(number) + ": " + e.what());
    }
  });

  std::unordered_map<std::string, UserIndex> users;
  for_each_line(checkins, [&](std::string_view line, std::size_t number) {
    if (!split_tabs(line, 3, fields)) throw ParseError(checkin_name, number, "expected user_id<TAB>poi_id<TAB>timestamp");
    if (fields[0].empty() || fields[1].empty()) throw ParseError(checkin_name, number, "empty identifier");
    std::int64_t ts = 0;
    if (!parse_number(fields[2], ts)) throw ParseError(checkin_name, number, "malformed timestamp");
    if (ts < 0) throw ParseError(checkin_name, number, "negative timestamp");
    const auto poi = log.catalog.find(fields[1]);
    if (!poi) {
      throw ReferentialError(checkin_name + ":" + std::to_string(number) + ": unknown poi_id '" +
                             std::string(fields[1]) + "'");
    }
    auto [it, inserted] = users.try_emplace(std::string(fields[0]), static_cast<UserIndex>(log.user_ids.size()));
    if (inserted) log.user_ids.emplace_back(fields[0]);
    log.records.push_back({it->second, *poi, ts});
  });
  return log;
}

CheckInLog filter_sparse(const CheckInLog& log, std::size_t min_user_checkins, std::size_t min_poi_visits) {
  if (min_user_checkins < 1 || min_poi_visits < 1) throw ValidationError("filter thresholds must be >= 1");

  std::vector<char> alive(log.records.size(), 1);
  std::vector<std::size_t> user_degree(log.user_count());
  std::vector<std::size_t> poi_degree(log.poi_count());

  bool changed = true;
  while (changed) {
    changed = false;

    std::fill(user_degree.begin(), user_degree.end(), 0);
    for (std::size_t r = 0; r < alive.size(); ++r)
      if (alive[r]) ++user_degree[log.records[r].user];
    for (std::size_t r = 0; r < alive.size(); ++r) {
      if (alive[r] && user_degree[log.records[r].user] < min_user_checkins) {
        alive[r] = 0;
        changed = true;
      }
    }

    std::fill(poi_degree.begin(), poi_degree.end(), 0);
    for (std::size_t r = 0; r < alive.size(); ++r)
      if (alive[r]) ++poi_degree[log.records[r].poi];
    for (std::size_t r = 0; r < alive.size(); ++r) {
      if (alive[r] && poi_degree[log.records[r].poi] < min_poi_visits) {
        alive[r] = 0;
        changed = true;
      }
    }
  }

  // POIs with no surviving record are dropped, including never-visited ones.
  std::fill(poi_degree.begin(), poi_degree.end(), 0);
  for (std::size_t r = 0; r < alive.size(); ++r)
    if (alive[r]) ++poi_degree[log.records[r].poi];

  CheckInLog out;
  constexpr auto kAbsent = static_cast<PoiIndex>(-1);
  std::vector<PoiIndex> poi_map(log.poi_count(), kAbsent);
  for (PoiIndex i = 0; i < log.poi_count(); ++i) {
    if (poi_degree[i] > 0) poi_map[i] = out.catalog.add(log.catalog.id(i), log.catalog.point(i));
  }
  std::vector<UserIndex> user_map(log.user_count(), static_cast<UserIndex>(-1));
  for (std::size_t r = 0; r < alive.size(); ++r) {
    if (!alive[r]) continue;
    const auto& rec = log.records[r];
    if (user_map[rec.user] == static_cast<UserIndex>(-1)) {
      user_map[rec.user] = static_cast<UserIndex>(out.user_ids.size());
      out.user_ids.push_back(log.user_ids[rec.user]);
    }
    out.records.push_back({user_map[rec.user], poi_map[rec.poi], rec.timestamp});
  }
  if (out.records.empty()) throw EmptyDatasetError("no check-ins survive filtering");
  return out;
}

std::size_t test_size_for(std::size_t distinct, double fraction) {
  if (distinct < 2) return 0;
  auto k = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(distinct) + 0.5));
  return std::clamp<std::size_t>(k, 1, distinct - 1);
}

TrainTestSplit split_train_test(const CheckInLog& log, const SplitSpec& spec, std::uint32_t partition) {
  if (!(spec.test_fraction > 0.0 && spec.test_fraction < 1.0)) throw ValidationError("test_fraction must be in (0, 1)");
  if (spec.partition_count == 0) throw ValidationError("partition_count must be positive");
  if (partition >= spec.partition_count) throw ValidationError("partition index out of range");

  const auto users = log.user_count();
  std::vector<std::vector<PoiIndex>> distinct(users);
  for (const auto& rec : log.records) distinct[rec.user].push_back(rec.poi);
  for (auto& pois : distinct) {
    std::sort(pois.begin(), pois.end());
    pois.erase(std::unique(pois.begin(), pois.end()), pois.end());
  }

  TrainTestSplit split;
  split.test.resize(users);
  for (UserIndex u = 0; u < users; ++u) {
    auto& pois = distinct[u];
    if (pois.size() < 2) {
      throw SplitError("user '" + log.user_ids[u] + "' has " + std::to_string(pois.size()) +
                       " distinct POI(s); at least 2 are required to split");
    }
    Rng rng(substream_seed(spec.seed, "split", fnv1a64(log.user_ids[u], partition + 1)));
    std::vector<PoiIndex> shuffled = pois;
    rng.shuffle(std::span<PoiIndex>(shuffled));
    const auto k = test_size_for(pois.size(), spec.test_fraction);
    split.test[u].assign(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(k));
    std::sort(split.test[u].begin(), split.test[u].end());
  }

  split.train.catalog = log.catalog;
  split.train.user_ids = log.user_ids;
  split.train.records.reserve(log.records.size());
  for (const auto& rec : log.records) {
    const auto& t = split.test[rec.user];
    if (!std::binary_search(t.begin(), t.end(), rec.poi)) split.train.records.push_back(rec);
  }
  return split;
}

double confidence_weight(std::uint32_t frequency, double alpha, double epsilon) {
  if (frequency == 0) return 1.0;
  return 1.0 + alpha * std::log1p(static_cast<double>(frequency) / epsilon);
}

InteractionData InteractionData::from_counts(std::size_t users, std::size_t pois, std::vector<Entry> entries,
                                             double alpha, double epsilon) {
  if (!(alpha > 0.0) || !(epsilon > 0.0)) throw ValidationError("alpha and epsilon must be positive");
  for (const auto& e : entries) {
    if (e.user >= users || e.poi >= pois) throw IndexError("interaction entry outside the matrix");
  }
  std::sort(entries.begin(), entries.end(),
            [](const Entry& a, const Entry& b) { return a.user != b.user ? a.user < b.user : a.poi < b.poi; });

  InteractionData d;
  d.users_ = users;
  d.pois_ = pois;
  d.alpha_ = alpha;
  d.epsilon_ = epsilon;
  d.row_ptr_.assign(users + 1, 0);
  for (std::size_t k = 0; k < entries.size();) {
    const auto& e = entries[k];
    std::uint64_t total = 0;
    std::size_t j = k;
    for (; j < entries.size() && entries[j].user == e.user && entries[j].poi == e.poi; ++j) total += entries[j].count;
    k = j;
    if (total == 0) continue;
    if (total > UINT32_MAX) throw ValidationError("check-in count overflow");
    d.cols_.push_back(e.poi);
    d.counts_.push_back(static_cast<std::uint32_t>(total));
    d.confidence_.push_back(confidence_weight(static_cast<std::uint32_t>(total), alpha, epsilon));
    ++d.row_ptr_[e.user + 1];
  }
  std::partial_sum(d.row_ptr_.begin(), d.row_ptr_.end(), d.row_ptr_.begin());
  return d;
}

std::span<const PoiIndex> InteractionData::checkins(UserIndex u) const {
  if (u >= users_) throw IndexError("user index out of range");
  return std::span<const PoiIndex>(cols_).subspan(row_ptr_[u], row_ptr_[u + 1] - row_ptr_[u]);
}

std::span<const std::uint32_t> InteractionData::counts(UserIndex u) const {
  if (u >= users_) throw IndexError("user index out of range");
  return std::span<const std::uint32_t>(counts_).subspan(row_ptr_[u], row_ptr_[u + 1] - row_ptr_[u]);
}

std::span<const double> InteractionData::confidences(UserIndex u) const {
  if (u >= users_) throw IndexError("user index out of range");
  return std::span<const double>(confidence_).subspan(row_ptr_[u], row_ptr_[u + 1] - row_ptr_[u]);
}

std::uint32_t InteractionData::frequency(UserIndex u, PoiIndex i) const {
  const auto row = checkins(u);
  const auto it = std::lower_bound(row.begin(), row.end(), i);
  if (it == row.end() || *it != i) return 0;
  return counts_[row_ptr_[u] + static_cast<std::size_t>(it - row.begin())];
}

double InteractionData::confidence(UserIndex u, PoiIndex i) const {
  const auto row = checkins(u);
  const auto it = std::lower_bound(row.begin(), row.end(), i);
  if (it == row.end() || *it != i) return 1.0;
  return confidence_[row_ptr_[u] + static_cast<std::size_t>(it - row.begin())];
}

InteractionData build_matrices(const CheckInLog& train, double alpha, double epsilon) {
  if (train.records.empty()) throw EmptyDatasetError("training log is empty");
  std::vector<InteractionData::Entry> entries;
  entries.reserve(train.records.size());
  for (const auto& rec : train.records) entries.push_back({rec.user, rec.poi, 1});
  return InteractionData::from_counts(train.user_count(), train.poi_count(), std::move(entries), alpha, epsilon);
}

}  // namespace saenad
