#include "saenad/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <ostream>

#include "saenad/error.hpp"
#include "saenad/parallel.hpp"

namespace saenad {

Recommendation recommend_topk(const Eigen::VectorXd& scores, std::span<const PoiIndex> visited, std::size_t k) {
  const auto n = static_cast<std::size_t>(scores.size());
  std::vector<PoiIndex> candidates;
  candidates.reserve(n);
  std::size_t v = 0;
  for (PoiIndex i = 0; i < n; ++i) {
    while (v < visited.size() && visited[v] < i) ++v;
    if (v < visited.size() && visited[v] == i) continue;
    candidates.push_back(i);
  }
  if (k == 0 || k > candidates.size()) {
    throw CutoffError("cutoff k=" + std::to_string(k) + " but only " + std::to_string(candidates.size()) +
                      " unvisited POIs are available");
  }
  auto better = [&scores](PoiIndex a, PoiIndex b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  };
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(k), candidates.end(), better);
  Recommendation rec;
  rec.pois.assign(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(k));
  rec.scores.reserve(k);
  for (auto i : rec.pois) rec.scores.push_back(scores[i]);
  return rec;
}

std::vector<UserMetrics> metrics_at_cutoffs(std::span<const PoiIndex> ranked, std::span<const PoiIndex> test,
                                            std::span<const std::size_t> cutoffs, MapDenominator denominator) {
  if (test.empty()) throw ValidationError("metrics need a non-empty test set");
  std::vector<UserMetrics> out;
  out.reserve(cutoffs.size());
  const double t = static_cast<double>(test.size());
  for (auto k : cutoffs) {
    if (k == 0 || k > ranked.size()) throw CutoffError("cutoff exceeds ranked list length");
    std::size_t hits = 0;
    double ap_sum = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      if (std::binary_search(test.begin(), test.end(), ranked[j])) {
        ++hits;
        ap_sum += static_cast<double>(hits) / static_cast<double>(j + 1);
      }
    }
    const double ap_den = denominator == MapDenominator::TestSize ? t : static_cast<double>(std::min(k, test.size()));
    out.push_back({static_cast<double>(hits) / static_cast<double>(k), static_cast<double>(hits) / t, ap_sum / ap_den});
  }
  return out;
}

UserMetrics metrics_for_user(std::span<const PoiIndex> ranked, std::span<const PoiIndex> test,
                             MapDenominator denominator) {
  const std::size_t k[] = {ranked.size()};
  return metrics_at_cutoffs(ranked, test, k, denominator).front();
}

namespace {

std::vector<std::size_t> sorted_cutoffs(const EvalOptions& options) {
  auto cutoffs = options.cutoffs;
  std::sort(cutoffs.begin(), cutoffs.end());
  cutoffs.erase(std::unique(cutoffs.begin(), cutoffs.end()), cutoffs.end());
  if (cutoffs.empty() || cutoffs.front() == 0) throw ValidationError("cutoffs must be positive and non-empty");
  return cutoffs;
}

class ReportBuilder {
 public:
  explicit ReportBuilder(std::vector<std::size_t> cutoffs) : cutoffs_(std::move(cutoffs)), sums_(cutoffs_.size()) {}

  void add(const std::vector<UserMetrics>& m) {
    for (std::size_t c = 0; c < m.size(); ++c) {
      sums_[c].precision += m[c].precision;
      sums_[c].recall += m[c].recall;
      sums_[c].average_precision += m[c].average_precision;
    }
    ++users_;
  }
  void skip() { ++skipped_; }

  EvalReport finish() const {
    EvalReport r;
    r.users_evaluated = users_;
    r.users_skipped = skipped_;
    const double n = users_ ? static_cast<double>(users_) : 1.0;
    for (std::size_t c = 0; c < cutoffs_.size(); ++c) {
      r.rows.push_back({cutoffs_[c], sums_[c].precision / n, sums_[c].recall / n, sums_[c].average_precision / n});
    }
    return r;
  }

  const std::vector<std::size_t>& cutoffs() const { return cutoffs_; }

 private:
  std::vector<std::size_t> cutoffs_;
  std::vector<UserMetrics> sums_;
  std::size_t users_ = 0;
  std::size_t skipped_ = 0;
};

}  // namespace

EvalReport evaluate_scores(const Eigen::MatrixXd& scores, const InteractionData& train,
                           std::span<const std::vector<PoiIndex>> test_sets, const EvalOptions& options) {
  if (static_cast<std::size_t>(scores.cols()) != train.user_count() || test_sets.size() != train.user_count() ||
      static_cast<std::size_t>(scores.rows()) != train.poi_count()) {
    throw ShapeError("evaluate_scores: score matrix, training data and test sets disagree");
  }
  ReportBuilder builder(sorted_cutoffs(options));
  const auto kmax = builder.cutoffs().back();
  for (UserIndex u = 0; u < train.user_count(); ++u) {
    if (test_sets[u].empty()) {
      builder.skip();
      continue;
    }
    const auto rec = recommend_topk(scores.col(u), train.checkins(u), kmax);
    builder.add(metrics_at_cutoffs(rec.pois, test_sets[u], builder.cutoffs(), options.denominator));
  }
  return builder.finish();
}

EvalReport evaluate(const ModelParams& params, const GeoKernel& kernel, const InteractionData& train,
                    std::span<const std::vector<PoiIndex>> test_sets, const EvalOptions& options) {
  if (train.poi_count() != params.arch.pois) {
    throw ShapeError("model has N=" + std::to_string(params.arch.pois) + " but the data has N=" +
                     std::to_string(train.poi_count()));
  }
  if (test_sets.size() != train.user_count()) throw ShapeError("one test set per user is required");
  ReportBuilder builder(sorted_cutoffs(options));
  const auto kmax = builder.cutoffs().back();
  const std::size_t batch = std::max<std::size_t>(1, options.batch_size);

  std::vector<UserIndex> users;
  for (UserIndex u = 0; u < train.user_count(); ++u) {
    if (test_sets[u].empty()) {
      builder.skip();
    } else {
      users.push_back(u);
    }
  }

  for (std::size_t begin = 0; begin < users.size(); begin += batch) {
    const auto end = std::min(users.size(), begin + batch);
    std::vector<std::span<const PoiIndex>> lists;
    for (auto i = begin; i < end; ++i) lists.push_back(train.checkins(users[i]));
    const auto fwd = forward_batch(params, kernel, lists, Mode::Eval, nullptr, {}, options.threads);
    std::vector<std::vector<UserMetrics>> per_user(end - begin);
    parallel_for(end - begin, options.threads, [&](std::size_t b) {
      const auto u = users[begin + b];
      const auto rec = recommend_topk(fwd.Xhat.col(static_cast<Eigen::Index>(b)), train.checkins(u), kmax);
      per_user[b] = metrics_at_cutoffs(rec.pois, test_sets[u], builder.cutoffs(), options.denominator);
    });
    for (const auto& m : per_user) builder.add(m);
  }
  return builder.finish();
}

void write_report_table(std::ostream& out, const EvalReport& report) {
  out << "k\tprecision\trecall\tmap\n";
  char line[128];
  for (const auto& r : report.rows) {
    std::snprintf(line, sizeof line, "%zu\t%.6f\t%.6f\t%.6f\n", r.k, r.precision, r.recall, r.map);
    out << line;
  }
}

}  // namespace saenad
