#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "saenad/data_ingest.hpp"
#include "saenad/geo_kernel.hpp"
#include "saenad/model.hpp"

namespace saenad {

struct Recommendation {
  UserIndex user = 0;
  std::vector<PoiIndex> pois;  // best first
  std::vector<double> scores;  // non-increasing
};

// The k unvisited POIs with the highest scores; ties go to the lower index.
// `visited` must be sorted. Throws CutoffError when k exceeds the number of
// unvisited POIs or is zero.
Recommendation recommend_topk(const Eigen::VectorXd& scores, std::span<const PoiIndex> visited, std::size_t k);

enum class MapDenominator {
  TestSize,        // |T_u|, as in the MAP@k definition used here
  MinCutoffTest,   // min(k, |T_u|)
};

struct UserMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double average_precision = 0.0;
};

// Metrics of a ranked list against a sorted, non-empty test set. The cutoff is
// ranked.size(). Throws ValidationError for an empty test set.
UserMetrics metrics_for_user(std::span<const PoiIndex> ranked, std::span<const PoiIndex> test,
                             MapDenominator denominator = MapDenominator::TestSize);

struct CutoffMetrics {
  std::size_t k = 0;
  double precision = 0.0;
  double recall = 0.0;
  double map = 0.0;
};

struct EvalReport {
  std::vector<CutoffMetrics> rows;  // ascending k
  std::size_t users_evaluated = 0;  // users with a non-empty test set
  std::size_t users_skipped = 0;
};

struct EvalOptions {
  std::vector<std::size_t> cutoffs{5, 10, 20};
  MapDenominator denominator = MapDenominator::TestSize;
  std::size_t batch_size = 256;
  unsigned threads = 1;
};

// Per-user metrics for every cutoff from one ranking at the largest cutoff.
std::vector<UserMetrics> metrics_at_cutoffs(std::span<const PoiIndex> ranked, std::span<const PoiIndex> test,
                                            std::span<const std::size_t> cutoffs, MapDenominator denominator);

// Scores every user with an eval-mode forward pass over their training
// check-ins and averages metrics over users whose test set is non-empty.
EvalReport evaluate(const ModelParams& params, const GeoKernel& kernel, const InteractionData& train,
                    std::span<const std::vector<PoiIndex>> test_sets, const EvalOptions& options);

// Same aggregation from precomputed scores (one column per user).
EvalReport evaluate_scores(const Eigen::MatrixXd& scores, const InteractionData& train,
                           std::span<const std::vector<PoiIndex>> test_sets, const EvalOptions& options);

// Header line, then one `k<TAB>precision<TAB>recall<TAB>map` row per cutoff.
void write_report_table(std::ostream& out, const EvalReport& report);

}  // namespace saenad
