#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "saenad/data_ingest.hpp"
#include "saenad/evaluation.hpp"
#include "saenad/geo_kernel.hpp"
#include "saenad/model.hpp"
#include "saenad/training.hpp"

namespace saenad::cli {

struct SyntheticSpec {
  std::size_t clusters = 5;
  std::size_t pois_per_cluster = 40;
  std::size_t users = 100;
  std::size_t checkins_per_user = 30;
  double intra_cluster_prob = 0.9;
  double spread = 0.05;    // std-dev of POIs around their cluster centre, degrees
  double locality = 0.05;  // home-point bandwidth inside the home cluster; 0 picks uniformly
  std::uint64_t seed = 0;

  void validate() const;
};

struct RunConfig {
  std::filesystem::path checkins = "checkins.tsv";
  std::filesystem::path coords = "coords.tsv";
  std::filesystem::path cache_dir = "cache";
  std::filesystem::path checkpoint = "model.ckpt";
  std::filesystem::path report = "report.tsv";
  std::filesystem::path report_json;  // empty: no structured dump
  std::filesystem::path log = "train.log";

  std::size_t min_user_checkins = 20;
  std::size_t min_poi_visits = 20;
  SplitSpec split;
  std::uint32_t partition = 0;

  Architecture arch;
  KernelOptions kernel;
  bool gamma_set = false;
  TrainConfig train;
  std::size_t checkpoint_every = 0;  // 0: final checkpoint only

  std::vector<std::size_t> cutoffs{5, 10, 20};
  MapDenominator map_denominator = MapDenominator::TestSize;

  SyntheticSpec synth;

  std::uint64_t seed = 0;
  unsigned threads = 1;

  // Pushes the run-wide seed and thread count into every sub-config.
  void propagate();
  void validate() const;
};

// Flat `key = value` lines; `#` starts a comment. Unknown keys, repeated keys
// and malformed values are ParseErrors. Relative paths resolve against `base_dir`.
RunConfig parse_config(std::istream& in, const std::string& source, const std::filesystem::path& base_dir);
RunConfig load_config(const std::filesystem::path& path);

// Every recognised key, in the order the README documents them.
const std::vector<std::string>& config_keys();

}  // namespace saenad::cli
