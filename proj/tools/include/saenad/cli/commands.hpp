#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "saenad/cli/config.hpp"
#include "saenad/error.hpp"
#include "saenad/evaluation.hpp"
#include "saenad/interaction_cache.hpp"
#include "saenad/training.hpp"

namespace saenad::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitValidation = 2,
  kExitIo = 3,
  kExitDivergence = 4,
  kExitGradcheck = 5,
  kExitInternal = 70,
};

int exit_code_for(const Error& e);

struct PreprocessResult {
  std::uint64_t cache_key = 0;
  bool cache_hit = false;
  std::filesystem::path dataset_path;
  std::filesystem::path kernel_path;
  std::filesystem::path manifest_path;
  std::string manifest;
  std::uint64_t manifest_hash = 0;
};

// Parses, filters, splits and builds matrices and the kernel, caching both in
// cache_dir under content-hash names. Writes manifest.txt.
PreprocessResult cmd_preprocess(const RunConfig& config, std::ostream& out);

// Trains from the cached dataset. Writes the checkpoint and the progress log
// (`iteration<TAB>batch<TAB>objective`), and prints the final epoch objective.
TrainHistory cmd_train(const RunConfig& config, std::ostream& out);

// Prints the report table and writes it to config.report (and the JSON dump to
// config.report_json when set).
EvalReport cmd_eval(const RunConfig& config, std::ostream& out);

struct GradcheckRow {
  Variant variant;
  GradCheckResult result;
};

// One gradient check per variant. `passed` is false if any error reaches 1e-4.
struct GradcheckOutcome {
  std::vector<GradcheckRow> rows;
  bool passed = true;
};

inline constexpr double kGradcheckTolerance = 1e-4;

GradcheckOutcome cmd_gradcheck(const RunConfig& config, std::ostream& out, bool corrupt_gradient = false);

// Writes config.checkins and config.coords from config.synth.
void cmd_synth(const RunConfig& config, std::ostream& out);

// Key over input file contents and every parameter that shapes the cached dataset.
std::uint64_t dataset_cache_key(const RunConfig& config);

// Loads the cached dataset for `config`; IoError when preprocess has not run.
PreparedDataset load_prepared(const RunConfig& config);

// Loads the cached kernel or builds and caches it.
GeoKernel load_or_build_kernel(const RunConfig& config, const PoiCatalog& catalog);

std::string report_json(const EvalReport& report, const RunConfig& config);

}  // namespace saenad::cli
