#include "saenad/cli/commands.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "saenad/binary_io.hpp"
#include "saenad/cli/synth.hpp"
#include "saenad/error.hpp"
#include "saenad/random.hpp"

namespace saenad::cli {

namespace fs = std::filesystem;

namespace {

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Advisory exclusive lock on <cache_dir>/.lock for the lifetime of the object.
class CacheLock {
 public:
  explicit CacheLock(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create cache directory " + dir.string() + ": " + ec.message());
    const auto path = dir / ".lock";
    fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
    if (fd_ < 0) throw IoError("cannot open lock file " + path.string());
    if (::flock(fd_, LOCK_EX) != 0) {
      ::close(fd_);
      throw IoError("cannot lock " + path.string());
    }
  }
  ~CacheLock() {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
  CacheLock(const CacheLock&) = delete;
  CacheLock& operator=(const CacheLock&) = delete;

 private:
  int fd_ = -1;
};

fs::path dataset_path(const RunConfig& c, std::uint64_t key) { return c.cache_dir / ("data-" + hex(key) + ".bin"); }
fs::path kernel_path(const RunConfig& c, std::uint64_t key) { return c.cache_dir / ("kernel-" + hex(key) + ".bin"); }

std::uint64_t kernel_key(const RunConfig& c, const PoiCatalog& catalog) {
  return kernel_cache_key(catalog.content_hash(), c.kernel);
}

std::string manifest_text(const RunConfig& c, std::uint64_t key, const PreparedDataset& ds, std::uint64_t kkey,
                          std::uint64_t checkins_hash, std::uint64_t coords_hash) {
  std::size_t test_pois = 0;
  for (const auto& t : ds.test) test_pois += t.size();
  const auto m = ds.train.user_count();
  const auto n = ds.train.poi_count();
  const double density = static_cast<double>(ds.train.nonzeros() + test_pois) / (static_cast<double>(m) * n);
  std::ostringstream s;
  s << "format\t1\n"
    << "cache_key\t" << hex(key) << '\n'
    << "checkins_hash\t" << hex(checkins_hash) << '\n'
    << "coords_hash\t" << hex(coords_hash) << '\n'
    << "min_user_checkins\t" << c.min_user_checkins << '\n'
    << "min_poi_visits\t" << c.min_poi_visits << '\n'
    << "test_fraction\t" << real(c.split.test_fraction) << '\n'
    << "partition\t" << c.partition << '\n'
    << "partition_count\t" << c.split.partition_count << '\n'
    << "seed\t" << c.seed << '\n'
    << "alpha\t" << real(c.train.alpha) << '\n'
    << "epsilon\t" << real(c.train.epsilon) << '\n'
    << "users\t" << m << '\n'
    << "pois\t" << n << '\n'
    << "train_pairs\t" << ds.train.nonzeros() << '\n'
    << "test_pairs\t" << test_pois << '\n'
    << "density\t" << real(density) << '\n'
    << "dataset\t" << dataset_path(c, key).filename().string() << '\n'
    << "kernel\t" << kernel_path(c, kkey).filename().string() << '\n';
  return s.str();
}

}  // namespace

int exit_code_for(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::Io:
      return kExitIo;
    case ErrorKind::Divergence:
    case ErrorKind::Numeric:
      return kExitDivergence;
    default:
      return kExitValidation;
  }
}

std::uint64_t dataset_cache_key(const RunConfig& c) {
  std::uint64_t h = fnv1a64("dataset/1");
  auto mix = [&h](const auto& v) { h = fnv1a64(std::string_view(reinterpret_cast<const char*>(&v), sizeof v), h); };
  mix(fnv1a64(read_file_bytes(c.checkins)));
  mix(fnv1a64(read_file_bytes(c.coords)));
  mix(static_cast<std::uint64_t>(c.min_user_checkins));
  mix(static_cast<std::uint64_t>(c.min_poi_visits));
  mix(c.split.test_fraction);
  mix(c.split.partition_count);
  mix(c.partition);
  mix(c.seed);
  mix(c.train.alpha);
  mix(c.train.epsilon);
  return h;
}

PreprocessResult cmd_preprocess(const RunConfig& config, std::ostream& out) {
  config.validate();
  const auto checkin_bytes = read_file_bytes(config.checkins);
  const auto coord_bytes = read_file_bytes(config.coords);
  const auto key = dataset_cache_key(config);

  CacheLock lock(config.cache_dir);
  PreprocessResult result;
  result.cache_key = key;
  result.dataset_path = dataset_path(config, key);
  result.manifest_path = config.cache_dir / "manifest.txt";

  PreparedDataset ds;
  bool hit = false;
  if (fs::exists(result.dataset_path)) {
    try {
      std::uint64_t stored = 0;
      ds = load_dataset(result.dataset_path, &stored);
      hit = stored == key;
    } catch (const Error&) {
      hit = false;
    }
  }
  if (!hit) {
    std::istringstream checkins(checkin_bytes);
    std::istringstream coords(coord_bytes);
    const auto log = parse_checkins(checkins, coords, config.checkins.string(), config.coords.string());
    const auto filtered = filter_sparse(log, config.min_user_checkins, config.min_poi_visits);
    auto split = split_train_test(filtered, config.split, config.partition);
    ds.catalog = filtered.catalog;
    ds.user_ids = filtered.user_ids;
    ds.train = build_matrices(split.train, config.train.alpha, config.train.epsilon);
    ds.test = std::move(split.test);
  }

  const auto kkey = kernel_key(config, ds.catalog);
  result.kernel_path = kernel_path(config, kkey);
  bool kernel_hit = false;
  if (fs::exists(result.kernel_path)) {
    try {
      std::uint64_t stored = 0;
      load_kernel(result.kernel_path, &stored);
      kernel_hit = stored == kkey;
    } catch (const Error&) {
      kernel_hit = false;
    }
  }
  const auto kernel = kernel_hit ? GeoKernel{} : build_kernel(ds.catalog, config.kernel);

  if (!hit) save_dataset(result.dataset_path, ds, key);
  if (!kernel_hit) save_kernel(result.kernel_path, kernel, kkey);
  result.manifest = manifest_text(config, key, ds, kkey, fnv1a64(checkin_bytes), fnv1a64(coord_bytes));
  result.manifest_hash = fnv1a64(result.manifest);
  result.cache_hit = hit && kernel_hit;
  write_file_atomically(result.manifest_path, [&](std::ostream& o) { o << result.manifest; });

  out << (result.cache_hit ? "cache hit" : "cache written") << '\t' << result.dataset_path.filename().string() << '\n'
      << "users\t" << ds.train.user_count() << '\n'
      << "pois\t" << ds.train.poi_count() << '\n'
      << "manifest_hash\t" << hex(result.manifest_hash) << '\n';
  return result;
}

PreparedDataset load_prepared(const RunConfig& config) {
  const auto key = dataset_cache_key(config);
  const auto path = dataset_path(config, key);
  if (!fs::exists(path)) {
    throw IoError("no preprocessed dataset at " + path.string() + "; run `preprocess` with this config first");
  }
  std::uint64_t stored = 0;
  auto ds = load_dataset(path, &stored);
  if (stored != key) throw IoError("cache key mismatch in " + path.string());
  return ds;
}

GeoKernel load_or_build_kernel(const RunConfig& config, const PoiCatalog& catalog) {
  const auto key = kernel_key(config, catalog);
  const auto path = kernel_path(config, key);
  if (fs::exists(path)) {
    std::uint64_t stored = 0;
    auto k = load_kernel(path, &stored);
    if (stored == key && k.size() == catalog.size()) return k;
  }
  auto k = build_kernel(catalog, config.kernel);
  CacheLock lock(config.cache_dir);
  save_kernel(path, k, key);
  return k;
}

TrainHistory cmd_train(const RunConfig& config, std::ostream& out) {
  config.validate();
  const auto ds = load_prepared(config);
  const auto kernel = load_or_build_kernel(config, ds.catalog);
  auto arch = config.arch;
  arch.pois = ds.train.poi_count();

  if (!config.log.empty() && config.log.has_parent_path()) fs::create_directories(config.log.parent_path());
  std::ofstream log;
  if (!config.log.empty()) {
    log.open(config.log, std::ios::binary | std::ios::trunc);
    if (!log) throw IoError("cannot write " + config.log.string());
    log << "iteration\tbatch\tobjective\n";
  }
  if (config.checkpoint.has_parent_path()) fs::create_directories(config.checkpoint.parent_path());

  TrainHooks hooks;
  hooks.on_batch = [&](std::size_t iter, std::size_t batch, double obj) {
    if (log.is_open()) log << iter + 1 << '\t' << batch + 1 << '\t' << real(obj) << '\n';
  };
  hooks.on_iteration_end = [&](std::size_t iter, const ModelParams& params) {
    if (log.is_open()) log.flush();
    if (config.checkpoint_every > 0 && (iter + 1) % config.checkpoint_every == 0) {
      auto path = config.checkpoint;
      path += ".iter" + std::to_string(iter + 1);
      save_checkpoint(path, params, config.seed);
    }
  };

  const auto result = train(config.train, ds.train, kernel, arch, hooks);
  save_checkpoint(config.checkpoint, result.params, config.seed);
  if (log.is_open()) {
    log.close();
    if (!log) throw IoError("failed writing " + config.log.string());
  }

  if (result.history.epoch_mean_objective.empty()) {
    out << "iterations\t0\n";
  } else {
    out << "iterations\t" << result.history.epoch_mean_objective.size() << '\n'
        << "final_epoch_objective\t" << real(result.history.epoch_mean_objective.back()) << '\n';
  }
  out << "checkpoint\t" << config.checkpoint.string() << '\n';
  return result.history;
}

std::string report_json(const EvalReport& report, const RunConfig& config) {
  nlohmann::ordered_json j;
  j["users_evaluated"] = report.users_evaluated;
  j["users_skipped"] = report.users_skipped;
  j["variant"] = std::string(to_string(config.arch.variant));
  j["map_denominator"] = config.map_denominator == MapDenominator::TestSize ? "test_size" : "min_cutoff_test";
  auto rows = nlohmann::ordered_json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"k", r.k}, {"precision", r.precision}, {"recall", r.recall}, {"map", r.map}});
  }
  j["cutoffs"] = std::move(rows);
  return j.dump(2) + "\n";
}

EvalReport cmd_eval(const RunConfig& config, std::ostream& out) {
  config.validate();
  const auto ds = load_prepared(config);
  const auto ckpt = load_checkpoint(config.checkpoint);
  if (ckpt.params.arch.pois != ds.train.poi_count()) {
    throw ShapeError("checkpoint " + config.checkpoint.string() + " has N=" + std::to_string(ckpt.params.arch.pois) +
                     " but the dataset has N=" + std::to_string(ds.train.poi_count()));
  }
  const auto kernel = load_or_build_kernel(config, ds.catalog);
  EvalOptions opts;
  opts.cutoffs = config.cutoffs;
  opts.denominator = config.map_denominator;
  opts.threads = config.threads;
  const auto report = evaluate(ckpt.params, kernel, ds.train, ds.test, opts);

  std::ostringstream table;
  write_report_table(table, report);
  out << table.str();
  if (!config.report.empty()) {
    if (config.report.has_parent_path()) fs::create_directories(config.report.parent_path());
    write_file_atomically(config.report, [&](std::ostream& o) { o << table.str(); });
  }
  if (!config.report_json.empty()) {
    if (config.report_json.has_parent_path()) fs::create_directories(config.report_json.parent_path());
    const auto json = report_json(report, config);
    write_file_atomically(config.report_json, [&](std::ostream& o) { o << json; });
  }
  return report;
}

GradcheckOutcome cmd_gradcheck(const RunConfig& config, std::ostream& out, bool corrupt_gradient) {
  config.validate();
  GradcheckOutcome outcome;
  char line[160];
  out << "variant\tmax_relative_error\tworst_tensor\tcoordinates\n";
  for (auto v : kAllVariants) {
    GradCheckOptions o;
    o.arch.variant = v;
    o.seed = config.seed;
    o.lambda = config.train.lambda;
    o.alpha = config.train.alpha;
    o.epsilon = config.train.epsilon;
    o.weight_exponent = config.train.weight_exponent;
    o.corrupt_gradient = corrupt_gradient;
    auto r = grad_check(o);
    std::snprintf(line, sizeof line, "%s\t%.3e\t%s\t%zu\n", std::string(to_string(v)).c_str(), r.max_relative_error,
                  r.worst_tensor.c_str(), r.coordinates_checked);
    out << line;
    if (!(r.max_relative_error < kGradcheckTolerance)) outcome.passed = false;
    outcome.rows.push_back({v, std::move(r)});
  }
  out << (outcome.passed ? "PASS" : "FAIL") << '\n';
  return outcome;
}

void cmd_synth(const RunConfig& config, std::ostream& out) {
  const auto data = generate_synthetic(config.synth);
  for (const auto& p : {config.checkins, config.coords}) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
  }
  write_file_atomically(config.coords, [&](std::ostream& o) { write_coords(o, data); });
  write_file_atomically(config.checkins, [&](std::ostream& o) { write_checkins(o, data); });
  out << "pois\t" << data.catalog.size() << '\n'
      << "users\t" << data.user_ids.size() << '\n'
      << "checkins\t" << data.visits.size() << '\n';
}

}  // namespace saenad::cli
