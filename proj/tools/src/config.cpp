#include "saenad/cli/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <set>

#include "saenad/error.hpp"

namespace saenad::cli {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_integer(std::string_view v) {
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) throw std::invalid_argument("expected a non-negative integer");
  return out;
}

double parse_real(std::string_view v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size() || !std::isfinite(out)) {
    throw std::invalid_argument("expected a finite real number");
  }
  return out;
}

bool parse_bool(std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument("expected true or false");
}

std::vector<std::size_t> parse_list(std::string_view v) {
  std::vector<std::size_t> out;
  while (!v.empty()) {
    const auto comma = v.find(',');
    out.push_back(parse_integer<std::size_t>(trim(v.substr(0, comma))));
    if (comma == std::string_view::npos) break;
    v.remove_prefix(comma + 1);
  }
  if (out.empty()) throw std::invalid_argument("expected a comma-separated list");
  return out;
}

using Setter = std::function<void(RunConfig&, std::string_view, const std::filesystem::path&)>;

std::filesystem::path resolve(const std::filesystem::path& base, std::string_view v) {
  std::filesystem::path p{std::string(v)};
  return p.is_relative() ? base / p : p;
}

Setter path_field(std::filesystem::path RunConfig::*field) {
  return [field](RunConfig& c, std::string_view v, const std::filesystem::path& base) { c.*field = resolve(base, v); };
}

template <class Fn>
Setter value(Fn fn) {
  return [fn](RunConfig& c, std::string_view v, const std::filesystem::path&) { fn(c, v); };
}

const std::vector<std::pair<std::string, Setter>>& setters() {
  static const std::vector<std::pair<std::string, Setter>> table = {
      {"checkins", path_field(&RunConfig::checkins)},
      {"coords", path_field(&RunConfig::coords)},
      {"cache_dir", path_field(&RunConfig::cache_dir)},
      {"checkpoint", path_field(&RunConfig::checkpoint)},
      {"report", path_field(&RunConfig::report)},
      {"report_json", path_field(&RunConfig::report_json)},
      {"log", path_field(&RunConfig::log)},
      {"seed", value([](RunConfig& c, std::string_view v) { c.seed = parse_integer<std::uint64_t>(v); })},
      {"threads", value([](RunConfig& c, std::string_view v) { c.threads = parse_integer<unsigned>(v); })},
      {"min_user_checkins",
       value([](RunConfig& c, std::string_view v) { c.min_user_checkins = parse_integer<std::size_t>(v); })},
      {"min_poi_visits",
       value([](RunConfig& c, std::string_view v) { c.min_poi_visits = parse_integer<std::size_t>(v); })},
      {"test_fraction", value([](RunConfig& c, std::string_view v) { c.split.test_fraction = parse_real(v); })},
      {"partition_count",
       value([](RunConfig& c, std::string_view v) { c.split.partition_count = parse_integer<std::uint32_t>(v); })},
      {"partition", value([](RunConfig& c, std::string_view v) { c.partition = parse_integer<std::uint32_t>(v); })},
      {"preset", value([](RunConfig& c, std::string_view v) {
         if (v == "default") {
           c.arch.hidden1 = 200;
         } else if (v == "gowalla") {
           c.arch.hidden1 = 500;
         } else {
           throw std::invalid_argument("expected default or gowalla");
         }
       })},
      {"hidden1", value([](RunConfig& c, std::string_view v) { c.arch.hidden1 = parse_integer<std::size_t>(v); })},
      {"hidden", value([](RunConfig& c, std::string_view v) { c.arch.hidden = parse_integer<std::size_t>(v); })},
      {"aspects", value([](RunConfig& c, std::string_view v) { c.arch.aspects = parse_integer<std::size_t>(v); })},
      {"variant", value([](RunConfig& c, std::string_view v) { c.arch.variant = parse_variant(v); })},
      {"dropout", value([](RunConfig& c, std::string_view v) { c.arch.dropout = parse_real(v); })},
      {"gamma", value([](RunConfig& c, std::string_view v) {
         c.kernel.gamma = parse_real(v);
         c.gamma_set = true;
       })},
      {"threshold", value([](RunConfig& c, std::string_view v) { c.kernel.threshold = parse_real(v); })},
      {"metric", value([](RunConfig& c, std::string_view v) { c.kernel.metric = parse_metric(v); })},
      {"kernel_grid", value([](RunConfig& c, std::string_view v) { c.kernel.grid_index = parse_bool(v); })},
      {"learning_rate", value([](RunConfig& c, std::string_view v) { c.train.learning_rate = parse_real(v); })},
      {"lambda", value([](RunConfig& c, std::string_view v) { c.train.lambda = parse_real(v); })},
      {"alpha", value([](RunConfig& c, std::string_view v) { c.train.alpha = parse_real(v); })},
      {"epsilon", value([](RunConfig& c, std::string_view v) { c.train.epsilon = parse_real(v); })},
      {"batch_size", value([](RunConfig& c, std::string_view v) { c.train.batch_size = parse_integer<std::size_t>(v); })},
      {"num_iterations",
       value([](RunConfig& c, std::string_view v) { c.train.num_iterations = parse_integer<std::size_t>(v); })},
      {"adam_beta1", value([](RunConfig& c, std::string_view v) { c.train.adam_beta1 = parse_real(v); })},
      {"adam_beta2", value([](RunConfig& c, std::string_view v) { c.train.adam_beta2 = parse_real(v); })},
      {"adam_eps", value([](RunConfig& c, std::string_view v) { c.train.adam_eps = parse_real(v); })},
      {"weight_exponent",
       value([](RunConfig& c, std::string_view v) { c.train.weight_exponent = parse_integer<int>(v); })},
      {"checkpoint_every",
       value([](RunConfig& c, std::string_view v) { c.checkpoint_every = parse_integer<std::size_t>(v); })},
      {"cutoffs", value([](RunConfig& c, std::string_view v) { c.cutoffs = parse_list(v); })},
      {"map_denominator", value([](RunConfig& c, std::string_view v) {
         if (v == "test_size") {
           c.map_denominator = MapDenominator::TestSize;
         } else if (v == "min_cutoff_test") {
           c.map_denominator = MapDenominator::MinCutoffTest;
         } else {
           throw std::invalid_argument("expected test_size or min_cutoff_test");
         }
       })},
      {"synth_clusters",
       value([](RunConfig& c, std::string_view v) { c.synth.clusters = parse_integer<std::size_t>(v); })},
      {"synth_pois_per_cluster",
       value([](RunConfig& c, std::string_view v) { c.synth.pois_per_cluster = parse_integer<std::size_t>(v); })},
      {"synth_users", value([](RunConfig& c, std::string_view v) { c.synth.users = parse_integer<std::size_t>(v); })},
      {"synth_checkins_per_user",
       value([](RunConfig& c, std::string_view v) { c.synth.checkins_per_user = parse_integer<std::size_t>(v); })},
      {"synth_intra_prob", value([](RunConfig& c, std::string_view v) { c.synth.intra_cluster_prob = parse_real(v); })},
      {"synth_spread", value([](RunConfig& c, std::string_view v) { c.synth.spread = parse_real(v); })},
      {"synth_locality", value([](RunConfig& c, std::string_view v) { c.synth.locality = parse_real(v); })},
  };
  return table;
}

}  // namespace

void SyntheticSpec::validate() const {
  if (clusters == 0 || pois_per_cluster == 0 || users == 0 || checkins_per_user == 0) {
    throw ValidationError("synthetic counts must be positive");
  }
  if (!(intra_cluster_prob > 0.0 && intra_cluster_prob <= 1.0)) {
    throw ValidationError("synth_intra_prob must lie in (0, 1]");
  }
  if (!(spread > 0.0) || !(locality >= 0.0)) throw ValidationError("synth_spread must be > 0 and synth_locality >= 0");
}

void RunConfig::propagate() {
  split.seed = seed;
  train.seed = seed;
  synth.seed = seed;
  train.threads = threads;
  kernel.threads = threads;
  if (!gamma_set) kernel.gamma = default_gamma(kernel.metric);
}

void RunConfig::validate() const {
  if (min_user_checkins == 0 || min_poi_visits == 0) throw ValidationError("filter thresholds must be >= 1");
  if (!(split.test_fraction > 0.0 && split.test_fraction < 1.0)) {
    throw ValidationError("test_fraction must lie in (0, 1)");
  }
  if (split.partition_count == 0 || partition >= split.partition_count) {
    throw ValidationError("partition must be below partition_count");
  }
  if (!(kernel.gamma > 0.0)) throw ValidationError("gamma must be > 0");
  if (!(kernel.threshold >= 0.0 && kernel.threshold < 1.0)) throw ValidationError("threshold must lie in [0, 1)");
  if (threads == 0) throw ValidationError("threads must be >= 1");
  if (cutoffs.empty()) throw ValidationError("cutoffs must not be empty");
  for (auto k : cutoffs) {
    if (k == 0) throw ValidationError("cutoffs must be positive");
  }
  train.validate();
  synth.validate();
  Architecture probe = arch;
  probe.pois = std::max<std::size_t>(arch.pois, 1);
  probe.validate();
}

RunConfig parse_config(std::istream& in, const std::string& source, const std::filesystem::path& base_dir) {
  std::map<std::string_view, const Setter*> lookup;
  for (const auto& [key, setter] : setters()) lookup.emplace(key, &setter);

  RunConfig config;
  std::set<std::string> seen;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    std::string_view text = line;
    if (const auto hash = text.find('#'); hash != std::string_view::npos) text = text.substr(0, hash);
    text = trim(text);
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string_view::npos) throw ParseError(source, number, "expected `key = value`");
    const std::string key(trim(text.substr(0, eq)));
    const auto val = trim(text.substr(eq + 1));
    const auto it = lookup.find(key);
    if (it == lookup.end()) throw ParseError(source, number, "unknown key `" + key + "`");
    if (!seen.insert(key).second) throw ParseError(source, number, "key `" + key + "` given twice");
    if (val.empty()) throw ParseError(source, number, "key `" + key + "` has no value");
    try {
      (*it->second)(config, val, base_dir);
    } catch (const Error& e) {
      throw ParseError(source, number, key + ": " + e.what());
    } catch (const std::exception& e) {
      throw ParseError(source, number, key + ": " + e.what());
    }
  }
  config.propagate();
  return config;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  return parse_config(in, path.string(), path.parent_path());
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> out;
    for (const auto& [key, setter] : setters()) out.push_back(key);
    return out;
  }();
  return keys;
}

}  // namespace saenad::cli
