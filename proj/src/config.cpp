#include "pepspec/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "pepspec/error.hpp"

namespace pepspec {
namespace {

using nlohmann::json;

[[noreturn]] void config_error(const std::string& message) { throw Error(ErrorCode::ConfigError, message); }

template <typename T>
T get(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    config_error(std::string("config key '") + key + "' has the wrong type");
  }
}

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) config_error("unknown config key '" + where + key + "'");
  }
}

}  // namespace

std::string_view to_string(SaConvention convention) {
  return convention == SaConvention::InversePi ? "inverse_pi" : "two_over_pi";
}

std::optional<SaConvention> parse_sa_convention(std::string_view text) {
  if (text == "inverse_pi" || text == "1/pi") return SaConvention::InversePi;
  if (text == "two_over_pi" || text == "2/pi") return SaConvention::TwoOverPi;
  return std::nullopt;
}

void RunConfig::validate() const {
  space.validate();
  if (bootstrap.resamples < 1) config_error("bootstrap.resamples must be positive");
  if (!(bootstrap.level > 0.0 && bootstrap.level < 1.0)) config_error("bootstrap.level must lie in (0, 1)");
  if (length_edges.size() < 2) config_error("length_edges needs at least two values");
  for (std::size_t i = 1; i < length_edges.size(); ++i) {
    if (length_edges[i] <= length_edges[i - 1]) config_error("length_edges must be strictly increasing");
  }
  if (!(nce_bin_width > 0.0) || !std::isfinite(nce_bin_width)) config_error("nce_bin_width must be positive");
  if (!std::isfinite(default_nce)) config_error("default_nce must be finite");
  if (!(high_sas_threshold >= 0.0 && high_sas_threshold <= 1.0)) {
    config_error("high_sas_threshold must lie in [0, 1]");
  }
  if (baseline.min_bucket_count < 1) config_error("baseline.min_bucket_count must be positive");
  if (!(baseline.ridge_lambda >= 0.0) || !std::isfinite(baseline.ridge_lambda)) {
    config_error("baseline.ridge_lambda must be non-negative");
  }
}

nlohmann::json RunConfig::to_json() const {
  return json{
      {"space", {{"l_ref", space.l_ref}, {"z_frag_max", space.z_frag_max}}},
      {"sa_convention", to_string(sa_convention)},
      {"seed", seed},
      {"ood_seed", ood_seed},
      {"split_rule", to_string(split_rule)},
      {"quota", quota},
      {"bootstrap", {{"resamples", bootstrap.resamples}, {"level", bootstrap.level}, {"seed", bootstrap.seed}}},
      {"length_edges", length_edges},
      {"nce_bin_width", nce_bin_width},
      {"default_nce", default_nce},
      {"high_sas_threshold", high_sas_threshold},
      {"baseline",
       {{"min_bucket_count", baseline.min_bucket_count},
        {"ridge_lambda", baseline.ridge_lambda},
        {"length_snap_limit", baseline.length_snap_limit},
        {"charge_snap_limit", baseline.charge_snap_limit}}},
      {"skip_malformed", skip_malformed},
  };
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) config_error("config must be a JSON object");
  reject_unknown(j,
                 {"space", "sa_convention", "seed", "ood_seed", "split_rule", "quota", "bootstrap", "length_edges",
                  "nce_bin_width", "default_nce", "high_sas_threshold", "baseline", "skip_malformed"},
                 "");
  RunConfig c;
  if (j.contains("space")) {
    const auto& s = j["space"];
    if (!s.is_object()) config_error("config key 'space' must be an object");
    reject_unknown(s, {"l_ref", "z_frag_max"}, "space.");
    if (s.contains("l_ref")) c.space.l_ref = get<int>(s, "l_ref");
    if (s.contains("z_frag_max")) c.space.z_frag_max = get<int>(s, "z_frag_max");
  }
  if (j.contains("sa_convention")) {
    auto conv = parse_sa_convention(get<std::string>(j, "sa_convention"));
    if (!conv) config_error("sa_convention must be inverse_pi or two_over_pi");
    c.sa_convention = *conv;
  }
  if (j.contains("seed")) c.seed = get<std::uint64_t>(j, "seed");
  if (j.contains("ood_seed")) c.ood_seed = get<std::uint64_t>(j, "ood_seed");
  if (j.contains("split_rule")) {
    auto rule = parse_split_rule(get<std::string>(j, "split_rule"));
    if (!rule) config_error("split_rule must be backbone, modseq or row");
    c.split_rule = *rule;
  }
  if (j.contains("quota")) c.quota = get<std::size_t>(j, "quota");
  if (j.contains("bootstrap")) {
    const auto& b = j["bootstrap"];
    if (!b.is_object()) config_error("config key 'bootstrap' must be an object");
    reject_unknown(b, {"resamples", "level", "seed"}, "bootstrap.");
    if (b.contains("resamples")) c.bootstrap.resamples = get<int>(b, "resamples");
    if (b.contains("level")) c.bootstrap.level = get<double>(b, "level");
    if (b.contains("seed")) c.bootstrap.seed = get<std::uint64_t>(b, "seed");
  }
  if (j.contains("length_edges")) c.length_edges = get<std::vector<int>>(j, "length_edges");
  if (j.contains("nce_bin_width")) c.nce_bin_width = get<double>(j, "nce_bin_width");
  if (j.contains("default_nce")) c.default_nce = get<double>(j, "default_nce");
  if (j.contains("high_sas_threshold")) c.high_sas_threshold = get<double>(j, "high_sas_threshold");
  if (j.contains("baseline")) {
    const auto& b = j["baseline"];
    if (!b.is_object()) config_error("config key 'baseline' must be an object");
    reject_unknown(b, {"min_bucket_count", "ridge_lambda", "length_snap_limit", "charge_snap_limit"}, "baseline.");
    if (b.contains("min_bucket_count")) c.baseline.min_bucket_count = get<int>(b, "min_bucket_count");
    if (b.contains("ridge_lambda")) c.baseline.ridge_lambda = get<double>(b, "ridge_lambda");
    if (b.contains("length_snap_limit")) c.baseline.length_snap_limit = get<int>(b, "length_snap_limit");
    if (b.contains("charge_snap_limit")) c.baseline.charge_snap_limit = get<int>(b, "charge_snap_limit");
  }
  if (j.contains("skip_malformed")) c.skip_malformed = get<bool>(j, "skip_malformed");
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    config_error("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return from_json(j);
}

}  // namespace pepspec
