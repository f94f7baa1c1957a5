#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "pepspec/analysis.hpp"
#include "pepspec/baseline.hpp"
#include "pepspec/ions.hpp"
#include "pepspec/metrics.hpp"
#include "pepspec/splits.hpp"

namespace pepspec {

std::string_view to_string(SaConvention convention);
std::optional<SaConvention> parse_sa_convention(std::string_view text);

// Run-wide settings. Defaults reproduce the benchmark scope. Loaded from a
// JSON object whose keys mirror the field names; unknown keys are rejected.
struct RunConfig {
  CanonicalSpace space;
  SaConvention sa_convention = SaConvention::InversePi;
  std::uint64_t seed = 42;
  std::uint64_t ood_seed = kOodSeed;
  SplitRule split_rule = SplitRule::Backbone;
  std::size_t quota = 0;
  BootstrapOptions bootstrap;
  std::vector<int> length_edges{6, 10, 15, 20, 25, 40};
  double nce_bin_width = 0.05;
  double default_nce = 25.0;
  double high_sas_threshold = kHighSasThreshold;
  BaselineConfig baseline;
  bool skip_malformed = true;

  // Throws ConfigError.
  void validate() const;
  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load(const std::filesystem::path& path);
};

}  // namespace pepspec
