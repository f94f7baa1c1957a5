#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pepspec/peptide.hpp"

namespace pepspec {

// One row of a spectral table.
struct SpectrumRecord {
  ModifiedPeptide peptide;
  int charge = 0;
  double nce = 0.0;
  std::vector<double> mz;
  std::vector<double> intensity;

  std::optional<double> andromeda_score;
  std::optional<double> mass_error_ppm;
  std::optional<std::string> raw_file;
  std::optional<std::string> sample_key;
  std::optional<std::string> split;
  std::optional<std::uint64_t> row_index;
};

}  // namespace pepspec
