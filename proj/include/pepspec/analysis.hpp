#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pepspec/baseline.hpp"
#include "pepspec/metrics.hpp"

namespace pepspec {

// Anything that maps (peptide, precursor charge, NCE) to a canonical vector
// for that peptide/charge.
class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual CanonicalVector predict(const ModifiedPeptide& peptide, int charge, double nce) const = 0;
};

class BaselinePredictor final : public Predictor {
 public:
  explicit BaselinePredictor(const BucketModel& model) : model_(model) {}
  CanonicalVector predict(const ModifiedPeptide& peptide, int charge, double nce) const override {
    return pepspec::predict(peptide, charge, nce, model_);
  }

 private:
  const BucketModel& model_;
};

// A record with its projected ground truth.
struct EvalItem {
  ModifiedPeptide peptide;
  int charge = 0;
  double nce = 0.0;
  CanonicalVector truth;
};

enum class StratAxis : std::uint8_t { Length, Charge, PtmType, Nce };

std::string_view to_string(StratAxis axis);
std::optional<StratAxis> parse_strat_axis(std::string_view text);

struct StratOptions {
  // Bin i is [edges[i], edges[i+1]); the last bin also includes its upper edge.
  std::vector<int> length_edges{6, 10, 15, 20, 25, 40};
  // Width on the fractional NCE scale; NCE values above 1 are read as
  // percentages and divided by 100 before binning.
  double nce_bin_width = 0.05;
  bool with_ci = false;
  BootstrapOptions bootstrap;
};

struct StratRow {
  std::string key;
  std::size_t n = 0;
  double median_sa = 0.0;
  double median_sas = 0.0;
  double median_pcc = 0.0;
  std::optional<BootstrapCi> sa_ci;
};

struct StratTable {
  StratAxis axis = StratAxis::Length;
  std::vector<StratRow> rows;  // natural stratum order, empty strata omitted
};

std::string length_bin_label(int length, const StratOptions& options);
std::string nce_bin_label(double nce, const StratOptions& options);

StratTable stratify(std::span<const MetricRow> rows, StratAxis axis, const StratOptions& options = {});

struct DecayPoint {
  std::string key;
  double delta_sa = 0.0;
  double delta_pcc = 0.0;
};

// Median SA/PCC of each stratum minus the baseline stratum.
std::vector<DecayPoint> delta_decay(const StratTable& table, std::string_view baseline_key);

struct SweepPoint {
  double nce = 0.0;
  double median_sa = 0.0;
};

struct SweepResult {
  std::vector<SweepPoint> curve;
  double argmin_nce = 0.0;
};

// Median SA of the eval set with every record's NCE overridden by a value
// from the grid. The argmin breaks ties toward the lowest NCE.
SweepResult nce_calibration_sweep(const Predictor& predictor, std::span<const EvalItem> items,
                                  std::span<const double> grid,
                                  SaConvention convention = SaConvention::InversePi);

double median_sa_at_nce(const Predictor& predictor, std::span<const EvalItem> items, double nce,
                        SaConvention convention = SaConvention::InversePi);

// median SA at NCE `to` minus median SA at NCE `from`.
double blind_nce_shift(const Predictor& predictor, std::span<const EvalItem> items, double from = 25.0,
                       double to = 30.0, SaConvention convention = SaConvention::InversePi);

inline constexpr double kHighSasThreshold = 0.90;

struct ChargePerturbation {
  std::size_t n = 0;
  double median_sas = 0.0;
  double q25 = 0.0;
  double q75 = 0.0;
  // Fraction with SAS strictly above the threshold.
  double high_sas_fraction = 0.0;
};

// SAS between predictions at z=2 and forced z=3, both compared on the z=2
// mask. Items with charge other than 2 are skipped.
ChargePerturbation charge_perturbation(const Predictor& predictor, std::span<const EvalItem> items,
                                       const CanonicalSpace& space = {},
                                       double threshold = kHighSasThreshold,
                                       SaConvention convention = SaConvention::InversePi);

}  // namespace pepspec
