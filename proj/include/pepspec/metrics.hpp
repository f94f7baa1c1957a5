#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "pepspec/peptide.hpp"
#include "pepspec/projection.hpp"
#include "pepspec/record.hpp"

namespace pepspec {

// InversePi is the arccos(cos)/pi definition (range [0, 0.5] for
// non-negative vectors); TwoOverPi rescales it to [0, 1].
enum class SaConvention : std::uint8_t { InversePi, TwoOverPi };

// Angle between the masked vectors. One all-zero side gives the maximal
// angle (0.5 or 1 depending on convention); both all-zero gives 0.
double spectral_angle(const CanonicalVector& pred, const CanonicalVector& truth,
                      SaConvention convention = SaConvention::InversePi);

// Pearson correlation over masked positions. Returns 0 when K < 2 or either
// side has standard deviation below 1e-8.
double pcc(const CanonicalVector& pred, const CanonicalVector& truth);

struct MetricRow {
  double sa = 0.0;
  double sas = 1.0;
  double pcc = 0.0;
  std::size_t k = 0;
  // Stratification keys.
  int length = 0;
  int charge = 0;
  PtmBucket bucket = PtmBucket::Unmod;
  double nce = 0.0;
};

// Scope check, mask verification against the record and metric computation.
MetricRow evaluate_pair(const SpectrumRecord& record, const CanonicalVector& pred,
                        const CanonicalVector& truth, const CanonicalSpace& space = {},
                        SaConvention convention = SaConvention::InversePi);

enum class MetricName : std::uint8_t { SA, SAS, PCC };

double metric_value(const MetricRow& row, MetricName metric);

// Median with the mean-of-middle-two rule for even counts.
double median(std::vector<double> values);
// Linearly interpolated quantile at position q * (n - 1) of the sorted data.
double quantile(std::vector<double> values, double q);

double aggregate_median(std::span<const MetricRow> rows, MetricName metric);

struct BootstrapOptions {
  int resamples = 1000;
  double level = 0.95;
  std::uint64_t seed = 42;
};

struct BootstrapCi {
  double lo = 0.0;
  double hi = 0.0;
  int resamples = 0;
  double level = 0.0;
};

// Percentile interval of the resampled median. Resample indices come from
// Xoshiro256StarStar(seed) drawn sequentially, n indices per resample.
BootstrapCi bootstrap_ci(std::span<const double> values, const BootstrapOptions& options = {});

}  // namespace pepspec
