#include "pepspec/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "pepspec/error.hpp"
#include "pepspec/random.hpp"

namespace pepspec {
namespace {

std::size_t check_masks(const CanonicalVector& a, const CanonicalVector& b) {
  if (a.mask != b.mask || a.values.size() != a.mask.size() || b.values.size() != b.mask.size()) {
    throw Error(ErrorCode::MaskMismatch, "prediction and truth masks differ");
  }
  return a.mask.count();
}

// angle in radians -> reported SA.
double to_sa(double angle, SaConvention convention) {
  const double fraction = angle / std::numbers::pi;
  return convention == SaConvention::InversePi ? fraction : 2.0 * fraction;
}

// Middle element(s) of a scratch buffer, reordered in place.
double median_in_place(std::vector<double>& v) {
  const std::size_t n = v.size();
  const std::size_t mid = n / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (n % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return (lower + upper) / 2.0;
}

double sorted_quantile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

}  // namespace

double spectral_angle(const CanonicalVector& pred, const CanonicalVector& truth,
                      SaConvention convention) {
  if (check_masks(pred, truth) == 0) throw Error(ErrorCode::EmptyMask, "no masked-in positions");

  double norm_p = 0.0, norm_t = 0.0;
  for (std::size_t i = 0; i < pred.values.size(); ++i) {
    if (!pred.mask[i]) continue;
    norm_p += pred.values[i] * pred.values[i];
    norm_t += truth.values[i] * truth.values[i];
  }
  norm_p = std::sqrt(norm_p);
  norm_t = std::sqrt(norm_t);
  if (norm_p == 0.0 && norm_t == 0.0) return 0.0;
  if (norm_p == 0.0 || norm_t == 0.0) return to_sa(std::numbers::pi / 2.0, convention);

  // arccos(u.v) evaluated as 2*atan2(|u - v|, |u + v|) on the unit vectors,
  // which stays accurate near 0 where arccos loses half the digits.
  double diff = 0.0, sum = 0.0;
  for (std::size_t i = 0; i < pred.values.size(); ++i) {
    if (!pred.mask[i]) continue;
    const double u = pred.values[i] / norm_p;
    const double v = truth.values[i] / norm_t;
    diff += (u - v) * (u - v);
    sum += (u + v) * (u + v);
  }
  const double angle = 2.0 * std::atan2(std::sqrt(diff), std::sqrt(sum));
  return to_sa(std::clamp(angle, 0.0, std::numbers::pi), convention);
}

double pcc(const CanonicalVector& pred, const CanonicalVector& truth) {
  const std::size_t k = check_masks(pred, truth);
  if (k < 2) return 0.0;
  double mean_p = 0.0, mean_t = 0.0;
  for (std::size_t i = 0; i < pred.values.size(); ++i) {
    if (!pred.mask[i]) continue;
    mean_p += pred.values[i];
    mean_t += truth.values[i];
  }
  mean_p /= static_cast<double>(k);
  mean_t /= static_cast<double>(k);
  double cov = 0.0, var_p = 0.0, var_t = 0.0;
  for (std::size_t i = 0; i < pred.values.size(); ++i) {
    if (!pred.mask[i]) continue;
    const double dp = pred.values[i] - mean_p;
    const double dt = truth.values[i] - mean_t;
    cov += dp * dt;
    var_p += dp * dp;
    var_t += dt * dt;
  }
  const double n = static_cast<double>(k);
  if (std::sqrt(var_p / n) < 1e-8 || std::sqrt(var_t / n) < 1e-8) return 0.0;
  return std::clamp(cov / std::sqrt(var_p * var_t), -1.0, 1.0);
}

MetricRow evaluate_pair(const SpectrumRecord& record, const CanonicalVector& pred,
                        const CanonicalVector& truth, const CanonicalSpace& space,
                        SaConvention convention) {
  if (!scope_filter(record)) {
    throw Error(ErrorCode::ScopeViolation,
                "record " + to_canonical_string(record.peptide) + "/" + std::to_string(record.charge) +
                    " is outside the benchmark scope");
  }
  const Mask expected = valid_mask(record.peptide, record.charge, space);
  if (pred.mask != expected || truth.mask != expected) {
    throw Error(ErrorCode::MaskMismatch, "vector mask does not match the record's valid mask");
  }
  MetricRow row;
  row.sa = spectral_angle(pred, truth, convention);
  row.sas = 1.0 - row.sa;
  row.pcc = pcc(pred, truth);
  row.k = expected.count();
  row.length = record.peptide.length();
  row.charge = record.charge;
  row.bucket = ptm_metadata(record.peptide).bucket;
  row.nce = record.nce;
  return row;
}

double metric_value(const MetricRow& row, MetricName metric) {
  switch (metric) {
    case MetricName::SA: return row.sa;
    case MetricName::SAS: return row.sas;
    case MetricName::PCC: return row.pcc;
  }
  return row.sa;
}

double median(std::vector<double> values) {
  if (values.empty()) throw Error(ErrorCode::EmptyInput, "median of an empty set");
  return median_in_place(values);
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw Error(ErrorCode::EmptyInput, "quantile of an empty set");
  std::sort(values.begin(), values.end());
  return sorted_quantile(values, std::clamp(q, 0.0, 1.0));
}

double aggregate_median(std::span<const MetricRow> rows, MetricName metric) {
  if (rows.empty()) throw Error(ErrorCode::EmptyInput, "no metric rows to aggregate");
  std::vector<double> values;
  values.reserve(rows.size());
  for (const auto& row : rows) values.push_back(metric_value(row, metric));
  return median_in_place(values);
}

BootstrapCi bootstrap_ci(std::span<const double> values, const BootstrapOptions& options) {
  if (values.empty()) throw Error(ErrorCode::EmptyInput, "bootstrap over an empty set");
  if (options.resamples < 1 || !(options.level > 0.0 && options.level < 1.0)) {
    throw Error(ErrorCode::ConfigError, "bootstrap needs resamples >= 1 and level in (0, 1)");
  }
  const std::size_t n = values.size();
  Xoshiro256StarStar rng(options.seed);
  std::vector<double> medians;
  medians.reserve(static_cast<std::size_t>(options.resamples));
  std::vector<double> scratch(n);
  for (int r = 0; r < options.resamples; ++r) {
    for (std::size_t i = 0; i < n; ++i) scratch[i] = values[rng.below(n)];
    medians.push_back(median_in_place(scratch));
  }
  std::sort(medians.begin(), medians.end());
  const double alpha = (1.0 - options.level) / 2.0;
  BootstrapCi ci;
  ci.lo = sorted_quantile(medians, alpha);
  ci.hi = sorted_quantile(medians, 1.0 - alpha);
  ci.resamples = options.resamples;
  ci.level = options.level;
  return ci;
}

}  // namespace pepspec
