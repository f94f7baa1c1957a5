#include "pepspec/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include "pepspec/error.hpp"
#include "pepspec/parallel.hpp"

namespace pepspec {
namespace {

// Sort key for a stratum: (numeric order, label).
using StratumKey = std::pair<double, std::string>;

StratumKey stratum_of(const MetricRow& row, StratAxis axis, const StratOptions& options) {
  switch (axis) {
    case StratAxis::Length: {
      const auto& edges = options.length_edges;
      for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
        const bool last = i + 2 == edges.size();
        if (row.length >= edges[i] && (row.length < edges[i + 1] || (last && row.length == edges[i + 1]))) {
          return {static_cast<double>(i), length_bin_label(row.length, options)};
        }
      }
      throw Error(ErrorCode::ConfigError,
                  "length " + std::to_string(row.length) + " is outside the configured length bins");
    }
    case StratAxis::Charge:
      return {static_cast<double>(row.charge), std::to_string(row.charge)};
    case StratAxis::PtmType:
      return {static_cast<double>(row.bucket), std::string(to_string(row.bucket))};
    case StratAxis::Nce: {
      const std::string label = nce_bin_label(row.nce, options);
      return {std::stod(label.substr(0, label.find('-'))), label};
    }
  }
  return {0.0, ""};
}

double fractional_nce(double nce) { return nce > 1.0 ? nce / 100.0 : nce; }

}  // namespace

std::string_view to_string(StratAxis axis) {
  switch (axis) {
    case StratAxis::Length: return "length";
    case StratAxis::Charge: return "charge";
    case StratAxis::PtmType: return "ptm";
    case StratAxis::Nce: return "nce";
  }
  return "length";
}

std::optional<StratAxis> parse_strat_axis(std::string_view text) {
  if (text == "length" || text == "length_bin") return StratAxis::Length;
  if (text == "charge") return StratAxis::Charge;
  if (text == "ptm" || text == "ptm_type") return StratAxis::PtmType;
  if (text == "nce" || text == "nce_bin") return StratAxis::Nce;
  return std::nullopt;
}

std::string length_bin_label(int length, const StratOptions& options) {
  const auto& edges = options.length_edges;
  if (edges.size() < 2 || !std::is_sorted(edges.begin(), edges.end())) {
    throw Error(ErrorCode::ConfigError, "length bin edges must be ascending with at least two entries");
  }
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    const bool last = i + 2 == edges.size();
    if (length >= edges[i] && (length < edges[i + 1] || (last && length == edges[i + 1]))) {
      return "[" + std::to_string(edges[i]) + "," + std::to_string(edges[i + 1]) + (last ? "]" : ")");
    }
  }
  throw Error(ErrorCode::ConfigError,
              "length " + std::to_string(length) + " is outside the configured length bins");
}

std::string nce_bin_label(double nce, const StratOptions& options) {
  if (!(options.nce_bin_width > 0.0)) throw Error(ErrorCode::ConfigError, "NCE bin width must be positive");
  const double w = options.nce_bin_width;
  // The small offset keeps exact edges such as 0.30 out of the bin below.
  const double k = std::floor(fractional_nce(nce) / w + 1e-9);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f-%.2f", k * w, (k + 1) * w);
  return buf;
}

StratTable stratify(std::span<const MetricRow> rows, StratAxis axis, const StratOptions& options) {
  if (rows.empty()) throw Error(ErrorCode::EmptyInput, "no metric rows to stratify");
  std::map<StratumKey, std::vector<const MetricRow*>> groups;
  for (const auto& row : rows) groups[stratum_of(row, axis, options)].push_back(&row);

  StratTable table;
  table.axis = axis;
  for (const auto& [key, members] : groups) {
    StratRow out;
    out.key = key.second;
    out.n = members.size();
    std::vector<double> sa, sas, r;
    for (const auto* m : members) {
      sa.push_back(m->sa);
      sas.push_back(m->sas);
      r.push_back(m->pcc);
    }
    if (options.with_ci) out.sa_ci = bootstrap_ci(sa, options.bootstrap);
    out.median_sa = median(std::move(sa));
    out.median_sas = median(std::move(sas));
    out.median_pcc = median(std::move(r));
    table.rows.push_back(std::move(out));
  }
  return table;
}

std::vector<DecayPoint> delta_decay(const StratTable& table, std::string_view baseline_key) {
  auto base = std::find_if(table.rows.begin(), table.rows.end(),
                           [&](const StratRow& r) { return r.key == baseline_key; });
  if (base == table.rows.end()) {
    throw Error(ErrorCode::MissingBaselineBin, "baseline stratum '" + std::string(baseline_key) + "' not present");
  }
  std::vector<DecayPoint> out;
  for (const auto& row : table.rows) {
    out.push_back({row.key, row.median_sa - base->median_sa, row.median_pcc - base->median_pcc});
  }
  return out;
}

double median_sa_at_nce(const Predictor& predictor, std::span<const EvalItem> items, double nce,
                        SaConvention convention) {
  if (items.empty()) throw Error(ErrorCode::EmptyInput, "empty evaluation set");
  std::vector<double> sa(items.size());
  parallel_for(items.size(), [&](std::size_t i) {
    const auto& item = items[i];
    sa[i] = spectral_angle(predictor.predict(item.peptide, item.charge, nce), item.truth, convention);
  });
  return median(std::move(sa));
}

SweepResult nce_calibration_sweep(const Predictor& predictor, std::span<const EvalItem> items,
                                  std::span<const double> grid, SaConvention convention) {
  if (grid.empty()) throw Error(ErrorCode::EmptyInput, "empty NCE grid");
  if (items.empty()) throw Error(ErrorCode::EmptyInput, "empty evaluation set");
  SweepResult result;
  for (double nce : grid) result.curve.push_back({nce, median_sa_at_nce(predictor, items, nce, convention)});
  const SweepPoint* best = &result.curve.front();
  for (const auto& point : result.curve) {
    if (point.median_sa < best->median_sa ||
        (point.median_sa == best->median_sa && point.nce < best->nce)) {
      best = &point;
    }
  }
  result.argmin_nce = best->nce;
  return result;
}

double blind_nce_shift(const Predictor& predictor, std::span<const EvalItem> items, double from,
                       double to, SaConvention convention) {
  if (items.empty()) throw Error(ErrorCode::EmptyInput, "empty evaluation set");
  if (from == to) return 0.0;
  return median_sa_at_nce(predictor, items, to, convention) -
         median_sa_at_nce(predictor, items, from, convention);
}

ChargePerturbation charge_perturbation(const Predictor& predictor, std::span<const EvalItem> items,
                                       const CanonicalSpace& space, double threshold,
                                       SaConvention convention) {
  std::vector<const EvalItem*> z2;
  for (const auto& item : items) {
    if (item.charge == 2) z2.push_back(&item);
  }
  if (z2.empty()) throw Error(ErrorCode::EmptyInput, "no charge-2 records for the perturbation probe");

  std::vector<double> sas(z2.size());
  parallel_for(z2.size(), [&](std::size_t i) {
    const auto& item = *z2[i];
    const Mask mask = valid_mask(item.peptide, 2, space);
    auto as_z2 = [&](CanonicalVector v) { return finalize_canonical(std::move(v.values), mask); };
    const auto at2 = as_z2(predictor.predict(item.peptide, 2, item.nce));
    const auto at3 = as_z2(predictor.predict(item.peptide, 3, item.nce));
    sas[i] = 1.0 - spectral_angle(at2, at3, convention);
  });

  ChargePerturbation out;
  out.n = sas.size();
  out.high_sas_fraction =
      static_cast<double>(std::count_if(sas.begin(), sas.end(), [&](double s) { return s > threshold; })) /
      static_cast<double>(sas.size());
  out.q25 = quantile(sas, 0.25);
  out.q75 = quantile(sas, 0.75);
  out.median_sas = median(std::move(sas));
  return out;
}

}  // namespace pepspec
