#include "pepspec/projection.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pepspec/error.hpp"

namespace pepspec {
namespace {

constexpr double kMaxMz = 2000.0;

void check_parallel(const RawSpectrum& spectrum) {
  if (spectrum.mz.size() != spectrum.intensity.size()) {
    throw Error(ErrorCode::SchemaError, "m/z and intensity arrays differ in length");
  }
}

bool keep_peak(double mz, double intensity) {
  return mz > 0.0 && mz <= kMaxMz && std::isfinite(intensity);
}

Mask checked_mask(const ModifiedPeptide& peptide, int precursor_charge, const CanonicalSpace& space) {
  Mask mask = valid_mask(peptide, precursor_charge, space);
  if (mask.count() == 0) {
    throw Error(ErrorCode::EmptyMask, "no valid canonical positions for peptide " +
                                          to_canonical_string(peptide) + " at charge " +
                                          std::to_string(precursor_charge));
  }
  return mask;
}

// Shared extraction: value of each valid ion is whatever lookup(bin) returns.
template <typename Lookup>
CanonicalVector extract(const ModifiedPeptide& peptide, int precursor_charge,
                        const CanonicalSpace& space, Lookup&& lookup) {
  Mask mask = checked_mask(peptide, precursor_charge, space);
  std::vector<double> values(static_cast<std::size_t>(space.dim()), 0.0);
  for (const auto& ion : enumerate_ions(peptide, precursor_charge, space)) {
    if (auto bin = mz_to_bin(ion.mz)) values[ion.index] = lookup(*bin);
  }
  return finalize_canonical(std::move(values), std::move(mask));
}

}  // namespace

bool CanonicalVector::is_zero() const noexcept {
  return std::all_of(values.begin(), values.end(), [](double v) { return v == 0.0; });
}

std::optional<std::size_t> mz_to_bin(double mz) {
  if (!std::isfinite(mz)) return std::nullopt;
  const double index = std::round(mz / kBinWidth);
  if (index < 0.0 || index >= static_cast<double>(kBinCount)) return std::nullopt;
  return static_cast<std::size_t>(index);
}

BinnedSpectrum bin_spectrum(const RawSpectrum& spectrum) {
  check_parallel(spectrum);
  BinnedSpectrum out;
  for (std::size_t i = 0; i < spectrum.mz.size(); ++i) {
    const double intensity = std::max(spectrum.intensity[i], 0.0);
    if (!keep_peak(spectrum.mz[i], intensity)) continue;
    if (auto bin = mz_to_bin(spectrum.mz[i])) {
      out.bins[*bin] = std::max(out.bins[*bin], intensity);
    }
  }
  return out;
}

CanonicalVector finalize_canonical(std::vector<double> values, Mask mask) {
  if (values.size() != mask.size()) {
    throw Error(ErrorCode::MaskMismatch, "vector and mask sizes differ");
  }
  double peak = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    double& v = values[i];
    if (!mask[i] || !std::isfinite(v) || v < 0.0) v = 0.0;
    peak = std::max(peak, v);
  }
  if (peak > 0.0) {
    for (double& v : values) v /= peak;
  }
  return {std::move(values), std::move(mask)};
}

CanonicalVector project_ground_truth(const RawSpectrum& spectrum, const ModifiedPeptide& peptide,
                                     int precursor_charge, const CanonicalSpace& space) {
  check_parallel(spectrum);
  // Sparse equivalent of bin_spectrum: (bin, max intensity) sorted by bin.
  std::vector<std::pair<std::size_t, double>> peaks;
  peaks.reserve(spectrum.mz.size());
  for (std::size_t i = 0; i < spectrum.mz.size(); ++i) {
    const double intensity = std::max(spectrum.intensity[i], 0.0);
    if (!keep_peak(spectrum.mz[i], intensity)) continue;
    if (auto bin = mz_to_bin(spectrum.mz[i])) peaks.emplace_back(*bin, intensity);
  }
  std::sort(peaks.begin(), peaks.end());
  return extract(peptide, precursor_charge, space, [&](std::size_t bin) {
    auto lo = std::lower_bound(peaks.begin(), peaks.end(), std::make_pair(bin, 0.0));
    double best = 0.0;
    for (auto it = lo; it != peaks.end() && it->first == bin; ++it) best = std::max(best, it->second);
    return best;
  });
}

CanonicalVector project_full_spectrum(const BinnedSpectrum& spectrum, const ModifiedPeptide& peptide,
                                      int precursor_charge, const CanonicalSpace& space) {
  if (spectrum.bins.size() != kBinCount) {
    throw Error(ErrorCode::LayoutMismatch, "binned spectrum must have " + std::to_string(kBinCount) + " bins");
  }
  return extract(peptide, precursor_charge, space,
                 [&](std::size_t bin) { return std::max(spectrum.bins[bin], 0.0); });
}

std::size_t LayoutDescriptor::native_size(int peptide_length) const {
  const int positions = model_l_ref == 0 ? std::max(peptide_length - 1, 0) : model_l_ref - 1;
  return static_cast<std::size_t>(positions) * 2 * static_cast<std::size_t>(model_z_frag_max);
}

LayoutDescriptor identity_layout(const CanonicalSpace& space) {
  LayoutDescriptor layout;
  layout.model_l_ref = space.l_ref;
  layout.model_z_frag_max = space.z_frag_max;
  return layout;
}

CanonicalVector project_ion_tensor(std::span<const double> native, const LayoutDescriptor& layout,
                                   const ModifiedPeptide& peptide, int precursor_charge,
                                   const CanonicalSpace& space) {
  {
    auto axes = layout.axis_order;
    std::sort(axes.begin(), axes.end());
    if (axes != std::array{LayoutAxis::Position, LayoutAxis::IonType, LayoutAxis::Charge} ||
        layout.model_z_frag_max < 1 || layout.model_l_ref == 1 || layout.model_l_ref < 0) {
      throw Error(ErrorCode::LayoutMismatch, "layout descriptor is not a valid permutation/shape");
    }
  }
  const int length = peptide.length();
  if (native.size() != layout.native_size(length)) {
    throw Error(ErrorCode::LayoutMismatch, "native tensor has " + std::to_string(native.size()) +
                                               " cells, layout expects " +
                                               std::to_string(layout.native_size(length)));
  }
  Mask mask = checked_mask(peptide, precursor_charge, space);

  const int positions = layout.model_l_ref == 0 ? length - 1 : layout.model_l_ref - 1;
  auto extent = [&](LayoutAxis axis) {
    switch (axis) {
      case LayoutAxis::Position: return positions;
      case LayoutAxis::IonType: return 2;
      case LayoutAxis::Charge: return layout.model_z_frag_max;
    }
    return 0;
  };
  const int e0 = extent(layout.axis_order[0]);
  const int e1 = extent(layout.axis_order[1]);
  const int e2 = extent(layout.axis_order[2]);

  std::vector<double> values(static_cast<std::size_t>(space.dim()), 0.0);
  std::size_t flat = 0;
  std::array<int, 3> coord{};
  for (coord[0] = 0; coord[0] < e0; ++coord[0]) {
    for (coord[1] = 0; coord[1] < e1; ++coord[1]) {
      for (coord[2] = 0; coord[2] < e2; ++coord[2], ++flat) {
        int row = 0, type_slot = 0, charge_slot = 0;
        for (int a = 0; a < 3; ++a) {
          switch (layout.axis_order[a]) {
            case LayoutAxis::Position: row = coord[a]; break;
            case LayoutAxis::IonType: type_slot = coord[a]; break;
            case LayoutAxis::Charge: charge_slot = coord[a]; break;
          }
        }
        IonId ion;
        const bool first_is_b = layout.ion_order == IonOrder::BY;
        ion.type = (type_slot == 0) == first_is_b ? IonType::B : IonType::Y;
        ion.charge = layout.charge_order == ChargeOrder::Ascending
                         ? charge_slot + 1
                         : layout.model_z_frag_max - charge_slot;
        ion.position = row + 1;
        if (ion.type == IonType::Y && layout.y_numbering == YNumbering::IonNumber) {
          // y_i holds the last i residues, i.e. cleavage site L - i.
          ion.position = length - (row + 1);
          if (ion.position < 1) continue;
        }
        if (ion.position > space.positions() || ion.charge > space.z_frag_max) continue;
        values[canonical_index(ion, space)] = native[flat];
      }
    }
  }
  return finalize_canonical(std::move(values), std::move(mask));
}

CanonicalVector project_sparse_entries(std::span<const std::pair<IonId, double>> entries,
                                       const ModifiedPeptide& peptide, int precursor_charge,
                                       const CanonicalSpace& space) {
  std::vector<double> values(static_cast<std::size_t>(space.dim()), 0.0);
  for (const auto& [ion, value] : entries) values[canonical_index(ion, space)] = value;
  return finalize_canonical(std::move(values), checked_mask(peptide, precursor_charge, space));
}

}  // namespace pepspec
