#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "pepspec/ions.hpp"
#include "pepspec/peptide.hpp"

namespace pepspec {

// Uniform m/z grid shared by ground truth and full-spectrum model outputs.
inline constexpr double kBinWidth = 0.1;
inline constexpr std::size_t kBinCount = 20000;

struct RawSpectrum {
  std::vector<double> mz;
  std::vector<double> intensity;
};

struct BinnedSpectrum {
  std::vector<double> bins = std::vector<double>(kBinCount, 0.0);
};

// A vector in the canonical ion space. Masked-out values are exactly zero and
// a nonzero vector has a masked-in maximum of exactly 1.
struct CanonicalVector {
  std::vector<double> values;
  Mask mask;

  bool is_zero() const noexcept;
};

// round(mz / 0.1); nullopt when the result falls outside [0, kBinCount).
std::optional<std::size_t> mz_to_bin(double mz);

// Peaks in (0, 2000] are binned; bin collisions keep the maximum intensity.
BinnedSpectrum bin_spectrum(const RawSpectrum& spectrum);

// Clamps negatives (and non-finite values) to zero, zeroes masked-out
// positions and rescales to base peak 1.
CanonicalVector finalize_canonical(std::vector<double> values, Mask mask);

CanonicalVector project_ground_truth(const RawSpectrum& spectrum, const ModifiedPeptide& peptide,
                                     int precursor_charge, const CanonicalSpace& space);

CanonicalVector project_full_spectrum(const BinnedSpectrum& spectrum, const ModifiedPeptide& peptide,
                                      int precursor_charge, const CanonicalSpace& space);

enum class LayoutAxis : std::uint8_t { Position, IonType, Charge };
enum class IonOrder : std::uint8_t { BY, YB };
enum class ChargeOrder : std::uint8_t { Ascending, Descending };
// How the native tensor numbers the y series: by cleavage site (same as the
// canonical space) or by ion number (y_i holds the last i residues).
enum class YNumbering : std::uint8_t { CleavageSite, IonNumber };

// Describes a native row-major tensor of shape given by axis_order, with
// (model_l_ref - 1) positions, 2 ion types and model_z_frag_max charges.
// model_l_ref == 0 means the position axis has length L - 1 (dynamic).
struct LayoutDescriptor {
  int model_l_ref = 40;
  int model_z_frag_max = 3;
  std::array<LayoutAxis, 3> axis_order{LayoutAxis::Position, LayoutAxis::IonType, LayoutAxis::Charge};
  IonOrder ion_order = IonOrder::BY;
  ChargeOrder charge_order = ChargeOrder::Ascending;
  YNumbering y_numbering = YNumbering::CleavageSite;

  // Native tensor size for a peptide of the given length.
  std::size_t native_size(int peptide_length) const;
};

// Layout identical to the canonical space.
LayoutDescriptor identity_layout(const CanonicalSpace& space);

CanonicalVector project_ion_tensor(std::span<const double> native, const LayoutDescriptor& layout,
                                   const ModifiedPeptide& peptide, int precursor_charge,
                                   const CanonicalSpace& space);

// Duplicate ions keep the last value written.
CanonicalVector project_sparse_entries(std::span<const std::pair<IonId, double>> entries,
                                       const ModifiedPeptide& peptide, int precursor_charge,
                                       const CanonicalSpace& space);

}  // namespace pepspec
