#include "pepspec/ions.hpp"

#include <algorithm>
#include <string>

#include "pepspec/error.hpp"

namespace pepspec {

void CanonicalSpace::validate() const {
  if (l_ref < 2 || z_frag_max < 1) {
    throw Error(ErrorCode::ConfigError,
                "canonical space needs l_ref >= 2 and z_frag_max >= 1");
  }
}

std::size_t Mask::count() const noexcept {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

std::size_t canonical_index(const IonId& ion, const CanonicalSpace& space) {
  if (ion.position < 1 || ion.position > space.positions() || ion.charge < 1 ||
      ion.charge > space.z_frag_max) {
    throw Error(ErrorCode::OutOfBounds,
                "ion (p=" + std::to_string(ion.position) + ", z_f=" + std::to_string(ion.charge) +
                    ") outside the canonical space");
  }
  const int t = ion.type == IonType::B ? 0 : 1;
  return static_cast<std::size_t>((ion.position - 1) * 2 * space.z_frag_max +
                                  t * space.z_frag_max + (ion.charge - 1));
}

IonId ion_at(std::size_t index, const CanonicalSpace& space) {
  if (index >= static_cast<std::size_t>(space.dim())) {
    throw Error(ErrorCode::OutOfBounds, "canonical index " + std::to_string(index) + " out of range");
  }
  const int per_position = 2 * space.z_frag_max;
  const int i = static_cast<int>(index);
  IonId ion;
  ion.position = i / per_position + 1;
  ion.type = (i % per_position) < space.z_frag_max ? IonType::B : IonType::Y;
  ion.charge = i % space.z_frag_max + 1;
  return ion;
}

double ion_mz(const ModifiedPeptide& peptide, const IonId& ion) {
  const int length = peptide.length();
  if (ion.position < 1 || ion.position > length - 1) {
    throw Error(ErrorCode::PositionBeyondPeptide,
                "cleavage position " + std::to_string(ion.position) + " beyond peptide of length " +
                    std::to_string(length));
  }
  if (ion.charge < 1) throw Error(ErrorCode::OutOfBounds, "fragment charge must be >= 1");

  double neutral = 0.0;
  if (ion.type == IonType::B) {
    if (peptide.nterm_mod) neutral += ptm_info(*peptide.nterm_mod).mass_delta;
    for (int i = 0; i < ion.position; ++i) neutral += modified_residue_mass(peptide, i);
  } else {
    // Summed from the C-terminus so results match enumerate_ions bit for bit.
    for (int i = length - 1; i >= ion.position; --i) neutral += modified_residue_mass(peptide, i);
    neutral += kWaterMass;
  }
  return (neutral + ion.charge * kProtonMass) / ion.charge;
}

Mask valid_mask(int length, int precursor_charge, const CanonicalSpace& space) {
  Mask mask(static_cast<std::size_t>(space.dim()));
  const int max_position = std::min(length - 1, space.positions());
  const int max_charge = std::min(precursor_charge, space.z_frag_max);
  for (int p = 1; p <= max_position; ++p) {
    for (IonType t : {IonType::B, IonType::Y}) {
      for (int z = 1; z <= max_charge; ++z) mask.set(canonical_index({p, t, z}, space));
    }
  }
  return mask;
}

Mask valid_mask(const ModifiedPeptide& peptide, int precursor_charge, const CanonicalSpace& space) {
  return valid_mask(peptide.length(), precursor_charge, space);
}

std::vector<IonMz> enumerate_ions(const ModifiedPeptide& peptide, int precursor_charge,
                                  const CanonicalSpace& space) {
  const int length = peptide.length();
  const int max_position = std::min(length - 1, space.positions());
  const int max_charge = std::min(precursor_charge, space.z_frag_max);

  // prefix[i] = neutral mass of residues [0, i) including the N-terminal mod.
  std::vector<double> prefix(static_cast<std::size_t>(length) + 1, 0.0);
  prefix[0] = peptide.nterm_mod ? ptm_info(*peptide.nterm_mod).mass_delta : 0.0;
  for (int i = 0; i < length; ++i) prefix[i + 1] = prefix[i] + modified_residue_mass(peptide, i);
  // suffix[i] = neutral mass of residues [i, L).
  std::vector<double> suffix(static_cast<std::size_t>(length) + 1, 0.0);
  for (int i = length - 1; i >= 0; --i) suffix[i] = suffix[i + 1] + modified_residue_mass(peptide, i);

  std::vector<IonMz> out;
  if (max_position < 1 || max_charge < 1) return out;
  out.reserve(static_cast<std::size_t>(max_position) * 2 * max_charge);
  for (int p = 1; p <= max_position; ++p) {
    const double b_neutral = prefix[p];
    const double y_neutral = suffix[p] + kWaterMass;
    for (IonType t : {IonType::B, IonType::Y}) {
      const double neutral = t == IonType::B ? b_neutral : y_neutral;
      for (int z = 1; z <= max_charge; ++z) {
        IonId ion{p, t, z};
        out.push_back({ion, canonical_index(ion, space), (neutral + z * kProtonMass) / z});
      }
    }
  }
  return out;
}

}  // namespace pepspec
