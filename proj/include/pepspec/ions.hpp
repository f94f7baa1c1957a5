#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "pepspec/peptide.hpp"

namespace pepspec {

// Shared canonical ion space: every (cleavage position, ion type, fragment
// charge) combination for peptides up to l_ref residues.
struct CanonicalSpace {
  int l_ref = 40;
  int z_frag_max = 3;

  int positions() const noexcept { return l_ref - 1; }
  int dim() const noexcept { return (l_ref - 1) * 2 * z_frag_max; }
  // Throws ConfigError for l_ref < 2 or z_frag_max < 1.
  void validate() const;

  friend bool operator==(const CanonicalSpace&, const CanonicalSpace&) = default;
};

enum class IonType : std::uint8_t { B = 0, Y = 1 };

// position is the cleavage site p: b ions hold residues 1..p, y ions hold
// residues p+1..L.
struct IonId {
  int position = 1;
  IonType type = IonType::B;
  int charge = 1;

  friend bool operator==(const IonId&, const IonId&) = default;
};

class Mask {
 public:
  Mask() = default;
  explicit Mask(std::size_t size) : bits_(size, 0) {}

  std::size_t size() const noexcept { return bits_.size(); }
  bool operator[](std::size_t i) const noexcept { return bits_[i] != 0; }
  void set(std::size_t i, bool value = true) noexcept { bits_[i] = value ? 1 : 0; }
  // K, the number of valid positions.
  std::size_t count() const noexcept;

  friend bool operator==(const Mask&, const Mask&) = default;

 private:
  std::vector<std::uint8_t> bits_;
};

// Position-major layout: index = (p-1)*(2*zmax) + t*zmax + (z_f-1), b before y.
std::size_t canonical_index(const IonId& ion, const CanonicalSpace& space);
IonId ion_at(std::size_t index, const CanonicalSpace& space);

double ion_mz(const ModifiedPeptide& peptide, const IonId& ion);

// Bit set iff p <= L-1 and z_f <= min(z, z_frag_max).
Mask valid_mask(int length, int precursor_charge, const CanonicalSpace& space);
Mask valid_mask(const ModifiedPeptide& peptide, int precursor_charge, const CanonicalSpace& space);

struct IonMz {
  IonId ion;
  std::size_t index;
  double mz;
};

// Valid ions in canonical index order with their theoretical m/z.
std::vector<IonMz> enumerate_ions(const ModifiedPeptide& peptide, int precursor_charge,
                                  const CanonicalSpace& space);

}  // namespace pepspec
