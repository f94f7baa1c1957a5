#pragma once

// Independent mass oracle: fragment masses summed from elemental composition
// with isotope masses, the proton taken as hydrogen minus one electron.

#include <array>
#include <map>
#include <string>

#include "pepspec/ions.hpp"
#include "pepspec/peptide.hpp"

namespace oracle {

struct Composition {
  int c = 0, h = 0, n = 0, o = 0, s = 0;

  Composition& operator+=(const Composition& x) {
    c += x.c;
    h += x.h;
    n += x.n;
    o += x.o;
    s += x.s;
    return *this;
  }
};

inline constexpr double kC = 12.0;
inline constexpr double kH = 1.00782503223;
inline constexpr double kN = 14.00307400443;
inline constexpr double kO = 15.99491461957;
inline constexpr double kS = 31.9720711744;
inline constexpr double kElectron = 0.000548579909065;

inline double mass(const Composition& x) {
  // Sum element by element so the rounding path differs from the library.
  return kC * x.c + kH * x.h + kN * x.n + kO * x.o + kS * x.s;
}

// Residue (amino acid minus water) compositions.
inline Composition residue(char aa) {
  static const std::map<char, Composition> table = {
      {'G', {2, 3, 1, 1, 0}},  {'A', {3, 5, 1, 1, 0}},  {'S', {3, 5, 1, 2, 0}},  {'P', {5, 7, 1, 1, 0}},
      {'V', {5, 9, 1, 1, 0}},  {'T', {4, 7, 1, 2, 0}},  {'C', {3, 5, 1, 1, 1}},  {'L', {6, 11, 1, 1, 0}},
      {'I', {6, 11, 1, 1, 0}}, {'N', {4, 6, 2, 2, 0}},  {'D', {4, 5, 1, 3, 0}},  {'Q', {5, 8, 2, 2, 0}},
      {'K', {6, 12, 2, 1, 0}}, {'E', {5, 7, 1, 3, 0}},  {'M', {5, 9, 1, 1, 1}},  {'H', {6, 7, 3, 1, 0}},
      {'F', {9, 9, 1, 1, 0}},  {'R', {6, 12, 4, 1, 0}}, {'Y', {9, 9, 1, 2, 0}},  {'W', {11, 10, 2, 1, 0}},
  };
  return table.at(aa);
}

inline Composition modification(pepspec::Unimod id) {
  switch (id) {
    case pepspec::Unimod::Acetyl: return {2, 2, 0, 1, 0};
    case pepspec::Unimod::Carbamidomethyl: return {2, 3, 1, 1, 0};
    case pepspec::Unimod::Oxidation: return {0, 0, 0, 1, 0};
  }
  return {};
}

inline double proton() { return kH - kElectron; }

// m/z of b_p or y_p (cleavage site p) at fragment charge z.
inline double fragment_mz(const pepspec::ModifiedPeptide& peptide, const pepspec::IonId& ion) {
  Composition total;
  const int length = peptide.length();
  const int first = ion.type == pepspec::IonType::B ? 0 : ion.position;
  const int last = ion.type == pepspec::IonType::B ? ion.position : length;
  for (int i = first; i < last; ++i) {
    total += residue(peptide.residues[static_cast<std::size_t>(i)]);
    if (peptide.site_mods[static_cast<std::size_t>(i)]) total += modification(*peptide.site_mods[static_cast<std::size_t>(i)]);
  }
  if (ion.type == pepspec::IonType::B && peptide.nterm_mod) total += modification(*peptide.nterm_mod);
  if (ion.type == pepspec::IonType::Y) total += Composition{0, 2, 0, 1, 0};
  return (mass(total) + ion.charge * proton()) / ion.charge;
}

}  // namespace oracle
