#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pepspec {

// Monoisotopic constants in Da.
inline constexpr double kProtonMass = 1.00727646688;
inline constexpr double kWaterMass = 18.0105646863;

// Parse-time and benchmark-scope limits.
inline constexpr int kMaxParseLength = 100;
inline constexpr int kMinScopeLength = 6;
inline constexpr int kMaxScopeLength = 40;
inline constexpr int kMinScopeCharge = 1;
inline constexpr int kMaxScopeCharge = 6;
inline constexpr double kMinAndromedaScore = 70.0;
inline constexpr double kMaxMassErrorPpm = 20.0;

// The 20 standard residues. Lookups of anything else throw UnknownResidue.
class AminoAcidTable {
 public:
  static constexpr std::string_view kResidues = "ACDEFGHIKLMNPQRSTVWY";

  static bool contains(char residue) noexcept;
  static double residue_mass(char residue);
  // Position of the residue in kResidues.
  static int index(char residue);
};

// Whitelisted modifications; enumerator values are the UNIMOD accessions.
enum class Unimod : std::uint8_t {
  Acetyl = 1,
  Carbamidomethyl = 4,
  Oxidation = 35,
};

struct Ptm {
  Unimod id;
  double mass_delta;
  std::string_view name;
  // Residues the modification may sit on; N-terminal placement is separate.
  std::string_view residues;
  bool allowed_at_nterm;
};

const Ptm& ptm_info(Unimod id);
std::optional<Unimod> unimod_from_id(int id);
inline int unimod_id(Unimod id) { return static_cast<int>(id); }

// Version of the alias table accepted by parse_modified_sequence. Bump when
// spellings are added or removed.
inline constexpr int kAliasTableVersion = 1;

// Maps a bracket token body (e.g. "UNIMOD:4", "ox", "Carbamidomethyl") to a
// whitelisted modification. Case-insensitive; nullopt for unknown spellings.
std::optional<Unimod> lookup_modification_alias(std::string_view token);

struct ModifiedPeptide {
  std::string residues;
  // One slot per residue; site_mods[i] belongs to position i + 1.
  std::vector<std::optional<Unimod>> site_mods;
  std::optional<Unimod> nterm_mod;

  int length() const noexcept { return static_cast<int>(residues.size()); }
  bool has_mods() const noexcept;

  friend bool operator==(const ModifiedPeptide&, const ModifiedPeptide&) = default;
};

enum class PtmBucket : std::uint8_t { Unmod, Ox, Cam, Ace };

std::string_view to_string(PtmBucket bucket);
std::optional<PtmBucket> parse_ptm_bucket(std::string_view text);

struct PtmMetadata {
  bool has_ptm = false;
  PtmBucket bucket = PtmBucket::Unmod;
};

// Grammar: optional N-terminal token, then residues each optionally followed
// by one token. Tokens are "[...]" or "(...)"; a "-" may follow the
// N-terminal token and a MaxQuant-style "_" wrapper is tolerated.
ModifiedPeptide parse_modified_sequence(std::string_view text);

std::string to_naked(const ModifiedPeptide& peptide);

// Residue letters with "[UNIMOD:n]" after modified residues and a leading
// "[UNIMOD:n]" for an N-terminal modification.
std::string to_canonical_string(const ModifiedPeptide& peptide);

// Bucket priority when several modification types co-occur: Ace > Cam > Ox.
PtmMetadata ptm_metadata(const ModifiedPeptide& peptide);

// Residue mass plus its site modification, for position index i (0-based).
double modified_residue_mass(const ModifiedPeptide& peptide, int i);

double monoisotopic_mass(const ModifiedPeptide& peptide);

struct SpectrumRecord;

// Benchmark physical scope. QC thresholds apply only when the record carries
// the corresponding fields.
bool scope_filter(const SpectrumRecord& record);

}  // namespace pepspec
