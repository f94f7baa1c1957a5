#include "pepspec/peptide.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <utility>

#include "pepspec/error.hpp"
#include "pepspec/record.hpp"

namespace pepspec {
namespace {

// Monoisotopic residue masses (amino acid minus H2O), from elemental
// composition with C=12, H=1.00782503223, N=14.00307400443,
// O=15.99491461957, S=31.9720711744. Indexed like AminoAcidTable::kResidues.
constexpr std::array<double, 20> kResidueMasses = {
    71.0371137851,   // A
    103.0091849595,  // C
    115.0269430243,  // D
    129.0425930888,  // E
    147.0684139141,  // F
    57.0214637207,   // G
    137.0589118585,  // H
    113.0840639785,  // I
    128.0949630152,  // K
    113.0840639785,  // L
    131.0404850885,  // M
    114.0429274414,  // N
    97.0527638496,   // P
    128.0585775058,  // Q
    156.1011110240,  // R
    87.0320284047,   // S
    101.0476784692,  // T
    99.0684139141,   // V
    186.0793129507,  // W
    163.0633285336,  // Y
};

constexpr std::array<int, 26> build_letter_index() {
  std::array<int, 26> out{};
  for (auto& v : out) v = -1;
  for (int i = 0; i < static_cast<int>(AminoAcidTable::kResidues.size()); ++i) {
    out[AminoAcidTable::kResidues[i] - 'A'] = i;
  }
  return out;
}

constexpr std::array<int, 26> kLetterIndex = build_letter_index();

// UNIMOD monoisotopic deltas at full elemental precision
// (Acetyl C2H2O, Carbamidomethyl C2H3NO, Oxidation O).
constexpr std::array<Ptm, 3> kPtms = {{
    {Unimod::Acetyl, 42.0105646840, "Acetyl", "K", true},
    {Unimod::Carbamidomethyl, 57.0214637207, "Carbamidomethyl", "C", false},
    {Unimod::Oxidation, 15.9949146196, "Oxidation", "M", false},
}};

struct Alias {
  std::string_view spelling;  // lower case
  Unimod id;
};

// Alias table, version kAliasTableVersion.
constexpr std::array<Alias, 20> kAliases = {{
    {"unimod:1", Unimod::Acetyl},
    {"acetyl", Unimod::Acetyl},
    {"acetylation", Unimod::Acetyl},
    {"ac", Unimod::Acetyl},
    {"+42.011", Unimod::Acetyl},
    {"+42.010565", Unimod::Acetyl},
    {"unimod:4", Unimod::Carbamidomethyl},
    {"carbamidomethyl", Unimod::Carbamidomethyl},
    {"carbamidomethylation", Unimod::Carbamidomethyl},
    {"cam", Unimod::Carbamidomethyl},
    {"+57.021", Unimod::Carbamidomethyl},
    {"+57.021464", Unimod::Carbamidomethyl},
    {"unimod:35", Unimod::Oxidation},
    {"oxidation", Unimod::Oxidation},
    {"ox", Unimod::Oxidation},
    {"+15.995", Unimod::Oxidation},
    {"+15.994915", Unimod::Oxidation},
    {"+15.9949", Unimod::Oxidation},
    {"+42.0106", Unimod::Acetyl},
    {"+57.0215", Unimod::Carbamidomethyl},
}};

bool is_open(char c) { return c == '[' || c == '('; }

char closing_for(char open) { return open == '[' ? ']' : ')'; }

// Reads the token starting at text[pos] (an opening bracket). Advances pos
// past the closing bracket and returns the resolved modification.
Unimod read_token(std::string_view text, std::size_t& pos) {
  const char close = closing_for(text[pos]);
  const std::size_t end = text.find(close, pos + 1);
  if (end == std::string_view::npos) {
    throw Error(ErrorCode::MalformedToken,
                "unterminated modification token at offset " + std::to_string(pos));
  }
  std::string_view body = text.substr(pos + 1, end - pos - 1);
  if (body.find_first_of("[]()") != std::string_view::npos) {
    throw Error(ErrorCode::MalformedToken,
                "nested bracket in modification token at offset " + std::to_string(pos));
  }
  while (!body.empty() && std::isspace(static_cast<unsigned char>(body.front()))) body.remove_prefix(1);
  while (!body.empty() && std::isspace(static_cast<unsigned char>(body.back()))) body.remove_suffix(1);
  if (body.empty()) {
    throw Error(ErrorCode::MalformedToken,
                "empty modification token at offset " + std::to_string(pos));
  }
  auto id = lookup_modification_alias(body);
  if (!id) {
    throw Error(ErrorCode::UnsupportedModification,
                "unsupported modification '" + std::string(body) + "'");
  }
  pos = end + 1;
  return *id;
}

}  // namespace

bool AminoAcidTable::contains(char residue) noexcept {
  return residue >= 'A' && residue <= 'Z' && kLetterIndex[residue - 'A'] >= 0;
}

int AminoAcidTable::index(char residue) {
  if (!contains(residue)) {
    throw Error(ErrorCode::UnknownResidue,
                std::string("unknown residue '") + residue + "'");
  }
  return kLetterIndex[residue - 'A'];
}

double AminoAcidTable::residue_mass(char residue) {
  return kResidueMasses[index(residue)];
}

const Ptm& ptm_info(Unimod id) {
  for (const auto& ptm : kPtms) {
    if (ptm.id == id) return ptm;
  }
  throw Error(ErrorCode::UnsupportedModification, "modification not whitelisted");
}

std::optional<Unimod> unimod_from_id(int id) {
  for (const auto& ptm : kPtms) {
    if (static_cast<int>(ptm.id) == id) return ptm.id;
  }
  return std::nullopt;
}

std::optional<Unimod> lookup_modification_alias(std::string_view token) {
  std::string lowered(token);
  std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (const auto& alias : kAliases) {
    if (alias.spelling == lowered) return alias.id;
  }
  return std::nullopt;
}

bool ModifiedPeptide::has_mods() const noexcept {
  if (nterm_mod) return true;
  return std::any_of(site_mods.begin(), site_mods.end(),
                     [](const auto& m) { return m.has_value(); });
}

std::string_view to_string(PtmBucket bucket) {
  switch (bucket) {
    case PtmBucket::Unmod: return "Unmod";
    case PtmBucket::Ox: return "Ox";
    case PtmBucket::Cam: return "Cam";
    case PtmBucket::Ace: return "Ace";
  }
  return "Unmod";
}

std::optional<PtmBucket> parse_ptm_bucket(std::string_view text) {
  for (auto b : {PtmBucket::Unmod, PtmBucket::Ox, PtmBucket::Cam, PtmBucket::Ace}) {
    if (to_string(b) == text) return b;
  }
  return std::nullopt;
}

ModifiedPeptide parse_modified_sequence(std::string_view text) {
  if (text.empty()) throw Error(ErrorCode::MalformedToken, "empty peptide sequence");
  if (text.size() >= 2 && text.front() == '_' && text.back() == '_') {
    text = text.substr(1, text.size() - 2);
  }
  if (text.empty()) throw Error(ErrorCode::MalformedToken, "empty peptide sequence");

  ModifiedPeptide out;
  std::size_t pos = 0;
  if (is_open(text[0])) {
    const Unimod id = read_token(text, pos);
    if (!ptm_info(id).allowed_at_nterm) {
      throw Error(ErrorCode::UnsupportedModification,
                  "UNIMOD:" + std::to_string(unimod_id(id)) + " is not supported at the N-terminus");
    }
    out.nterm_mod = id;
    if (pos < text.size() && text[pos] == '-') ++pos;
  }

  while (pos < text.size()) {
    const char c = text[pos];
    if (is_open(c)) {
      throw Error(ErrorCode::MalformedToken,
                  "modification token at offset " + std::to_string(pos) +
                      " does not follow a residue or repeats a site");
    }
    if (!AminoAcidTable::contains(c)) {
      throw Error(ErrorCode::UnknownResidue,
                  std::string("unknown residue '") + c + "' at offset " + std::to_string(pos));
    }
    out.residues.push_back(c);
    out.site_mods.emplace_back();
    ++pos;
    if (pos < text.size() && is_open(text[pos])) {
      const Unimod id = read_token(text, pos);
      if (ptm_info(id).residues.find(c) == std::string_view::npos) {
        throw Error(ErrorCode::UnsupportedModification,
                    "UNIMOD:" + std::to_string(unimod_id(id)) + " is not supported on residue " + c);
      }
      out.site_mods.back() = id;
    }
  }

  if (out.residues.empty()) {
    throw Error(ErrorCode::MalformedToken, "peptide has no residues");
  }
  if (out.length() > kMaxParseLength) {
    throw Error(ErrorCode::MalformedToken,
                "peptide longer than " + std::to_string(kMaxParseLength) + " residues");
  }
  return out;
}

std::string to_naked(const ModifiedPeptide& peptide) { return peptide.residues; }

std::string to_canonical_string(const ModifiedPeptide& peptide) {
  std::string out;
  out.reserve(peptide.residues.size() + 12);
  auto token = [&](Unimod id) {
    out += "[UNIMOD:";
    out += std::to_string(unimod_id(id));
    out += ']';
  };
  if (peptide.nterm_mod) token(*peptide.nterm_mod);
  for (std::size_t i = 0; i < peptide.residues.size(); ++i) {
    out += peptide.residues[i];
    if (peptide.site_mods[i]) token(*peptide.site_mods[i]);
  }
  return out;
}

PtmMetadata ptm_metadata(const ModifiedPeptide& peptide) {
  bool ace = peptide.nterm_mod == Unimod::Acetyl;
  bool cam = false;
  bool ox = false;
  for (const auto& m : peptide.site_mods) {
    if (!m) continue;
    switch (*m) {
      case Unimod::Acetyl: ace = true; break;
      case Unimod::Carbamidomethyl: cam = true; break;
      case Unimod::Oxidation: ox = true; break;
    }
  }
  if (ace) return {true, PtmBucket::Ace};
  if (cam) return {true, PtmBucket::Cam};
  if (ox) return {true, PtmBucket::Ox};
  return {false, PtmBucket::Unmod};
}

double modified_residue_mass(const ModifiedPeptide& peptide, int i) {
  double mass = AminoAcidTable::residue_mass(peptide.residues[i]);
  if (peptide.site_mods[i]) mass += ptm_info(*peptide.site_mods[i]).mass_delta;
  return mass;
}

double monoisotopic_mass(const ModifiedPeptide& peptide) {
  double mass = kWaterMass;
  if (peptide.nterm_mod) mass += ptm_info(*peptide.nterm_mod).mass_delta;
  for (int i = 0; i < peptide.length(); ++i) mass += modified_residue_mass(peptide, i);
  return mass;
}

bool scope_filter(const SpectrumRecord& record) {
  const int length = record.peptide.length();
  if (length < kMinScopeLength || length > kMaxScopeLength) return false;
  if (record.charge < kMinScopeCharge || record.charge > kMaxScopeCharge) return false;
  // Parsed peptides only ever carry whitelisted modifications; re-checked so
  // hand-built records cannot slip through.
  auto whitelisted = [](const std::optional<Unimod>& m) {
    return !m || unimod_from_id(unimod_id(*m)).has_value();
  };
  if (!whitelisted(record.peptide.nterm_mod)) return false;
  if (!std::all_of(record.peptide.site_mods.begin(), record.peptide.site_mods.end(), whitelisted)) {
    return false;
  }
  if (record.andromeda_score && !(*record.andromeda_score >= kMinAndromedaScore)) return false;
  if (record.mass_error_ppm && !(std::abs(*record.mass_error_ppm) <= kMaxMassErrorPpm)) return false;
  return true;
}

}  // namespace pepspec
