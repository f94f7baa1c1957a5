#pragma once

#include <compare>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pepspec/ions.hpp"
#include "pepspec/peptide.hpp"
#include "pepspec/projection.hpp"

namespace pepspec {

// FastSpel-style bucketed linear predictor.
//
// Rows are grouped by (length, precursor charge, exact CE). Each bucket with
// at least min_bucket_count rows gets, per valid ion slot, a ridge-damped
// least-squares fit of the normalized intensity on
//   [1, onehot(residue at p), onehot(residue at p+1)]
// where p is the cleavage site. Tokens are the 20 standard residues plus
// C[UNIMOD:4], M[UNIMOD:35] and K[UNIMOD:1]. The intercept is not damped.
// Smaller buckets store the mean truth vector instead.

inline constexpr int kResidueTokens = 23;
inline constexpr int kFeatureCount = 1 + 2 * kResidueTokens;

int residue_token(const ModifiedPeptide& peptide, int i);

struct BucketKey {
  int length = 0;
  int charge = 0;
  double ce = 0.0;

  friend auto operator<=>(const BucketKey&, const BucketKey&) = default;
};

struct BaselineConfig {
  int min_bucket_count = 5;
  double ridge_lambda = 1e-6;
  // Maximum |dL| / |dz| accepted when snapping to a trained bucket; a farther
  // nearest bucket yields an all-zero prediction. Negative means unlimited.
  int length_snap_limit = -1;
  int charge_snap_limit = -1;
};

struct BucketFit {
  enum class Kind { Template, Linear };

  BucketKey key;
  std::size_t rows = 0;
  Kind kind = Kind::Template;
  // Template: dim() values. Linear: per slot either empty (slot not valid for
  // the bucket) or kFeatureCount coefficients.
  std::vector<double> template_values;
  std::vector<std::vector<double>> coefficients;
};

class BucketModel {
 public:
  BucketModel() = default;
  BucketModel(CanonicalSpace space, BaselineConfig config, std::vector<BucketFit> buckets);

  const CanonicalSpace& space() const noexcept { return space_; }
  const BaselineConfig& config() const noexcept { return config_; }
  const std::vector<BucketFit>& buckets() const noexcept { return buckets_; }
  bool empty() const noexcept { return buckets_.empty(); }
  // Sorted distinct training CE values.
  const std::vector<double>& ce_grid() const noexcept { return ce_grid_; }

  std::string to_json() const;
  static BucketModel from_json(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static BucketModel load(const std::filesystem::path& path);

 private:
  CanonicalSpace space_;
  BaselineConfig config_;
  std::vector<BucketFit> buckets_;  // sorted by key
  std::vector<double> ce_grid_;
};

struct TrainingRow {
  ModifiedPeptide peptide;
  int charge = 0;
  double ce = 0.0;
  CanonicalVector truth;
};

// Deterministic for any ordering of the same rows.
BucketModel train(std::span<const TrainingRow> rows, const BaselineConfig& config = {},
                  const CanonicalSpace& space = {});

// Nearest learned CE; ties go to the lower value.
double ce_snap(double query_ce, const BucketModel& model);

// Bucket used for a query: CE snapped first, then the nearest (|dL|, |dz|)
// among buckets at that CE. nullptr when a snap limit rules every bucket out.
const BucketFit* select_bucket(int length, int charge, double ce, const BucketModel& model);

CanonicalVector predict(const ModifiedPeptide& peptide, int charge, double ce,
                        const BucketModel& model);

}  // namespace pepspec
