#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "pepspec/analysis.hpp"
#include "pepspec/ions.hpp"
#include "pepspec/projection.hpp"
#include "pepspec/record.hpp"

namespace pepspec {

// Column names shared by the spectral and prediction tables.
namespace columns {
inline constexpr std::string_view kModifiedSequence = "modified_sequence";
inline constexpr std::string_view kPrecursorCharge = "precursor_charge";
inline constexpr std::string_view kCollisionEnergy = "collision_energy";
inline constexpr std::string_view kMzList = "mz_list";
inline constexpr std::string_view kIntensityList = "intensity_list";
inline constexpr std::string_view kRawFile = "raw_file";
inline constexpr std::string_view kAndromedaScore = "andromeda_score";
inline constexpr std::string_view kMassErrorPpm = "mass_error_ppm";
inline constexpr std::string_view kSplit = "split";
inline constexpr std::string_view kSampleKey = "sample_key";
inline constexpr std::string_view kNakedSequence = "naked_sequence";
inline constexpr std::string_view kHasPtm = "has_ptm";
inline constexpr std::string_view kPtmBucket = "ptm_bucket";
inline constexpr std::string_view kCanonicalVector = "canonical_vector";
}  // namespace columns

// Line-oriented tab-separated reader. The first line is the header; blank
// lines are skipped; a trailing '\r' is tolerated.
class TsvReader {
 public:
  explicit TsvReader(const std::filesystem::path& path);

  const std::vector<std::string>& header() const noexcept { return header_; }
  std::optional<std::size_t> column(std::string_view name) const;
  std::size_t require_column(std::string_view name) const;

  // Advances to the next data row. Throws SchemaError on a field-count mismatch.
  bool next();
  std::size_t line() const noexcept { return line_; }
  // Zero-based ordinal of the current data row.
  std::size_t row_index() const noexcept { return row_index_; }
  const std::vector<std::string_view>& fields() const noexcept { return fields_; }
  std::string_view field(std::size_t i) const { return fields_[i]; }
  const std::string& raw() const noexcept { return current_; }

 private:
  std::filesystem::path path_;
  std::ifstream in_;
  std::vector<std::string> header_;
  std::string current_;
  std::vector<std::string_view> fields_;
  std::size_t line_ = 0;
  std::size_t row_index_ = 0;
  bool started_ = false;
};

class TsvWriter {
 public:
  explicit TsvWriter(const std::filesystem::path& path);
  void write_row(std::span<const std::string> fields);
  void write_row(std::span<const std::string_view> fields);
  void close();

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

std::vector<std::string_view> split_view(std::string_view text, char separator);

// Semicolon-separated decimals; an empty string is an empty list.
std::vector<double> parse_list(std::string_view text, std::size_t line);
std::string format_list(std::span<const double> values);

struct TableOptions {
  // Used when the table has no collision_energy column.
  double default_nce = 25.0;
  // mz_list / intensity_list must be present.
  bool require_peaks = false;
};

// Spectral table on top of TsvReader. parse_record() throws Error carrying
// the line number: SchemaError for malformed fields, the peptide parser's
// codes for unsupported sequences.
class SpectralTableReader {
 public:
  SpectralTableReader(const std::filesystem::path& path, const TableOptions& options = {});

  bool next() { return reader_.next(); }
  SpectrumRecord parse_record() const;
  TsvReader& tsv() noexcept { return reader_; }
  const TsvReader& tsv() const noexcept { return reader_; }
  bool has_collision_energy() const noexcept { return ce_.has_value(); }
  bool has_raw_file() const noexcept { return raw_file_.has_value(); }

 private:
  TsvReader reader_;
  TableOptions options_;
  std::size_t sequence_;
  std::size_t charge_;
  std::optional<std::size_t> ce_, mz_, intensity_, raw_file_, score_, ppm_, split_, sample_key_;
};

// Dense ("v0;v1;...") or sparse ("index:value;...") canonical vector text.
std::vector<double> parse_canonical_values(std::string_view text, std::size_t dim, std::size_t line);

struct PredictionRow {
  ModifiedPeptide peptide;
  int charge = 0;
  double ce = 0.0;
  std::optional<std::string> raw_file;
  CanonicalVector vector;
  std::size_t line = 0;
};

// Prediction table: modified_sequence, precursor_charge, collision_energy,
// optional raw_file, canonical_vector. Vectors are clamped, masked for the
// row's peptide/charge and normalized on read.
class PredictionTableReader {
 public:
  PredictionTableReader(const std::filesystem::path& path, const CanonicalSpace& space,
                        const TableOptions& options = {});

  bool next() { return reader_.next(); }
  PredictionRow parse_row(bool with_vector = true) const;
  bool has_raw_file() const noexcept { return raw_file_.has_value(); }
  TsvReader& tsv() noexcept { return reader_; }

 private:
  TsvReader reader_;
  CanonicalSpace space_;
  TableOptions options_;
  std::size_t sequence_, charge_, vector_;
  std::optional<std::size_t> ce_, raw_file_;
};

std::vector<std::string> prediction_header(bool with_raw_file);
std::vector<std::string> prediction_fields(const ModifiedPeptide& peptide, int charge, double ce,
                                           const std::optional<std::string>& raw_file,
                                           const CanonicalVector& vector, bool with_raw_file);

// Join key used to align predictions with truth rows.
std::string join_key(const ModifiedPeptide& peptide, int charge, double ce,
                     const std::optional<std::string>& raw_file);

// Predictor backed by a prediction table, looked up by (canonical sequence,
// charge, CE). Missing entries throw MissingPrediction.
class TablePredictor final : public Predictor {
 public:
  TablePredictor(const std::filesystem::path& path, const CanonicalSpace& space,
                 const TableOptions& options = {});
  CanonicalVector predict(const ModifiedPeptide& peptide, int charge, double nce) const override;
  std::size_t size() const noexcept { return entries_.size(); }

 private:
  std::unordered_map<std::string, CanonicalVector> entries_;
};

// Metric rows TSV, the input of `stratify`.
std::vector<std::string> metric_row_header();
std::vector<std::string> metric_row_fields(const std::string& canonical_sequence, const MetricRow& row);
std::vector<MetricRow> read_metric_rows(const std::filesystem::path& path);

}  // namespace pepspec
