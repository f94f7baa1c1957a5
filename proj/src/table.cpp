#include "pepspec/table.hpp"

#include <algorithm>
#include <cmath>

#include "pepspec/error.hpp"
#include "pepspec/format.hpp"

namespace pepspec {
namespace {

[[noreturn]] void schema_error(std::size_t line, const std::string& message) {
  throw Error(ErrorCode::SchemaError, "line " + std::to_string(line) + ": " + message, line);
}

double required_double(std::string_view text, std::size_t line, std::string_view column) {
  auto v = parse_double(text);
  if (!v || !std::isfinite(*v)) schema_error(line, "column " + std::string(column) + " is not a decimal");
  return *v;
}

std::optional<double> optional_double(const TsvReader& r, std::optional<std::size_t> col,
                                      std::string_view name) {
  if (!col || r.field(*col).empty()) return std::nullopt;
  return required_double(r.field(*col), r.line(), name);
}

int required_charge(std::string_view text, std::size_t line) {
  auto v = parse_int(text);
  if (!v || *v < -1000 || *v > 1000) schema_error(line, "precursor_charge is not an integer");
  return static_cast<int>(*v);
}

ModifiedPeptide parse_peptide_at(std::string_view text, std::size_t line) {
  try {
    return parse_modified_sequence(text);
  } catch (const Error& e) {
    throw Error(e.code(), "line " + std::to_string(line) + ": " + e.what(), line);
  }
}

}  // namespace

TsvReader::TsvReader(const std::filesystem::path& path) : path_(path), in_(path, std::ios::binary) {
  if (!in_) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::string header_line;
  while (std::getline(in_, header_line)) {
    ++line_;
    if (!header_line.empty() && header_line.back() == '\r') header_line.pop_back();
    if (!header_line.empty()) break;
  }
  if (header_line.empty()) throw Error(ErrorCode::SchemaError, path.string() + ": missing header row", 1);
  for (auto f : split_view(header_line, '\t')) header_.emplace_back(f);
}

std::optional<std::size_t> TsvReader::column(std::string_view name) const {
  auto it = std::find(header_.begin(), header_.end(), name);
  if (it == header_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - header_.begin());
}

std::size_t TsvReader::require_column(std::string_view name) const {
  if (auto c = column(name)) return *c;
  throw Error(ErrorCode::SchemaError, path_.string() + ": missing required column '" + std::string(name) + "'", 1);
}

bool TsvReader::next() {
  while (std::getline(in_, current_)) {
    ++line_;
    if (!current_.empty() && current_.back() == '\r') current_.pop_back();
    if (current_.empty()) continue;
    if (started_) ++row_index_;
    started_ = true;
    fields_ = split_view(current_, '\t');
    if (fields_.size() != header_.size()) {
      schema_error(line_, "expected " + std::to_string(header_.size()) + " fields, found " +
                              std::to_string(fields_.size()));
    }
    return true;
  }
  if (in_.bad()) throw Error(ErrorCode::IoError, "read error in " + path_.string());
  return false;
}

TsvWriter::TsvWriter(const std::filesystem::path& path) : path_(path), out_(path, std::ios::binary) {
  if (!out_) throw Error(ErrorCode::IoError, "cannot write " + path.string());
}

void TsvWriter::write_row(std::span<const std::string> fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out_.put('\t');
    out_ << fields[i];
  }
  out_.put('\n');
}

void TsvWriter::write_row(std::span<const std::string_view> fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out_.put('\t');
    out_ << fields[i];
  }
  out_.put('\n');
}

void TsvWriter::close() {
  out_.close();
  if (out_.fail()) throw Error(ErrorCode::IoError, "failed writing " + path_.string());
}

std::vector<std::string_view> split_view(std::string_view text, char separator) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = text.find(separator, start);
    if (pos == std::string_view::npos) {
      out.push_back(text.substr(start));
      return out;
    }
    out.push_back(text.substr(start, pos - start));
    start = pos + 1;
  }
}

std::vector<double> parse_list(std::string_view text, std::size_t line) {
  std::vector<double> out;
  if (text.empty()) return out;
  for (auto item : split_view(text, ';')) out.push_back(required_double(item, line, "list"));
  return out;
}

std::string format_list(std::span<const double> values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ';';
    out += format_double(values[i]);
  }
  return out;
}

SpectralTableReader::SpectralTableReader(const std::filesystem::path& path, const TableOptions& options)
    : reader_(path), options_(options) {
  sequence_ = reader_.require_column(columns::kModifiedSequence);
  charge_ = reader_.require_column(columns::kPrecursorCharge);
  ce_ = reader_.column(columns::kCollisionEnergy);
  mz_ = reader_.column(columns::kMzList);
  intensity_ = reader_.column(columns::kIntensityList);
  raw_file_ = reader_.column(columns::kRawFile);
  score_ = reader_.column(columns::kAndromedaScore);
  ppm_ = reader_.column(columns::kMassErrorPpm);
  split_ = reader_.column(columns::kSplit);
  sample_key_ = reader_.column(columns::kSampleKey);
  if (mz_.has_value() != intensity_.has_value()) {
    throw Error(ErrorCode::SchemaError, path.string() + ": mz_list and intensity_list must appear together", 1);
  }
  if (options_.require_peaks && !mz_) {
    throw Error(ErrorCode::SchemaError, path.string() + ": missing required column 'mz_list'", 1);
  }
}

SpectrumRecord SpectralTableReader::parse_record() const {
  const auto& r = reader_;
  const std::size_t line = r.line();
  SpectrumRecord rec;
  rec.charge = required_charge(r.field(charge_), line);
  rec.nce = ce_ ? required_double(r.field(*ce_), line, columns::kCollisionEnergy) : options_.default_nce;
  if (mz_) {
    rec.mz = parse_list(r.field(*mz_), line);
    rec.intensity = parse_list(r.field(*intensity_), line);
    if (rec.mz.size() != rec.intensity.size()) {
      schema_error(line, "mz_list has " + std::to_string(rec.mz.size()) + " values, intensity_list has " +
                             std::to_string(rec.intensity.size()));
    }
  }
  rec.andromeda_score = optional_double(r, score_, columns::kAndromedaScore);
  rec.mass_error_ppm = optional_double(r, ppm_, columns::kMassErrorPpm);
  if (raw_file_) rec.raw_file = std::string(r.field(*raw_file_));
  if (split_ && !r.field(*split_).empty()) rec.split = std::string(r.field(*split_));
  if (sample_key_ && !r.field(*sample_key_).empty()) rec.sample_key = std::string(r.field(*sample_key_));
  rec.row_index = r.row_index();
  rec.peptide = parse_peptide_at(r.field(sequence_), line);
  return rec;
}

std::vector<double> parse_canonical_values(std::string_view text, std::size_t dim, std::size_t line) {
  std::vector<double> values(dim, 0.0);
  if (text.empty()) return values;
  const auto items = split_view(text, ';');
  const bool sparse = text.find(':') != std::string_view::npos;
  if (!sparse) {
    if (items.size() != dim) {
      schema_error(line, "dense canonical_vector has " + std::to_string(items.size()) + " values, expected " +
                             std::to_string(dim));
    }
    for (std::size_t i = 0; i < dim; ++i) values[i] = required_double(items[i], line, columns::kCanonicalVector);
    return values;
  }
  for (auto item : items) {
    const auto colon = item.find(':');
    if (colon == std::string_view::npos) schema_error(line, "sparse entry without ':'");
    auto index = parse_int(item.substr(0, colon));
    if (!index || *index < 0 || static_cast<std::size_t>(*index) >= dim) {
      schema_error(line, "sparse index out of range [0, " + std::to_string(dim - 1) + "]");
    }
    values[static_cast<std::size_t>(*index)] =
        required_double(item.substr(colon + 1), line, columns::kCanonicalVector);
  }
  return values;
}

PredictionTableReader::PredictionTableReader(const std::filesystem::path& path, const CanonicalSpace& space,
                                             const TableOptions& options)
    : reader_(path), space_(space), options_(options) {
  sequence_ = reader_.require_column(columns::kModifiedSequence);
  charge_ = reader_.require_column(columns::kPrecursorCharge);
  vector_ = reader_.require_column(columns::kCanonicalVector);
  ce_ = reader_.column(columns::kCollisionEnergy);
  raw_file_ = reader_.column(columns::kRawFile);
}

PredictionRow PredictionTableReader::parse_row(bool with_vector) const {
  const auto& r = reader_;
  PredictionRow row;
  row.line = r.line();
  row.charge = required_charge(r.field(charge_), row.line);
  row.ce = ce_ ? required_double(r.field(*ce_), row.line, columns::kCollisionEnergy) : options_.default_nce;
  if (raw_file_) row.raw_file = std::string(r.field(*raw_file_));
  row.peptide = parse_peptide_at(r.field(sequence_), row.line);
  if (with_vector) {
    auto values = parse_canonical_values(r.field(vector_), static_cast<std::size_t>(space_.dim()), row.line);
    row.vector = finalize_canonical(std::move(values), valid_mask(row.peptide, row.charge, space_));
  }
  return row;
}

std::vector<std::string> prediction_header(bool with_raw_file) {
  std::vector<std::string> h{std::string(columns::kModifiedSequence), std::string(columns::kPrecursorCharge),
                             std::string(columns::kCollisionEnergy)};
  if (with_raw_file) h.emplace_back(columns::kRawFile);
  h.emplace_back(columns::kCanonicalVector);
  return h;
}

std::vector<std::string> prediction_fields(const ModifiedPeptide& peptide, int charge, double ce,
                                           const std::optional<std::string>& raw_file,
                                           const CanonicalVector& vector, bool with_raw_file) {
  std::vector<std::string> f{to_canonical_string(peptide), std::to_string(charge), format_double(ce)};
  if (with_raw_file) f.push_back(raw_file.value_or(""));
  f.push_back(format_list(vector.values));
  return f;
}

std::string join_key(const ModifiedPeptide& peptide, int charge, double ce,
                     const std::optional<std::string>& raw_file) {
  std::string key = to_canonical_string(peptide);
  key += '\t';
  key += std::to_string(charge);
  key += '\t';
  key += format_double(ce);
  if (raw_file) {
    key += '\t';
    key += *raw_file;
  }
  return key;
}

TablePredictor::TablePredictor(const std::filesystem::path& path, const CanonicalSpace& space,
                               const TableOptions& options) {
  PredictionTableReader reader(path, space, options);
  while (reader.next()) {
    auto row = reader.parse_row();
    entries_.insert_or_assign(join_key(row.peptide, row.charge, row.ce, std::nullopt), std::move(row.vector));
  }
}

CanonicalVector TablePredictor::predict(const ModifiedPeptide& peptide, int charge, double nce) const {
  auto it = entries_.find(join_key(peptide, charge, nce, std::nullopt));
  if (it == entries_.end()) {
    throw Error(ErrorCode::MissingPrediction, "no prediction for " + to_canonical_string(peptide) + " charge " +
                                                  std::to_string(charge) + " NCE " + format_double(nce));
  }
  return it->second;
}

std::vector<std::string> metric_row_header() {
  return {std::string(columns::kModifiedSequence), std::string(columns::kPrecursorCharge),
          std::string(columns::kCollisionEnergy), "length", std::string(columns::kPtmBucket), "k", "sa", "sas", "pcc"};
}

std::vector<std::string> metric_row_fields(const std::string& canonical_sequence, const MetricRow& row) {
  return {canonical_sequence,
          std::to_string(row.charge),
          format_double(row.nce),
          std::to_string(row.length),
          std::string(to_string(row.bucket)),
          std::to_string(row.k),
          format_double(row.sa),
          format_double(row.sas),
          format_double(row.pcc)};
}

std::vector<MetricRow> read_metric_rows(const std::filesystem::path& path) {
  TsvReader reader(path);
  const auto charge = reader.require_column(columns::kPrecursorCharge);
  const auto ce = reader.require_column(columns::kCollisionEnergy);
  const auto length = reader.require_column("length");
  const auto bucket = reader.require_column(columns::kPtmBucket);
  const auto k = reader.require_column("k");
  const auto sa = reader.require_column("sa");
  const auto sas = reader.require_column("sas");
  const auto r = reader.require_column("pcc");
  std::vector<MetricRow> rows;
  while (reader.next()) {
    const std::size_t line = reader.line();
    MetricRow row;
    row.charge = required_charge(reader.field(charge), line);
    row.nce = required_double(reader.field(ce), line, columns::kCollisionEnergy);
    auto len = parse_int(reader.field(length));
    auto kk = parse_int(reader.field(k));
    auto b = parse_ptm_bucket(reader.field(bucket));
    if (!len || !kk || *kk < 0 || !b) schema_error(line, "malformed metric row");
    row.length = static_cast<int>(*len);
    row.k = static_cast<std::size_t>(*kk);
    row.bucket = *b;
    row.sa = required_double(reader.field(sa), line, "sa");
    row.sas = required_double(reader.field(sas), line, "sas");
    row.pcc = required_double(reader.field(r), line, "pcc");
    rows.push_back(row);
  }
  return rows;
}

}  // namespace pepspec
