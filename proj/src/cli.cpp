#include "pepspec/cli.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <unordered_map>

#include "CLI11.hpp"
#include "json.hpp"
#include "pepspec/analysis.hpp"
#include "pepspec/baseline.hpp"
#include "pepspec/config.hpp"
#include "pepspec/error.hpp"
#include "pepspec/format.hpp"
#include "pepspec/metrics.hpp"
#include "pepspec/parallel.hpp"
#include "pepspec/projection.hpp"
#include "pepspec/splits.hpp"
#include "pepspec/table.hpp"

namespace pepspec {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr std::size_t kBatchSize = 4096;
constexpr std::size_t kMaxIssueExamples = 10;

struct Context {
  RunConfig config;
  std::string command;
  std::vector<std::string> args;
  std::vector<fs::path> inputs;
  std::vector<fs::path> outputs;
  std::optional<fs::path> manifest_path;
  json summary = json::object();
  std::map<std::string, std::size_t> malformed;
  json issues = json::array();
  std::ostream* out = nullptr;
  std::ostream* err = nullptr;

  TableOptions table_options() const { return {config.default_nce, false}; }

  // Row-level errors are counted and skipped unless malformed rows are fatal.
  void row_error(const Error& e, const std::string& role) {
    if (!config.skip_malformed || e.line() == 0 || e.code() == ErrorCode::IoError) throw e;
    ++malformed[role];
    if (issues.size() < kMaxIssueExamples) {
      issues.push_back({{"input", role}, {"line", e.line()}, {"code", to_string(e.code())}, {"message", e.what()}});
    }
  }

  std::size_t malformed_count(const std::string& role) const {
    auto it = malformed.find(role);
    return it == malformed.end() ? 0 : it->second;
  }
};

template <typename Reader>
bool next_row(Reader& reader, Context& ctx, const std::string& role) {
  for (;;) {
    try {
      return reader.next();
    } catch (const Error& e) {
      ctx.row_error(e, role);
    }
  }
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << j.dump(2) << '\n';
  out.close();
  if (out.fail()) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_manifest(const Context& ctx) {
  if (ctx.outputs.empty() && !ctx.manifest_path) return;
  const fs::path path = ctx.manifest_path ? *ctx.manifest_path : fs::path(ctx.outputs.front().string() + ".manifest.json");
  json inputs = json::array();
  for (const auto& p : ctx.inputs) inputs.push_back({{"path", p.string()}, {"md5", to_hex(md5_file(p))}});
  json outputs = json::array();
  for (const auto& p : ctx.outputs) outputs.push_back(p.string());
  json malformed = json::object();
  for (const auto& [role, n] : ctx.malformed) malformed[role] = n;
  write_json(path, {{"tool", kToolName},
                    {"version", kToolVersion},
                    {"command", ctx.command},
                    {"args", ctx.args},
                    {"config", ctx.config.to_json()},
                    {"threads", worker_count()},
                    {"inputs", inputs},
                    {"outputs", outputs},
                    {"summary", ctx.summary},
                    {"malformed_rows", malformed},
                    {"issues", ctx.issues},
                    {"created_at", utc_timestamp()}});
}

json report_header(std::string_view schema) { return {{"schema", schema}, {"schema_version", 1}}; }

[[noreturn]] void scope_empty(const std::string& what) {
  throw Error(ErrorCode::ScopeEmpty, what + ": no row survived parsing and the scope filter");
}

// A ground-truth row: the record identity plus its projected canonical vector.
struct TruthRow {
  SpectrumRecord record;
  CanonicalVector truth;
};

// Reads ground truth from either a spectral table (projected on the fly) or
// a prediction-format table carrying canonical_vector.
class TruthStream {
 public:
  TruthStream(const fs::path& path, Context& ctx, std::string role = "truth")
      : ctx_(ctx), role_(std::move(role)), space_(ctx.config.space) {
    const bool canonical = TsvReader(path).column(columns::kCanonicalVector).has_value();
    if (canonical) {
      canonical_ = std::make_unique<PredictionTableReader>(path, space_, ctx.table_options());
    } else {
      TableOptions options = ctx.table_options();
      options.require_peaks = true;
      spectral_ = std::make_unique<SpectralTableReader>(path, options);
    }
  }

  bool has_raw_file() const { return canonical_ ? canonical_->has_raw_file() : spectral_->has_raw_file(); }
  std::size_t rows() const { return rows_; }
  std::size_t out_of_scope() const { return out_of_scope_; }

  // Fills up to n in-scope rows; returns false once the file is exhausted and
  // nothing was read.
  bool next_batch(std::vector<TruthRow>& batch, std::size_t n = kBatchSize) {
    batch.clear();
    while (batch.size() < n) {
      if (canonical_) {
        if (!next_row(*canonical_, ctx_, role_)) break;
        ++rows_;
        try {
          auto row = canonical_->parse_row(false);
          SpectrumRecord rec;
          rec.peptide = std::move(row.peptide);
          rec.charge = row.charge;
          rec.nce = row.ce;
          rec.raw_file = std::move(row.raw_file);
          if (!scope_filter(rec)) {
            ++out_of_scope_;
            continue;
          }
          CanonicalVector truth = canonical_->parse_row(true).vector;
          batch.push_back({std::move(rec), std::move(truth)});
        } catch (const Error& e) {
          ctx_.row_error(e, role_);
        }
      } else {
        if (!next_row(*spectral_, ctx_, role_)) break;
        ++rows_;
        try {
          auto rec = spectral_->parse_record();
          if (!scope_filter(rec)) {
            ++out_of_scope_;
            continue;
          }
          batch.push_back({std::move(rec), {}});
        } catch (const Error& e) {
          ctx_.row_error(e, role_);
        }
      }
    }
    if (spectral_) {
      parallel_for(batch.size(), [&](std::size_t i) {
        auto& row = batch[i];
        row.truth = project_ground_truth({row.record.mz, row.record.intensity}, row.record.peptide,
                                         row.record.charge, space_);
        row.record.mz.clear();
        row.record.intensity.clear();
      });
    }
    return !batch.empty();
  }

 private:
  Context& ctx_;
  std::string role_;
  CanonicalSpace space_;
  std::unique_ptr<PredictionTableReader> canonical_;
  std::unique_ptr<SpectralTableReader> spectral_;
  std::size_t rows_ = 0;
  std::size_t out_of_scope_ = 0;
};

std::vector<EvalItem> load_eval_items(const fs::path& path, Context& ctx) {
  TruthStream stream(path, ctx);
  std::vector<EvalItem> items;
  std::vector<TruthRow> batch;
  while (stream.next_batch(batch)) {
    for (auto& row : batch) {
      items.push_back({std::move(row.record.peptide), row.record.charge, row.record.nce, std::move(row.truth)});
    }
  }
  ctx.summary["truth_rows"] = stream.rows();
  ctx.summary["out_of_scope"] = stream.out_of_scope();
  if (items.empty() && stream.rows() > 0) scope_empty(path.string());
  return items;
}

std::size_t ensure_column(std::vector<std::string>& header, std::string_view name) {
  auto it = std::find(header.begin(), header.end(), name);
  if (it != header.end()) return static_cast<std::size_t>(it - header.begin());
  header.emplace_back(name);
  return header.size() - 1;
}

std::vector<std::string> copy_fields(const TsvReader& reader, std::size_t width) {
  std::vector<std::string> fields(reader.fields().begin(), reader.fields().end());
  fields.resize(width);
  return fields;
}

// ---------------------------------------------------------------------------

struct NormalizeArgs {
  std::string input, output;
};

void cmd_normalize(Context& ctx, const NormalizeArgs& a) {
  ctx.inputs = {a.input};
  SpectralTableReader reader(a.input, ctx.table_options());
  std::vector<std::string> header = reader.tsv().header();
  const std::size_t seq = ensure_column(header, columns::kModifiedSequence);
  const std::size_t ce = ensure_column(header, columns::kCollisionEnergy);
  const std::size_t naked = ensure_column(header, columns::kNakedSequence);
  const std::size_t has_ptm = ensure_column(header, columns::kHasPtm);
  const std::size_t bucket = ensure_column(header, columns::kPtmBucket);

  TsvWriter writer(a.output);
  ctx.outputs = {a.output};
  writer.write_row(std::span<const std::string>(header));
  std::size_t rows = 0, written = 0, out_of_scope = 0;
  while (next_row(reader, ctx, "input")) {
    ++rows;
    SpectrumRecord rec;
    try {
      rec = reader.parse_record();
    } catch (const Error& e) {
      ctx.row_error(e, "input");
      continue;
    }
    if (!scope_filter(rec)) {
      ++out_of_scope;
      continue;
    }
    auto fields = copy_fields(reader.tsv(), header.size());
    const auto meta = ptm_metadata(rec.peptide);
    fields[seq] = to_canonical_string(rec.peptide);
    fields[ce] = format_double(rec.nce);
    fields[naked] = to_naked(rec.peptide);
    fields[has_ptm] = meta.has_ptm ? "true" : "false";
    fields[bucket] = std::string(to_string(meta.bucket));
    writer.write_row(std::span<const std::string>(fields));
    ++written;
  }
  writer.close();
  ctx.summary = {{"rows", rows}, {"written", written}, {"out_of_scope", out_of_scope},
                 {"malformed", ctx.malformed_count("input")}};
  if (rows > 0 && written == 0) scope_empty(a.input);
}

// ---------------------------------------------------------------------------

struct SplitArgs {
  std::string input, output, report;
  std::string rule;
};

void cmd_split(Context& ctx, const SplitArgs& a) {
  ctx.inputs = {a.input};
  SpectralTableReader reader(a.input, ctx.table_options());
  std::vector<std::string> header = reader.tsv().header();
  const std::size_t split_col = ensure_column(header, columns::kSplit);
  TsvWriter writer(a.output);
  ctx.outputs = {a.output};
  writer.write_row(std::span<const std::string>(header));

  SplitBackbones backbones;
  std::array<std::size_t, 3> counts{};
  std::size_t rows = 0;
  while (next_row(reader, ctx, "input")) {
    ++rows;
    SplitAssignment assignment;
    std::string naked;
    try {
      const auto rec = reader.parse_record();
      assignment = assign_split(rec, ctx.config.split_rule);
      naked = to_naked(rec.peptide);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::MissingKeyColumn) throw;
      ctx.row_error(e, "input");
      continue;
    }
    auto fields = copy_fields(reader.tsv(), header.size());
    fields[split_col] = std::string(to_string(assignment.label));
    writer.write_row(std::span<const std::string>(fields));
    ++counts[static_cast<std::size_t>(assignment.label)];
    backbones.add(assignment.label, std::move(naked));
  }
  writer.close();

  const DisjointReport overlap = verify_disjoint(backbones);
  const std::size_t assigned = counts[0] + counts[1] + counts[2];
  auto fraction = [&](std::size_t n) { return assigned ? static_cast<double>(n) / static_cast<double>(assigned) : 0.0; };
  json report = report_header("pepspec.split-report");
  report["rule"] = to_string(ctx.config.split_rule);
  report["rows"] = rows;
  report["assigned"] = assigned;
  report["malformed_rows"] = ctx.malformed_count("input");
  report["counts"] = {{"train", counts[0]}, {"val", counts[1]}, {"test", counts[2]}};
  report["fractions"] = {{"train", fraction(counts[0])}, {"val", fraction(counts[1])}, {"test", fraction(counts[2])}};
  report["distinct_backbones"] = {{"train", backbones.set(SplitLabel::Train).size()},
                                  {"val", backbones.set(SplitLabel::Val).size()},
                                  {"test", backbones.set(SplitLabel::Test).size()}};
  report["backbone_overlap"] = {{"train_val", overlap.train_val},
                                {"train_test", overlap.train_test},
                                {"val_test", overlap.val_test},
                                {"total", overlap.total()},
                                {"examples", overlap.examples}};
  report["disjoint"] = overlap.total() == 0;
  if (!a.report.empty()) {
    write_json(a.report, report);
    ctx.outputs.push_back(a.report);
  }
  ctx.summary = {{"rows", rows}, {"counts", report["counts"]}, {"backbone_overlap", overlap.total()}};
}

// ---------------------------------------------------------------------------

struct SampleArgs {
  std::string input, output;
  bool balanced = false;
  std::size_t top_n = 0;
  bool has_top_n = false;
};

void cmd_sample(Context& ctx, const SampleArgs& a) {
  ctx.inputs = {a.input};
  if (a.balanced == a.has_top_n) {
    throw Error(ErrorCode::ConfigError, "sample needs exactly one of --balanced or --top-n");
  }
  const std::size_t quota = a.balanced ? ctx.config.quota : a.top_n;
  if (quota == 0) throw Error(ErrorCode::QuotaZero, "sampling quota must be positive");

  SpectralTableReader reader(a.input, ctx.table_options());
  std::map<std::string, BalancedSampler> groups;
  TopNSelector selector(quota);
  std::size_t rows = 0;
  while (next_row(reader, ctx, "input")) {
    ++rows;
    try {
      const auto rec = reader.parse_record();
      const std::size_t id = reader.tsv().row_index();
      const std::string naked = to_naked(rec.peptide);
      if (a.balanced) {
        auto [it, inserted] = groups.try_emplace(rec.split.value_or(""), quota);
        it->second.push(ptm_metadata(rec.peptide).bucket,
                        {sampling_key(naked, rec.charge, rec.nce, ctx.config.seed), record_fingerprint(rec), id});
      } else {
        selector.push({ood_rank_key(naked, rec.charge, ctx.config.ood_seed), record_fingerprint(rec), id});
      }
    } catch (const Error& e) {
      ctx.row_error(e, "input");
    }
  }

  std::vector<std::size_t> order;
  json selected = json::object();
  if (a.balanced) {
    for (auto& [group, sampler] : groups) {
      const auto chosen = sampler.take();
      for (const auto& c : chosen) order.push_back(c.id);
      selected[group.empty() ? "all" : group] = chosen.size();
    }
  } else {
    for (const auto& c : selector.take()) order.push_back(c.id);
    selected["all"] = order.size();
  }

  // Second pass collects the selected rows verbatim.
  std::unordered_map<std::size_t, std::size_t> position;
  for (std::size_t i = 0; i < order.size(); ++i) position.emplace(order[i], i);
  std::vector<std::string> lines(order.size());
  TsvReader raw(a.input);
  for (;;) {
    try {
      if (!raw.next()) break;
    } catch (const Error&) {
      continue;
    }
    auto it = position.find(raw.row_index());
    if (it != position.end()) lines[it->second] = raw.raw();
  }

  TsvWriter writer(a.output);
  ctx.outputs = {a.output};
  writer.write_row(std::span<const std::string>(raw.header()));
  for (const auto& line : lines) {
    std::array<std::string_view, 1> single{line};
    writer.write_row(std::span<const std::string_view>(single));
  }
  writer.close();
  ctx.summary = {{"mode", a.balanced ? "balanced" : "top-n"}, {"rows", rows}, {"quota", quota},
                 {"selected", selected}, {"malformed", ctx.malformed_count("input")}};
}

// ---------------------------------------------------------------------------

struct ProjectArgs {
  std::string input, output;
};

void cmd_project_truth(Context& ctx, const ProjectArgs& a) {
  ctx.inputs = {a.input};
  TruthStream stream(a.input, ctx, "input");
  const bool with_raw = stream.has_raw_file();
  TsvWriter writer(a.output);
  ctx.outputs = {a.output};
  writer.write_row(std::span<const std::string>(prediction_header(with_raw)));
  std::vector<TruthRow> batch;
  std::size_t written = 0;
  while (stream.next_batch(batch)) {
    for (const auto& row : batch) {
      const auto fields = prediction_fields(row.record.peptide, row.record.charge, row.record.nce,
                                            row.record.raw_file, row.truth, with_raw);
      writer.write_row(std::span<const std::string>(fields));
      ++written;
    }
  }
  writer.close();
  ctx.summary = {{"rows", stream.rows()}, {"written", written}, {"out_of_scope", stream.out_of_scope()},
                 {"malformed", ctx.malformed_count("input")}};
  if (stream.rows() > 0 && written == 0) scope_empty(a.input);
}

// ---------------------------------------------------------------------------

struct EvaluateArgs {
  std::string truth, pred, output, rows;
};

json ci_json(const BootstrapCi& ci) { return {{"lo", ci.lo}, {"hi", ci.hi}}; }

void cmd_evaluate(Context& ctx, const EvaluateArgs& a) {
  ctx.inputs = {a.truth, a.pred};
  const CanonicalSpace space = ctx.config.space;
  TruthStream truth(a.truth, ctx);

  PredictionTableReader preds(a.pred, space, ctx.table_options());
  const bool use_raw = preds.has_raw_file() && truth.has_raw_file();
  struct Entry {
    std::vector<CanonicalVector> vectors;
    std::size_t next = 0;
    bool used = false;
  };
  std::unordered_map<std::string, Entry> entries;
  std::size_t pred_rows = 0, pred_out_of_scope = 0;
  while (next_row(preds, ctx, "pred")) {
    ++pred_rows;
    try {
      auto row = preds.parse_row(false);
      SpectrumRecord probe;
      probe.peptide = row.peptide;
      probe.charge = row.charge;
      if (!scope_filter(probe)) {
        ++pred_out_of_scope;
        continue;
      }
      auto vector = preds.parse_row(true).vector;
      entries[join_key(row.peptide, row.charge, row.ce, use_raw ? row.raw_file : std::nullopt)].vectors.push_back(
          std::move(vector));
    } catch (const Error& e) {
      ctx.row_error(e, "pred");
    }
  }

  std::vector<MetricRow> metrics;
  std::vector<std::string> sequences;
  std::size_t missing = 0;
  std::vector<TruthRow> batch;
  std::vector<const CanonicalVector*> matched;
  std::vector<MetricRow> batch_metrics;
  const bool keep_sequences = !a.rows.empty();
  while (truth.next_batch(batch)) {
    matched.assign(batch.size(), nullptr);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const auto& rec = batch[i].record;
      auto it = entries.find(join_key(rec.peptide, rec.charge, rec.nce, use_raw ? rec.raw_file : std::nullopt));
      if (it == entries.end()) continue;
      Entry& entry = it->second;
      entry.used = true;
      if (entry.vectors.size() == 1) {
        matched[i] = &entry.vectors.front();
      } else if (entry.next < entry.vectors.size()) {
        matched[i] = &entry.vectors[entry.next++];
      }
    }
    batch_metrics.assign(batch.size(), MetricRow{});
    parallel_for(batch.size(), [&](std::size_t i) {
      if (matched[i]) {
        batch_metrics[i] = evaluate_pair(batch[i].record, *matched[i], batch[i].truth, space, ctx.config.sa_convention);
      }
    });
    for (std::size_t i = 0; i < batch.size(); ++i) {
      if (!matched[i]) {
        ++missing;
        continue;
      }
      metrics.push_back(batch_metrics[i]);
      if (keep_sequences) sequences.push_back(to_canonical_string(batch[i].record.peptide));
    }
  }

  std::size_t unmatched = 0;
  for (const auto& [key, entry] : entries) {
    if (entry.vectors.size() == 1) {
      unmatched += entry.used ? 0 : 1;
    } else {
      unmatched += entry.vectors.size() - entry.next;
    }
  }

  if (truth.rows() > 0 && metrics.empty()) {
    throw Error(ErrorCode::ScopeEmpty, a.truth + ": no truth row could be evaluated (" + std::to_string(missing) +
                                           " without prediction, " + std::to_string(truth.out_of_scope()) +
                                           " out of scope)");
  }

  json report = report_header("pepspec.evaluate-report");
  report["sa_convention"] = to_string(ctx.config.sa_convention);
  report["join_on_raw_file"] = use_raw;
  report["counts"] = {{"truth_rows", truth.rows()},
                      {"truth_out_of_scope", truth.out_of_scope()},
                      {"truth_malformed", ctx.malformed_count("truth")},
                      {"prediction_rows", pred_rows},
                      {"prediction_out_of_scope", pred_out_of_scope},
                      {"prediction_malformed", ctx.malformed_count("pred")},
                      {"evaluated", metrics.size()},
                      {"missing_prediction", missing},
                      {"unmatched_prediction", unmatched}};
  if (metrics.empty()) {
    report["median"] = nullptr;
    report["bootstrap"] = nullptr;
  } else {
    report["median"] = {{"sa", aggregate_median(metrics, MetricName::SA)},
                        {"sas", aggregate_median(metrics, MetricName::SAS)},
                        {"pcc", aggregate_median(metrics, MetricName::PCC)}};
    const auto& boot = ctx.config.bootstrap;
    if (boot.resamples > 0) {
      json b = {{"resamples", boot.resamples}, {"level", boot.level}, {"seed", boot.seed}};
      for (auto [name, metric] : {std::pair{"sa", MetricName::SA}, std::pair{"sas", MetricName::SAS},
                                  std::pair{"pcc", MetricName::PCC}}) {
        std::vector<double> values(metrics.size());
        for (std::size_t i = 0; i < metrics.size(); ++i) values[i] = metric_value(metrics[i], metric);
        b[name] = ci_json(bootstrap_ci(values, boot));
      }
      report["bootstrap"] = b;
    } else {
      report["bootstrap"] = nullptr;
    }
  }
  write_json(a.output, report);
  ctx.outputs = {a.output};

  if (keep_sequences) {
    TsvWriter writer(a.rows);
    writer.write_row(std::span<const std::string>(metric_row_header()));
    for (std::size_t i = 0; i < metrics.size(); ++i) {
      const auto fields = metric_row_fields(sequences[i], metrics[i]);
      writer.write_row(std::span<const std::string>(fields));
    }
    writer.close();
    ctx.outputs.push_back(a.rows);
  }
  ctx.summary = report["counts"];
}

// ---------------------------------------------------------------------------

struct StratifyArgs {
  std::string rows, output, csv, axis, baseline_bin;
  bool ci = false;
};

void cmd_stratify(Context& ctx, const StratifyArgs& a) {
  ctx.inputs = {a.rows};
  const auto axis = parse_strat_axis(a.axis);
  if (!axis) throw Error(ErrorCode::ConfigError, "unknown axis '" + a.axis + "'");
  const auto rows = read_metric_rows(a.rows);
  StratOptions options;
  options.length_edges = ctx.config.length_edges;
  options.nce_bin_width = ctx.config.nce_bin_width;
  options.with_ci = a.ci;
  options.bootstrap = ctx.config.bootstrap;
  const StratTable table = stratify(rows, *axis, options);

  json report = report_header("pepspec.stratify-report");
  report["axis"] = to_string(table.axis);
  report["rows"] = rows.size();
  json strata = json::array();
  for (const auto& r : table.rows) {
    json s = {{"key", r.key}, {"n", r.n}, {"median_sa", r.median_sa}, {"median_sas", r.median_sas},
              {"median_pcc", r.median_pcc}};
    if (r.sa_ci) s["sa_ci"] = {{"lo", r.sa_ci->lo}, {"hi", r.sa_ci->hi}, {"level", r.sa_ci->level},
                               {"resamples", r.sa_ci->resamples}};
    strata.push_back(s);
  }
  report["strata"] = strata;
  std::vector<DecayPoint> decay;
  if (!a.baseline_bin.empty()) {
    decay = delta_decay(table, a.baseline_bin);
    json d = json::array();
    for (const auto& p : decay) d.push_back({{"key", p.key}, {"delta_sa", p.delta_sa}, {"delta_pcc", p.delta_pcc}});
    report["baseline_bin"] = a.baseline_bin;
    report["decay"] = d;
  }
  write_json(a.output, report);
  ctx.outputs = {a.output};

  if (!a.csv.empty()) {
    std::ofstream out(a.csv, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + a.csv);
    out << "key,n,median_sa,median_sas,median_pcc";
    if (a.ci) out << ",sa_ci_lo,sa_ci_hi";
    if (!decay.empty()) out << ",delta_sa,delta_pcc";
    out << '\n';
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
      const auto& r = table.rows[i];
      out << '"' << r.key << "\"," << r.n << ',' << format_double(r.median_sa) << ','
          << format_double(r.median_sas) << ',' << format_double(r.median_pcc);
      if (a.ci) {
        out << ',' << (r.sa_ci ? format_double(r.sa_ci->lo) : "") << ','
            << (r.sa_ci ? format_double(r.sa_ci->hi) : "");
      }
      if (!decay.empty()) out << ',' << format_double(decay[i].delta_sa) << ',' << format_double(decay[i].delta_pcc);
      out << '\n';
    }
    out.close();
    if (out.fail()) throw Error(ErrorCode::IoError, "failed writing " + a.csv);
    ctx.outputs.push_back(a.csv);
  }
  ctx.summary = {{"axis", a.axis}, {"strata", table.rows.size()}, {"rows", rows.size()}};
}

// ---------------------------------------------------------------------------

struct PerturbArgs {
  std::string probe, model, pred_table, truth, output, csv;
  std::vector<double> grid;
  double from = 25.0;
  double to = 30.0;
};

void cmd_perturb(Context& ctx, const PerturbArgs& a) {
  if (a.model.empty() == a.pred_table.empty()) {
    throw Error(ErrorCode::ConfigError, "perturb needs exactly one of --model or --pred-table");
  }
  const std::string predictor_path = a.model.empty() ? a.pred_table : a.model;
  ctx.inputs = {predictor_path, a.truth};

  std::unique_ptr<BucketModel> model;
  std::unique_ptr<Predictor> predictor;
  if (!a.model.empty()) {
    model = std::make_unique<BucketModel>(BucketModel::load(a.model));
    if (!(model->space() == ctx.config.space)) {
      throw Error(ErrorCode::LayoutMismatch, "model canonical space differs from the configured space");
    }
    predictor = std::make_unique<BaselinePredictor>(*model);
  } else {
    predictor = std::make_unique<TablePredictor>(a.pred_table, ctx.config.space, ctx.table_options());
  }
  const auto items = load_eval_items(a.truth, ctx);
  const auto conv = ctx.config.sa_convention;

  json report = report_header("pepspec.perturb-report");
  report["probe"] = a.probe;
  report["predictor"] = a.model.empty() ? "prediction-table" : "baseline";
  report["sa_convention"] = to_string(conv);
  report["items"] = items.size();
  std::string csv;
  if (a.probe == "nce-sweep") {
    if (a.grid.empty()) throw Error(ErrorCode::EmptyInput, "nce-sweep needs a non-empty --grid");
    const auto result = nce_calibration_sweep(*predictor, items, a.grid, conv);
    json curve = json::array();
    csv = "nce,median_sa\n";
    for (const auto& p : result.curve) {
      curve.push_back({{"nce", p.nce}, {"median_sa", p.median_sa}});
      csv += format_double(p.nce) + "," + format_double(p.median_sa) + "\n";
    }
    report["curve"] = curve;
    report["argmin_nce"] = result.argmin_nce;
  } else if (a.probe == "nce-shift") {
    report["from"] = a.from;
    report["to"] = a.to;
    const double at_from = median_sa_at_nce(*predictor, items, a.from, conv);
    const double at_to = a.from == a.to ? at_from : median_sa_at_nce(*predictor, items, a.to, conv);
    report["median_sa_from"] = at_from;
    report["median_sa_to"] = at_to;
    report["delta_sa"] = blind_nce_shift(*predictor, items, a.from, a.to, conv);
    csv = "from,to,median_sa_from,median_sa_to,delta_sa\n" + format_double(a.from) + "," + format_double(a.to) +
          "," + format_double(at_from) + "," + format_double(at_to) + "," +
          format_double(report["delta_sa"].get<double>()) + "\n";
  } else {
    const auto s = charge_perturbation(*predictor, items, ctx.config.space, ctx.config.high_sas_threshold, conv);
    report["threshold"] = ctx.config.high_sas_threshold;
    report["n"] = s.n;
    report["median_sas"] = s.median_sas;
    report["q25"] = s.q25;
    report["q75"] = s.q75;
    report["high_sas_fraction"] = s.high_sas_fraction;
    csv = "n,median_sas,q25,q75,high_sas_fraction\n" + std::to_string(s.n) + "," + format_double(s.median_sas) +
          "," + format_double(s.q25) + "," + format_double(s.q75) + "," + format_double(s.high_sas_fraction) + "\n";
  }
  write_json(a.output, report);
  ctx.outputs = {a.output};
  if (!a.csv.empty()) {
    std::ofstream out(a.csv, std::ios::binary);
    out << csv;
    out.close();
    if (out.fail()) throw Error(ErrorCode::IoError, "failed writing " + a.csv);
    ctx.outputs.push_back(a.csv);
  }
  ctx.summary["probe"] = a.probe;
}

// ---------------------------------------------------------------------------

struct AuditArgs {
  std::string train, test, input, output;
};

void collect_backbones(const std::string& path, Context& ctx, const std::string& role,
                       std::set<std::string>* train, std::set<std::string>* test) {
  SpectralTableReader reader(path, ctx.table_options());
  if (train && test) reader.tsv().require_column(columns::kSplit);
  while (next_row(reader, ctx, role)) {
    try {
      const auto rec = reader.parse_record();
      std::set<std::string>* target = train ? train : test;
      if (train && test) {
        const auto label = parse_split_label(rec.split.value_or(""));
        if (!label) {
          throw Error(ErrorCode::SchemaError,
                      "line " + std::to_string(reader.tsv().line()) + ": unknown split label", reader.tsv().line());
        }
        if (*label == SplitLabel::Val) continue;
        target = *label == SplitLabel::Train ? train : test;
      }
      target->insert(to_naked(rec.peptide));
    } catch (const Error& e) {
      ctx.row_error(e, role);
    }
  }
}

void cmd_audit(Context& ctx, const AuditArgs& a) {
  std::set<std::string> train, test;
  if (!a.input.empty()) {
    if (!a.train.empty() || !a.test.empty()) {
      throw Error(ErrorCode::ConfigError, "use either --input or --train/--test");
    }
    ctx.inputs = {a.input};
    collect_backbones(a.input, ctx, "input", &train, &test);
  } else {
    if (a.train.empty() || a.test.empty()) throw Error(ErrorCode::ConfigError, "audit-leakage needs --train and --test");
    ctx.inputs = {a.train, a.test};
    collect_backbones(a.train, ctx, "train", &train, nullptr);
    collect_backbones(a.test, ctx, "test", nullptr, &test);
  }
  const std::vector<std::string> train_v(train.begin(), train.end());
  const std::vector<std::string> test_v(test.begin(), test.end());
  const LeakageAudit audit = leakage_audit(test_v, train_v);
  json report = report_header("pepspec.leakage-audit");
  report["n_train"] = audit.n_train;
  report["n_test"] = audit.n_test;
  report["mean_min_edit"] = audit.mean_min_edit;
  report["median_min_edit"] = audit.median_min_edit;
  report["frac_exact"] = audit.frac_exact;
  report["frac_le1"] = audit.frac_le1;
  write_json(a.output, report);
  ctx.outputs = {a.output};
  ctx.summary = {{"n_train", audit.n_train}, {"n_test", audit.n_test}, {"frac_exact", audit.frac_exact}};
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string truth, output;
};

void cmd_train(Context& ctx, const TrainArgs& a) {
  ctx.inputs = {a.truth};
  TruthStream stream(a.truth, ctx);
  std::vector<TrainingRow> rows;
  std::vector<TruthRow> batch;
  while (stream.next_batch(batch)) {
    for (auto& r : batch) rows.push_back({std::move(r.record.peptide), r.record.charge, r.record.nce, std::move(r.truth)});
  }
  if (rows.empty() && stream.rows() > 0) scope_empty(a.truth);
  const BucketModel model = train(rows, ctx.config.baseline, ctx.config.space);
  model.save(a.output);
  ctx.outputs = {a.output};
  std::size_t linear = 0;
  for (const auto& b : model.buckets()) linear += b.kind == BucketFit::Kind::Linear ? 1 : 0;
  ctx.summary = {{"rows", rows.size()}, {"buckets", model.buckets().size()}, {"linear_buckets", linear},
                 {"template_buckets", model.buckets().size() - linear}};
}

struct PredictArgs {
  std::string model, input, output;
};

void cmd_predict(Context& ctx, const PredictArgs& a) {
  ctx.inputs = {a.model, a.input};
  const BucketModel model = BucketModel::load(a.model);
  SpectralTableReader reader(a.input, ctx.table_options());
  const bool with_raw = reader.has_raw_file();
  TsvWriter writer(a.output);
  ctx.outputs = {a.output};
  writer.write_row(std::span<const std::string>(prediction_header(with_raw)));
  std::size_t rows = 0, written = 0, out_of_scope = 0;
  std::vector<SpectrumRecord> batch;
  std::vector<std::vector<std::string>> lines;
  auto flush = [&] {
    lines.assign(batch.size(), {});
    parallel_for(batch.size(), [&](std::size_t i) {
      const auto& r = batch[i];
      lines[i] = prediction_fields(r.peptide, r.charge, r.nce, r.raw_file, predict(r.peptide, r.charge, r.nce, model),
                                   with_raw);
    });
    for (const auto& f : lines) writer.write_row(std::span<const std::string>(f));
    written += batch.size();
    batch.clear();
  };
  while (next_row(reader, ctx, "input")) {
    ++rows;
    try {
      auto rec = reader.parse_record();
      if (!scope_filter(rec)) {
        ++out_of_scope;
        continue;
      }
      rec.mz.clear();
      rec.intensity.clear();
      batch.push_back(std::move(rec));
    } catch (const Error& e) {
      ctx.row_error(e, "input");
    }
    if (batch.size() == kBatchSize) flush();
  }
  flush();
  writer.close();
  ctx.summary = {{"rows", rows}, {"written", written}, {"out_of_scope", out_of_scope},
                 {"malformed", ctx.malformed_count("input")}};
  if (rows > 0 && written == 0) scope_empty(a.input);
}

// ---------------------------------------------------------------------------

void print_error(std::ostream& err, std::string_view code, std::string_view message, std::size_t line) {
  json e = {{"code", code}, {"message", message}};
  e["line"] = line > 0 ? json(line) : json(nullptr);
  err << json{{"error", e}}.dump() << '\n';
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Benchmark harness for peptide MS/MS spectrum prediction.", std::string(kToolName)};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);

  std::string config_path, on_malformed, manifest;
  app.add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--on-malformed", on_malformed, "Malformed rows: skip (default) or fatal")
      ->check(CLI::IsMember({"skip", "fatal"}));
  app.add_option("--manifest", manifest, "Manifest path (default: <output>.manifest.json)");

  Context ctx;
  ctx.out = &out;
  ctx.err = &err;

  // normalize
  NormalizeArgs normalize_args;
  auto* normalize = app.add_subcommand("normalize", "Canonicalize PTMs, apply the scope filter and add metadata columns");
  normalize->add_option("-i,--input", normalize_args.input, "Spectral table")->required();
  normalize->add_option("-o,--output", normalize_args.output, "Normalized table")->required();

  // split
  SplitArgs split_args;
  std::string split_rule;
  auto* split = app.add_subcommand("split", "Assign train/val/test by MD5 bucket");
  split->add_option("-i,--input", split_args.input, "Spectral table")->required();
  split->add_option("-o,--output", split_args.output, "Table with a split column")->required();
  auto* split_rule_opt = split->add_option("--rule", split_rule, "backbone, modseq or row")
                             ->check(CLI::IsMember({"backbone", "modseq", "row"}));
  split->add_option("--report", split_args.report, "Split report JSON (counts and backbone overlap)");

  // sample
  SampleArgs sample_args;
  std::size_t quota = 0;
  std::uint64_t sample_seed = 0;
  auto* sample = app.add_subcommand("sample", "Deterministic balanced or top-N sampling");
  sample->add_option("-i,--input", sample_args.input, "Spectral table")->required();
  sample->add_option("-o,--output", sample_args.output, "Sampled table")->required();
  sample->add_flag("--balanced", sample_args.balanced, "PTM-balanced quota per split");
  auto* quota_opt = sample->add_option("--quota", quota, "Rows per split for --balanced");
  auto* top_n_opt = sample->add_option("--top-n", sample_args.top_n, "Keep the N smallest OOD rank keys");
  auto* sample_seed_opt = sample->add_option("--seed", sample_seed, "Hash seed");

  // project-truth
  ProjectArgs project_args;
  auto* project = app.add_subcommand("project-truth", "Project observed spectra into the canonical space");
  project->add_option("-i,--input", project_args.input, "Spectral table")->required();
  project->add_option("-o,--output", project_args.output, "Prediction-format table")->required();

  // evaluate
  EvaluateArgs evaluate_args;
  int resamples = 0;
  double level = 0.0;
  std::uint64_t boot_seed = 0;
  std::string sa_convention;
  auto* evaluate = app.add_subcommand("evaluate", "Score a prediction table against ground truth");
  evaluate->add_option("--truth", evaluate_args.truth, "Spectral table or projected truth")->required();
  evaluate->add_option("--pred", evaluate_args.pred, "Prediction table")->required();
  evaluate->add_option("-o,--output", evaluate_args.output, "Report JSON")->required();
  evaluate->add_option("--rows", evaluate_args.rows, "Per-row metrics TSV");
  auto* resamples_opt = evaluate->add_option("--bootstrap", resamples, "Bootstrap resamples (0 disables)");
  auto* level_opt = evaluate->add_option("--level", level, "Confidence level");
  auto* boot_seed_opt = evaluate->add_option("--seed", boot_seed, "Bootstrap seed");
  auto* conv_opt = evaluate->add_option("--sa-convention", sa_convention, "inverse_pi or two_over_pi");

  // stratify
  StratifyArgs stratify_args;
  std::vector<int> length_edges;
  double nce_width = 0.0;
  auto* stratify_cmd = app.add_subcommand("stratify", "Per-stratum medians of per-row metrics");
  stratify_cmd->add_option("--rows", stratify_args.rows, "Metric rows TSV from evaluate")->required();
  stratify_cmd->add_option("--axis", stratify_args.axis, "length, charge, ptm or nce")
      ->required()
      ->check(CLI::IsMember({"length", "charge", "ptm", "nce"}));
  stratify_cmd->add_option("-o,--output", stratify_args.output, "Report JSON")->required();
  stratify_cmd->add_option("--csv", stratify_args.csv, "Plot-ready CSV");
  stratify_cmd->add_option("--baseline-bin", stratify_args.baseline_bin, "Stratum key for delta decay");
  stratify_cmd->add_flag("--ci", stratify_args.ci, "Bootstrap CI of the median SA per stratum");
  auto* edges_opt = stratify_cmd->add_option("--length-edges", length_edges, "Length bin edges")->delimiter(',');
  auto* width_opt = stratify_cmd->add_option("--nce-bin-width", nce_width, "NCE bin width (fractional scale)");

  // perturb
  PerturbArgs perturb_args;
  double threshold = 0.0;
  std::string perturb_conv;
  auto* perturb = app.add_subcommand("perturb", "Sensitivity probes: nce-sweep, nce-shift, charge");
  perturb->add_option("probe", perturb_args.probe, "nce-sweep, nce-shift or charge")
      ->required()
      ->check(CLI::IsMember({"nce-sweep", "nce-shift", "charge"}));
  perturb->add_option("--model", perturb_args.model, "Baseline model JSON");
  perturb->add_option("--pred-table", perturb_args.pred_table, "Prediction table keyed by sequence, charge, CE");
  perturb->add_option("--truth", perturb_args.truth, "Spectral table or projected truth")->required();
  perturb->add_option("-o,--output", perturb_args.output, "Report JSON")->required();
  perturb->add_option("--csv", perturb_args.csv, "Plot-ready CSV");
  perturb->add_option("--grid", perturb_args.grid, "NCE grid for nce-sweep")->delimiter(',');
  perturb->add_option("--from", perturb_args.from, "Source NCE for nce-shift");
  perturb->add_option("--to", perturb_args.to, "Target NCE for nce-shift");
  auto* threshold_opt = perturb->add_option("--threshold", threshold, "High-SAS threshold for charge");
  auto* perturb_conv_opt = perturb->add_option("--sa-convention", perturb_conv, "inverse_pi or two_over_pi");

  // audit-leakage
  AuditArgs audit_args;
  auto* audit = app.add_subcommand("audit-leakage", "Nearest-train edit distance of test backbones");
  audit->add_option("--train", audit_args.train, "Train table");
  audit->add_option("--test", audit_args.test, "Test table");
  audit->add_option("--input", audit_args.input, "Table with a split column");
  audit->add_option("-o,--output", audit_args.output, "Report JSON")->required();

  // train-baseline / predict-baseline
  TrainArgs train_args;
  int min_bucket = 0;
  double ridge = 0.0;
  int length_snap = 0, charge_snap = 0;
  auto* train_cmd = app.add_subcommand("train-baseline", "Fit the bucketed linear baseline");
  train_cmd->add_option("--truth", train_args.truth, "Spectral table or projected truth")->required();
  train_cmd->add_option("-o,--output", train_args.output, "Model JSON")->required();
  auto* min_bucket_opt = train_cmd->add_option("--min-bucket-count", min_bucket, "Rows needed for a linear fit");
  auto* ridge_opt = train_cmd->add_option("--ridge", ridge, "Ridge penalty on non-intercept features");
  auto* length_snap_opt = train_cmd->add_option("--length-snap-limit", length_snap, "Max |dL| when snapping (-1: none)");
  auto* charge_snap_opt = train_cmd->add_option("--charge-snap-limit", charge_snap, "Max |dz| when snapping (-1: none)");

  PredictArgs predict_args;
  auto* predict_cmd = app.add_subcommand("predict-baseline", "Predict canonical vectors with a trained baseline");
  predict_cmd->add_option("--model", predict_args.model, "Model JSON")->required();
  predict_cmd->add_option("-i,--input", predict_args.input, "Table with sequence, charge and CE")->required();
  predict_cmd->add_option("-o,--output", predict_args.output, "Prediction table")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    print_error(err, "UsageError", e.what(), 0);
    return kExitError;
  }

  try {
    RunConfig& c = ctx.config;
    if (!config_path.empty()) c = RunConfig::load(config_path);
    if (!on_malformed.empty()) c.skip_malformed = on_malformed == "skip";
    if (!manifest.empty()) ctx.manifest_path = manifest;
    ctx.args = args;

    auto parse_conv = [](const std::string& text) {
      auto conv = parse_sa_convention(text);
      if (!conv) throw Error(ErrorCode::ConfigError, "unknown SA convention '" + text + "'");
      return *conv;
    };

    if (normalize->parsed()) {
      ctx.command = "normalize";
      cmd_normalize(ctx, normalize_args);
    } else if (split->parsed()) {
      ctx.command = "split";
      if (split_rule_opt->count()) c.split_rule = *parse_split_rule(split_rule);
      split_args.rule = std::string(to_string(c.split_rule));
      cmd_split(ctx, split_args);
    } else if (sample->parsed()) {
      ctx.command = "sample";
      if (quota_opt->count()) c.quota = quota;
      sample_args.has_top_n = top_n_opt->count() > 0;
      if (sample_seed_opt->count()) {
        if (sample_args.balanced) {
          c.seed = sample_seed;
        } else {
          c.ood_seed = sample_seed;
        }
      }
      cmd_sample(ctx, sample_args);
    } else if (project->parsed()) {
      ctx.command = "project-truth";
      cmd_project_truth(ctx, project_args);
    } else if (evaluate->parsed()) {
      ctx.command = "evaluate";
      if (resamples_opt->count()) c.bootstrap.resamples = resamples;
      if (level_opt->count()) c.bootstrap.level = level;
      if (boot_seed_opt->count()) c.bootstrap.seed = boot_seed;
      if (conv_opt->count()) c.sa_convention = parse_conv(sa_convention);
      if (c.bootstrap.resamples < 0) throw Error(ErrorCode::ConfigError, "--bootstrap must be non-negative");
      if (c.bootstrap.resamples > 0) c.validate();
      cmd_evaluate(ctx, evaluate_args);
    } else if (stratify_cmd->parsed()) {
      ctx.command = "stratify";
      if (edges_opt->count()) c.length_edges = length_edges;
      if (width_opt->count()) c.nce_bin_width = nce_width;
      c.validate();
      cmd_stratify(ctx, stratify_args);
    } else if (perturb->parsed()) {
      ctx.command = "perturb";
      if (threshold_opt->count()) c.high_sas_threshold = threshold;
      if (perturb_conv_opt->count()) c.sa_convention = parse_conv(perturb_conv);
      c.validate();
      cmd_perturb(ctx, perturb_args);
    } else if (audit->parsed()) {
      ctx.command = "audit-leakage";
      cmd_audit(ctx, audit_args);
    } else if (train_cmd->parsed()) {
      ctx.command = "train-baseline";
      if (min_bucket_opt->count()) c.baseline.min_bucket_count = min_bucket;
      if (ridge_opt->count()) c.baseline.ridge_lambda = ridge;
      if (length_snap_opt->count()) c.baseline.length_snap_limit = length_snap;
      if (charge_snap_opt->count()) c.baseline.charge_snap_limit = charge_snap;
      c.validate();
      cmd_train(ctx, train_args);
    } else if (predict_cmd->parsed()) {
      ctx.command = "predict-baseline";
      cmd_predict(ctx, predict_args);
    }
    write_manifest(ctx);
    out << json{{"command", ctx.command}, {"summary", ctx.summary}}.dump() << '\n';
    return 0;
  } catch (const Error& e) {
    print_error(err, to_string(e.code()), e.what(), e.line());
    return kExitError;
  } catch (const std::exception& e) {
    print_error(err, "InternalError", e.what(), 0);
    return kExitError;
  }
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace pepspec
