#include "pepspec/baseline.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include "json.hpp"
#include <sstream>

#include "pepspec/error.hpp"
#include "pepspec/parallel.hpp"

namespace pepspec {
namespace {

constexpr int kModelFormatVersion = 1;
constexpr std::string_view kModelFormat = "pepspec-baseline";

using RowRef = const TrainingRow*;

std::array<int, 3> features_at(const ModifiedPeptide& peptide, int position) {
  return {0, 1 + residue_token(peptide, position - 1),
          1 + kResidueTokens + residue_token(peptide, position)};
}

// Rows in a canonical order so floating-point accumulation is reproducible.
void sort_rows(std::vector<RowRef>& rows) {
  std::vector<std::pair<std::string, RowRef>> keyed;
  keyed.reserve(rows.size());
  for (RowRef r : rows) keyed.emplace_back(to_canonical_string(r->peptide), r);
  std::stable_sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    return a.second->truth.values < b.second->truth.values;
  });
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = keyed[i].second;
}

BucketFit fit_bucket(const BucketKey& key, std::vector<RowRef> rows, const BaselineConfig& config,
                     const CanonicalSpace& space) {
  sort_rows(rows);
  BucketFit fit;
  fit.key = key;
  fit.rows = rows.size();
  const std::size_t dim = static_cast<std::size_t>(space.dim());

  if (static_cast<int>(rows.size()) < config.min_bucket_count) {
    fit.kind = BucketFit::Kind::Template;
    fit.template_values.assign(dim, 0.0);
    for (RowRef r : rows) {
      for (std::size_t i = 0; i < dim; ++i) fit.template_values[i] += r->truth.values[i];
    }
    for (double& v : fit.template_values) v = std::max(0.0, v / static_cast<double>(rows.size()));
    return fit;
  }

  fit.kind = BucketFit::Kind::Linear;
  fit.coefficients.assign(dim, {});
  const int max_position = std::min(key.length - 1, space.positions());
  const int max_charge = std::min(key.charge, space.z_frag_max);
  const int slots_per_position = 2 * max_charge;

  for (int p = 1; p <= max_position; ++p) {
    std::vector<std::size_t> slots;
    for (IonType t : {IonType::B, IonType::Y}) {
      for (int z = 1; z <= max_charge; ++z) slots.push_back(canonical_index({p, t, z}, space));
    }
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(kFeatureCount, kFeatureCount);
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(kFeatureCount, slots_per_position);
    for (RowRef r : rows) {
      const auto f = features_at(r->peptide, p);
      for (int a : f) {
        for (int b : f) gram(a, b) += 1.0;
        for (int s = 0; s < slots_per_position; ++s) rhs(a, s) += r->truth.values[slots[s]];
      }
    }
    for (int i = 1; i < kFeatureCount; ++i) gram(i, i) += config.ridge_lambda;
    const Eigen::MatrixXd beta = gram.ldlt().solve(rhs);
    for (int s = 0; s < slots_per_position; ++s) {
      auto& coef = fit.coefficients[slots[s]];
      coef.resize(kFeatureCount);
      for (int i = 0; i < kFeatureCount; ++i) coef[i] = beta(i, s);
    }
  }
  return fit;
}

bool slot_in_bucket(const IonId& ion, const BucketKey& key, const CanonicalSpace& space) {
  return ion.position <= std::min(key.length - 1, space.positions()) &&
         ion.charge <= std::min(key.charge, space.z_frag_max);
}

}  // namespace

int residue_token(const ModifiedPeptide& peptide, int i) {
  const char residue = peptide.residues[i];
  if (const auto& mod = peptide.site_mods[i]) {
    switch (*mod) {
      case Unimod::Carbamidomethyl: return 20;
      case Unimod::Oxidation: return 21;
      case Unimod::Acetyl: return 22;
    }
  }
  return AminoAcidTable::index(residue);
}

BucketModel::BucketModel(CanonicalSpace space, BaselineConfig config, std::vector<BucketFit> buckets)
    : space_(space), config_(config), buckets_(std::move(buckets)) {
  std::sort(buckets_.begin(), buckets_.end(),
            [](const BucketFit& a, const BucketFit& b) { return a.key < b.key; });
  for (const auto& b : buckets_) ce_grid_.push_back(b.key.ce);
  std::sort(ce_grid_.begin(), ce_grid_.end());
  ce_grid_.erase(std::unique(ce_grid_.begin(), ce_grid_.end()), ce_grid_.end());
}

BucketModel train(std::span<const TrainingRow> rows, const BaselineConfig& config,
                  const CanonicalSpace& space) {
  space.validate();
  if (rows.empty()) throw Error(ErrorCode::EmptyTraining, "no training rows");
  if (config.min_bucket_count < 1 || !(config.ridge_lambda >= 0.0)) {
    throw Error(ErrorCode::ConfigError, "min_bucket_count must be >= 1 and ridge_lambda >= 0");
  }
  std::map<BucketKey, std::vector<RowRef>> groups;
  for (const auto& row : rows) {
    if (row.truth.values.size() != static_cast<std::size_t>(space.dim())) {
      throw Error(ErrorCode::LayoutMismatch, "training vector does not match the canonical space");
    }
    groups[{row.peptide.length(), row.charge, row.ce}].push_back(&row);
  }
  std::vector<std::pair<BucketKey, std::vector<RowRef>>> work(groups.begin(), groups.end());
  std::vector<BucketFit> fits(work.size());
  parallel_for(work.size(), [&](std::size_t i) {
    fits[i] = fit_bucket(work[i].first, std::move(work[i].second), config, space);
  });
  return BucketModel(space, config, std::move(fits));
}

double ce_snap(double query_ce, const BucketModel& model) {
  const auto& grid = model.ce_grid();
  if (grid.empty()) throw Error(ErrorCode::EmptyModel, "model has no trained buckets");
  double best = grid.front();
  double best_gap = std::abs(query_ce - best);
  for (double ce : grid) {
    const double gap = std::abs(query_ce - ce);
    if (gap < best_gap) {
      best = ce;
      best_gap = gap;
    }
  }
  return best;
}

const BucketFit* select_bucket(int length, int charge, double ce, const BucketModel& model) {
  const double snapped = ce_snap(ce, model);
  const BucketFit* best = nullptr;
  std::pair<int, int> best_gap;
  for (const auto& b : model.buckets()) {
    if (b.key.ce != snapped) continue;
    const std::pair<int, int> gap{std::abs(b.key.length - length), std::abs(b.key.charge - charge)};
    // Buckets are sorted by (length, charge), so the first minimum wins ties.
    if (!best || gap < best_gap) {
      best = &b;
      best_gap = gap;
    }
  }
  const auto& cfg = model.config();
  if (best && ((cfg.length_snap_limit >= 0 && best_gap.first > cfg.length_snap_limit) ||
               (cfg.charge_snap_limit >= 0 && best_gap.second > cfg.charge_snap_limit))) {
    return nullptr;
  }
  return best;
}

CanonicalVector predict(const ModifiedPeptide& peptide, int charge, double ce,
                        const BucketModel& model) {
  if (model.empty()) throw Error(ErrorCode::EmptyModel, "model has no trained buckets");
  const CanonicalSpace& space = model.space();
  Mask mask = valid_mask(peptide, charge, space);
  std::vector<double> values(static_cast<std::size_t>(space.dim()), 0.0);
  if (const BucketFit* bucket = select_bucket(peptide.length(), charge, ce, model)) {
    for (std::size_t slot = 0; slot < values.size(); ++slot) {
      if (!mask[slot]) continue;
      const IonId ion = ion_at(slot, space);
      if (!slot_in_bucket(ion, bucket->key, space)) continue;
      if (bucket->kind == BucketFit::Kind::Template) {
        values[slot] = bucket->template_values[slot];
        continue;
      }
      const auto& coef = bucket->coefficients[slot];
      if (coef.empty()) continue;
      double v = 0.0;
      for (int f : features_at(peptide, ion.position)) v += coef[f];
      values[slot] = v;
    }
  }
  return finalize_canonical(std::move(values), std::move(mask));
}

std::string BucketModel::to_json() const {
  nlohmann::json doc;
  doc["format"] = kModelFormat;
  doc["version"] = kModelFormatVersion;
  doc["space"] = {{"l_ref", space_.l_ref}, {"z_frag_max", space_.z_frag_max}};
  doc["config"] = {{"min_bucket_count", config_.min_bucket_count},
                   {"ridge_lambda", config_.ridge_lambda},
                   {"length_snap_limit", config_.length_snap_limit},
                   {"charge_snap_limit", config_.charge_snap_limit}};
  doc["feature_tokens"] = std::string(AminoAcidTable::kResidues) + ",C[UNIMOD:4],M[UNIMOD:35],K[UNIMOD:1]";
  auto& buckets = doc["buckets"] = nlohmann::json::array();
  for (const auto& b : buckets_) {
    nlohmann::json entry;
    entry["length"] = b.key.length;
    entry["charge"] = b.key.charge;
    entry["ce"] = b.key.ce;
    entry["rows"] = b.rows;
    if (b.kind == BucketFit::Kind::Template) {
      entry["kind"] = "template";
      entry["values"] = b.template_values;
    } else {
      entry["kind"] = "linear";
      auto& slots = entry["slots"] = nlohmann::json::array();
      for (std::size_t i = 0; i < b.coefficients.size(); ++i) {
        if (b.coefficients[i].empty()) continue;
        slots.push_back({{"index", i}, {"coefficients", b.coefficients[i]}});
      }
    }
    buckets.push_back(std::move(entry));
  }
  return doc.dump();
}

BucketModel BucketModel::from_json(std::string_view text) {
  try {
    const auto doc = nlohmann::json::parse(text);
    if (doc.at("format").get<std::string>() != kModelFormat ||
        doc.at("version").get<int>() != kModelFormatVersion) {
      throw Error(ErrorCode::SchemaError, "unsupported model format or version");
    }
    CanonicalSpace space{doc.at("space").at("l_ref").get<int>(),
                         doc.at("space").at("z_frag_max").get<int>()};
    space.validate();
    BaselineConfig config;
    const auto& c = doc.at("config");
    config.min_bucket_count = c.at("min_bucket_count").get<int>();
    config.ridge_lambda = c.at("ridge_lambda").get<double>();
    config.length_snap_limit = c.value("length_snap_limit", -1);
    config.charge_snap_limit = c.value("charge_snap_limit", -1);
    const auto dim = static_cast<std::size_t>(space.dim());
    std::vector<BucketFit> fits;
    for (const auto& entry : doc.at("buckets")) {
      BucketFit fit;
      fit.key = {entry.at("length").get<int>(), entry.at("charge").get<int>(),
                 entry.at("ce").get<double>()};
      fit.rows = entry.at("rows").get<std::size_t>();
      const auto kind = entry.at("kind").get<std::string>();
      if (kind == "template") {
        fit.kind = BucketFit::Kind::Template;
        fit.template_values = entry.at("values").get<std::vector<double>>();
        if (fit.template_values.size() != dim) throw Error(ErrorCode::SchemaError, "template size mismatch");
      } else if (kind == "linear") {
        fit.kind = BucketFit::Kind::Linear;
        fit.coefficients.assign(dim, {});
        for (const auto& slot : entry.at("slots")) {
          const auto index = slot.at("index").get<std::size_t>();
          auto coef = slot.at("coefficients").get<std::vector<double>>();
          if (index >= dim || coef.size() != static_cast<std::size_t>(kFeatureCount)) {
            throw Error(ErrorCode::SchemaError, "bad linear slot in model");
          }
          fit.coefficients[index] = std::move(coef);
        }
      } else {
        throw Error(ErrorCode::SchemaError, "unknown bucket kind '" + kind + "'");
      }
      fits.push_back(std::move(fit));
    }
    return BucketModel(space, config, std::move(fits));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaError, std::string("malformed model file: ") + e.what());
  }
}

void BucketModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << to_json() << '\n';
}

BucketModel BucketModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return from_json(buffer.str());
}

}  // namespace pepspec
