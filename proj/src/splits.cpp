#include "pepspec/splits.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <memory>
#include <map>
#include <string>

#include "pepspec/error.hpp"
#include "pepspec/format.hpp"
#include "pepspec/metrics.hpp"
#include "pepspec/parallel.hpp"

namespace pepspec {
namespace {

bool candidate_less(const Candidate& a, const Candidate& b) {
  if (a.key != b.key) return a.key < b.key;
  if (a.tiebreak != b.tiebreak) return a.tiebreak < b.tiebreak;
  return a.id < b.id;
}

}  // namespace

std::string_view to_string(SplitLabel label) {
  switch (label) {
    case SplitLabel::Train: return "train";
    case SplitLabel::Val: return "val";
    case SplitLabel::Test: return "test";
  }
  return "train";
}

std::optional<SplitLabel> parse_split_label(std::string_view text) {
  if (text == "train") return SplitLabel::Train;
  if (text == "val" || text == "validation") return SplitLabel::Val;
  if (text == "test") return SplitLabel::Test;
  return std::nullopt;
}

std::string_view to_string(SplitRule rule) {
  switch (rule) {
    case SplitRule::Backbone: return "backbone";
    case SplitRule::ModifiedSequence: return "modseq";
    case SplitRule::RowRandom: return "row";
  }
  return "backbone";
}

std::optional<SplitRule> parse_split_rule(std::string_view text) {
  if (text == "backbone") return SplitRule::Backbone;
  if (text == "modseq" || text == "modified-sequence") return SplitRule::ModifiedSequence;
  if (text == "row" || text == "random") return SplitRule::RowRandom;
  return std::nullopt;
}

Md5Digest md5(std::string_view bytes) {
  Md5Digest digest{};
  unsigned int size = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &size, EVP_md5(), nullptr) != 1 ||
      size != digest.size()) {
    throw Error(ErrorCode::IoError, "MD5 computation failed");
  }
  return digest;
}

Md5Digest md5_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_md5(), nullptr) != 1) {
    throw Error(ErrorCode::IoError, "MD5 computation failed");
  }
  std::vector<char> buffer(1 << 16);
  while (in) {
    in.read(buffer.data(), static_cast<std::streamsize>(buffer.size()));
    if (in.gcount() > 0 && EVP_DigestUpdate(ctx.get(), buffer.data(), static_cast<std::size_t>(in.gcount())) != 1) {
      throw Error(ErrorCode::IoError, "MD5 computation failed");
    }
  }
  if (in.bad()) throw Error(ErrorCode::IoError, "read error in " + path.string());
  Md5Digest digest{};
  unsigned int size = 0;
  if (EVP_DigestFinal_ex(ctx.get(), digest.data(), &size) != 1 || size != digest.size()) {
    throw Error(ErrorCode::IoError, "MD5 computation failed");
  }
  return digest;
}

std::string to_hex(const Md5Digest& digest) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(32);
  for (auto byte : digest) {
    out += kHex[byte >> 4];
    out += kHex[byte & 0xF];
  }
  return out;
}

int md5_bucket(std::string_view key) {
  unsigned remainder = 0;
  for (auto byte : md5(key)) remainder = (remainder * 256 + byte) % 100;
  return static_cast<int>(remainder);
}

SplitLabel label_for_bucket(int bucket) {
  if (bucket < 80) return SplitLabel::Train;
  if (bucket < 90) return SplitLabel::Val;
  return SplitLabel::Test;
}

std::string split_hash_input(const SpectrumRecord& record, SplitRule rule) {
  switch (rule) {
    case SplitRule::Backbone: return to_naked(record.peptide);
    case SplitRule::ModifiedSequence: return to_canonical_string(record.peptide);
    case SplitRule::RowRandom: {
      if (!record.sample_key && !record.row_index) {
        throw Error(ErrorCode::MissingKeyColumn, "row-level split needs sample_key or a row index");
      }
      std::string key = record.sample_key.value_or("");
      if (record.sample_key && record.row_index) key += '|';
      if (record.row_index) key += std::to_string(*record.row_index);
      return key;
    }
  }
  return {};
}

SplitAssignment assign_split(const SpectrumRecord& record, SplitRule rule) {
  SplitAssignment out;
  out.rule = rule;
  out.bucket = md5_bucket(split_hash_input(record, rule));
  out.label = label_for_bucket(out.bucket);
  return out;
}

SamplingKey SamplingKey::from_digest(const Md5Digest& digest) {
  SamplingKey key;
  for (int i = 0; i < 8; ++i) key.hi = (key.hi << 8) | digest[i];
  for (int i = 8; i < 16; ++i) key.lo = (key.lo << 8) | digest[i];
  return key;
}

std::string SamplingKey::hex() const {
  char buf[33];
  std::snprintf(buf, sizeof(buf), "%016llx%016llx", static_cast<unsigned long long>(hi),
                static_cast<unsigned long long>(lo));
  return buf;
}

std::string format_ce(double ce) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f", ce);
  return buf;
}

SamplingKey sampling_key(std::string_view naked, int charge, double ce, std::uint64_t seed) {
  std::string input(naked);
  input += '|';
  input += std::to_string(charge);
  input += '|';
  input += format_ce(ce);
  input += '|';
  input += std::to_string(seed);
  return SamplingKey::from_digest(md5(input));
}

SamplingKey ood_rank_key(std::string_view naked, int charge, std::uint64_t seed) {
  std::string input(naked);
  input += '|';
  input += std::to_string(charge);
  input += '|';
  input += std::to_string(seed);
  return SamplingKey::from_digest(md5(input));
}

std::string record_fingerprint(const SpectrumRecord& record) {
  std::string out = to_canonical_string(record.peptide);
  auto field = [&](const std::string& s) {
    out += '\t';
    out += s;
  };
  auto list = [&](const std::vector<double>& values) {
    std::string s;
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (i) s += ';';
      s += format_double(values[i]);
    }
    field(s);
  };
  field(std::to_string(record.charge));
  field(format_double(record.nce));
  field(record.raw_file.value_or(""));
  field(record.sample_key.value_or(""));
  field(record.andromeda_score ? format_double(*record.andromeda_score) : "");
  field(record.mass_error_ppm ? format_double(*record.mass_error_ppm) : "");
  list(record.mz);
  list(record.intensity);
  return out;
}

void TopNSelector::push(Candidate candidate) {
  if (n_ == 0) return;
  if (heap_.size() < n_) {
    heap_.push_back(std::move(candidate));
    std::push_heap(heap_.begin(), heap_.end(), candidate_less);
    return;
  }
  if (!candidate_less(candidate, heap_.front())) return;
  std::pop_heap(heap_.begin(), heap_.end(), candidate_less);
  heap_.back() = std::move(candidate);
  std::push_heap(heap_.begin(), heap_.end(), candidate_less);
}

std::vector<Candidate> TopNSelector::take() {
  std::vector<Candidate> out = std::move(heap_);
  heap_.clear();
  std::sort(out.begin(), out.end(), candidate_less);
  return out;
}

std::array<std::size_t, 4> balanced_quota(std::size_t quota) {
  if (quota == 0) throw Error(ErrorCode::QuotaZero, "balanced sampling quota must be positive");
  std::array<std::size_t, 4> out{};
  out[0] = quota / 2;
  const std::size_t modified = quota - out[0];
  // Equal thirds: floor for each, then hand out the remainder front to back
  // (all three remainders are equal, so largest remainder reduces to order).
  const std::size_t base = modified / 3;
  std::size_t left = modified - 3 * base;
  for (std::size_t i = 1; i < 4; ++i) {
    out[i] = base + (left > 0 ? 1 : 0);
    if (left > 0) --left;
  }
  return out;
}

BalancedSampler::BalancedSampler(std::size_t quota) {
  for (auto q : balanced_quota(quota)) buckets_.emplace_back(q);
}

void BalancedSampler::push(PtmBucket bucket, Candidate candidate) {
  buckets_[static_cast<std::size_t>(bucket)].push(std::move(candidate));
}

std::vector<Candidate> BalancedSampler::take() {
  std::vector<Candidate> out;
  for (auto& bucket : buckets_) {
    auto chosen = bucket.take();
    std::move(chosen.begin(), chosen.end(), std::back_inserter(out));
  }
  return out;
}

std::vector<std::size_t> balanced_sample(std::span<const SpectrumRecord> records, std::size_t quota,
                                         std::uint64_t seed) {
  BalancedSampler sampler(quota);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    sampler.push(ptm_metadata(r.peptide).bucket,
                 {sampling_key(to_naked(r.peptide), r.charge, r.nce, seed), record_fingerprint(r), i});
  }
  std::vector<std::size_t> out;
  for (const auto& c : sampler.take()) out.push_back(c.id);
  return out;
}

std::vector<std::size_t> top_n(std::span<const SpectrumRecord> records, std::size_t n,
                               std::uint64_t seed) {
  TopNSelector selector(n);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    selector.push({ood_rank_key(to_naked(r.peptide), r.charge, seed), record_fingerprint(r), i});
  }
  std::vector<std::size_t> out;
  for (const auto& c : selector.take()) out.push_back(c.id);
  return out;
}

void SplitBackbones::add(SplitLabel label, std::string backbone) {
  sets_[static_cast<std::size_t>(label)].insert(std::move(backbone));
}

const std::unordered_set<std::string>& SplitBackbones::set(SplitLabel label) const {
  return sets_[static_cast<std::size_t>(label)];
}

DisjointReport verify_disjoint(const SplitBackbones& splits) {
  DisjointReport report;
  std::vector<std::string> shared;
  auto overlap = [&](SplitLabel a, SplitLabel b) {
    const auto& small = splits.set(a).size() <= splits.set(b).size() ? splits.set(a) : splits.set(b);
    const auto& large = &small == &splits.set(a) ? splits.set(b) : splits.set(a);
    std::size_t count = 0;
    for (const auto& backbone : small) {
      if (large.count(backbone)) {
        ++count;
        shared.push_back(backbone);
      }
    }
    return count;
  };
  report.train_val = overlap(SplitLabel::Train, SplitLabel::Val);
  report.train_test = overlap(SplitLabel::Train, SplitLabel::Test);
  report.val_test = overlap(SplitLabel::Val, SplitLabel::Test);
  std::sort(shared.begin(), shared.end());
  shared.erase(std::unique(shared.begin(), shared.end()), shared.end());
  if (shared.size() > 10) shared.resize(10);
  report.examples = std::move(shared);
  return report;
}

int edit_distance(std::string_view a, std::string_view b) {
  std::vector<int> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = static_cast<int>(i);
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const int substitute = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, substitute});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

int edit_distance_bounded(std::string_view a, std::string_view b, int limit) {
  const int la = static_cast<int>(a.size());
  const int lb = static_cast<int>(b.size());
  if (std::abs(la - lb) >= limit) return limit;
  std::vector<int> prev(b.size() + 1), cur(b.size() + 1);
  for (int j = 0; j <= lb; ++j) prev[j] = j;
  for (int i = 1; i <= la; ++i) {
    cur[0] = i;
    int row_min = cur[0];
    for (int j = 1; j <= lb; ++j) {
      const int substitute = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, substitute});
      row_min = std::min(row_min, cur[j]);
    }
    // Row minima never decrease, so the final distance is at least row_min.
    if (row_min >= limit) return limit;
    std::swap(prev, cur);
  }
  return std::min(prev[lb], limit);
}

LeakageAudit leakage_audit(std::span<const std::string> test_backbones,
                           std::span<const std::string> train_backbones) {
  std::vector<std::string> test(test_backbones.begin(), test_backbones.end());
  std::sort(test.begin(), test.end());
  test.erase(std::unique(test.begin(), test.end()), test.end());
  std::unordered_set<std::string> train_set(train_backbones.begin(), train_backbones.end());
  if (test.empty() || train_set.empty()) {
    throw Error(ErrorCode::EmptyInput, "leakage audit needs non-empty test and train sets");
  }
  std::map<int, std::vector<std::string_view>> by_length;
  int max_length = 0;
  for (const auto& s : train_set) {
    by_length[static_cast<int>(s.size())].push_back(s);
    max_length = std::max(max_length, static_cast<int>(s.size()));
  }
  for (auto& [len, list] : by_length) std::sort(list.begin(), list.end());

  std::vector<int> best(test.size());
  parallel_for(test.size(), [&](std::size_t i) {
    const std::string& t = test[i];
    if (train_set.count(t)) {
      best[i] = 0;
      return;
    }
    const int lt = static_cast<int>(t.size());
    int current = std::max(lt, max_length) + 1;
    auto scan = [&](int len) {
      auto it = by_length.find(len);
      if (it == by_length.end()) return;
      for (auto s : it->second) {
        current = std::min(current, edit_distance_bounded(t, s, current));
        if (current <= 1) return;
      }
    };
    // Length difference is a lower bound, so stop once it reaches the best.
    for (int d = 0; d < current; ++d) {
      scan(lt + d);
      if (d > 0 && d < current) scan(lt - d);
    }
    best[i] = current;
  });

  LeakageAudit audit;
  audit.n_test = test.size();
  audit.n_train = train_set.size();
  std::vector<double> distances(best.begin(), best.end());
  double sum = 0.0;
  std::size_t exact = 0, le1 = 0;
  for (int d : best) {
    sum += d;
    exact += d == 0 ? 1 : 0;
    le1 += d <= 1 ? 1 : 0;
  }
  const double n = static_cast<double>(best.size());
  audit.mean_min_edit = sum / n;
  audit.median_min_edit = median(std::move(distances));
  audit.frac_exact = static_cast<double>(exact) / n;
  audit.frac_le1 = static_cast<double>(le1) / n;
  return audit;
}

}  // namespace pepspec
