#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "pepspec/record.hpp"

namespace pepspec {

enum class SplitLabel : std::uint8_t { Train, Val, Test };
enum class SplitRule : std::uint8_t { Backbone, ModifiedSequence, RowRandom };

std::string_view to_string(SplitLabel label);
std::optional<SplitLabel> parse_split_label(std::string_view text);
std::string_view to_string(SplitRule rule);
std::optional<SplitRule> parse_split_rule(std::string_view text);

struct SplitAssignment {
  SplitLabel label = SplitLabel::Train;
  int bucket = 0;
  SplitRule rule = SplitRule::Backbone;
};

using Md5Digest = std::array<std::uint8_t, 16>;

Md5Digest md5(std::string_view bytes);
Md5Digest md5_file(const std::filesystem::path& path);
std::string to_hex(const Md5Digest& digest);

// Full 16-byte digest read as a big-endian integer, modulo 100.
int md5_bucket(std::string_view key);

// 0-79 Train, 80-89 Val, 90-99 Test.
SplitLabel label_for_bucket(int bucket);

// Hash input per rule: naked sequence, canonical modified sequence, or the
// row identity ("sample_key|row_index", either part alone when the other is
// missing). RowRandom without either throws MissingKeyColumn.
std::string split_hash_input(const SpectrumRecord& record, SplitRule rule);
SplitAssignment assign_split(const SpectrumRecord& record, SplitRule rule);

// 128-bit MD5 digest ordered as a big-endian unsigned integer.
struct SamplingKey {
  std::uint64_t hi = 0;
  std::uint64_t lo = 0;

  static SamplingKey from_digest(const Md5Digest& digest);
  std::string hex() const;

  friend auto operator<=>(const SamplingKey&, const SamplingKey&) = default;
};

// Collision energy rendered with exactly four decimals inside hash inputs.
std::string format_ce(double ce);

// MD5("naked|charge|ce|seed").
SamplingKey sampling_key(std::string_view naked, int charge, double ce, std::uint64_t seed);

inline constexpr std::uint64_t kOodSeed = 42;

// MD5("naked|charge|seed").
SamplingKey ood_rank_key(std::string_view naked, int charge, std::uint64_t seed = kOodSeed);

// Total-order tiebreak for records sharing a sampling key: every field of the
// record serialized in a fixed order.
std::string record_fingerprint(const SpectrumRecord& record);

struct Candidate {
  SamplingKey key;
  std::string tiebreak;
  std::size_t id = 0;
};

// Keeps the n smallest candidates by (key, tiebreak, id) in O(n) memory.
class TopNSelector {
 public:
  explicit TopNSelector(std::size_t n) : n_(n) {}

  void push(Candidate candidate);
  std::size_t size() const noexcept { return heap_.size(); }
  // Ascending by (key, tiebreak).
  std::vector<Candidate> take();

 private:
  std::size_t n_;
  std::vector<Candidate> heap_;
};

// Per-bucket quotas in Unmod, Ox, Cam, Ace order: Unmod gets quota / 2, the
// rest is split over the three PTM buckets by largest remainder (ties to the
// earlier bucket).
std::array<std::size_t, 4> balanced_quota(std::size_t quota);

class BalancedSampler {
 public:
  explicit BalancedSampler(std::size_t quota);

  void push(PtmBucket bucket, Candidate candidate);
  // Selected candidates, grouped Unmod, Ox, Cam, Ace, each ascending by key.
  std::vector<Candidate> take();

 private:
  std::vector<TopNSelector> buckets_;
};

// Indices of the records chosen by the balanced sampler (quota for one split).
std::vector<std::size_t> balanced_sample(std::span<const SpectrumRecord> records, std::size_t quota,
                                         std::uint64_t seed);

// Indices of the n records with the smallest OOD rank key.
std::vector<std::size_t> top_n(std::span<const SpectrumRecord> records, std::size_t n,
                               std::uint64_t seed = kOodSeed);

class SplitBackbones {
 public:
  void add(SplitLabel label, std::string backbone);
  const std::unordered_set<std::string>& set(SplitLabel label) const;

 private:
  std::array<std::unordered_set<std::string>, 3> sets_;
};

struct DisjointReport {
  std::size_t train_val = 0;
  std::size_t train_test = 0;
  std::size_t val_test = 0;
  // Up to 10 shared backbones, sorted.
  std::vector<std::string> examples;

  std::size_t total() const noexcept { return train_val + train_test + val_test; }
};

DisjointReport verify_disjoint(const SplitBackbones& splits);

// Levenshtein distance with unit costs.
int edit_distance(std::string_view a, std::string_view b);
// Exact distance when it is below limit, otherwise limit.
int edit_distance_bounded(std::string_view a, std::string_view b, int limit);

struct LeakageAudit {
  double mean_min_edit = 0.0;
  double median_min_edit = 0.0;
  double frac_exact = 0.0;
  double frac_le1 = 0.0;
  std::size_t n_test = 0;
  std::size_t n_train = 0;
};

// Per distinct test backbone, the minimum distance to any train backbone.
LeakageAudit leakage_audit(std::span<const std::string> test_backbones,
                           std::span<const std::string> train_backbones);

}  // namespace pepspec
