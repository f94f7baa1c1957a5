#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>

#include "pepspec/error.hpp"
#include "pepspec/splits.hpp"
#include "synthetic.hpp"

using namespace pepspec;

namespace {

int brute_edit(std::string_view a, std::string_view b) {
  if (a.empty()) return static_cast<int>(b.size());
  if (b.empty()) return static_cast<int>(a.size());
  const int sub = brute_edit(a.substr(1), b.substr(1)) + (a[0] == b[0] ? 0 : 1);
  return std::min({sub, brute_edit(a.substr(1), b) + 1, brute_edit(a, b.substr(1)) + 1});
}

SpectrumRecord record(std::string_view seq, int charge = 2, double nce = 25.0) {
  SpectrumRecord r;
  r.peptide = parse_modified_sequence(seq);
  r.charge = charge;
  r.nce = nce;
  return r;
}

// Abundant fixture: every PTM bucket has many distinct records.
std::vector<SpectrumRecord> bucket_corpus(synth::Rng& rng, std::size_t per_bucket, std::size_t ox_rows) {
  std::vector<SpectrumRecord> out;
  auto add = [&](std::string seq) {
    SpectrumRecord r;
    r.peptide = parse_modified_sequence(seq);
    r.charge = synth::uniform_int(rng, 1, 4);
    r.nce = 25.0;
    out.push_back(r);
  };
  for (std::size_t i = 0; i < per_bucket; ++i) {
    const std::string core = synth::random_backbone(rng, 8);
    std::string plain;
    for (char c : core) plain += (c == 'C' || c == 'M' || c == 'K') ? 'A' : c;
    add(plain);
    add("C[UNIMOD:4]" + plain);
    add("[UNIMOD:1]" + plain);
    if (i < ox_rows) add("M[UNIMOD:35]" + plain);
  }
  return out;
}

}  // namespace

TEST_CASE("md5 golden values") {
  // Pinned with an external MD5 implementation.
  CHECK(to_hex(md5("PEPTIDE")) == "00a828004b9b4defe94678d7b96b49c4");
  CHECK(to_hex(md5("")) == "d41d8cd98f00b204e9800998ecf8427e");
  CHECK(md5_bucket("PEPTIDE") == 28);
  CHECK(md5_bucket("PEPTIDEK") == 1);
  CHECK(md5_bucket("SAMPLER") == 58);
  CHECK(md5_bucket("PEPTIDE") == md5_bucket("PEPTIDE"));
}

TEST_CASE("label_for_bucket boundaries") {
  CHECK(label_for_bucket(0) == SplitLabel::Train);
  CHECK(label_for_bucket(79) == SplitLabel::Train);
  CHECK(label_for_bucket(80) == SplitLabel::Val);
  CHECK(label_for_bucket(89) == SplitLabel::Val);
  CHECK(label_for_bucket(90) == SplitLabel::Test);
  CHECK(label_for_bucket(99) == SplitLabel::Test);
  for (auto l : {SplitLabel::Train, SplitLabel::Val, SplitLabel::Test}) CHECK(parse_split_label(to_string(l)) == l);
}

TEST_CASE("md5_bucket is uniform over random keys") {
  synth::Rng rng(41);
  constexpr int kKeys = 200000;
  std::vector<int> counts(100, 0);
  for (int i = 0; i < kKeys; ++i) ++counts[static_cast<std::size_t>(md5_bucket(synth::random_backbone(rng, 12)))];
  const double expected = kKeys / 100.0;
  const double sigma = std::sqrt(kKeys * 0.01 * 0.99);
  // 4 sigma per bucket keeps the family-wise false alarm rate small over 100 buckets.
  for (int c : counts) CHECK(std::abs(c - expected) < 4 * sigma);
}

TEST_CASE("assign_split examples") {
  const auto a = record("C[UNIMOD:4]PEPTIDEK");
  const auto b = record("CPEPTIDEK[UNIMOD:1]");
  CHECK(assign_split(a, SplitRule::Backbone).label == assign_split(b, SplitRule::Backbone).label);
  CHECK(assign_split(a, SplitRule::Backbone).bucket == md5_bucket("CPEPTIDEK"));
  CHECK(assign_split(a, SplitRule::ModifiedSequence).bucket == md5_bucket("C[UNIMOD:4]PEPTIDEK"));
  CHECK(split_hash_input(b, SplitRule::ModifiedSequence) == "CPEPTIDEK[UNIMOD:1]");

  auto row = record("PEPTIDEK");
  try {
    assign_split(row, SplitRule::RowRandom);
    FAIL("expected MissingKeyColumn");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingKeyColumn);
  }
  row.row_index = 17;
  CHECK(split_hash_input(row, SplitRule::RowRandom) == "17");
  row.sample_key = "run1";
  CHECK(split_hash_input(row, SplitRule::RowRandom) == "run1|17");
  row.row_index.reset();
  CHECK(split_hash_input(row, SplitRule::RowRandom) == "run1");
}

TEST_CASE("sampling keys") {
  CHECK(format_ce(25.0) == "25.0000");
  CHECK(format_ce(27.12346) == "27.1235");
  CHECK(format_ce(0.25) == "0.2500");
  CHECK(sampling_key("PEPTIDE", 2, 25.0, 42).hex() == "46ff02399dbf8b4f8334158505b1eebc");
  CHECK(ood_rank_key("PEPTIDE", 2).hex() == "8e9dc8106554e3dee84c3582a669e520");
  CHECK(sampling_key("PEPTIDE", 2, 25.0, 42) == sampling_key("PEPTIDE", 2, 25.0, 42));
  CHECK(kOodSeed == 42);

  int differ = 0;
  synth::Rng rng(43);
  for (int i = 0; i < 200; ++i) {
    const auto s = synth::random_backbone(rng, 10);
    differ += sampling_key(s, 2, 25.0, 1) != sampling_key(s, 2, 25.0, 2) ? 1 : 0;
  }
  CHECK(differ == 200);
}

TEST_CASE("sorted sampling-key fixture matches the golden order") {
  constexpr std::string_view kAlphabet = "ACDEFGHIKLMNPQRSTVWY";
  std::vector<SamplingKey> keys;
  for (int i = 0; i < 1000; ++i) {
    std::string naked;
    for (int j = 0; j < 6 + i % 10; ++j) naked += kAlphabet[static_cast<std::size_t>((i * 7 + j * 3) % 20)];
    const double ce = 20 + (i % 3) * 5 + 0.5 * (i % 2);
    keys.push_back(sampling_key(naked, 1 + i % 4, ce, 42));
  }
  std::vector<std::size_t> by_key(keys.size());
  for (std::size_t i = 0; i < by_key.size(); ++i) by_key[i] = i;
  std::stable_sort(by_key.begin(), by_key.end(), [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
  CHECK(by_key[0] == 23);
  CHECK(by_key[1] == 83);
  std::string joined;
  for (std::size_t i = 0; i < by_key.size(); ++i) {
    if (i) joined += '\n';
    joined += keys[by_key[i]].hex();
  }
  CHECK(to_hex(md5(joined)) == "513b4312898385b8cef686baf6097656");
}

TEST_CASE("balanced_quota rounding") {
  CHECK(balanced_quota(100) == std::array<std::size_t, 4>{50, 17, 17, 16});
  CHECK(balanced_quota(1000) == std::array<std::size_t, 4>{500, 167, 167, 166});
  CHECK(balanced_quota(1) == std::array<std::size_t, 4>{0, 1, 0, 0});
  CHECK(balanced_quota(2) == std::array<std::size_t, 4>{1, 1, 0, 0});
  CHECK(balanced_quota(7) == std::array<std::size_t, 4>{3, 2, 1, 1});
  for (std::size_t q = 1; q < 300; ++q) {
    const auto b = balanced_quota(q);
    CHECK(b[0] + b[1] + b[2] + b[3] == q);
  }
  try {
    balanced_quota(0);
    FAIL("expected QuotaZero");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::QuotaZero);
  }
}

TEST_CASE("balanced_sample examples") {
  synth::Rng rng(47);
  const auto corpus = bucket_corpus(rng, 200, 3);
  const auto chosen = balanced_sample(corpus, 100, 42);
  std::array<std::size_t, 4> per{};
  std::set<std::size_t> unique(chosen.begin(), chosen.end());
  CHECK(unique.size() == chosen.size());
  for (auto i : chosen) ++per[static_cast<std::size_t>(ptm_metadata(corpus[i].peptide).bucket)];
  CHECK(per[0] == 50);
  CHECK(per[1] == 3);  // short Ox bucket, no substitution
  CHECK(per[2] == 17);
  CHECK(per[3] == 16);

  // Within a bucket, ascending sampling key.
  for (std::size_t i = 1; i < chosen.size(); ++i) {
    const auto& a = corpus[chosen[i - 1]];
    const auto& b = corpus[chosen[i]];
    if (ptm_metadata(a.peptide).bucket != ptm_metadata(b.peptide).bucket) continue;
    CHECK(sampling_key(to_naked(a.peptide), a.charge, a.nce, 42) <= sampling_key(to_naked(b.peptide), b.charge, b.nce, 42));
  }

  auto shuffled = corpus;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  const auto again = balanced_sample(shuffled, 100, 42);
  std::multiset<std::string> first, second;
  for (auto i : chosen) first.insert(record_fingerprint(corpus[i]));
  for (auto i : again) second.insert(record_fingerprint(shuffled[i]));
  CHECK(first == second);

  CHECK_THROWS_AS(balanced_sample(corpus, 0, 42), Error);
}

TEST_CASE("top_n examples") {
  synth::Rng rng(53);
  std::vector<SpectrumRecord> rows;
  for (int i = 0; i < 25000; ++i) {
    SpectrumRecord r;
    r.peptide = synth::random_peptide(rng, 7, 20);
    r.charge = synth::uniform_int(rng, 1, 4);
    r.nce = 25.0;
    rows.push_back(std::move(r));
  }
  const auto kept = top_n(rows, 20000);
  CHECK(kept.size() == 20000);
  auto shuffled = rows;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  const auto again = top_n(shuffled, 20000);
  std::multiset<std::string> a, b;
  for (auto i : kept) a.insert(record_fingerprint(rows[i]));
  for (auto i : again) b.insert(record_fingerprint(shuffled[i]));
  CHECK(a == b);
  CHECK(top_n(rows, 0).empty());
}

TEST_CASE("TopNSelector keeps the smallest keys") {
  TopNSelector sel(3);
  for (std::size_t i = 0; i < 10; ++i) {
    Candidate c;
    c.key.lo = 10 - i;
    c.id = i;
    sel.push(c);
  }
  const auto out = sel.take();
  REQUIRE(out.size() == 3);
  CHECK(out[0].key.lo == 1);
  CHECK(out[2].key.lo == 3);
}

TEST_CASE("verify_disjoint examples") {
  SplitBackbones backbone;
  SplitBackbones modseq;
  synth::Rng rng(59);
  for (int i = 0; i < 3000; ++i) {
    const std::string naked = synth::random_backbone(rng, 10);
    for (int v = 0; v < 4; ++v) {
      const auto rec = record(std::string(v == 1 ? "[UNIMOD:1]" : "") + naked.substr(0, 5) +
                              (v >= 2 ? "M[UNIMOD:35]" : "M") + (v == 3 ? "C[UNIMOD:4]" : "C") + naked.substr(5));
      const std::string stripped = to_naked(rec.peptide);
      backbone.add(assign_split(rec, SplitRule::Backbone).label, stripped);
      modseq.add(assign_split(rec, SplitRule::ModifiedSequence).label, stripped);
    }
  }
  CHECK(verify_disjoint(backbone).total() == 0);
  const auto violations = verify_disjoint(modseq);
  CHECK(violations.total() > 0);
  CHECK(violations.examples.size() <= 10);
  CHECK(std::is_sorted(violations.examples.begin(), violations.examples.end()));

  SplitBackbones single;
  single.add(SplitLabel::Train, "PEPTIDE");
  CHECK(verify_disjoint(single).total() == 0);
}

TEST_CASE("property: Backbone rule is disjoint on random PTM-variant corpora") {
  synth::Rng rng(61);
  for (int trial = 0; trial < 5; ++trial) {
    SplitBackbones sets;
    for (int i = 0; i < 2000; ++i) {
      const std::string naked = synth::random_backbone(rng, synth::uniform_int(rng, 6, 20));
      for (int v = 0; v < 3; ++v) {
        SpectrumRecord r;
        r.peptide = synth::decorate(naked, rng, 0.5);
        sets.add(assign_split(r, SplitRule::Backbone).label, naked);
      }
    }
    CHECK(verify_disjoint(sets).total() == 0);
  }
}

TEST_CASE("edit_distance examples") {
  CHECK(edit_distance("PEPTIDE", "PEPTIDE") == 0);
  CHECK(edit_distance("kitten", "sitting") == 3);
  CHECK(edit_distance("", "ABC") == 3);
  CHECK(edit_distance("ABC", "") == 3);
  CHECK(edit_distance_bounded("kitten", "sitting", 2) == 2);
  CHECK(edit_distance_bounded("kitten", "sitting", 4) == 3);
}

TEST_CASE("edit_distance matches brute force on short strings") {
  synth::Rng rng(67);
  for (int i = 0; i < 3000; ++i) {
    std::string a, b;
    const int la = synth::uniform_int(rng, 0, 7), lb = synth::uniform_int(rng, 0, 7);
    for (int k = 0; k < la; ++k) a += "ABC"[synth::uniform_int(rng, 0, 2)];
    for (int k = 0; k < lb; ++k) b += "ABC"[synth::uniform_int(rng, 0, 2)];
    const int expected = brute_edit(a, b);
    CHECK(edit_distance(a, b) == expected);
    const int limit = synth::uniform_int(rng, 0, 8);
    CHECK(edit_distance_bounded(a, b, limit) == std::min(expected, limit));
  }
}

TEST_CASE("property: edit_distance metric axioms") {
  synth::Rng rng(71);
  for (int i = 0; i < 2000; ++i) {
    const auto a = synth::random_backbone(rng, synth::uniform_int(rng, 0, 12));
    const auto b = synth::random_backbone(rng, synth::uniform_int(rng, 0, 12));
    const auto c = synth::random_backbone(rng, synth::uniform_int(rng, 0, 12));
    CHECK(edit_distance(a, b) == edit_distance(b, a));
    CHECK(edit_distance(a, a) == 0);
    CHECK((edit_distance(a, b) == 0) == (a == b));
    CHECK(edit_distance(a, c) <= edit_distance(a, b) + edit_distance(b, c));
  }
}

TEST_CASE("leakage_audit examples") {
  const std::vector<std::string> train{"PEPTIDE", "PEPTIDEK", "AAAAAAA", "GGGGGG"};
  const std::vector<std::string> subset{"PEPTIDE", "GGGGGG"};
  const auto same = leakage_audit(subset, train);
  CHECK(same.frac_exact == 1.0);
  CHECK(same.frac_le1 == 1.0);
  CHECK(same.mean_min_edit == 0.0);

  const std::vector<std::string> test{"PEPTIDA", "PEPTIDEKK", "WWWWWW", "PEPTIDA"};
  const auto audit = leakage_audit(test, train);
  CHECK(audit.n_test == 3);
  CHECK(audit.frac_exact == 0.0);
  CHECK(audit.frac_le1 == doctest::Approx(2.0 / 3.0));
  CHECK(audit.mean_min_edit == doctest::Approx((1 + 1 + 6) / 3.0));
  CHECK(audit.median_min_edit == 1.0);

  CHECK_THROWS_AS(leakage_audit(std::vector<std::string>{}, train), Error);
  CHECK_THROWS_AS(leakage_audit(test, std::vector<std::string>{}), Error);
}

TEST_CASE("leakage_audit agrees with a brute-force minimum") {
  synth::Rng rng(73);
  std::vector<std::string> train, test;
  for (int i = 0; i < 300; ++i) {
    std::string s;
    const int len = synth::uniform_int(rng, 1, 8);
    for (int k = 0; k < len; ++k) s += "ABC"[synth::uniform_int(rng, 0, 2)];
    (i % 3 ? train : test).push_back(s);
  }
  std::set<std::string> distinct(test.begin(), test.end());
  double total = 0.0;
  std::size_t exact = 0, le1 = 0;
  for (const auto& t : distinct) {
    int best = 1 << 30;
    for (const auto& s : train) best = std::min(best, brute_edit(t, s));
    total += best;
    exact += best == 0;
    le1 += best <= 1;
  }
  const auto audit = leakage_audit(test, train);
  const double n = static_cast<double>(distinct.size());
  CHECK(audit.n_test == distinct.size());
  CHECK(audit.mean_min_edit == doctest::Approx(total / n));
  CHECK(audit.frac_exact == doctest::Approx(exact / n));
  CHECK(audit.frac_le1 == doctest::Approx(le1 / n));
}
