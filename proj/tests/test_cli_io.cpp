#include "doctest.h"

#include <sstream>

#include "json.hpp"
#include "pepspec/cli.hpp"
#include "pepspec/config.hpp"
#include "pepspec/error.hpp"
#include "pepspec/table.hpp"
#include "synthetic.hpp"

using namespace pepspec;
using nlohmann::json;

namespace {

struct CliResult {
  int code = 0;
  std::string out, err;
};

CliResult run(std::vector<std::string> args) {
  std::ostringstream out, err;
  CliResult r;
  r.code = run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream(path, std::ios::binary) << text;
}

json read_json(const std::filesystem::path& path) { return json::parse(synth::read_file(path)); }

std::vector<SpectrumRecord> records(std::uint64_t seed, int n) {
  synth::Rng rng(seed);
  std::vector<SpectrumRecord> out;
  for (int i = 0; i < n; ++i) out.push_back(synth::random_record(rng));
  return out;
}

std::size_t data_lines(const std::filesystem::path& path) {
  const auto text = synth::read_file(path);
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')) - 1;
}

}  // namespace

TEST_CASE("tsv reader reports schema errors with line numbers") {
  synth::TempDir dir("tsv");
  write_text(dir / "a.tsv", "x\ty\n1\t2\n\n3\n");
  TsvReader r(dir / "a.tsv");
  REQUIRE(r.next());
  CHECK(r.field(1) == "2");
  CHECK(r.line() == 2);
  try {
    r.next();
    FAIL("expected SchemaError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SchemaError);
    CHECK(e.line() == 4);
  }

  write_text(dir / "crlf.tsv", "x\ty\r\n1\t2\r\n");
  TsvReader crlf(dir / "crlf.tsv");
  REQUIRE(crlf.next());
  CHECK(crlf.field(1) == "2");
  CHECK_FALSE(crlf.next());

  write_text(dir / "empty.tsv", "");
  CHECK_THROWS_AS(TsvReader(dir / "empty.tsv"), Error);
  CHECK_THROWS_AS(TsvReader(dir / "missing.tsv"), Error);
}

TEST_CASE("spectral table parsing") {
  synth::TempDir dir("spectral");
  write_text(dir / "t.tsv",
             "modified_sequence\tprecursor_charge\tcollision_energy\tmz_list\tintensity_list\n"
             "PEPTIDEC(cam)K\t2\t30\t100.1;200.2\t5;10\n"
             "PEPTIDEK\t2\t30\t100.1;200.2\t5\n"
             "PEPTIDEK\tx\t30\t100.1\t5\n"
             "PEPTIDEU\t2\t30\t100.1\t5\n");
  SpectralTableReader reader(dir / "t.tsv");
  REQUIRE(reader.next());
  const auto rec = reader.parse_record();
  CHECK(to_canonical_string(rec.peptide) == "PEPTIDEC[UNIMOD:4]K");
  CHECK(rec.nce == 30.0);
  CHECK(rec.intensity == std::vector<double>{5, 10});
  REQUIRE(reader.next());
  try {
    reader.parse_record();
    FAIL("unequal lists accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SchemaError);
    CHECK(e.line() == 3);
  }
  REQUIRE(reader.next());
  CHECK_THROWS_AS(reader.parse_record(), Error);
  REQUIRE(reader.next());
  try {
    reader.parse_record();
    FAIL("unknown residue accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnknownResidue);
    CHECK(e.line() == 5);
  }

  write_text(dir / "nocol.tsv", "sequence\tprecursor_charge\nPEPTIDE\t2\n");
  CHECK_THROWS_AS(SpectralTableReader(dir / "nocol.tsv"), Error);

  write_text(dir / "nce.tsv", "modified_sequence\tprecursor_charge\nPEPTIDE\t2\n");
  TableOptions options;
  options.default_nce = 28.0;
  SpectralTableReader defaulted(dir / "nce.tsv", options);
  REQUIRE(defaulted.next());
  CHECK(defaulted.parse_record().nce == 28.0);
}

TEST_CASE("canonical value text") {
  CHECK(parse_canonical_values("0;1;0.5", 3, 1) == std::vector<double>{0, 1, 0.5});
  CHECK(parse_canonical_values("2:0.5;0:1", 4, 1) == std::vector<double>{1, 0, 0.5, 0});
  CHECK_THROWS_AS(parse_canonical_values("0;1", 3, 1), Error);
  CHECK_THROWS_AS(parse_canonical_values("7:1", 4, 1), Error);
  CHECK(parse_list("", 1).empty());
  const std::vector<double> v{1.5, 0.25, 1e-7};
  CHECK(parse_list(format_list(v), 1) == v);
}

TEST_CASE("config round trip and validation") {
  synth::TempDir dir("config");
  RunConfig c;
  c.seed = 7;
  c.quota = 100;
  c.sa_convention = SaConvention::TwoOverPi;
  write_text(dir / "c.json", c.to_json().dump());
  const auto loaded = RunConfig::load(dir / "c.json");
  CHECK(loaded.to_json() == c.to_json());
  CHECK(loaded.seed == 7);

  write_text(dir / "bad.json", R"({"sead": 1})");
  CHECK_THROWS_AS(RunConfig::load(dir / "bad.json"), Error);
  write_text(dir / "nested.json", R"({"bootstrap": {"resample": 10}})");
  CHECK_THROWS_AS(RunConfig::load(dir / "nested.json"), Error);
  CHECK(parse_sa_convention("2/pi") == SaConvention::TwoOverPi);
  CHECK_FALSE(parse_sa_convention("pi").has_value());
}

TEST_CASE("cli usage and errors") {
  CHECK(run({"--version"}).code == 0);
  CHECK(run({"--help"}).code == 0);
  const auto bad = run({"frobnicate"});
  CHECK(bad.code == kExitError);
  const auto err = json::parse(bad.err);
  CHECK(err["error"]["code"] == "UsageError");

  synth::TempDir dir("cli_err");
  write_text(dir / "t.tsv", "modified_sequence\tprecursor_charge\nPEPTIDE\t2\nPEPTIDEK\n");
  const auto fatal = run({"--on-malformed", "fatal", "normalize", "-i", (dir / "t.tsv").string(), "-o",
                          (dir / "o.tsv").string()});
  CHECK(fatal.code == kExitError);
  const auto doc = json::parse(fatal.err);
  CHECK(doc["error"]["code"] == "SchemaError");
  CHECK(doc["error"]["line"] == 3);

  const auto missing = run({"normalize", "-i", (dir / "nope.tsv").string(), "-o", (dir / "o.tsv").string()});
  CHECK(missing.code == kExitError);
}

TEST_CASE("empty table with a header") {
  synth::TempDir dir("cli_empty");
  write_text(dir / "t.tsv", "modified_sequence\tprecursor_charge\tcollision_energy\tmz_list\tintensity_list\n");
  const auto r = run({"normalize", "-i", (dir / "t.tsv").string(), "-o", (dir / "n.tsv").string()});
  CHECK(r.code == 0);
  CHECK(data_lines(dir / "n.tsv") == 0);
  CHECK(std::filesystem::exists(dir / "n.tsv.manifest.json"));
  CHECK(run({"project-truth", "-i", (dir / "t.tsv").string(), "-o", (dir / "p.tsv").string()}).code == 0);
}

TEST_CASE("out-of-scope rows are skipped, all out of scope is ScopeEmpty") {
  synth::TempDir dir("cli_scope");
  write_text(dir / "t.tsv",
             "modified_sequence\tprecursor_charge\tcollision_energy\n"
             "PEPTIDEK\t2\t25\nPEPTIDEK\t7\t25\nPEP\t2\t25\n");
  const auto r = run({"normalize", "-i", (dir / "t.tsv").string(), "-o", (dir / "n.tsv").string()});
  REQUIRE(r.code == 0);
  CHECK(data_lines(dir / "n.tsv") == 1);
  CHECK(json::parse(r.out)["summary"]["out_of_scope"] == 2);

  write_text(dir / "bad.tsv", "modified_sequence\tprecursor_charge\tcollision_energy\nPEPTIDEK\t7\t25\n");
  const auto empty = run({"normalize", "-i", (dir / "bad.tsv").string(), "-o", (dir / "m.tsv").string()});
  CHECK(empty.code == kExitError);
  CHECK(json::parse(empty.err)["error"]["code"] == "ScopeEmpty");
}

TEST_CASE("normalize is idempotent") {
  synth::TempDir dir("cli_norm");
  synth::write_spectral_table(dir / "in.tsv", records(1, 60));
  REQUIRE(run({"normalize", "-i", (dir / "in.tsv").string(), "-o", (dir / "n1.tsv").string()}).code == 0);
  REQUIRE(run({"normalize", "-i", (dir / "n1.tsv").string(), "-o", (dir / "n2.tsv").string()}).code == 0);
  CHECK(synth::read_file(dir / "n1.tsv") == synth::read_file(dir / "n2.tsv"));
  TsvReader r(dir / "n1.tsv");
  CHECK(r.column("naked_sequence").has_value());
  CHECK(r.column("ptm_bucket").has_value());
}

TEST_CASE("evaluating truth against itself") {
  synth::TempDir dir("cli_eval");
  synth::write_spectral_table(dir / "in.tsv", records(2, 80));
  REQUIRE(run({"project-truth", "-i", (dir / "in.tsv").string(), "-o", (dir / "p.tsv").string()}).code == 0);
  const auto r = run({"evaluate", "--truth", (dir / "in.tsv").string(), "--pred", (dir / "p.tsv").string(), "-o",
                      (dir / "e.json").string(), "--rows", (dir / "rows.tsv").string(), "--bootstrap", "100"});
  REQUIRE(r.code == 0);
  const auto report = read_json(dir / "e.json");
  CHECK(report["schema"] == "pepspec.evaluate-report");
  CHECK(report["counts"]["evaluated"] == 80);
  CHECK(report["counts"]["missing_prediction"] == 0);
  CHECK(report["median"]["sa"].get<double>() == 0.0);
  CHECK(report["median"]["pcc"].get<double>() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(report["bootstrap"]["resamples"] == 100);
  CHECK(data_lines(dir / "rows.tsv") == 80);

  const auto manifest = read_json(dir / "e.json.manifest.json");
  CHECK(manifest["command"] == "evaluate");
  CHECK(manifest["inputs"].size() == 2);
  CHECK(manifest["inputs"][0]["md5"].get<std::string>().size() == 32);

  REQUIRE(run({"stratify", "--rows", (dir / "rows.tsv").string(), "--axis", "charge", "-o",
               (dir / "s.json").string(), "--csv", (dir / "s.csv").string()})
              .code == 0);
  const auto strat = read_json(dir / "s.json");
  CHECK(strat["axis"] == "charge");
  CHECK(strat["rows"] == 80);
}

TEST_CASE("missing predictions are counted") {
  synth::TempDir dir("cli_missing");
  auto recs = records(3, 20);
  synth::write_spectral_table(dir / "in.tsv", recs);
  REQUIRE(run({"project-truth", "-i", (dir / "in.tsv").string(), "-o", (dir / "p.tsv").string()}).code == 0);
  recs.push_back(recs.front());
  recs.back().peptide = parse_modified_sequence("LGEYGFQNALIVR");
  synth::Rng rng(3);
  auto spectrum = synth::ion_spectrum(recs.back().peptide, recs.back().charge, rng);
  recs.back().mz = spectrum.mz;
  recs.back().intensity = spectrum.intensity;
  synth::write_spectral_table(dir / "more.tsv", recs);
  REQUIRE(run({"evaluate", "--truth", (dir / "more.tsv").string(), "--pred", (dir / "p.tsv").string(), "-o",
               (dir / "e.json").string(), "--bootstrap", "0"})
              .code == 0);
  const auto report = read_json(dir / "e.json");
  CHECK(report["counts"]["evaluated"] == 20);
  CHECK(report["counts"]["missing_prediction"] == 1);
  CHECK(report["bootstrap"].is_null());
}

TEST_CASE("split under the backbone rule passes the audit") {
  synth::TempDir dir("cli_split");
  auto recs = records(4, 400);
  // PTM variants of one backbone must land in the same split.
  for (int i = 0; i < 20; ++i) {
    auto variant = recs[static_cast<std::size_t>(i)];
    variant.peptide.nterm_mod = Unimod::Acetyl;
    recs.push_back(variant);
  }
  synth::write_spectral_table(dir / "in.tsv", recs);
  const auto r = run({"split", "-i", (dir / "in.tsv").string(), "-o", (dir / "s.tsv").string(), "--report",
                      (dir / "r.json").string()});
  REQUIRE(r.code == 0);
  const auto report = read_json(dir / "r.json");
  CHECK(report["disjoint"] == true);
  CHECK(report["counts"]["train"].get<int>() + report["counts"]["val"].get<int>() +
            report["counts"]["test"].get<int>() == 420);
  REQUIRE(run({"audit-leakage", "--input", (dir / "s.tsv").string(), "-o", (dir / "a.json").string()}).code == 0);
  const auto audit = read_json(dir / "a.json");
  CHECK(audit["frac_exact"].get<double>() == 0.0);
  CHECK(audit["n_test"].get<int>() > 0);

  REQUIRE(run({"split", "--rule", "modseq", "-i", (dir / "in.tsv").string(), "-o", (dir / "m.tsv").string(),
               "--report", (dir / "m.json").string()})
              .code == 0);
  CHECK(read_json(dir / "m.json")["disjoint"] == false);
}

TEST_CASE("balanced sampling through the cli") {
  synth::TempDir dir("cli_sample");
  synth::Rng rng(5);
  std::vector<SpectrumRecord> recs;
  const std::string plain = "ADEFGHIKLNPQRSTVWY";
  for (int i = 0; i < 4000; ++i) {
    std::string seq;
    for (int j = 0; j < 10; ++j) seq += plain[static_cast<std::size_t>(synth::uniform_int(rng, 0, 17))];
    const int kind = i % 4;
    if (kind == 1) seq[0] = 'M';
    if (kind == 2) seq[0] = 'C';
    SpectrumRecord rec;
    rec.peptide = parse_modified_sequence(seq);
    if (kind == 1) rec.peptide.site_mods[0] = Unimod::Oxidation;
    if (kind == 2) rec.peptide.site_mods[0] = Unimod::Carbamidomethyl;
    if (kind == 3) rec.peptide.nterm_mod = Unimod::Acetyl;
    rec.charge = 2;
    rec.nce = 25;
    recs.push_back(rec);
  }
  synth::write_spectral_table(dir / "in.tsv", recs);
  const auto r = run({"sample", "--balanced", "--quota", "1000", "-i", (dir / "in.tsv").string(), "-o",
                      (dir / "s.tsv").string()});
  REQUIRE(r.code == 0);
  CHECK(data_lines(dir / "s.tsv") == 1000);
  std::map<std::string, int> counts;
  SpectralTableReader reader(dir / "s.tsv");
  while (reader.next()) ++counts[std::string(to_string(ptm_metadata(reader.parse_record().peptide).bucket))];
  CHECK(counts["Unmod"] == 500);
  CHECK(counts["Ox"] == 167);
  CHECK(counts["Cam"] == 167);
  CHECK(counts["Ace"] == 166);

  const auto again = run({"sample", "--balanced", "--quota", "1000", "-i", (dir / "in.tsv").string(), "-o",
                          (dir / "s2.tsv").string()});
  REQUIRE(again.code == 0);
  CHECK(synth::read_file(dir / "s.tsv") == synth::read_file(dir / "s2.tsv"));

  const auto zero = run({"sample", "--top-n", "0", "-i", (dir / "in.tsv").string(), "-o", (dir / "z.tsv").string()});
  CHECK(zero.code == kExitError);
  CHECK(json::parse(zero.err)["error"]["code"] == "QuotaZero");
  CHECK(run({"sample", "--top-n", "10", "-i", (dir / "in.tsv").string(), "-o", (dir / "t.tsv").string()}).code == 0);
  CHECK(data_lines(dir / "t.tsv") == 10);
}

TEST_CASE("baseline train, predict and perturb through the cli") {
  synth::TempDir dir("cli_baseline");
  synth::write_spectral_table(dir / "in.tsv", records(6, 300));
  REQUIRE(run({"train-baseline", "--truth", (dir / "in.tsv").string(), "-o", (dir / "m.json").string()}).code == 0);
  REQUIRE(run({"predict-baseline", "--model", (dir / "m.json").string(), "-i", (dir / "in.tsv").string(), "-o",
               (dir / "p.tsv").string()})
              .code == 0);
  CHECK(data_lines(dir / "p.tsv") == 300);
  REQUIRE(run({"evaluate", "--truth", (dir / "in.tsv").string(), "--pred", (dir / "p.tsv").string(), "-o",
               (dir / "e.json").string(), "--bootstrap", "0"})
              .code == 0);
  CHECK(read_json(dir / "e.json")["counts"]["evaluated"] == 300);

  REQUIRE(run({"perturb", "charge", "--model", (dir / "m.json").string(), "--truth", (dir / "in.tsv").string(),
               "-o", (dir / "c.json").string()})
              .code == 0);
  const auto charge = read_json(dir / "c.json");
  CHECK(charge["threshold"] == 0.9);
  CHECK(charge["n"].get<int>() > 0);

  REQUIRE(run({"perturb", "nce-sweep", "--model", (dir / "m.json").string(), "--truth", (dir / "in.tsv").string(),
               "-o", (dir / "w.json").string(), "--grid", "25,30,35"})
              .code == 0);
  CHECK(read_json(dir / "w.json")["curve"].size() == 3);
  const auto both = run({"perturb", "charge", "--truth", (dir / "in.tsv").string(), "-o", (dir / "x.json").string()});
  CHECK(both.code == kExitError);
}
