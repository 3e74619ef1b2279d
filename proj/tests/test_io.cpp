#include "doctest.h"

#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "pnrtomo/errors.hpp"
#include "pnrtomo/io.hpp"

using namespace pnrtomo;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    std::random_device rd;
    path = fs::temp_directory_path() / ("pnrtomo_io_" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string fnv1a_hex(const std::string& s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

template <class Fn>
std::string schema_message(Fn fn) {
  try {
    fn();
  } catch (const SchemaError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("config round trip and hash") {
  const std::string text = R"({
    "simulation": {"seed": 7},
    "detector": {"eta": 0.06, "sigma0_mv": 1.9},
    "calibration": {"method": "area"},
    "reconstruction": {"reg_weight": 0.01, "truncation": 60, "outcomes": 8},
    "ensemble": {"probes": [{"id": 3, "mean_photons": 12.5}, {"id": 9, "mean_photons": 4.0, "attenuation_db": 70.1, "n_pulses": 500}]}
  })";
  const auto cfg = parse_config(text);
  CHECK(cfg.seed == 7);
  CHECK(cfg.detector.eta == 0.06);
  CHECK(cfg.calibration.method == BinningMethod::Area);
  CHECK(cfg.reconstruction.truncation == 60);
  REQUIRE(cfg.ensemble.size() == 2);
  CHECK(cfg.ensemble[1].n_pulses == 500);
  CHECK(*cfg.ensemble[1].attenuation_db == 70.1);

  const std::string canon = config_to_json(cfg);
  const auto again = parse_config(canon);
  CHECK(config_to_json(again) == canon);
  CHECK(config_hash(again) == config_hash(cfg));
  CHECK(config_hash(cfg) == fnv1a_hex(canon));
  CHECK(config_hash(cfg).size() == 16);

  auto other = cfg;
  other.seed = 8;
  CHECK(config_hash(other) != config_hash(cfg));
  // Formatting and key order of the input do not matter.
  CHECK(config_hash(parse_config(R"({"simulation":{"seed":1}})")) == config_hash(PipelineConfig{}));
}

TEST_CASE("paper preset ensemble") {
  const auto cfg = parse_config(R"({"ensemble": {"preset": "paper", "n_pulses": 500}})");
  REQUIRE(cfg.ensemble.size() == 20);
  for (const auto& p : cfg.ensemble.probes()) CHECK(p.n_pulses == 500);
  CHECK(cfg.ensemble[0].mean_photons == doctest::Approx(130.0));
}

TEST_CASE("config schema errors") {
  const auto missing = schema_message([] { parse_config(R"({"ensemble": {"probes": [{"id": 1, "mean_photons": 3}, {"id": 42}]}})"); });
  CHECK(missing.find("42") != std::string::npos);
  CHECK(missing.find("mean_photons") != std::string::npos);

  const auto unknown = schema_message([] { parse_config(R"({"reconstruction": {"reg_wieght": 0.1}})"); });
  CHECK(unknown.find("/reconstruction/reg_wieght") != std::string::npos);

  CHECK_THROWS_AS(parse_config(R"({"detector": {"eta": "high"}})"), SchemaError);
  CHECK_THROWS_AS(parse_config(R"({"bogus": {}})"), SchemaError);
  CHECK_THROWS_AS(parse_config("{not json"), SchemaError);
  CHECK_THROWS_AS(parse_config(R"({"calibration": {"method": "median"}})"), SchemaError);

  CHECK_THROWS_AS(parse_config(R"({"reconstruction": {"reg_weight": -1}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"detector": {"eta": 1.5}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"reconstruction": {"outcomes": 1}})"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), IoError);
}

TEST_CASE("lineage") {
  check_lineage({"abc", 1}, {"abc", 1}, "counts");
  CHECK_THROWS_AS(check_lineage({"abc", 1}, {"abd", 1}, "counts"), LineageError);
  CHECK_THROWS_AS(check_lineage({"abc", 1}, {"abc", 2}, "counts"), LineageError);
}

TEST_CASE("trace files") {
  TempDir dir;
  AmplitudeTrace t;
  t.probe_id = 12;
  t.amplitudes = {0.1, -2.5e-7, 13.000000000000002, 1.0 / 3.0, 1e300};
  t.truth_counts = std::vector<int>{0, 0, 1, 0, 9};
  const Lineage lin{"0123456789abcdef", 77};
  write_trace(dir.path, t, lin);
  CHECK(trace_file_name(12) == fs::path("probe_0012.csv"));
  REQUIRE(fs::exists(dir.path / "probe_0012.csv"));
  REQUIRE(fs::exists(dir.path / "probe_0012.truth.csv"));
  const std::string head = slurp(dir.path / "probe_0012.csv");
  CHECK(head.find("amplitude_mv") != std::string::npos);

  Lineage back;
  const auto r = read_trace(dir.path / "probe_0012.csv", &back);
  CHECK(r.probe_id == 12);
  CHECK(r.amplitudes == t.amplitudes);
  CHECK(*r.truth_counts == *t.truth_counts);
  CHECK(back.config_hash == lin.config_hash);
  CHECK(back.seed == 77);

  AmplitudeTrace u;
  u.probe_id = 3;
  u.amplitudes = {1.0};
  write_trace(dir.path, u, lin);
  const auto files = list_trace_files(dir.path);
  REQUIRE(files.size() == 2);
  CHECK(files[0].filename() == "probe_0003.csv");
  CHECK(!read_trace(files[0]).truth_counts);

  TempDir empty;
  CHECK_THROWS_AS(list_trace_files(empty.path), IoError);
  CHECK_THROWS_AS(list_trace_files(empty.path / "missing"), IoError);

  std::ofstream(dir.path / "probe_0099.csv") << "amplitude_mv\n1.0\nbanana\n";
  CHECK_THROWS(read_trace(dir.path / "probe_0099.csv"));
}

TEST_CASE("json artifacts round trip") {
  TempDir dir;
  const Lineage lin{"feedfacecafebeef", 5};

  SUBCASE("ensemble") {
    const auto e = ProbeEnsemble::paper_default(123);
    write_ensemble(dir.path / "ensemble.json", e, lin);
    Lineage back;
    const auto r = read_ensemble(dir.path / "ensemble.json", &back);
    REQUIRE(r.size() == e.size());
    for (std::size_t j = 0; j < e.size(); ++j) {
      CHECK(r[j].mean_photons == e[j].mean_photons);
      CHECK(r[j].attenuation_db == e[j].attenuation_db);
      CHECK(r[j].n_pulses == 123);
    }
    CHECK(back.config_hash == lin.config_hash);
  }
  SUBCASE("counts") {
    CountsArtifact a{CountTable(3, {4, 2}, {{5, 6, 7}, {0, 1, 2}}), lin, "area", {8}};
    write_counts(dir.path / "counts.json", a);
    const auto r = read_counts(dir.path / "counts.json");
    CHECK(r.table.outcomes() == 3);
    CHECK(r.table.probe_ids() == a.table.probe_ids());
    CHECK(r.table.count(2, 0) == 7);
    CHECK(r.table.count(1, 1) == 1);
    CHECK(r.method == "area");
    CHECK(r.failed_probes == std::vector<std::int64_t>{8});
    CHECK(r.lineage.seed == 5);
  }
  SUBCASE("povm") {
    PovmArtifact a;
    a.povm = binomial_povm(0.0517, 5, 33);
    a.config.reg_weight = 0.25;
    a.config.truncation = 33;
    a.config.outcomes = 5;
    a.lineage = lin;
    a.converged = true;
    a.iterations = 17;
    a.data_term = 1.25e-9;
    write_povm(dir.path / "povm.json", a);
    const auto r = read_povm(dir.path / "povm.json");
    CHECK(r.povm.entries() == a.povm.entries());
    CHECK(r.config.reg_weight == 0.25);
    CHECK(r.iterations == 17);
    CHECK(r.data_term == a.data_term);
    CHECK(r.converged);
  }
  SUBCASE("estimate") {
    EstimateArtifact a;
    a.estimate.eta_hat = 0.0510019;
    a.estimate.eta_se = 3.4e-5;
    a.estimate.per_probe_etas = {0.05, 0.052};
    a.estimate.probe_ids = {1, 2};
    a.estimate.gamma_hat = 0.0;
    a.estimate.gamma_upper = 1.6e-3;
    a.estimate.gamma_at_boundary = true;
    a.dark_counts = true;
    a.lineage = lin;
    write_estimate(dir.path / "estimate.json", a);
    const auto r = read_estimate(dir.path / "estimate.json");
    CHECK(r.estimate.eta_hat == a.estimate.eta_hat);
    CHECK(*r.estimate.eta_se == *a.estimate.eta_se);
    CHECK(r.estimate.per_probe_etas == a.estimate.per_probe_etas);
    CHECK(*r.estimate.gamma_upper == *a.estimate.gamma_upper);
    CHECK(!r.estimate.gamma_se);
    CHECK(r.estimate.gamma_at_boundary);
    CHECK(r.dark_counts);
  }
  SUBCASE("malformed artifact") {
    std::ofstream(dir.path / "counts.json") << R"({"outcomes": 3, "probe_ids": [1]})";
    CHECK_THROWS_AS(read_counts(dir.path / "counts.json"), SchemaError);
    CHECK_THROWS_AS(read_povm(dir.path / "absent.json"), IoError);
  }
}

TEST_CASE("atomic writes leave no temporary behind") {
  TempDir dir;
  write_text_atomic(dir.path / "a.txt", "one");
  write_text_atomic(dir.path / "a.txt", "two");
  CHECK(slurp(dir.path / "a.txt") == "two");
  int n = 0;
  for (const auto& e : fs::directory_iterator(dir.path)) n += e.is_regular_file();
  CHECK(n == 1);
}
