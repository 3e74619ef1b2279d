// pnrtomo command-line driver. Talks to the library only through the C API.

#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "pnrtomo/pnrtomo.h"

namespace fs = std::filesystem;

namespace {

struct Flags {
  std::string config;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  std::string method;
  bool dark_counts = false;
  std::optional<double> reg_weight;
  std::optional<int> truncation;
  std::optional<int> outcomes;
  bool skip_failed = false;
  bool force = false;
  // stage inputs; empty means "inside --out"
  std::string traces, counts, ensemble, povm, estimate;
};

int exit_code(pnr_status s) {
  switch (s) {
    case PNR_OK: return 0;
    case PNR_ERR_SCHEMA:
    case PNR_ERR_SHAPE:
    case PNR_ERR_CONFIG:
    case PNR_ERR_INVALID_ARGUMENT: return 2;
    case PNR_ERR_NUMERICAL:
    case PNR_ERR_CALIBRATION:
    case PNR_ERR_ESTIMATION:
    case PNR_ERR_DOMAIN: return 3;
    case PNR_ERR_LINEAGE: return 4;
    default: return 1;
  }
}

// Thrown out of a stage to unwind with a status already reported.
struct StageFailed {
  pnr_status status;
};

void check(pnr_status s, const char* what) {
  if (s == PNR_OK) return;
  std::fprintf(stderr, "pnrtomo %s: %s: %s\n", what, pnr_status_name(s), pnr_last_error());
  throw StageFailed{s};
}

std::string in_out(const std::string& given, const Flags& f, const char* name) {
  return given.empty() ? (fs::path(f.out) / name).string() : given;
}

// Explicit --config, else the config.json a previous simulate left in --out,
// else built-in defaults.
struct ConfigHandle {
  pnr_config* p = nullptr;
  ~ConfigHandle() { pnr_config_free(p); }
};

void load_config(const Flags& f, ConfigHandle& h) {
  const fs::path fallback = fs::path(f.out) / "config.json";
  if (!f.config.empty())
    check(pnr_config_load(f.config.c_str(), &h.p), "config");
  else if (fs::exists(fallback))
    check(pnr_config_load(fallback.string().c_str(), &h.p), "config");
  else
    check(pnr_config_default(&h.p), "config");
  if (f.seed) check(pnr_config_set_seed(h.p, *f.seed), "--seed");
}

// Applied after simulate has written config.json, so they never reach the
// lineage hash.
void apply_overrides(const Flags& f, ConfigHandle& h) {
  if (f.reg_weight) check(pnr_config_set_reg_weight(h.p, *f.reg_weight), "--reg-weight");
  if (f.truncation) check(pnr_config_set_truncation(h.p, *f.truncation), "--truncation");
  if (f.outcomes) check(pnr_config_set_outcomes(h.p, *f.outcomes), "--outcomes");
  if (!f.method.empty())
    check(pnr_config_set_method(h.p, f.method == "area" ? PNR_BINNING_AREA : PNR_BINNING_THRESHOLD), "--method");
  if (f.dark_counts) check(pnr_config_set_dark_counts(h.p, 1), "--dark-counts");
}

pnr_run_options run_options(const Flags& f) {
  pnr_run_options o;
  pnr_run_options_init(&o);
  o.jobs = f.jobs;
  o.force = f.force ? 1 : 0;
  o.skip_failed = f.skip_failed ? 1 : 0;
  return o;
}

void do_simulate(const Flags& f, const ConfigHandle& c) {
  const auto o = run_options(f);
  check(pnr_run_simulate(c.p, f.out.c_str(), &o), "simulate");
  char hash[17];
  pnr_config_hash(c.p, hash, sizeof hash);
  std::uint64_t seed = 0;
  pnr_config_get_seed(c.p, &seed);
  std::printf("simulate: traces in %s (config %s, seed %llu)\n", f.out.c_str(), hash,
              static_cast<unsigned long long>(seed));
}

void do_calibrate(const Flags& f, const ConfigHandle& c) {
  const auto o = run_options(f);
  const std::string traces = f.traces.empty() ? f.out : f.traces;
  std::size_t failed = 0;
  check(pnr_run_calibrate(c.p, traces.c_str(), f.out.c_str(), &o, &failed), "calibrate");
  std::printf("calibrate: %s/counts.json", f.out.c_str());
  if (failed) std::printf(" (%zu probe(s) skipped)", failed);
  std::printf("\n");
}

void do_reconstruct(const Flags& f, const ConfigHandle& c) {
  const auto o = run_options(f);
  check(pnr_run_reconstruct(c.p, in_out(f.counts, f, "counts.json").c_str(),
                            in_out(f.ensemble, f, "ensemble.json").c_str(), f.out.c_str(), &o),
        "reconstruct");
  double reg = 0.0;
  pnr_config_get_reg_weight(c.p, &reg);
  std::printf("reconstruct: %s/povm.json (reg_weight %g)\n", f.out.c_str(), reg);
}

void do_estimate(const Flags& f, const ConfigHandle& c) {
  const auto o = run_options(f);
  check(pnr_run_estimate(c.p, in_out(f.counts, f, "counts.json").c_str(),
                         in_out(f.ensemble, f, "ensemble.json").c_str(), f.out.c_str(), &o),
        "estimate");
  std::printf("estimate: %s/estimate.json\n", f.out.c_str());
}

void do_validate(const Flags& f, const ConfigHandle& c) {
  const auto o = run_options(f);
  double fmin = 0.0;
  check(pnr_run_validate(c.p, in_out(f.povm, f, "povm.json").c_str(), in_out(f.counts, f, "counts.json").c_str(),
                         in_out(f.ensemble, f, "ensemble.json").c_str(),
                         in_out(f.estimate, f, "estimate.json").c_str(), f.out.c_str(), &o, &fmin),
        "validate");
  std::printf("validate: min fidelity up to the split %.6f; reports in %s\n", fmin, f.out.c_str());
}

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "Config JSON (default: <out>/config.json, then built-in defaults)");
  cmd->add_option("--out", f.out, "Working / output directory");
  cmd->add_option("--seed", f.seed, "Override simulation.seed");
  cmd->add_option("--jobs", f.jobs, "Worker threads")->check(CLI::PositiveNumber);
  cmd->add_flag("--force", f.force, "Accept inputs produced by another config or seed");
}

void add_reconstruct_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--reg-weight", f.reg_weight, "Smoothness weight")->check(CLI::NonNegativeNumber);
  cmd->add_option("--truncation", f.truncation, "Photon-number truncation M")->check(CLI::PositiveNumber);
  cmd->add_option("--outcomes", f.outcomes, "Number of count outcomes N")->check(CLI::Range(2, 1 << 20));
}

void add_calibrate_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--method", f.method, "Binning method")->check(CLI::IsMember({"threshold", "area"}));
  cmd->add_flag("--skip-failed", f.skip_failed, "Drop probes whose calibration fails");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Photon-number-resolving detector tomography"};
  app.set_version_flag("--version", std::string(pnr_version()));
  app.require_subcommand(1);
  Flags f;

  auto* sim = app.add_subcommand("simulate", "Simulate one amplitude trace per probe");
  add_common(sim, f);

  auto* cal = app.add_subcommand("calibrate", "Fit pulse-height spectra and bin traces into counts");
  add_common(cal, f);
  add_calibrate_flags(cal, f);
  cal->add_option("--outcomes", f.outcomes, "Number of count outcomes N")->check(CLI::Range(2, 1 << 20));
  cal->add_option("--traces", f.traces, "Trace directory (default: --out)");

  auto* rec = app.add_subcommand("reconstruct", "Reconstruct the POVM from counts");
  add_common(rec, f);
  add_reconstruct_flags(rec, f);
  rec->add_option("--counts", f.counts, "counts.json");
  rec->add_option("--ensemble", f.ensemble, "ensemble.json");

  auto* est = app.add_subcommand("estimate", "Maximum-likelihood efficiency (and dark counts)");
  add_common(est, f);
  est->add_flag("--dark-counts", f.dark_counts, "Estimate the dark-count rate jointly");
  est->add_option("--counts", f.counts, "counts.json");
  est->add_option("--ensemble", f.ensemble, "ensemble.json");

  auto* val = app.add_subcommand("validate", "Fidelity, comparison and sensitivity reports");
  add_common(val, f);
  val->add_option("--povm", f.povm, "povm.json");
  val->add_option("--counts", f.counts, "counts.json");
  val->add_option("--ensemble", f.ensemble, "ensemble.json");
  val->add_option("--estimate", f.estimate, "estimate.json");

  auto* run = app.add_subcommand("run", "simulate, calibrate, reconstruct, estimate and validate in one go");
  add_common(run, f);
  add_calibrate_flags(run, f);
  add_reconstruct_flags(run, f);
  run->add_flag("--dark-counts", f.dark_counts, "Estimate the dark-count rate jointly");

  CLI11_PARSE(app, argc, argv);

  try {
    ConfigHandle c;
    if (sim->parsed()) {
      load_config(f, c);
      do_simulate(f, c);
    } else if (cal->parsed()) {
      load_config(f, c);
      apply_overrides(f, c);
      do_calibrate(f, c);
    } else if (rec->parsed()) {
      load_config(f, c);
      apply_overrides(f, c);
      do_reconstruct(f, c);
    } else if (est->parsed()) {
      load_config(f, c);
      apply_overrides(f, c);
      do_estimate(f, c);
    } else if (val->parsed()) {
      load_config(f, c);
      apply_overrides(f, c);
      do_validate(f, c);
    } else if (run->parsed()) {
      load_config(f, c);
      do_simulate(f, c);
      apply_overrides(f, c);
      do_calibrate(f, c);
      do_reconstruct(f, c);
      do_estimate(f, c);
      do_validate(f, c);
    }
  } catch (const StageFailed& e) {
    return exit_code(e.status);
  }
  return 0;
}
