#include "pnrtomo/pnrtomo.h"

#include <cmath>
#include <cstring>
#include <limits>
#include <new>
#include <string>

#include "pnrtomo/errors.hpp"
#include "pnrtomo/pipeline.hpp"

using namespace pnrtomo;

struct pnr_config {
  PipelineConfig cfg;
  std::string hash;
};
struct pnr_ensemble {
  ProbeEnsemble e;
};
struct pnr_trace {
  AmplitudeTrace t;
};
struct pnr_counts {
  CountTable table;
};
struct pnr_povm {
  PovmMatrix p;
};

namespace {

thread_local std::string g_last_error;

pnr_status fail(pnr_status s, const std::string& msg) {
  g_last_error = msg;
  return s;
}

pnr_status from_kind(ErrorKind k) {
  switch (k) {
    case ErrorKind::InvalidArgument: return PNR_ERR_INVALID_ARGUMENT;
    case ErrorKind::Schema: return PNR_ERR_SCHEMA;
    case ErrorKind::Numerical: return PNR_ERR_NUMERICAL;
    case ErrorKind::Lineage: return PNR_ERR_LINEAGE;
    case ErrorKind::Io: return PNR_ERR_IO;
    case ErrorKind::Domain: return PNR_ERR_DOMAIN;
    case ErrorKind::Shape: return PNR_ERR_SHAPE;
    case ErrorKind::Calibration: return PNR_ERR_CALIBRATION;
    case ErrorKind::Estimation: return PNR_ERR_ESTIMATION;
    case ErrorKind::Config: return PNR_ERR_CONFIG;
  }
  return PNR_ERR_INTERNAL;
}

template <class Fn>
pnr_status guard(Fn&& fn) {
  g_last_error.clear();
  try {
    fn();
    return PNR_OK;
  } catch (const Error& e) {
    return fail(from_kind(e.kind()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(PNR_ERR_INTERNAL, "out of memory");
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(PNR_ERR_IO, e.what());
  } catch (const std::exception& e) {
    return fail(PNR_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(PNR_ERR_INTERNAL, "unknown error");
  }
}

#define PNR_REQUIRE(cond, what) \
  if (!(cond)) return fail(PNR_ERR_INVALID_ARGUMENT, what)

RunContext context(const pnr_config* c, const pnr_run_options* o) {
  RunOptions ro;
  if (o) {
    if (o->jobs < 1) throw Error(ErrorKind::InvalidArgument, "jobs must be >= 1");
    ro.jobs = o->jobs;
    ro.force = o->force != 0;
    ro.skip_failed = o->skip_failed != 0;
  }
  return {c->cfg, {c->hash, c->cfg.seed}, ro};
}

}  // namespace

extern "C" {

const char* pnr_version(void) { return PNR_VERSION_STRING; }

const char* pnr_last_error(void) { return g_last_error.c_str(); }

const char* pnr_status_name(pnr_status s) {
  switch (s) {
    case PNR_OK: return "ok";
    case PNR_ERR_INVALID_ARGUMENT: return "invalid argument";
    case PNR_ERR_SCHEMA: return "schema error";
    case PNR_ERR_NUMERICAL: return "numerical failure";
    case PNR_ERR_LINEAGE: return "lineage mismatch";
    case PNR_ERR_IO: return "i/o error";
    case PNR_ERR_DOMAIN: return "domain error";
    case PNR_ERR_SHAPE: return "shape mismatch";
    case PNR_ERR_CALIBRATION: return "calibration failure";
    case PNR_ERR_ESTIMATION: return "estimation failure";
    case PNR_ERR_CONFIG: return "config error";
    case PNR_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

// ---- configuration ----------------------------------------------------------

pnr_status pnr_config_default(pnr_config** out) {
  PNR_REQUIRE(out, "out is NULL");
  *out = nullptr;
  return guard([&] {
    auto* c = new pnr_config{PipelineConfig{}, {}};
    c->hash = config_hash(c->cfg);
    *out = c;
  });
}

pnr_status pnr_config_parse(const char* json_text, pnr_config** out) {
  PNR_REQUIRE(json_text && out, "NULL argument");
  *out = nullptr;
  return guard([&] {
    auto cfg = parse_config(json_text);
    auto* c = new pnr_config{std::move(cfg), {}};
    c->hash = config_hash(c->cfg);
    *out = c;
  });
}

pnr_status pnr_config_load(const char* path, pnr_config** out) {
  PNR_REQUIRE(path && out, "NULL argument");
  *out = nullptr;
  return guard([&] {
    auto cfg = load_config(path);
    auto* c = new pnr_config{std::move(cfg), {}};
    c->hash = config_hash(c->cfg);
    *out = c;
  });
}

pnr_status pnr_config_save(const pnr_config* cfg, const char* path) {
  PNR_REQUIRE(cfg && path, "NULL argument");
  return guard([&] { write_text_atomic(path, config_to_json(cfg->cfg)); });
}

void pnr_config_free(pnr_config* cfg) { delete cfg; }

pnr_status pnr_config_hash(const pnr_config* cfg, char* buf, size_t len) {
  PNR_REQUIRE(cfg && buf, "NULL argument");
  PNR_REQUIRE(len > cfg->hash.size(), "buffer too small for the config hash");
  std::memcpy(buf, cfg->hash.c_str(), cfg->hash.size() + 1);
  return PNR_OK;
}

pnr_status pnr_config_set_seed(pnr_config* cfg, uint64_t seed) {
  PNR_REQUIRE(cfg, "cfg is NULL");
  return guard([&] {
    cfg->cfg.seed = seed;
    cfg->hash = config_hash(cfg->cfg);
  });
}

pnr_status pnr_config_set_reg_weight(pnr_config* cfg, double reg_weight) {
  PNR_REQUIRE(cfg, "cfg is NULL");
  return guard([&] {
    auto r = cfg->cfg.reconstruction;
    r.reg_weight = reg_weight;
    r.validate();
    cfg->cfg.reconstruction = r;
  });
}

pnr_status pnr_config_set_truncation(pnr_config* cfg, int truncation) {
  PNR_REQUIRE(cfg, "cfg is NULL");
  return guard([&] {
    auto r = cfg->cfg.reconstruction;
    r.truncation = truncation;
    r.validate();
    cfg->cfg.reconstruction = r;
  });
}

pnr_status pnr_config_set_outcomes(pnr_config* cfg, int outcomes) {
  PNR_REQUIRE(cfg, "cfg is NULL");
  return guard([&] {
    auto r = cfg->cfg.reconstruction;
    r.outcomes = outcomes;
    r.validate();
    cfg->cfg.reconstruction = r;
  });
}

pnr_status pnr_config_set_method(pnr_config* cfg, pnr_binning method) {
  PNR_REQUIRE(cfg, "cfg is NULL");
  PNR_REQUIRE(method == PNR_BINNING_THRESHOLD || method == PNR_BINNING_AREA, "unknown binning method");
  cfg->cfg.calibration.method = method == PNR_BINNING_AREA ? BinningMethod::Area : BinningMethod::Threshold;
  return PNR_OK;
}

pnr_status pnr_config_set_dark_counts(pnr_config* cfg, int enabled) {
  PNR_REQUIRE(cfg, "cfg is NULL");
  cfg->cfg.estimation.dark_counts = enabled != 0;
  return PNR_OK;
}

pnr_status pnr_config_get_seed(const pnr_config* cfg, uint64_t* seed) {
  PNR_REQUIRE(cfg && seed, "NULL argument");
  *seed = cfg->cfg.seed;
  return PNR_OK;
}

pnr_status pnr_config_get_reg_weight(const pnr_config* cfg, double* reg_weight) {
  PNR_REQUIRE(cfg && reg_weight, "NULL argument");
  *reg_weight = cfg->cfg.reconstruction.reg_weight;
  return PNR_OK;
}

pnr_status pnr_config_get_dims(const pnr_config* cfg, int* outcomes, int* truncation) {
  PNR_REQUIRE(cfg, "cfg is NULL");
  if (outcomes) *outcomes = cfg->cfg.reconstruction.outcomes;
  if (truncation) *truncation = cfg->cfg.reconstruction.truncation;
  return PNR_OK;
}

// ---- stages -------------------------------------------------------------------

void pnr_run_options_init(pnr_run_options* opts) {
  if (!opts) return;
  opts->jobs = 1;
  opts->force = 0;
  opts->skip_failed = 0;
}

pnr_status pnr_run_simulate(const pnr_config* cfg, const char* out_dir, const pnr_run_options* opts) {
  PNR_REQUIRE(cfg && out_dir, "NULL argument");
  return guard([&] { stage_simulate(context(cfg, opts), out_dir); });
}

pnr_status pnr_run_calibrate(const pnr_config* cfg, const char* trace_dir, const char* out_dir,
                             const pnr_run_options* opts, size_t* n_failed) {
  PNR_REQUIRE(cfg && trace_dir && out_dir, "NULL argument");
  return guard([&] {
    const auto s = stage_calibrate(context(cfg, opts), trace_dir, out_dir);
    if (n_failed) *n_failed = s.failed.size();
  });
}

pnr_status pnr_run_reconstruct(const pnr_config* cfg, const char* counts_path, const char* ensemble_path,
                               const char* out_dir, const pnr_run_options* opts) {
  PNR_REQUIRE(cfg && counts_path && ensemble_path && out_dir, "NULL argument");
  return guard([&] { stage_reconstruct(context(cfg, opts), counts_path, ensemble_path, out_dir); });
}

pnr_status pnr_run_estimate(const pnr_config* cfg, const char* counts_path, const char* ensemble_path,
                            const char* out_dir, const pnr_run_options* opts) {
  PNR_REQUIRE(cfg && counts_path && ensemble_path && out_dir, "NULL argument");
  return guard([&] { stage_estimate(context(cfg, opts), counts_path, ensemble_path, out_dir); });
}

pnr_status pnr_run_validate(const pnr_config* cfg, const char* povm_path, const char* counts_path,
                            const char* ensemble_path, const char* estimate_path, const char* out_dir,
                            const pnr_run_options* opts, double* min_fidelity) {
  PNR_REQUIRE(cfg && povm_path && counts_path && ensemble_path && estimate_path && out_dir, "NULL argument");
  return guard([&] {
    const auto s =
        stage_validate(context(cfg, opts), povm_path, counts_path, ensemble_path, estimate_path, out_dir);
    if (min_fidelity) *min_fidelity = s.fidelity.min_low;
  });
}

// ---- ensembles ----------------------------------------------------------------

pnr_status pnr_ensemble_paper_default(uint64_t n_pulses, pnr_ensemble** out) {
  PNR_REQUIRE(out, "out is NULL");
  *out = nullptr;
  return guard([&] { *out = new pnr_ensemble{ProbeEnsemble::paper_default(n_pulses)}; });
}

pnr_status pnr_ensemble_create(const int64_t* ids, const double* means, size_t k, uint64_t n_pulses,
                               pnr_ensemble** out) {
  PNR_REQUIRE(ids && means && out, "NULL argument");
  *out = nullptr;
  return guard([&] {
    std::vector<Probe> probes(k);
    for (size_t j = 0; j < k; ++j) probes[j] = {ids[j], means[j], std::nullopt, n_pulses};
    *out = new pnr_ensemble{ProbeEnsemble(std::move(probes))};
  });
}

pnr_status pnr_ensemble_load(const char* path, pnr_ensemble** out) {
  PNR_REQUIRE(path && out, "NULL argument");
  *out = nullptr;
  return guard([&] { *out = new pnr_ensemble{read_ensemble(path)}; });
}

pnr_status pnr_ensemble_size(const pnr_ensemble* e, size_t* k) {
  PNR_REQUIRE(e && k, "NULL argument");
  *k = e->e.size();
  return PNR_OK;
}

pnr_status pnr_ensemble_probe(const pnr_ensemble* e, size_t j, int64_t* id, double* mean_photons) {
  PNR_REQUIRE(e, "ensemble is NULL");
  PNR_REQUIRE(j < e->e.size(), "probe index out of range");
  if (id) *id = e->e[j].id;
  if (mean_photons) *mean_photons = e->e[j].mean_photons;
  return PNR_OK;
}

void pnr_ensemble_free(pnr_ensemble* e) { delete e; }

// ---- traces -------------------------------------------------------------------

void pnr_detector_params_init(pnr_detector_params* p) {
  if (!p) return;
  const DetectorPhysicalConfig d;
  *p = {d.eta, d.gamma, d.baseline_mv, d.peak_spacing_mv, d.sigma0_mv, d.sigma_slope, 0};
}

pnr_status pnr_simulate_trace(const pnr_detector_params* p, double mu, uint64_t n_pulses, uint64_t seed,
                              pnr_trace** out) {
  PNR_REQUIRE(p && out, "NULL argument");
  *out = nullptr;
  return guard([&] {
    DetectorPhysicalConfig d;
    d.eta = p->eta;
    d.gamma = p->gamma;
    d.baseline_mv = p->baseline_mv;
    d.peak_spacing_mv = p->peak_spacing_mv;
    d.sigma0_mv = p->sigma0_mv;
    d.sigma_slope = p->sigma_slope;
    if (p->saturation_count) d.saturation_count = p->saturation_count;
    *out = new pnr_trace{simulate_trace(d, mu, n_pulses, seed)};
  });
}

pnr_status pnr_trace_size(const pnr_trace* t, size_t* n) {
  PNR_REQUIRE(t && n, "NULL argument");
  *n = t->t.size();
  return PNR_OK;
}

pnr_status pnr_trace_data(const pnr_trace* t, const double** amplitudes, const int** truth) {
  PNR_REQUIRE(t, "trace is NULL");
  if (amplitudes) *amplitudes = t->t.amplitudes.data();
  if (truth) *truth = t->t.truth_counts ? t->t.truth_counts->data() : nullptr;
  return PNR_OK;
}

void pnr_trace_free(pnr_trace* t) { delete t; }

pnr_status pnr_calibrate_trace(const pnr_trace* t, int outcomes, pnr_binning method, uint64_t* counts) {
  PNR_REQUIRE(t && counts, "NULL argument");
  PNR_REQUIRE(outcomes >= 2, "outcomes must be >= 2");
  return guard([&] {
    const auto cal =
        calibrate_trace(t->t, outcomes, method == PNR_BINNING_AREA ? BinningMethod::Area : BinningMethod::Threshold);
    for (int n = 0; n < outcomes; ++n) counts[n] = cal.column.counts[static_cast<size_t>(n)];
  });
}

// ---- counts -------------------------------------------------------------------

pnr_status pnr_counts_load(const char* path, pnr_counts** out) {
  PNR_REQUIRE(path && out, "NULL argument");
  *out = nullptr;
  return guard([&] { *out = new pnr_counts{read_counts(path).table}; });
}

pnr_status pnr_counts_dims(const pnr_counts* c, int* outcomes, size_t* probes) {
  PNR_REQUIRE(c, "counts is NULL");
  if (outcomes) *outcomes = c->table.outcomes();
  if (probes) *probes = c->table.probes();
  return PNR_OK;
}

pnr_status pnr_counts_get(const pnr_counts* c, int n, size_t j, uint64_t* value) {
  PNR_REQUIRE(c && value, "NULL argument");
  PNR_REQUIRE(n >= 0 && n < c->table.outcomes() && j < c->table.probes(), "index out of range");
  *value = c->table.count(n, j);
  return PNR_OK;
}

void pnr_counts_free(pnr_counts* c) { delete c; }

// ---- POVMs --------------------------------------------------------------------

pnr_status pnr_povm_load(const char* path, pnr_povm** out) {
  PNR_REQUIRE(path && out, "NULL argument");
  *out = nullptr;
  return guard([&] { *out = new pnr_povm{read_povm(path).povm}; });
}

pnr_status pnr_povm_binomial(double eta, int outcomes, int truncation, pnr_povm** out) {
  PNR_REQUIRE(out, "out is NULL");
  *out = nullptr;
  return guard([&] { *out = new pnr_povm{binomial_povm(eta, outcomes, truncation)}; });
}

pnr_status pnr_povm_dark_counts(double eta, double gamma, int outcomes, int truncation, pnr_povm** out) {
  PNR_REQUIRE(out, "out is NULL");
  *out = nullptr;
  return guard([&] { *out = new pnr_povm{dark_count_povm({eta, gamma}, outcomes, truncation)}; });
}

pnr_status pnr_povm_reconstruct(const double* probs, const double* means, size_t k, int outcomes, int truncation,
                                double reg_weight, pnr_povm** out) {
  PNR_REQUIRE(probs && means && out, "NULL argument");
  PNR_REQUIRE(k > 0 && outcomes > 0, "empty probability matrix");
  *out = nullptr;
  return guard([&] {
    ReconstructionConfig rc;
    rc.outcomes = outcomes;
    rc.truncation = truncation;
    rc.reg_weight = reg_weight;
    Matrix p(outcomes, static_cast<Eigen::Index>(k));
    for (int n = 0; n < outcomes; ++n)
      for (size_t j = 0; j < k; ++j) p(n, static_cast<Eigen::Index>(j)) = probs[static_cast<size_t>(n) * k + j];
    auto r = reconstruct_povm(p, std::span<const double>(means, k), rc);
    *out = new pnr_povm{std::move(r.povm)};
  });
}

pnr_status pnr_povm_dims(const pnr_povm* p, int* outcomes, int* truncation) {
  PNR_REQUIRE(p, "povm is NULL");
  if (outcomes) *outcomes = p->p.outcomes();
  if (truncation) *truncation = p->p.truncation();
  return PNR_OK;
}

pnr_status pnr_povm_entry(const pnr_povm* p, int n, int m, double* value) {
  PNR_REQUIRE(p && value, "NULL argument");
  PNR_REQUIRE(n >= 0 && n < p->p.outcomes() && m >= 0 && m < p->p.truncation(), "index out of range");
  *value = p->p(n, m);
  return PNR_OK;
}

pnr_status pnr_povm_fidelity(const pnr_povm* a, const pnr_povm* b, int m, double* value) {
  PNR_REQUIRE(a && b && value, "NULL argument");
  return guard([&] { *value = column_fidelity(a->p, b->p, m); });
}

void pnr_povm_free(pnr_povm* p) { delete p; }

// ---- estimation ---------------------------------------------------------------

pnr_status pnr_estimate(const pnr_counts* counts, const pnr_ensemble* ensemble, int dark_counts,
                        pnr_estimate_result* out) {
  PNR_REQUIRE(counts && ensemble && out, "NULL argument");
  return guard([&] {
    const auto e = dark_counts ? estimate_eta_gamma(counts->table, ensemble->e) : estimate_eta(counts->table, ensemble->e);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    out->eta_hat = e.eta_hat;
    out->eta_se = e.eta_se.value_or(nan);
    out->gamma_hat = e.gamma_hat.value_or(nan);
    out->gamma_se = e.gamma_se.value_or(nan);
    out->gamma_upper = e.gamma_upper.value_or(nan);
    out->loglik = e.loglik;
  });
}

}  // extern "C"
