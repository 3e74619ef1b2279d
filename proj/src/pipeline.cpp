#include "pnrtomo/pipeline.hpp"

#include <algorithm>
#include <mutex>
#include <cstdio>
#include <optional>

#include "parallel.hpp"
#include "pnrtomo/errors.hpp"

namespace pnrtomo {

namespace {

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory " + dir.string());
}

void expect_lineage(const RunContext& ctx, const Lineage& got, const std::string& what) {
  if (ctx.options.force) return;
  check_lineage(ctx.lineage, got, what);
}

// Drops probes that calibration recorded as failed, so that the remaining
// ensemble lines up with the count table. Any other mismatch is left for
// match_probes to report.
ProbeEnsemble usable_ensemble(const ProbeEnsemble& ensemble, const CountsArtifact& counts) {
  if (counts.failed_probes.empty()) return ensemble;
  std::vector<Probe> keep;
  for (const auto& p : ensemble.probes())
    if (std::find(counts.failed_probes.begin(), counts.failed_probes.end(), p.id) == counts.failed_probes.end())
      keep.push_back(p);
  return ProbeEnsemble(std::move(keep));
}

struct Inputs {
  CountsArtifact counts;
  ProbeEnsemble ensemble;
};

Inputs load_inputs(const RunContext& ctx, const fs::path& counts_file, const fs::path& ensemble_file) {
  Inputs in;
  in.counts = read_counts(counts_file);
  expect_lineage(ctx, in.counts.lineage, counts_file.string());
  Lineage el;
  const ProbeEnsemble full = read_ensemble(ensemble_file, &el);
  expect_lineage(ctx, el, ensemble_file.string());
  in.ensemble = usable_ensemble(full, in.counts);
  match_probes(in.counts.table, in.ensemble);
  return in;
}

}  // namespace

RunContext make_context(const PipelineConfig& cfg, const RunOptions& options) {
  return {cfg, {config_hash(cfg), cfg.seed}, options};
}

void stage_simulate(const RunContext& ctx, const fs::path& out) {
  ensure_dir(out);
  const auto& cfg = ctx.config;
  const auto traces = simulate_ensemble(cfg.detector, cfg.ensemble, cfg.seed,
                                        static_cast<unsigned>(std::max(ctx.options.jobs, 1)));
  std::vector<std::string> files;
  detail::parallel_for(traces.size(), static_cast<unsigned>(std::max(ctx.options.jobs, 1)),
                       [&](std::size_t i) { write_trace(out, traces[i], ctx.lineage); });
  for (const auto& t : traces) {
    const fs::path name = trace_file_name(t.probe_id);
    files.push_back(name.string());
    fs::path truth = name;
    truth.replace_extension(".truth.csv");
    files.push_back(truth.string());
  }
  write_ensemble(out / "ensemble.json", cfg.ensemble, ctx.lineage);
  write_text_atomic(out / "config.json", config_to_json(cfg));
  files.insert(files.end(), {"ensemble.json", "config.json"});
  write_manifest(out, ctx.lineage, files);
}

CalibrateSummary stage_calibrate(const RunContext& ctx, const fs::path& trace_dir, const fs::path& out) {
  const auto files = list_trace_files(trace_dir);
  ensure_dir(out);
  const auto& cfg = ctx.config;
  const int n_out = cfg.reconstruction.outcomes;

  std::vector<std::optional<ProbeCalibration>> results(files.size());
  std::vector<std::int64_t> ids(files.size());
  std::vector<std::string> errors(files.size());
  std::vector<int> fatal(files.size(), 0);
  detail::parallel_for(files.size(), static_cast<unsigned>(std::max(ctx.options.jobs, 1)), [&](std::size_t i) {
    Lineage l;
    const AmplitudeTrace t = read_trace(files[i], &l);
    ids[i] = t.probe_id;
    if (!l.config_hash.empty()) expect_lineage(ctx, l, files[i].string());
    try {
      results[i] = calibrate_trace(t, n_out, cfg.calibration.method, cfg.calibration.fit);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Calibration && e.kind() != ErrorKind::Numerical) throw;
      errors[i] = "probe " + std::to_string(t.probe_id) + ": " + e.what();
      fatal[i] = static_cast<int>(e.kind());
    }
  });

  CalibrateSummary sum;
  sum.probes = files.size();
  std::vector<std::int64_t> ok_ids;
  std::vector<std::vector<std::uint64_t>> cols;
  std::vector<ProbeCalibration> cals;
  for (std::size_t i = 0; i < files.size(); ++i) {
    if (!results[i]) {
      if (!ctx.options.skip_failed) {
        if (fatal[i] == static_cast<int>(ErrorKind::Numerical)) throw NumericalError(errors[i]);
        throw CalibrationError(errors[i]);
      }
      sum.failed.push_back(ids[i]);
      sum.messages.push_back(errors[i]);
      continue;
    }
    ok_ids.push_back(ids[i]);
    cols.push_back(results[i]->column.counts);
    cals.push_back(std::move(*results[i]));
  }
  if (ok_ids.empty()) throw CalibrationError("every probe failed to calibrate");

  CountsArtifact art;
  art.table = CountTable(n_out, ok_ids, std::move(cols));
  art.lineage = ctx.lineage;
  art.method = cfg.calibration.method == BinningMethod::Area ? "area" : "threshold";
  art.failed_probes = sum.failed;
  write_counts(out / "counts.json", art);
  write_fit_report(out / "fits.json", ok_ids, cals, ctx.lineage);
  return sum;
}

ReconstructionResult stage_reconstruct(const RunContext& ctx, const fs::path& counts, const fs::path& ensemble,
                                       const fs::path& out) {
  const Inputs in = load_inputs(ctx, counts, ensemble);
  ensure_dir(out);
  const auto& rc = ctx.config.reconstruction;
  auto res = reconstruct_povm(in.counts.table, in.ensemble, rc);
  PovmArtifact art{res.povm, rc, ctx.lineage, res.converged, res.iterations, res.data_term, res.reg_term};
  write_povm(out / "povm.json", art);
  write_convergence_log(out / "convergence.csv", res.objective_history, ctx.lineage);
  return res;
}

EfficiencyEstimate stage_estimate(const RunContext& ctx, const fs::path& counts, const fs::path& ensemble,
                                  const fs::path& out) {
  const Inputs in = load_inputs(ctx, counts, ensemble);
  ensure_dir(out);
  const auto& es = ctx.config.estimation;
  EstimateArtifact art;
  art.dark_counts = es.dark_counts;
  art.lineage = ctx.lineage;
  art.estimate = es.dark_counts ? estimate_eta_gamma(in.counts.table, in.ensemble, es.options)
                                : estimate_eta(in.counts.table, in.ensemble, es.options);
  write_estimate(out / "estimate.json", art);
  return art.estimate;
}

ValidateSummary stage_validate(const RunContext& ctx, const fs::path& povm, const fs::path& counts,
                               const fs::path& ensemble, const fs::path& estimate, const fs::path& out) {
  const Inputs in = load_inputs(ctx, counts, ensemble);
  const PovmArtifact pa = read_povm(povm);
  expect_lineage(ctx, pa.lineage, povm.string());
  const EstimateArtifact ea = read_estimate(estimate);
  expect_lineage(ctx, ea.lineage, estimate.string());
  ensure_dir(out);

  const auto& e = ea.estimate;
  const int n_out = pa.povm.outcomes(), m_cnt = pa.povm.truncation();
  const PovmMatrix model = ea.dark_counts && e.gamma_hat && *e.gamma_hat > 0.0
                               ? dark_count_povm({e.eta_hat, *e.gamma_hat}, n_out, m_cnt)
                               : binomial_povm(e.eta_hat, n_out, m_cnt);
  const auto& v = ctx.config.validation;
  const auto grid = perturbation_grid(v.energy_scale, v.attenuation_db);
  const SweepResult sweep =
      sensitivity_sweep(in.counts.table, in.ensemble, pa.config, pa.povm, model, grid, v.split, ctx.options.jobs);
  const ComparisonTable cmp = three_way_comparison(in.counts.table, pa.povm, e.eta_hat, in.ensemble);

  write_fidelity_report(out / "fidelity.json", sweep.baseline, sweep.envelope, ctx.lineage);
  std::string csv = "# config_hash=" + ctx.lineage.config_hash + " seed=" + std::to_string(ctx.lineage.seed) +
                    "\nm,fidelity,envelope\n";
  for (std::size_t m = 0; m < sweep.envelope.size(); ++m) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", m, sweep.baseline.f[m], sweep.envelope[m]);
    csv += buf;
  }
  write_text_atomic(out / "fidelity.csv", csv);
  write_comparison_report(out / "comparison.json", cmp, ctx.lineage);
  write_sweep_report(out / "sweep.json", sweep, ctx.lineage);

  ValidateSummary s;
  s.fidelity = sweep.baseline;
  s.sweep_envelope_min_low = sweep.envelope_min_low;
  for (const auto& p : cmp.probes) s.worst_tv_pl = std::max(s.worst_tv_pl, p.tv_pl);
  return s;
}

}  // namespace pnrtomo
