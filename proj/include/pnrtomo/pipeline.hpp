#pragma once

// File-level pipeline stages. Each stage reads the artifacts of the previous
// one from disk, checks their lineage against the active config and writes its
// own artifacts into `out`.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pnrtomo/io.hpp"

namespace pnrtomo {

struct RunOptions {
  int jobs = 1;
  bool force = false;        // accept artifacts from another config / seed
  bool skip_failed = false;  // drop probes whose calibration fails
};

/// Everything a stage needs to know about the run. `lineage` is what the
/// stage stamps on its outputs and expects on its inputs.
struct RunContext {
  PipelineConfig config;
  Lineage lineage;
  RunOptions options;
};

/// Hash and seed from `cfg`.
RunContext make_context(const PipelineConfig& cfg, const RunOptions& options);

/// probe_XXXX.csv (+ truth), ensemble.json, config.json, manifest.json.
void stage_simulate(const RunContext& ctx, const fs::path& out);

struct CalibrateSummary {
  std::size_t probes = 0;
  std::vector<std::int64_t> failed;
  std::vector<std::string> messages;
};
/// Trace directory -> counts.json + fits.json. Throws CalibrationError (or the
/// underlying fit error) on the first failing probe unless skip_failed.
CalibrateSummary stage_calibrate(const RunContext& ctx, const fs::path& trace_dir, const fs::path& out);

/// -> povm.json + convergence.csv
ReconstructionResult stage_reconstruct(const RunContext& ctx, const fs::path& counts, const fs::path& ensemble,
                                       const fs::path& out);

/// -> estimate.json
EfficiencyEstimate stage_estimate(const RunContext& ctx, const fs::path& counts, const fs::path& ensemble,
                                  const fs::path& out);

struct ValidateSummary {
  FidelityCurve fidelity;
  double sweep_envelope_min_low = 1.0;
  double worst_tv_pl = 0.0;
};
/// -> fidelity.json, fidelity.csv, comparison.json, sweep.json
ValidateSummary stage_validate(const RunContext& ctx, const fs::path& povm, const fs::path& counts,
                               const fs::path& ensemble, const fs::path& estimate, const fs::path& out);

}  // namespace pnrtomo
