#pragma once

// Run configuration and on-disk artifacts. Traces are CSV, everything else is
// JSON with explicit dimensions and row-major arrays. Every artifact carries
// the hash of the configuration that produced it.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pnrtomo/calibration.hpp"
#include "pnrtomo/estimation.hpp"
#include "pnrtomo/metrics.hpp"
#include "pnrtomo/tes_sim.hpp"
#include "pnrtomo/tomography.hpp"

namespace pnrtomo {

namespace fs = std::filesystem;

struct CalibrationSettings {
  BinningMethod method = BinningMethod::Threshold;
  FitOptions fit;
};

struct EstimationSettings {
  bool dark_counts = false;
  EstimationOptions options;
};

struct ValidationSettings {
  int split = 100;
  double energy_scale = 0.005;   // relative, swept as +-
  double attenuation_db = 0.0;   // swept as +-
};

struct PipelineConfig {
  DetectorPhysicalConfig detector;
  ProbeEnsemble ensemble = ProbeEnsemble::paper_default();
  std::uint64_t seed = 1;
  CalibrationSettings calibration;
  ReconstructionConfig reconstruction;
  EstimationSettings estimation;
  ValidationSettings validation;
};

/// Parses a config document. Missing sections and keys take defaults; unknown
/// keys and wrong types throw SchemaError naming the JSON pointer of the field
/// (and the probe id for per-probe fields). Value-range problems throw
/// ConfigError.
PipelineConfig parse_config(const std::string& json_text);
PipelineConfig load_config(const fs::path& path);

/// Fully expanded, canonical JSON (sorted keys, every default written out).
std::string config_to_json(const PipelineConfig& cfg);

/// 16 hex digits of FNV-1a over the canonical JSON.
std::string config_hash(const PipelineConfig& cfg);

struct Lineage {
  std::string config_hash;
  std::uint64_t seed = 0;
};

/// Throws LineageError when `b` was produced by another config than `a`.
void check_lineage(const Lineage& a, const Lineage& b, const std::string& what);

// Traces ------------------------------------------------------------------

/// probe_0001.csv (+ probe_0001.truth.csv when truth counts are present).
fs::path trace_file_name(std::int64_t probe_id);
void write_trace(const fs::path& dir, const AmplitudeTrace& trace, const Lineage& lineage);
/// Reads the amplitude file and its truth sidecar if one exists.
AmplitudeTrace read_trace(const fs::path& file, Lineage* lineage = nullptr);
/// Sorted trace files of a directory; IoError if there are none.
std::vector<fs::path> list_trace_files(const fs::path& dir);

void write_manifest(const fs::path& dir, const Lineage& lineage, const std::vector<std::string>& files);

// JSON artifacts ------------------------------------------------------------

void write_ensemble(const fs::path& file, const ProbeEnsemble& ensemble, const Lineage& lineage);
ProbeEnsemble read_ensemble(const fs::path& file, Lineage* lineage = nullptr);

struct CountsArtifact {
  CountTable table;
  Lineage lineage;
  std::string method;
  std::vector<std::int64_t> failed_probes;
};
void write_counts(const fs::path& file, const CountsArtifact& counts);
CountsArtifact read_counts(const fs::path& file);

void write_fit_report(const fs::path& file, const std::vector<std::int64_t>& probe_ids,
                      const std::vector<ProbeCalibration>& calibrations, const Lineage& lineage);

struct PovmArtifact {
  PovmMatrix povm;
  ReconstructionConfig config;
  Lineage lineage;
  bool converged = false;
  int iterations = 0;
  double data_term = 0.0;
  double reg_term = 0.0;
};
void write_povm(const fs::path& file, const PovmArtifact& povm);
PovmArtifact read_povm(const fs::path& file);
/// iteration,objective
void write_convergence_log(const fs::path& file, const std::vector<double>& history, const Lineage& lineage);

struct EstimateArtifact {
  EfficiencyEstimate estimate;
  bool dark_counts = false;
  Lineage lineage;
};
void write_estimate(const fs::path& file, const EstimateArtifact& estimate);
EstimateArtifact read_estimate(const fs::path& file);

void write_fidelity_report(const fs::path& file, const FidelityCurve& curve, const std::vector<double>& envelope,
                           const Lineage& lineage);
void write_comparison_report(const fs::path& file, const ComparisonTable& table, const Lineage& lineage);
void write_sweep_report(const fs::path& file, const SweepResult& sweep, const Lineage& lineage);

/// Writes `text` to `file` via a temporary in the same directory.
void write_text_atomic(const fs::path& file, const std::string& text);

}  // namespace pnrtomo
