#pragma once

// Validation metrics: per-element fidelity curves, measured / reconstructed /
// linear-model distribution comparisons, and probe-energy sensitivity sweeps.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "pnrtomo/calibration.hpp"
#include "pnrtomo/photon_stats.hpp"
#include "pnrtomo/tomography.hpp"

namespace pnrtomo {

struct FidelityCurve {
  std::vector<double> f;              // one entry per photon number m
  int split = 100;                    // summary boundary
  double min_low = 1.0;               // min over m <= split
  std::optional<double> min_high;     // min over split < m < M, if any such m

  /// Smallest F_m over lo <= m <= hi (clamped to the curve).
  double min_over(int lo, int hi) const;
};

/// F_m = sum_n sqrt(recon(n, m) model(n, m)). Throws ShapeError unless the
/// matrices have equal shape.
FidelityCurve fidelity_curve(const PovmMatrix& reconstructed, const PovmMatrix& model, int split = 100);

struct ProbeComparison {
  std::int64_t probe_id = 0;
  double mean_photons = 0.0;
  std::vector<double> measured;       // p
  std::vector<double> reconstructed;  // r = recon applied to the probe's photon statistics
  std::vector<double> linear;         // l = Poisson(eta_hat mu) with cumulative top
  double max_abs_pr = 0.0;
  double max_abs_pl = 0.0;
  double tv_pr = 0.0;
  double tv_pl = 0.0;
};

struct ComparisonTable {
  double eta_hat = 0.0;
  std::vector<ProbeComparison> probes;  // count-table order
};

ComparisonTable three_way_comparison(const CountTable& counts, const PovmMatrix& recon, double eta_hat,
                                     const ProbeEnsemble& ensemble);

/// Systematic error on the probe means: energy_scale multiplies every mu by
/// (1 + energy_scale); attenuation_db shifts every attenuator reading, so mu
/// is multiplied by 10^(-attenuation_db / 10).
struct Perturbation {
  double energy_scale = 0.0;
  double attenuation_db = 0.0;

  double factor() const;
};

/// The 3 x 3 grid {-e, 0, +e} x {-a, 0, +a}, identity included, duplicates removed.
std::vector<Perturbation> perturbation_grid(double energy_scale, double attenuation_db);

struct SweepPoint {
  Perturbation perturbation;
  FidelityCurve curve;
  bool converged = false;
};

struct SweepResult {
  FidelityCurve baseline;
  std::vector<SweepPoint> points;
  std::vector<double> envelope;  // pointwise min over baseline and every point
  double envelope_min_low = 1.0; // min of the envelope over m <= split
};

/// Re-runs the reconstruction with perturbed probe means and compares each
/// result, and the unperturbed `baseline_recon`, against the fixed `model`.
SweepResult sensitivity_sweep(const CountTable& counts, const ProbeEnsemble& ensemble,
                              const ReconstructionConfig& cfg, const PovmMatrix& baseline_recon,
                              const PovmMatrix& model, std::span<const Perturbation> perturbations,
                              int split = 100, int jobs = 1);

}  // namespace pnrtomo
