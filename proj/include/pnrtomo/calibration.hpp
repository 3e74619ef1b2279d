#pragma once

// Pulse-height calibration: Gaussian mixture fit of the amplitude histogram,
// thresholds at the mixture minima, and binning into photon-count classes.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pnrtomo/photon_stats.hpp"
#include "pnrtomo/tes_sim.hpp"

namespace pnrtomo {

struct GaussianComponent {
  double weight = 0.0;  // expected number of events
  double mean_mv = 0.0;
  double sigma_mv = 0.0;
};

struct GaussianMixtureFit {
  std::vector<GaussianComponent> components;  // strictly increasing means
  double goodness = 0.0;                      // Pearson chi-square per degree of freedom
  double bin_width_mv = 1.3;
  double fit_lo_mv = 0.0;                     // histogram range the mixture models
  double fit_hi_mv = 0.0;
  std::uint64_t n_events = 0;
  std::uint64_t events_above_fit = 0;         // events at or beyond fit_hi_mv
  int iterations = 0;

  /// Mixture density in events per mV.
  double density(double x_mv) const;
};

struct FitOptions {
  double bin_width_mv = 1.3;
  int max_peaks = 14;              // keeps the lowest-amplitude peaks
  double min_weight = 10.0;        // components below this many events are pruned
  double seed_min_height = 5.0;    // smoothed counts per bin
  double seed_prominence = 3.0;    // in units of sqrt(height)
  int max_iters = 500;
  int reweight_passes = 3;
  int em_passes = 10;              // unbinned refinement on the raw amplitudes
};

struct ThresholdSet {
  std::vector<double> cut_points_mv;  // strictly increasing
  bool used_fallback = false;
  std::vector<std::string> warnings;
};

/// One column of a CountTable.
struct CountColumn {
  std::vector<std::uint64_t> counts;
  std::vector<double> probs;
};

/// Raw counts N(n, j) with per-column normalised probabilities.
class CountTable {
 public:
  CountTable() = default;
  /// `columns[j]` holds the counts of probe `probe_ids[j]`; all of length `outcomes`.
  CountTable(int outcomes, std::vector<std::int64_t> probe_ids, std::vector<std::vector<std::uint64_t>> columns);

  int outcomes() const noexcept { return outcomes_; }
  std::size_t probes() const noexcept { return columns_.size(); }
  const std::vector<std::int64_t>& probe_ids() const noexcept { return ids_; }

  std::uint64_t count(int n, std::size_t j) const { return columns_[j][static_cast<std::size_t>(n)]; }
  std::span<const std::uint64_t> column(std::size_t j) const { return columns_[j]; }
  std::uint64_t total(std::size_t j) const;
  /// p(n, j) = N(n, j) / sum_n N(n, j); zero for an empty column.
  double prob(int n, std::size_t j) const;
  CountDistribution distribution(std::size_t j) const;
  /// N x K matrix of probabilities.
  Matrix prob_matrix() const;

 private:
  int outcomes_ = 0;
  std::vector<std::int64_t> ids_;
  std::vector<std::vector<std::uint64_t>> columns_;
};

GaussianMixtureFit fit_peaks(const AmplitudeTrace& trace, const FitOptions& options = {});

/// Cut points at the mixture-density minima between adjacent fitted means.
ThresholdSet place_thresholds(const GaussianMixtureFit& fit);

/// Pads `thresholds` to `outcomes - 1` cut points by repeating the mean peak
/// spacing past the last fitted peak, so sparse high-count events still land in
/// their own class. Unchanged when the fit has a single component.
ThresholdSet extend_thresholds(const ThresholdSet& thresholds, const GaussianMixtureFit& fit, int outcomes);

/// Interval k (number of cut points <= amplitude) maps to outcome min(k, N-1).
CountColumn bin_counts(const AmplitudeTrace& trace, const ThresholdSet& thresholds, int outcomes);

/// Event numbers from the fitted component areas; components at or beyond
/// N-1 and events above the fitted range go to the last outcome.
CountColumn bin_counts_by_area(const AmplitudeTrace& trace, const GaussianMixtureFit& fit, int outcomes);

enum class BinningMethod { Threshold, Area };

struct ProbeCalibration {
  GaussianMixtureFit fit;
  ThresholdSet thresholds;       // one per adjacent fitted pair
  ThresholdSet binning_cuts;     // thresholds extended to N-1 cut points
  CountColumn column;
};

/// fit_peaks -> place_thresholds -> extend_thresholds -> binning.
ProbeCalibration calibrate_trace(const AmplitudeTrace& trace, int outcomes, BinningMethod method,
                                 const FitOptions& options = {});

}  // namespace pnrtomo
