#pragma once

// Seeded Monte Carlo stand-in for the TES + SQUID + oscilloscope chain. Only
// the pulse-height summary is simulated: each pulse becomes one amplitude.

#include <cstdint>
#include <optional>
#include <vector>

#include "pnrtomo/photon_stats.hpp"

namespace pnrtomo {

struct DetectorPhysicalConfig {
  double eta = 0.051;
  double gamma = 0.0;            // dark counts per pulse
  double baseline_mv = 0.0;      // centre of the 0-peak
  double peak_spacing_mv = 13.0; // amplitude per detected photon
  double sigma0_mv = 2.0;        // width of the 0-peak
  double sigma_slope = 0.0;      // extra width per detected photon (mV)
  std::optional<std::uint32_t> saturation_count;

  /// Throws ConfigError.
  void validate() const;
  double resolution() const noexcept { return peak_spacing_mv / sigma0_mv; }
};

struct AmplitudeTrace {
  std::int64_t probe_id = 0;
  std::vector<double> amplitudes;                 // mV
  std::optional<std::vector<int>> truth_counts;   // simulator only

  /// Throws DomainError on non-finite amplitudes or a mismatched sidecar.
  void validate() const;
  std::size_t size() const noexcept { return amplitudes.size(); }
};

/// Per pulse: m ~ Poisson(mu), k ~ Binomial(m, eta), d ~ Poisson(gamma),
/// c = min(k + d, saturation); amplitude = baseline + c*spacing + N(0, sigma0 + c*slope).
AmplitudeTrace simulate_trace(const DetectorPhysicalConfig& cfg, double mu, std::uint64_t n_pulses,
                              std::uint64_t seed, std::int64_t probe_id = 0);

/// splitmix64 mix of (seed, probe_id); adding probes never perturbs others.
std::uint64_t derive_probe_seed(std::uint64_t seed, std::int64_t probe_id);

/// One trace per probe, in ensemble order. Output is independent of `jobs`.
std::vector<AmplitudeTrace> simulate_ensemble(const DetectorPhysicalConfig& cfg, const ProbeEnsemble& ensemble,
                                              std::uint64_t seed, unsigned jobs = 1);

}  // namespace pnrtomo
