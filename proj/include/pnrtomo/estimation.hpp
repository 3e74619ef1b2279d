#pragma once

// Maximum-likelihood estimation of the linear-detector parameters from count
// statistics: quantum efficiency alone, or jointly with a Poissonian dark-count
// rate.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pnrtomo/calibration.hpp"
#include "pnrtomo/photon_stats.hpp"

namespace pnrtomo {

struct EfficiencyEstimate {
  double eta_hat = 0.0;
  std::optional<double> eta_se;        // spread of per-probe estimates / sqrt(K); absent for K = 1
  std::optional<double> eta_fisher_se; // diagnostic: pooled observed-information error
  std::vector<double> per_probe_etas;  // aligned with `probe_ids`
  std::vector<std::int64_t> probe_ids; // probes that entered the estimate
  std::optional<double> gamma_hat;
  std::optional<double> gamma_se;      // delete-one jackknife across probes
  std::optional<double> gamma_upper;   // one-sided 95 % upper bound
  bool gamma_at_boundary = false;
  double loglik = 0.0;
  std::vector<std::string> warnings;
};

struct EstimationOptions {
  double gamma_max = 5.0;
  double tol = 1e-7;
  double upper_bound_level = 0.95;
};

/// Log-likelihood of one probe's outcome counts under Poisson(eta*mu + gamma)
/// with a cumulative last outcome, i.e. sum_n N_n log(sum_m Pi(n, m) q_m) for
/// the dark-count linear detector. Returns -inf when an observed outcome has
/// zero probability. Throws DomainError for parameters outside their domain.
double loglik_eta_gamma(double eta, double gamma, std::span<const double> counts, double mu);

/// loglik_eta_gamma with gamma = 0.
double loglik_eta(double eta, std::span<const double> counts, double mu);

/// Maximises f on [lo, hi] (golden section with parabolic steps), also
/// comparing both end points. Returns the arg max.
double maximize_bounded(const std::function<double(double)>& f, double lo, double hi, double tol);

/// Per-probe ML efficiency, averaged over probes.
EfficiencyEstimate estimate_eta(const CountTable& counts, const ProbeEnsemble& ensemble,
                                const EstimationOptions& options = {});

/// Joint (eta, gamma) estimate with gamma constrained to [0, gamma_max]. The
/// reported eta_hat is the probe average of per-probe efficiencies at the
/// fitted gamma, so fixing gamma_max = 0 reproduces estimate_eta.
EfficiencyEstimate estimate_eta_gamma(const CountTable& counts, const ProbeEnsemble& ensemble,
                                      const EstimationOptions& options = {});

struct DarkRate {
  double gamma_hat = 0.0;  // fraction of pulses above the first threshold
  double std_error = 0.0;  // binomial
  double upper_bound = 0.0;
  double level = 0.95;
  std::uint64_t events_above = 0;
  std::uint64_t n_events = 0;
  bool implausible = false;  // more than half of a dark run above threshold
};

/// Dark-count rate from a trace recorded with the source blocked, using the
/// first cut point of a calibration made with light.
DarkRate dark_rate_direct(const AmplitudeTrace& dark_trace, const ThresholdSet& thresholds, double level = 0.95);

/// One-sided Clopper-Pearson upper bound on a binomial proportion.
double binomial_upper_bound(std::uint64_t successes, std::uint64_t trials, double level);

}  // namespace pnrtomo
