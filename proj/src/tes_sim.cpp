#include "pnrtomo/tes_sim.hpp"

#include <cmath>
#include <random>
#include <string>

#include "parallel.hpp"
#include "pnrtomo/errors.hpp"

namespace pnrtomo {

void DetectorPhysicalConfig::validate() const {
  if (!(eta >= 0.0 && eta <= 1.0)) throw ConfigError("detector.eta must lie in [0, 1]");
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw ConfigError("detector.gamma must be finite and >= 0");
  if (!std::isfinite(baseline_mv)) throw ConfigError("detector.baseline_mv must be finite");
  if (!(peak_spacing_mv > 0.0) || !std::isfinite(peak_spacing_mv))
    throw ConfigError("detector.peak_spacing_mv must be positive");
  if (!(sigma0_mv > 0.0) || !std::isfinite(sigma0_mv)) throw ConfigError("detector.sigma0_mv must be positive");
  if (!(sigma_slope >= 0.0) || !std::isfinite(sigma_slope)) throw ConfigError("detector.sigma_slope must be >= 0");
  if (saturation_count && *saturation_count == 0) throw ConfigError("detector.saturation_count must be positive");
}

void AmplitudeTrace::validate() const {
  for (double a : amplitudes)
    if (!std::isfinite(a)) throw DomainError("trace " + std::to_string(probe_id) + " has a non-finite amplitude");
  if (truth_counts && truth_counts->size() != amplitudes.size())
    throw DomainError("trace " + std::to_string(probe_id) + ": truth sidecar length differs from amplitudes");
}

std::uint64_t derive_probe_seed(std::uint64_t seed, std::int64_t probe_id) {
  auto splitmix = [](std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  };
  return splitmix(splitmix(seed) ^ static_cast<std::uint64_t>(probe_id));
}

AmplitudeTrace simulate_trace(const DetectorPhysicalConfig& cfg, double mu, std::uint64_t n_pulses,
                              std::uint64_t seed, std::int64_t probe_id) {
  cfg.validate();
  if (n_pulses < 1) throw ConfigError("n_pulses must be >= 1");
  if (!(mu >= 0.0) || !std::isfinite(mu)) throw ConfigError("mean photon number must be finite and >= 0");

  std::mt19937_64 rng(seed);
  std::poisson_distribution<long> photons(mu > 0.0 ? mu : 1.0);
  std::poisson_distribution<long> dark(cfg.gamma > 0.0 ? cfg.gamma : 1.0);
  std::binomial_distribution<long> detect;
  std::normal_distribution<double> noise(0.0, 1.0);

  AmplitudeTrace trace;
  trace.probe_id = probe_id;
  trace.amplitudes.resize(n_pulses);
  std::vector<int> truth(n_pulses);
  for (std::uint64_t i = 0; i < n_pulses; ++i) {
    const long m = mu > 0.0 ? photons(rng) : 0;
    long k = 0;
    if (m > 0 && cfg.eta > 0.0) {
      detect.param(std::binomial_distribution<long>::param_type(m, cfg.eta));
      k = detect(rng);
    }
    const long d = cfg.gamma > 0.0 ? dark(rng) : 0;
    long c = k + d;
    if (cfg.saturation_count) c = std::min<long>(c, *cfg.saturation_count);
    const double sigma = cfg.sigma0_mv + static_cast<double>(c) * cfg.sigma_slope;
    trace.amplitudes[i] = cfg.baseline_mv + static_cast<double>(c) * cfg.peak_spacing_mv + sigma * noise(rng);
    truth[i] = static_cast<int>(c);
  }
  trace.truth_counts = std::move(truth);
  return trace;
}

std::vector<AmplitudeTrace> simulate_ensemble(const DetectorPhysicalConfig& cfg, const ProbeEnsemble& ensemble,
                                              std::uint64_t seed, unsigned jobs) {
  cfg.validate();
  std::vector<AmplitudeTrace> traces(ensemble.size());
  detail::parallel_for(ensemble.size(), jobs, [&](std::size_t j) {
    const Probe& p = ensemble[j];
    traces[j] = simulate_trace(cfg, p.mean_photons, p.n_pulses, derive_probe_seed(seed, p.id), p.id);
  });
  return traces;
}

}  // namespace pnrtomo
