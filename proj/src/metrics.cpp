#include "pnrtomo/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "parallel.hpp"
#include "pnrtomo/errors.hpp"

namespace pnrtomo {

double FidelityCurve::min_over(int lo, int hi) const {
  lo = std::max(lo, 0);
  hi = std::min(hi, static_cast<int>(f.size()) - 1);
  double v = 1.0;
  for (int m = lo; m <= hi; ++m) v = std::min(v, f[static_cast<std::size_t>(m)]);
  return v;
}

namespace {

void summarize(FidelityCurve& c) {
  const int m_count = static_cast<int>(c.f.size());
  c.min_low = c.min_over(0, c.split);
  if (c.split + 1 < m_count)
    c.min_high = c.min_over(c.split + 1, m_count - 1);
  else
    c.min_high.reset();
}

}  // namespace

FidelityCurve fidelity_curve(const PovmMatrix& reconstructed, const PovmMatrix& model, int split) {
  if (reconstructed.outcomes() != model.outcomes() || reconstructed.truncation() != model.truncation())
    throw ShapeError("fidelity curve: POVM shapes differ (" + std::to_string(reconstructed.outcomes()) + "x" +
                     std::to_string(reconstructed.truncation()) + " vs " + std::to_string(model.outcomes()) + "x" +
                     std::to_string(model.truncation()) + ")");
  if (split < 0) throw DomainError("fidelity split must be >= 0");
  FidelityCurve c;
  c.split = split;
  c.f.resize(static_cast<std::size_t>(model.truncation()));
  for (int m = 0; m < model.truncation(); ++m) c.f[static_cast<std::size_t>(m)] = column_fidelity(reconstructed, model, m);
  summarize(c);
  return c;
}

ComparisonTable three_way_comparison(const CountTable& counts, const PovmMatrix& recon, double eta_hat,
                                     const ProbeEnsemble& ensemble) {
  const auto idx = match_probes(counts, ensemble);
  if (counts.outcomes() != recon.outcomes())
    throw ShapeError("comparison: count table has " + std::to_string(counts.outcomes()) +
                     " outcomes but the POVM has " + std::to_string(recon.outcomes()));
  ComparisonTable t;
  t.eta_hat = eta_hat;
  const int n_out = counts.outcomes();
  for (std::size_t j = 0; j < counts.probes(); ++j) {
    ProbeComparison pc;
    pc.probe_id = counts.probe_ids()[j];
    pc.mean_photons = ensemble[idx[j]].mean_photons;
    pc.measured = counts.distribution(j).probs;
    pc.reconstructed = predict_distribution(recon, pc.mean_photons, TailPolicy::LumpIntoLast).distribution.probs;
    pc.linear = linear_prediction(eta_hat, pc.mean_photons, n_out).probs;
    for (int n = 0; n < n_out; ++n) {
      const auto k = static_cast<std::size_t>(n);
      const double dr = std::abs(pc.measured[k] - pc.reconstructed[k]);
      const double dl = std::abs(pc.measured[k] - pc.linear[k]);
      pc.max_abs_pr = std::max(pc.max_abs_pr, dr);
      pc.max_abs_pl = std::max(pc.max_abs_pl, dl);
      pc.tv_pr += 0.5 * dr;
      pc.tv_pl += 0.5 * dl;
    }
    t.probes.push_back(std::move(pc));
  }
  return t;
}

double Perturbation::factor() const { return (1.0 + energy_scale) * std::pow(10.0, -attenuation_db / 10.0); }

std::vector<Perturbation> perturbation_grid(double energy_scale, double attenuation_db) {
  std::vector<Perturbation> out;
  for (double e : {-energy_scale, 0.0, energy_scale})
    for (double a : {-attenuation_db, 0.0, attenuation_db}) {
      const bool dup = std::any_of(out.begin(), out.end(), [&](const Perturbation& p) {
        return p.energy_scale == e && p.attenuation_db == a;
      });
      if (!dup) out.push_back({e, a});
    }
  return out;
}

SweepResult sensitivity_sweep(const CountTable& counts, const ProbeEnsemble& ensemble,
                              const ReconstructionConfig& cfg, const PovmMatrix& baseline_recon,
                              const PovmMatrix& model, std::span<const Perturbation> perturbations, int split,
                              int jobs) {
  const auto idx = match_probes(counts, ensemble);
  std::vector<double> means(idx.size());
  for (std::size_t j = 0; j < idx.size(); ++j) means[j] = ensemble[idx[j]].mean_photons;
  const Matrix probs = counts.prob_matrix();

  SweepResult res;
  res.baseline = fidelity_curve(baseline_recon, model, split);
  res.points.resize(perturbations.size());
  detail::parallel_for(perturbations.size(), static_cast<unsigned>(std::max(jobs, 1)), [&](std::size_t i) {
    const double k = perturbations[i].factor();
    if (!(k > 0.0) || !std::isfinite(k)) throw DomainError("perturbation drives the probe means out of range");
    std::vector<double> scaled(means);
    for (double& mu : scaled) mu *= k;
    const auto r = reconstruct_povm(probs, scaled, cfg);
    res.points[i] = {perturbations[i], fidelity_curve(r.povm, model, split), r.converged};
  });

  res.envelope = res.baseline.f;
  for (const auto& p : res.points)
    for (std::size_t m = 0; m < res.envelope.size(); ++m) res.envelope[m] = std::min(res.envelope[m], p.curve.f[m]);
  res.envelope_min_low = 1.0;
  for (int m = 0; m <= split && m < static_cast<int>(res.envelope.size()); ++m)
    res.envelope_min_low = std::min(res.envelope_min_low, res.envelope[static_cast<std::size_t>(m)]);
  return res;
}

}  // namespace pnrtomo
