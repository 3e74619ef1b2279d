#include "pnrtomo/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "pnrtomo/errors.hpp"

namespace pnrtomo {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;
constexpr double kSqrt2Pi = 2.50662827463100050242;
constexpr double kHwhmPerSigma = 1.17741002251547469101;  // sqrt(2 ln 2)

double norm_cdf(double z) { return 0.5 * std::erfc(-z * kInvSqrt2); }
double norm_pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }

struct Histogram {
  double lo = 0.0;
  double width = 1.0;
  std::vector<double> y;

  double edge(std::size_t i) const { return lo + static_cast<double>(i) * width; }
  double center(std::size_t i) const { return lo + (static_cast<double>(i) + 0.5) * width; }
  std::size_t size() const { return y.size(); }
};

Histogram make_histogram(std::span<const double> amplitudes, double bin_width) {
  const auto [mn, mx] = std::minmax_element(amplitudes.begin(), amplitudes.end());
  Histogram h;
  h.width = bin_width;
  h.lo = std::floor(*mn / bin_width) * bin_width - bin_width;
  const double hi = std::ceil(*mx / bin_width) * bin_width + bin_width;
  const double nb = std::round((hi - h.lo) / bin_width);
  if (nb > 5e6) throw CalibrationError("amplitude range too wide for the bin width");
  h.y.assign(static_cast<std::size_t>(nb), 0.0);
  for (double a : amplitudes) {
    auto i = static_cast<std::ptrdiff_t>(std::floor((a - h.lo) / bin_width));
    i = std::clamp<std::ptrdiff_t>(i, 0, static_cast<std::ptrdiff_t>(h.y.size()) - 1);
    h.y[static_cast<std::size_t>(i)] += 1.0;
  }
  return h;
}

std::vector<double> moving_average3(const std::vector<double>& y) {
  std::vector<double> s(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    double sum = y[i];
    int n = 1;
    if (i > 0) sum += y[i - 1], ++n;
    if (i + 1 < y.size()) sum += y[i + 1], ++n;
    s[i] = sum / n;
  }
  return s;
}

// Local maxima of the smoothed histogram that stand out of the counting noise.
std::vector<std::size_t> find_seeds(const std::vector<double>& s, const FitOptions& opt) {
  std::vector<std::size_t> seeds;
  const std::size_t n = s.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double left = i > 0 ? s[i - 1] : -1.0;
    const double right = i + 1 < n ? s[i + 1] : -1.0;
    if (!(s[i] > left && s[i] >= right) || s[i] < opt.seed_min_height) continue;
    double lmin = s[i];
    for (std::size_t k = i; k-- > 0;) {
      if (s[k] > s[i]) break;
      lmin = std::min(lmin, s[k]);
    }
    double rmin = s[i];
    for (std::size_t k = i + 1; k < n; ++k) {
      if (s[k] > s[i]) break;
      rmin = std::min(rmin, s[k]);
    }
    const double prominence = s[i] - std::max(lmin, rmin);
    if (prominence >= opt.seed_prominence * std::sqrt(s[i])) seeds.push_back(i);
  }
  return seeds;
}

// Parameters are packed as (weight, mean, sigma) per component.
struct MixtureProblem {
  const Histogram* hist = nullptr;
  std::size_t b0 = 0, b1 = 0;  // fitted bin range [b0, b1)
  std::vector<double> var;     // per-bin variance estimate, indexed from b0

  std::size_t bins() const { return b1 - b0; }
  double fit_lo() const { return hist->edge(b0); }
  double fit_hi() const { return hist->edge(b1); }

  void model(const Vector& th, Vector& f, Matrix* jac) const {
    const std::size_t nb = bins();
    const Eigen::Index k_count = th.size() / 3;
    f.setZero(static_cast<Eigen::Index>(nb));
    if (jac) jac->setZero(static_cast<Eigen::Index>(nb), th.size());
    std::vector<double> cdf(nb + 1), pdf(nb + 1), z(nb + 1);
    for (Eigen::Index k = 0; k < k_count; ++k) {
      const double w = th(3 * k), mu = th(3 * k + 1), sigma = th(3 * k + 2);
      for (std::size_t e = 0; e <= nb; ++e) {
        z[e] = (hist->edge(b0 + e) - mu) / sigma;
        cdf[e] = norm_cdf(z[e]);
        pdf[e] = norm_pdf(z[e]);
      }
      for (std::size_t b = 0; b < nb; ++b) {
        const double dphi = cdf[b + 1] - cdf[b];
        const auto row = static_cast<Eigen::Index>(b);
        f(row) += w * dphi;
        if (jac) {
          (*jac)(row, 3 * k) = dphi;
          (*jac)(row, 3 * k + 1) = w * (pdf[b] - pdf[b + 1]) / sigma;
          (*jac)(row, 3 * k + 2) = w * (pdf[b] * z[b] - pdf[b + 1] * z[b + 1]) / sigma;
        }
      }
    }
  }

  double chi2(const Vector& f) const {
    double c = 0.0;
    for (std::size_t b = 0; b < bins(); ++b) {
      const double r = hist->y[b0 + b] - f(static_cast<Eigen::Index>(b));
      c += r * r / var[b];
    }
    return c;
  }

  bool feasible(const Vector& th) const {
    const double lo = fit_lo() - hist->width, hi = fit_hi() + hist->width;
    const double smin = 0.05 * hist->width, smax = fit_hi() - fit_lo();
    for (Eigen::Index k = 0; k < th.size() / 3; ++k) {
      if (!(th(3 * k) > 0.0)) return false;
      if (!(th(3 * k + 1) > lo && th(3 * k + 1) < hi)) return false;
      if (!(th(3 * k + 2) > smin && th(3 * k + 2) < smax)) return false;
    }
    return true;
  }
};

struct LmOutcome {
  double chi2 = 0.0;
  int iterations = 0;
  bool converged = false;
};

LmOutcome levenberg_marquardt(const MixtureProblem& prob, Vector& th, int max_iters) {
  LmOutcome out;
  const auto nb = static_cast<Eigen::Index>(prob.bins());
  Vector f(nb), f_trial(nb);
  Matrix jac(nb, th.size());
  Vector sqrt_w(nb);
  for (Eigen::Index b = 0; b < nb; ++b) sqrt_w(b) = 1.0 / std::sqrt(prob.var[static_cast<std::size_t>(b)]);
  Vector y(nb);
  for (Eigen::Index b = 0; b < nb; ++b) y(b) = prob.hist->y[prob.b0 + static_cast<std::size_t>(b)];

  prob.model(th, f, &jac);
  double chi2 = prob.chi2(f);
  double lambda = 1e-3;
  for (int it = 0; it < max_iters; ++it) {
    out.iterations = it + 1;
    if (chi2 == 0.0) {
      out.converged = true;
      break;
    }
    const Matrix wj = sqrt_w.asDiagonal() * jac;
    const Matrix a = wj.transpose() * wj;
    const Vector g = wj.transpose() * (sqrt_w.asDiagonal() * (y - f));
    bool accepted = false;
    while (lambda < 1e16) {
      Matrix damped = a;
      damped.diagonal() += lambda * a.diagonal() + Vector::Constant(a.rows(), 1e-300);
      const Vector delta = damped.ldlt().solve(g);
      const Vector trial = th + delta;
      if (!delta.allFinite() || !prob.feasible(trial)) {
        lambda *= 4.0;
        continue;
      }
      prob.model(trial, f_trial, nullptr);
      const double chi2_trial = prob.chi2(f_trial);
      if (chi2_trial < chi2) {
        const double rel = (chi2 - chi2_trial) / chi2;
        th = trial;
        chi2 = chi2_trial;
        lambda = std::max(lambda / 3.0, 1e-12);
        accepted = true;
        if (rel < 1e-10) out.converged = true;
        break;
      }
      lambda *= 4.0;
    }
    if (!accepted) out.converged = true;  // no descent direction left
    if (out.converged) break;
    prob.model(th, f, &jac);
  }
  out.chi2 = chi2;
  return out;
}

Vector pack(const std::vector<GaussianComponent>& comps) {
  Vector th(static_cast<Eigen::Index>(3 * comps.size()));
  for (std::size_t k = 0; k < comps.size(); ++k) {
    th(static_cast<Eigen::Index>(3 * k)) = comps[k].weight;
    th(static_cast<Eigen::Index>(3 * k + 1)) = comps[k].mean_mv;
    th(static_cast<Eigen::Index>(3 * k + 2)) = comps[k].sigma_mv;
  }
  return th;
}

std::vector<GaussianComponent> unpack(const Vector& th) {
  std::vector<GaussianComponent> comps(static_cast<std::size_t>(th.size() / 3));
  for (std::size_t k = 0; k < comps.size(); ++k)
    comps[k] = {th(static_cast<Eigen::Index>(3 * k)), th(static_cast<Eigen::Index>(3 * k + 1)),
                th(static_cast<Eigen::Index>(3 * k + 2))};
  std::sort(comps.begin(), comps.end(),
            [](const GaussianComponent& a, const GaussianComponent& b) { return a.mean_mv < b.mean_mv; });
  return comps;
}

std::vector<GaussianComponent> initial_components(const Histogram& h, const std::vector<double>& s,
                                                  const std::vector<std::size_t>& seeds) {
  std::vector<GaussianComponent> comps;
  for (std::size_t q = 0; q < seeds.size(); ++q) {
    const std::size_t i = seeds[q];
    double c = h.center(i);
    if (i > 0 && i + 1 < s.size()) {
      const double denom = s[i - 1] - 2.0 * s[i] + s[i + 1];
      if (denom < 0.0) c += 0.5 * h.width * (s[i - 1] - s[i + 1]) / denom;
    }
    const double lbound = q > 0 ? 0.5 * (h.center(seeds[q - 1]) + c) : h.lo;
    const double rbound = q + 1 < seeds.size() ? 0.5 * (h.center(seeds[q + 1]) + c) : h.edge(h.size());
    const double half = 0.5 * s[i];
    double hw = std::numeric_limits<double>::infinity();
    for (std::size_t k = i; k-- > 0 && h.center(k) > lbound;) {
      if (s[k] < half) {
        const double x = h.center(k) + h.width * (half - s[k]) / (s[k + 1] - s[k]);
        hw = std::min(hw, c - x);
        break;
      }
    }
    for (std::size_t k = i + 1; k < s.size() && h.center(k) < rbound; ++k) {
      if (s[k] < half) {
        const double x = h.center(k) - h.width * (half - s[k]) / (s[k - 1] - s[k]);
        hw = std::min(hw, x - c);
        break;
      }
    }
    if (!std::isfinite(hw) || hw <= 0.0) hw = std::max(h.width, 0.25 * (rbound - lbound));
    const double sigma = std::max(hw / kHwhmPerSigma, 0.5 * h.width);
    comps.push_back({s[i] * kSqrt2Pi * sigma / h.width, c, sigma});
  }
  return comps;
}

// Drops the lightest component of any pair whose means nearly coincide.
bool drop_duplicate(std::vector<GaussianComponent>& comps) {
  for (std::size_t k = 1; k < comps.size(); ++k) {
    const double gap = comps[k].mean_mv - comps[k - 1].mean_mv;
    if (gap <= 0.5 * std::min(comps[k].sigma_mv, comps[k - 1].sigma_mv)) {
      comps.erase(comps.begin() + static_cast<std::ptrdiff_t>(comps[k].weight < comps[k - 1].weight ? k : k - 1));
      return true;
    }
  }
  return false;
}

double log_mixture_density(const GaussianMixtureFit& fit, double x) {
  double best = -std::numeric_limits<double>::infinity();
  std::vector<double> terms;
  terms.reserve(fit.components.size());
  for (const auto& c : fit.components) {
    const double z = (x - c.mean_mv) / c.sigma_mv;
    const double t = std::log(c.weight * kInvSqrt2Pi / c.sigma_mv) - 0.5 * z * z;
    terms.push_back(t);
    best = std::max(best, t);
  }
  double acc = 0.0;
  for (double t : terms) acc += std::exp(t - best);
  return best + std::log(acc);
}

// Unbinned EM steps on the raw amplitudes in [lo, hi). Removes the
// bin-quantisation noise left in the histogram fit.
void em_polish(std::span<const double> amplitudes, double lo, double hi, std::vector<GaussianComponent>& comps,
               int passes) {
  const std::size_t k_count = comps.size();
  std::vector<double> sw(k_count), sx(k_count), sxx(k_count), r(k_count);
  for (int pass = 0; pass < passes; ++pass) {
    std::fill(sw.begin(), sw.end(), 0.0);
    std::fill(sx.begin(), sx.end(), 0.0);
    std::fill(sxx.begin(), sxx.end(), 0.0);
    for (double a : amplitudes) {
      if (a < lo || a >= hi) continue;
      double total = 0.0;
      for (std::size_t k = 0; k < k_count; ++k) {
        const double z = (a - comps[k].mean_mv) / comps[k].sigma_mv;
        r[k] = z * z > 200.0 ? 0.0 : comps[k].weight * std::exp(-0.5 * z * z) / comps[k].sigma_mv;
        total += r[k];
      }
      if (!(total > 0.0)) continue;
      for (std::size_t k = 0; k < k_count; ++k) {
        if (r[k] == 0.0) continue;
        const double w = r[k] / total;
        sw[k] += w;
        sx[k] += w * a;
        sxx[k] += w * a * a;
      }
    }
    for (std::size_t k = 0; k < k_count; ++k) {
      if (!(sw[k] > 1.0)) continue;
      const double m = sx[k] / sw[k];
      const double v = sxx[k] / sw[k] - m * m;
      if (!(v > 0.0)) continue;
      comps[k] = {sw[k], m, std::sqrt(v)};
    }
  }
}

CountColumn normalise(std::vector<std::uint64_t> counts) {
  CountColumn col;
  col.counts = std::move(counts);
  const double total = static_cast<double>(std::accumulate(col.counts.begin(), col.counts.end(), std::uint64_t{0}));
  col.probs.resize(col.counts.size(), 0.0);
  if (total > 0.0)
    for (std::size_t n = 0; n < col.counts.size(); ++n) col.probs[n] = static_cast<double>(col.counts[n]) / total;
  return col;
}

}  // namespace

// ---------------------------------------------------------------------------

double GaussianMixtureFit::density(double x_mv) const {
  double d = 0.0;
  for (const auto& c : components) d += c.weight * norm_pdf((x_mv - c.mean_mv) / c.sigma_mv) / c.sigma_mv;
  return d;
}

GaussianMixtureFit fit_peaks(const AmplitudeTrace& trace, const FitOptions& options) {
  if (trace.size() < 100)
    throw CalibrationError("trace " + std::to_string(trace.probe_id) + " has fewer than 100 events");
  if (!(options.bin_width_mv > 0.0)) throw CalibrationError("bin width must be positive");
  trace.validate();

  const Histogram hist = make_histogram(trace.amplitudes, options.bin_width_mv);
  const std::vector<double> smooth = moving_average3(hist.y);
  std::vector<std::size_t> seeds = find_seeds(smooth, options);
  if (seeds.empty()) throw CalibrationError("no peaks found in trace " + std::to_string(trace.probe_id));

  MixtureProblem prob;
  prob.hist = &hist;
  prob.b0 = 0;
  prob.b1 = hist.size();
  if (options.max_peaks > 0 && seeds.size() > static_cast<std::size_t>(options.max_peaks)) {
    const std::size_t keep = static_cast<std::size_t>(options.max_peaks);
    prob.b1 = (seeds[keep - 1] + seeds[keep]) / 2 + 1;
    seeds.resize(keep);
  }

  std::vector<GaussianComponent> comps = initial_components(hist, smooth, seeds);
  LmOutcome lm;
  int total_iters = 0;
  auto run = [&](bool model_variance) {
    prob.var.assign(prob.bins(), 1.0);
    if (model_variance) {
      Vector f;
      prob.model(pack(comps), f, nullptr);
      for (std::size_t b = 0; b < prob.bins(); ++b) prob.var[b] = std::max(f(static_cast<Eigen::Index>(b)), 0.5);
    } else {
      for (std::size_t b = 0; b < prob.bins(); ++b) prob.var[b] = std::max(hist.y[prob.b0 + b], 1.0);
    }
    Vector th = pack(comps);
    lm = levenberg_marquardt(prob, th, options.max_iters);
    total_iters += lm.iterations;
    if (!lm.converged)
      throw FitError("peak fit for trace " + std::to_string(trace.probe_id) + " did not converge", lm.chi2);
    comps = unpack(th);
  };

  // Count-weighted fit, then prune/merge until the component set is stable.
  run(false);
  for (std::size_t guard = 0; guard < 4 * seeds.size() + 4; ++guard) {
    const auto before = comps.size();
    std::erase_if(comps, [&](const GaussianComponent& c) { return c.weight < options.min_weight; });
    if (comps.empty()) throw CalibrationError("all fitted peaks fell below the weight floor");
    if (comps.size() == before && !drop_duplicate(comps)) break;
    run(false);
  }
  // Model-variance passes converge to the Poisson-likelihood solution, which
  // conserves the total number of events under the fitted peaks.
  for (int pass = 0; pass < options.reweight_passes; ++pass) run(true);
  if (drop_duplicate(comps)) run(true);
  em_polish(trace.amplitudes, prob.fit_lo(), prob.fit_hi(), comps, options.em_passes);

  GaussianMixtureFit fit;
  fit.components = std::move(comps);
  fit.bin_width_mv = options.bin_width_mv;
  fit.fit_lo_mv = prob.fit_lo();
  fit.fit_hi_mv = prob.fit_hi();
  fit.n_events = trace.size();
  for (std::size_t b = prob.b1; b < hist.size(); ++b) fit.events_above_fit += static_cast<std::uint64_t>(hist.y[b]);
  const double dof = std::max<double>(1.0, static_cast<double>(prob.bins()) - 3.0 * static_cast<double>(fit.components.size()));
  fit.goodness = lm.chi2 / dof;
  fit.iterations = total_iters;
  for (std::size_t k = 1; k < fit.components.size(); ++k)
    if (!(fit.components[k].mean_mv > fit.components[k - 1].mean_mv))
      throw CalibrationError("fitted peak means are not strictly increasing");
  return fit;
}

ThresholdSet place_thresholds(const GaussianMixtureFit& fit) {
  if (fit.components.empty()) throw CalibrationError("cannot place thresholds without fitted peaks");
  ThresholdSet ts;
  constexpr int kGrid = 256;
  for (std::size_t k = 0; k + 1 < fit.components.size(); ++k) {
    const double a = fit.components[k].mean_mv, b = fit.components[k + 1].mean_mv;
    const double step = (b - a) / (kGrid + 1);
    std::vector<double> ld(kGrid);
    for (int i = 0; i < kGrid; ++i) ld[i] = log_mixture_density(fit, a + step * (i + 1));
    std::vector<int> minima;
    for (int i = 1; i + 1 < kGrid; ++i)
      if (ld[i] < ld[i - 1] && ld[i] <= ld[i + 1]) minima.push_back(i);
    if (minima.size() != 1) {
      ts.cut_points_mv.push_back(0.5 * (a + b));
      ts.used_fallback = true;
      ts.warnings.push_back("no single density valley between peaks " + std::to_string(k) + " and " +
                            std::to_string(k + 1) + "; using the midpoint");
      continue;
    }
    // Golden-section search on the bracketing grid cell pair.
    constexpr double kInvPhi = 0.61803398874989484820;
    double lo = a + step * minima[0], hi = a + step * (minima[0] + 2);
    double x1 = hi - kInvPhi * (hi - lo), x2 = lo + kInvPhi * (hi - lo);
    double f1 = log_mixture_density(fit, x1), f2 = log_mixture_density(fit, x2);
    while (hi - lo > 1e-5) {
      if (f1 < f2) {
        hi = x2, x2 = x1, f2 = f1;
        x1 = hi - kInvPhi * (hi - lo);
        f1 = log_mixture_density(fit, x1);
      } else {
        lo = x1, x1 = x2, f1 = f2;
        x2 = lo + kInvPhi * (hi - lo);
        f2 = log_mixture_density(fit, x2);
      }
    }
    ts.cut_points_mv.push_back(0.5 * (lo + hi));
  }
  return ts;
}

ThresholdSet extend_thresholds(const ThresholdSet& thresholds, const GaussianMixtureFit& fit, int outcomes) {
  ThresholdSet out = thresholds;
  const std::size_t k = fit.components.size();
  if (k < 2 || outcomes < 2 || out.cut_points_mv.empty()) return out;
  const double spacing = (fit.components.back().mean_mv - fit.components.front().mean_mv) / static_cast<double>(k - 1);
  while (out.cut_points_mv.size() + 1 < static_cast<std::size_t>(outcomes))
    out.cut_points_mv.push_back(out.cut_points_mv.back() + spacing);
  return out;
}

CountColumn bin_counts(const AmplitudeTrace& trace, const ThresholdSet& thresholds, int outcomes) {
  if (outcomes < 1) throw ShapeError("need at least one outcome");
  const auto& cuts = thresholds.cut_points_mv;
  if (!std::is_sorted(cuts.begin(), cuts.end())) throw CalibrationError("thresholds must be sorted");
  std::vector<std::uint64_t> counts(static_cast<std::size_t>(outcomes), 0);
  for (double a : trace.amplitudes) {
    const auto k = static_cast<std::size_t>(std::upper_bound(cuts.begin(), cuts.end(), a) - cuts.begin());
    ++counts[std::min(k, counts.size() - 1)];
  }
  return normalise(std::move(counts));
}

CountColumn bin_counts_by_area(const AmplitudeTrace& trace, const GaussianMixtureFit& fit, int outcomes) {
  if (outcomes < 1) throw ShapeError("need at least one outcome");
  if (fit.components.empty()) throw CalibrationError("area binning needs a converged fit");
  if (trace.size() != fit.n_events) throw CalibrationError("fit was produced from a different trace");
  const std::size_t top = static_cast<std::size_t>(outcomes - 1);
  std::vector<double> area(static_cast<std::size_t>(outcomes), 0.0);
  for (std::size_t k = 0; k < fit.components.size(); ++k) area[std::min(k, top)] += fit.components[k].weight;
  area[top] += static_cast<double>(fit.events_above_fit);
  std::vector<std::uint64_t> counts(area.size());
  for (std::size_t n = 0; n < area.size(); ++n) counts[n] = static_cast<std::uint64_t>(std::llround(std::max(0.0, area[n])));
  return normalise(std::move(counts));
}

ProbeCalibration calibrate_trace(const AmplitudeTrace& trace, int outcomes, BinningMethod method,
                                 const FitOptions& options) {
  FitOptions opt = options;
  if (opt.max_peaks <= 0) opt.max_peaks = outcomes + 2;
  ProbeCalibration cal;
  cal.fit = fit_peaks(trace, opt);
  cal.thresholds = place_thresholds(cal.fit);
  cal.binning_cuts = extend_thresholds(cal.thresholds, cal.fit, outcomes);
  cal.column = method == BinningMethod::Threshold ? bin_counts(trace, cal.binning_cuts, outcomes)
                                                  : bin_counts_by_area(trace, cal.fit, outcomes);
  return cal;
}

// ---------------------------------------------------------------------------

CountTable::CountTable(int outcomes, std::vector<std::int64_t> probe_ids,
                       std::vector<std::vector<std::uint64_t>> columns)
    : outcomes_(outcomes), ids_(std::move(probe_ids)), columns_(std::move(columns)) {
  if (outcomes_ < 1) throw ShapeError("count table needs at least one outcome");
  if (ids_.size() != columns_.size()) throw ShapeError("count table: probe ids and columns differ in number");
  for (const auto& c : columns_)
    if (c.size() != static_cast<std::size_t>(outcomes_)) throw ShapeError("count table: column length differs from outcomes");
}

std::uint64_t CountTable::total(std::size_t j) const {
  return std::accumulate(columns_[j].begin(), columns_[j].end(), std::uint64_t{0});
}

double CountTable::prob(int n, std::size_t j) const {
  const auto t = total(j);
  return t == 0 ? 0.0 : static_cast<double>(count(n, j)) / static_cast<double>(t);
}

CountDistribution CountTable::distribution(std::size_t j) const {
  CountDistribution d;
  d.probs.resize(static_cast<std::size_t>(outcomes_));
  for (int n = 0; n < outcomes_; ++n) d.probs[static_cast<std::size_t>(n)] = prob(n, j);
  return d;
}

Matrix CountTable::prob_matrix() const {
  Matrix p(outcomes_, static_cast<Eigen::Index>(probes()));
  for (std::size_t j = 0; j < probes(); ++j)
    for (int n = 0; n < outcomes_; ++n) p(n, static_cast<Eigen::Index>(j)) = prob(n, j);
  return p;
}

}  // namespace pnrtomo
