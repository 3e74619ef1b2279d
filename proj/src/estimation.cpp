#include "pnrtomo/estimation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

#include "pnrtomo/errors.hpp"
#include "pnrtomo/tomography.hpp"

namespace pnrtomo {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct ProbeCounts {
  std::int64_t id = 0;
  double mu = 0.0;
  std::vector<double> counts;
};

// Probes with at least one event, in count-table order.
std::vector<ProbeCounts> usable_probes(const CountTable& counts, const ProbeEnsemble& ensemble,
                                       std::vector<std::string>& warnings) {
  const auto idx = match_probes(counts, ensemble);
  std::vector<ProbeCounts> out;
  for (std::size_t j = 0; j < counts.probes(); ++j) {
    if (counts.total(j) == 0) {
      warnings.push_back("probe " + std::to_string(counts.probe_ids()[j]) + " has no events; skipped");
      continue;
    }
    ProbeCounts p;
    p.id = counts.probe_ids()[j];
    p.mu = ensemble[idx[j]].mean_photons;
    for (auto c : counts.column(j)) p.counts.push_back(static_cast<double>(c));
    out.push_back(std::move(p));
  }
  if (out.empty()) throw EstimationError("every probe is empty; nothing to estimate");
  return out;
}

double joint_loglik(double eta, double gamma, const std::vector<ProbeCounts>& probes) {
  double s = 0.0;
  for (const auto& p : probes) s += loglik_eta_gamma(eta, gamma, p.counts, p.mu);
  return s;
}

double per_probe_eta(const ProbeCounts& p, double gamma, double tol) {
  return maximize_bounded([&](double e) { return loglik_eta_gamma(e, gamma, p.counts, p.mu); }, 0.0, 1.0, tol);
}

double normal_quantile(double level) {
  double lo = 0.0, hi = 40.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (0.5 * std::erfc(mid / std::sqrt(2.0)) > 1.0 - level ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

struct JointFit {
  double eta = 0.0;
  double gamma = 0.0;
  double loglik = kNegInf;
};

// 2-D Nelder-Mead on the box [0,1] x [0, gamma_max]; points are clamped.
JointFit nelder_mead_polish(const JointFit& start, const std::vector<ProbeCounts>& probes, double gamma_max) {
  using Pt = std::array<double, 2>;
  auto clamp = [&](Pt p) { return Pt{std::clamp(p[0], 0.0, 1.0), std::clamp(p[1], 0.0, gamma_max)}; };
  auto cost = [&](const Pt& p) {
    const double l = joint_loglik(p[0], p[1], probes);
    return std::isfinite(l) ? -l : std::numeric_limits<double>::max();
  };
  std::array<Pt, 3> s{Pt{start.eta, start.gamma}, clamp({start.eta * 1.01 + 1e-4, start.gamma}),
                      clamp({start.eta, start.gamma + 1e-3})};
  std::array<double, 3> c{cost(s[0]), cost(s[1]), cost(s[2])};
  for (int it = 0; it < 400; ++it) {
    std::array<int, 3> o{0, 1, 2};
    std::sort(o.begin(), o.end(), [&](int a, int b) { return c[a] < c[b]; });
    const Pt best = s[o[0]], mid = s[o[1]], worst = s[o[2]];
    const double cb = c[o[0]], cm = c[o[1]], cw = c[o[2]];
    if (std::abs(cw - cb) <= 1e-12 * (std::abs(cb) + 1.0)) break;
    const Pt cen{0.5 * (best[0] + mid[0]), 0.5 * (best[1] + mid[1])};
    auto along = [&](double t) { return clamp({cen[0] + t * (worst[0] - cen[0]), cen[1] + t * (worst[1] - cen[1])}); };
    const Pt r = along(-1.0);
    const double cr = cost(r);
    Pt next = r;
    double cn = cr;
    if (cr < cb) {
      const Pt e = along(-2.0);
      const double ce = cost(e);
      if (ce < cr) next = e, cn = ce;
    } else if (cr >= cm) {
      const Pt k = along(cr < cw ? -0.5 : 0.5);
      const double ck = cost(k);
      if (ck < std::min(cr, cw)) {
        next = k, cn = ck;
      } else {
        for (int i : {o[1], o[2]}) {
          s[i] = clamp({0.5 * (s[i][0] + best[0]), 0.5 * (s[i][1] + best[1])});
          c[i] = cost(s[i]);
        }
        continue;
      }
    }
    s[o[2]] = next;
    c[o[2]] = cn;
  }
  const auto b = std::min_element(c.begin(), c.end()) - c.begin();
  return {s[b][0], s[b][1], -c[b]};
}

JointFit fit_joint(const std::vector<ProbeCounts>& probes, const EstimationOptions& opt) {
  JointFit f;
  f.gamma = 0.0;
  f.eta = maximize_bounded([&](double e) { return joint_loglik(e, 0.0, probes); }, 0.0, 1.0, opt.tol);
  if (opt.gamma_max > 0.0) {
    for (int round = 0; round < 500; ++round) {
      const double g = maximize_bounded([&](double x) { return joint_loglik(f.eta, x, probes); }, 0.0,
                                        opt.gamma_max, opt.tol);
      const double e = maximize_bounded([&](double x) { return joint_loglik(x, g, probes); }, 0.0, 1.0, opt.tol);
      const bool done = std::abs(e - f.eta) < opt.tol && std::abs(g - f.gamma) < opt.tol;
      f.eta = e;
      f.gamma = g;
      if (done) break;
    }
  }
  f.loglik = joint_loglik(f.eta, f.gamma, probes);
  if (opt.gamma_max > 0.0) {
    const JointFit nm = nelder_mead_polish(f, probes, opt.gamma_max);
    if (nm.loglik > f.loglik) f = nm;
  }
  return f;
}

void fill_eta_from_probes(EfficiencyEstimate& est, const std::vector<ProbeCounts>& probes, double gamma,
                          double tol) {
  est.per_probe_etas.clear();
  est.probe_ids.clear();
  for (const auto& p : probes) {
    est.per_probe_etas.push_back(per_probe_eta(p, gamma, tol));
    est.probe_ids.push_back(p.id);
  }
  const double k = static_cast<double>(probes.size());
  est.eta_hat = std::accumulate(est.per_probe_etas.begin(), est.per_probe_etas.end(), 0.0) / k;
  if (probes.size() >= 2) {
    double ss = 0.0;
    for (double e : est.per_probe_etas) ss += (e - est.eta_hat) * (e - est.eta_hat);
    est.eta_se = std::sqrt(ss / (k - 1.0)) / std::sqrt(k);
  } else {
    est.eta_se.reset();
    est.warnings.push_back("a single probe gives no ensemble standard error");
  }

  // Observed information of each probe at its own maximum, pooled.
  double info = 0.0;
  for (std::size_t j = 0; j < probes.size(); ++j) {
    const double e = est.per_probe_etas[j];
    const double h = 1e-4 * std::max(e, 1e-3);
    if (e - h <= 0.0 || e + h >= 1.0) continue;
    const auto& p = probes[j];
    const double l0 = loglik_eta_gamma(e, gamma, p.counts, p.mu);
    const double lm = loglik_eta_gamma(e - h, gamma, p.counts, p.mu);
    const double lp = loglik_eta_gamma(e + h, gamma, p.counts, p.mu);
    const double curv = -(lp - 2.0 * l0 + lm) / (h * h);
    if (std::isfinite(curv) && curv > 0.0) info += curv;
  }
  if (info > 0.0) est.eta_fisher_se = 1.0 / std::sqrt(info);
}

}  // namespace

double loglik_eta_gamma(double eta, double gamma, std::span<const double> counts, double mu) {
  if (!(eta >= 0.0 && eta <= 1.0)) throw DomainError("quantum efficiency must lie in [0, 1]");
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw DomainError("dark-count rate must be finite and >= 0");
  if (!(mu >= 0.0)) throw DomainError("Poisson mean must be >= 0");
  if (counts.empty()) throw ShapeError("empty count vector");
  const double lambda = eta * mu + gamma;
  const std::size_t top = counts.size() - 1;
  double ll = 0.0;
  for (std::size_t n = 0; n < counts.size(); ++n) {
    const double c = counts[n];
    if (c < 0.0) throw DomainError("counts must be nonnegative");
    if (c == 0.0) continue;
    double logp;
    if (n == top) {
      logp = std::log(poisson_upper_tail(lambda, top));
    } else if (lambda == 0.0) {
      logp = n == 0 ? 0.0 : kNegInf;
    } else {
      logp = static_cast<double>(n) * std::log(lambda) - lambda - log_factorial(n);
    }
    if (logp == kNegInf) return kNegInf;
    ll += c * logp;
  }
  return ll;
}

double loglik_eta(double eta, std::span<const double> counts, double mu) {
  return loglik_eta_gamma(eta, 0.0, counts, mu);
}

double maximize_bounded(const std::function<double(double)>& f, double lo, double hi, double tol) {
  auto g = [&](double x) {
    const double v = f(x);
    return std::isfinite(v) ? -v : std::numeric_limits<double>::max();
  };
  constexpr double kGolden = 0.38196601125010515180;
  constexpr double kEps = 1.4901161193847656e-08;
  double a = lo, b = hi;
  double x = a + kGolden * (b - a), w = x, v = x;
  double fx = g(x), fw = fx, fv = fx;
  double d = 0.0, e = 0.0;
  for (int it = 0; it < 500; ++it) {
    const double xm = 0.5 * (a + b);
    const double tol1 = kEps * std::abs(x) + tol / 3.0;
    const double tol2 = 2.0 * tol1;
    if (std::abs(x - xm) <= tol2 - 0.5 * (b - a)) break;
    bool golden = true;
    if (std::abs(e) > tol1) {
      double r = (x - w) * (fx - fv);
      double q = (x - v) * (fx - fw);
      double p = (x - v) * q - (x - w) * r;
      q = 2.0 * (q - r);
      if (q > 0.0) p = -p;
      q = std::abs(q);
      const double etemp = e;
      e = d;
      if (!(std::abs(p) >= std::abs(0.5 * q * etemp) || p <= q * (a - x) || p >= q * (b - x))) {
        d = p / q;
        const double u = x + d;
        if (u - a < tol2 || b - u < tol2) d = xm >= x ? tol1 : -tol1;
        golden = false;
      }
    }
    if (golden) {
      e = x >= xm ? a - x : b - x;
      d = kGolden * e;
    }
    const double u = std::abs(d) >= tol1 ? x + d : x + (d >= 0 ? tol1 : -tol1);
    const double fu = g(u);
    if (fu <= fx) {
      (u >= x ? a : b) = x;
      v = w, fv = fw;
      w = x, fw = fx;
      x = u, fx = fu;
    } else {
      (u < x ? a : b) = u;
      if (fu <= fw || w == x) {
        v = w, fv = fw;
        w = u, fw = fu;
      } else if (fu <= fv || v == x || v == w) {
        v = u, fv = fu;
      }
    }
  }
  double best = x, fbest = fx;
  for (double edge : {lo, hi}) {
    const double fe = g(edge);
    if (fe < fbest) best = edge, fbest = fe;
  }
  return best;
}

EfficiencyEstimate estimate_eta(const CountTable& counts, const ProbeEnsemble& ensemble,
                                const EstimationOptions& options) {
  EfficiencyEstimate est;
  const auto probes = usable_probes(counts, ensemble, est.warnings);
  fill_eta_from_probes(est, probes, 0.0, options.tol);
  est.loglik = 0.0;
  for (std::size_t j = 0; j < probes.size(); ++j)
    est.loglik += loglik_eta(est.per_probe_etas[j], probes[j].counts, probes[j].mu);
  return est;
}

EfficiencyEstimate estimate_eta_gamma(const CountTable& counts, const ProbeEnsemble& ensemble,
                                      const EstimationOptions& options) {
  if (!(options.gamma_max >= 0.0)) throw DomainError("gamma_max must be >= 0");
  EfficiencyEstimate est;
  const auto probes = usable_probes(counts, ensemble, est.warnings);
  const JointFit fit = fit_joint(probes, options);

  fill_eta_from_probes(est, probes, fit.gamma, options.tol);
  est.gamma_hat = fit.gamma;
  est.gamma_at_boundary = fit.gamma <= options.tol;
  est.loglik = fit.loglik;

  if (probes.size() >= 3) {
    std::vector<double> jack;
    for (std::size_t i = 0; i < probes.size(); ++i) {
      std::vector<ProbeCounts> rest;
      for (std::size_t j = 0; j < probes.size(); ++j)
        if (j != i) rest.push_back(probes[j]);
      jack.push_back(fit_joint(rest, options).gamma);
    }
    const double k = static_cast<double>(jack.size());
    const double mean = std::accumulate(jack.begin(), jack.end(), 0.0) / k;
    double ss = 0.0;
    for (double g : jack) ss += (g - mean) * (g - mean);
    est.gamma_se = std::sqrt((k - 1.0) / k * ss);
  } else {
    est.warnings.push_back("fewer than three probes: no dark-count standard error");
  }

  if (options.gamma_max > 0.0) {
    // Profile-likelihood bound, widened to the jackknife bound if that is larger.
    const double z = normal_quantile(options.upper_bound_level);
    const double target = fit.loglik - 0.5 * z * z;
    auto profile = [&](double g) {
      const double e = maximize_bounded([&](double x) { return joint_loglik(x, g, probes); }, 0.0, 1.0, options.tol);
      return joint_loglik(e, g, probes);
    };
    double upper = options.gamma_max;
    if (profile(options.gamma_max) < target) {
      double lo = fit.gamma, hi = options.gamma_max;
      while (hi - lo > options.tol * 0.1 + 1e-12 * hi) {
        const double mid = 0.5 * (lo + hi);
        (profile(mid) >= target ? lo : hi) = mid;
      }
      upper = hi;
    }
    if (est.gamma_se) upper = std::max(upper, fit.gamma + z * *est.gamma_se);
    est.gamma_upper = std::min(upper, options.gamma_max);
  } else {
    est.gamma_upper = 0.0;
  }
  return est;
}

double binomial_upper_bound(std::uint64_t successes, std::uint64_t trials, double level) {
  if (trials == 0) throw DomainError("binomial bound needs at least one trial");
  if (!(level > 0.0 && level < 1.0)) throw DomainError("confidence level must lie in (0, 1)");
  if (successes >= trials) return 1.0;
  const double alpha = 1.0 - level;
  const double n = static_cast<double>(trials);
  if (successes == 0) return -std::expm1(std::log(alpha) / n);
  // P(X <= k; n, p) is decreasing in p; bisect for the value alpha.
  auto cdf = [&](double p) {
    const double lq = std::log1p(-p), lp = std::log(p);
    double acc = 0.0;
    for (std::uint64_t i = 0; i <= successes; ++i) {
      const double lt = log_factorial(trials) - log_factorial(i) - log_factorial(trials - i) +
                        static_cast<double>(i) * lp + (n - static_cast<double>(i)) * lq;
      acc += std::exp(lt);
    }
    return acc;
  };
  double lo = static_cast<double>(successes) / n, hi = 1.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (cdf(mid) > alpha ? lo : hi) = mid;
  }
  return hi;
}

DarkRate dark_rate_direct(const AmplitudeTrace& dark_trace, const ThresholdSet& thresholds, double level) {
  if (dark_trace.amplitudes.empty()) throw EstimationError("dark trace is empty");
  if (thresholds.cut_points_mv.empty()) throw EstimationError("dark-rate measurement needs at least one threshold");
  const double cut = thresholds.cut_points_mv.front();
  DarkRate r;
  r.level = level;
  r.n_events = dark_trace.size();
  for (double a : dark_trace.amplitudes)
    if (a >= cut) ++r.events_above;
  const double n = static_cast<double>(r.n_events);
  r.gamma_hat = static_cast<double>(r.events_above) / n;
  r.std_error = std::sqrt(r.gamma_hat * (1.0 - r.gamma_hat) / n);
  r.upper_bound = binomial_upper_bound(r.events_above, r.n_events, level);
  r.implausible = r.gamma_hat > 0.5;
  return r;
}

}  // namespace pnrtomo
