#include "pnrtomo/photon_stats.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <set>
#include <string>

#include "pnrtomo/errors.hpp"

namespace pnrtomo {

namespace {

constexpr std::size_t kLogFactTable = 2048;

const std::array<double, kLogFactTable>& log_factorial_table() {
  static const std::array<double, kLogFactTable> table = [] {
    std::array<double, kLogFactTable> t{};
    for (std::size_t n = 0; n < kLogFactTable; ++n) t[n] = std::lgamma(static_cast<double>(n) + 1.0);
    return t;
  }();
  return table;
}

void require_shape(bool ok, const char* what) {
  if (!ok) throw ShapeError(what);
}

}  // namespace

// ---------------------------------------------------------------------------
// Types

ProbeEnsemble::ProbeEnsemble(std::vector<Probe> probes) : probes_(std::move(probes)) {
  if (probes_.empty()) throw DomainError("probe ensemble must contain at least one probe");
  std::set<std::int64_t> ids;
  for (const auto& p : probes_) {
    if (!(p.mean_photons >= 0.0) || !std::isfinite(p.mean_photons))
      throw DomainError("probe " + std::to_string(p.id) + ": mean photon number must be finite and >= 0");
    if (p.n_pulses == 0) throw DomainError("probe " + std::to_string(p.id) + ": n_pulses must be positive");
    if (!ids.insert(p.id).second) throw DomainError("duplicate probe id " + std::to_string(p.id));
  }
  std::vector<const Probe*> with_att;
  for (const auto& p : probes_)
    if (p.attenuation_db) with_att.push_back(&p);
  std::sort(with_att.begin(), with_att.end(),
            [](const Probe* a, const Probe* b) { return *a->attenuation_db < *b->attenuation_db; });
  for (std::size_t i = 1; i < with_att.size(); ++i) {
    const Probe& lo = *with_att[i - 1];
    const Probe& hi = *with_att[i];
    if (*hi.attenuation_db > *lo.attenuation_db && hi.mean_photons > lo.mean_photons)
      throw DomainError("probe " + std::to_string(hi.id) +
                        ": mean photon number must decrease with attenuation");
  }
}

ProbeEnsemble ProbeEnsemble::paper_default(std::uint64_t n_pulses) {
  constexpr int kProbes = 20;
  constexpr double kMuHigh = 130.0, kMuLow = 6.5;
  constexpr double kAttLow = 63.5, kAttHigh = 76.5;
  std::vector<Probe> probes;
  probes.reserve(kProbes);
  for (int j = 0; j < kProbes; ++j) {
    const double t = static_cast<double>(j) / (kProbes - 1);
    Probe p;
    p.id = j + 1;
    p.mean_photons = j == 0 ? kMuHigh : j == kProbes - 1 ? kMuLow : kMuHigh * std::pow(kMuLow / kMuHigh, t);
    p.attenuation_db = kAttLow + (kAttHigh - kAttLow) * t;
    p.n_pulses = n_pulses;
    probes.push_back(p);
  }
  return ProbeEnsemble(std::move(probes));
}

std::vector<double> ProbeEnsemble::means() const {
  std::vector<double> out;
  out.reserve(probes_.size());
  for (const auto& p : probes_) out.push_back(p.mean_photons);
  return out;
}

std::optional<std::size_t> ProbeEnsemble::index_of(std::int64_t id) const {
  for (std::size_t j = 0; j < probes_.size(); ++j)
    if (probes_[j].id == id) return j;
  return std::nullopt;
}

PovmMatrix::PovmMatrix(Matrix entries, bool last_outcome_cumulative)
    : entries_(std::move(entries)), cumulative_(last_outcome_cumulative) {
  if (entries_.rows() < 1 || entries_.cols() < 1) throw DomainError("POVM matrix must be non-empty");
  if (!entries_.allFinite()) throw DomainError("POVM matrix has non-finite entries");
  if (entries_.minCoeff() < 0.0) throw DomainError("POVM matrix has negative entries");
  if (max_column_defect() > kColumnTolerance)
    throw DomainError("POVM columns must sum to one (defect " + std::to_string(max_column_defect()) + ")");
}

double PovmMatrix::max_column_defect() const {
  double worst = 0.0;
  for (Eigen::Index m = 0; m < entries_.cols(); ++m)
    worst = std::max(worst, std::abs(entries_.col(m).sum() - 1.0));
  return worst;
}

void LinearDetectorModel::validate() const {
  if (!(eta >= 0.0 && eta <= 1.0)) throw DomainError("quantum efficiency must lie in [0, 1]");
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw DomainError("dark-count rate must be finite and >= 0");
}

// ---------------------------------------------------------------------------
// Scalar distributions

double log_factorial(std::uint64_t n) {
  if (n < kLogFactTable) return log_factorial_table()[n];
  return std::lgamma(static_cast<double>(n) + 1.0);
}

double poisson_pmf(double mu, std::uint64_t m) {
  if (!(mu >= 0.0)) throw DomainError("Poisson mean must be >= 0");
  if (mu == 0.0) return m == 0 ? 1.0 : 0.0;
  if (std::isinf(mu)) return 0.0;
  return std::exp(static_cast<double>(m) * std::log(mu) - mu - log_factorial(m));
}

double poisson_upper_tail(double mu, std::uint64_t from) {
  if (!(mu >= 0.0)) throw DomainError("Poisson mean must be >= 0");
  if (from == 0) return 1.0;
  if (mu == 0.0) return 0.0;
  if (static_cast<double>(from) > mu) {
    // Terms decrease monotonically past the mode.
    double sum = 0.0;
    for (std::uint64_t m = from;; ++m) {
      const double term = poisson_pmf(mu, m);
      sum += term;
      if (term <= sum * 1e-17 || term == 0.0) break;
    }
    return sum;
  }
  double lower = 0.0;
  for (std::uint64_t m = 0; m < from; ++m) lower += poisson_pmf(mu, m);
  return std::max(0.0, 1.0 - lower);
}

double binomial_pmf(std::uint64_t m, std::uint64_t n, double eta) {
  if (!(eta >= 0.0 && eta <= 1.0)) throw DomainError("binomial probability must lie in [0, 1]");
  if (n > m) return 0.0;
  if (eta == 0.0) return n == 0 ? 1.0 : 0.0;
  if (eta == 1.0) return n == m ? 1.0 : 0.0;
  const double log_c = log_factorial(m) - log_factorial(n) - log_factorial(m - n);
  return std::exp(log_c + static_cast<double>(n) * std::log(eta) +
                  static_cast<double>(m - n) * std::log1p(-eta));
}

CountDistribution poisson_count_distribution(double lambda, int outcomes) {
  if (outcomes < 1) throw ShapeError("need at least one outcome");
  CountDistribution d;
  d.probs.resize(static_cast<std::size_t>(outcomes));
  for (int n = 0; n + 1 < outcomes; ++n) d.probs[n] = poisson_pmf(lambda, static_cast<std::uint64_t>(n));
  d.probs.back() = poisson_upper_tail(lambda, static_cast<std::uint64_t>(outcomes - 1));
  return d;
}

// ---------------------------------------------------------------------------
// Probe expansions

QMatrix probe_q_matrix(const ProbeEnsemble& ensemble, int truncation) {
  if (truncation < 1) throw DomainError("truncation must be >= 1");
  QMatrix out;
  out.q.resize(truncation, static_cast<Eigen::Index>(ensemble.size()));
  out.tail_mass.resize(ensemble.size());
  for (std::size_t j = 0; j < ensemble.size(); ++j) {
    const double mu = ensemble[j].mean_photons;
    for (int m = 0; m < truncation; ++m)
      out.q(m, static_cast<Eigen::Index>(j)) = poisson_pmf(mu, static_cast<std::uint64_t>(m));
    out.tail_mass[j] = poisson_upper_tail(mu, static_cast<std::uint64_t>(truncation));
  }
  return out;
}

Vector probe_q_column(double mu, int truncation, TailPolicy policy) {
  if (truncation < 1) throw DomainError("truncation must be >= 1");
  Vector q(truncation);
  for (int m = 0; m < truncation; ++m) q(m) = poisson_pmf(mu, static_cast<std::uint64_t>(m));
  const double tail = poisson_upper_tail(mu, static_cast<std::uint64_t>(truncation));
  if (policy == TailPolicy::LumpIntoLast) {
    q(truncation - 1) += tail;
  } else if (tail > 1e-9) {
    q /= q.sum();
  }
  return q;
}

// ---------------------------------------------------------------------------
// Linear detector POVMs

namespace {

// Fills rows 0..N-2 and sets the cumulative last row to the complement.
void close_last_row(Matrix& pi) {
  const Eigen::Index last = pi.rows() - 1;
  for (Eigen::Index m = 0; m < pi.cols(); ++m) {
    double s = 0.0;
    for (Eigen::Index n = 0; n < last; ++n) s += pi(n, m);
    pi(last, m) = std::max(0.0, 1.0 - s);
  }
}

}  // namespace

PovmMatrix binomial_povm(double eta, int outcomes, int truncation) {
  if (!(eta >= 0.0 && eta <= 1.0)) throw DomainError("quantum efficiency must lie in [0, 1]");
  if (outcomes < 1 || truncation < 1) throw DomainError("POVM dimensions must be positive");
  Matrix pi = Matrix::Zero(outcomes, truncation);
  for (int m = 0; m < truncation; ++m)
    for (int n = 0; n + 1 < outcomes; ++n)
      pi(n, m) = binomial_pmf(static_cast<std::uint64_t>(m), static_cast<std::uint64_t>(n), eta);
  close_last_row(pi);
  return PovmMatrix(std::move(pi), true);
}

PovmMatrix dark_count_povm(const LinearDetectorModel& model, int outcomes, int truncation) {
  model.validate();
  if (outcomes < 1 || truncation < 1) throw DomainError("POVM dimensions must be positive");
  std::vector<double> dark(static_cast<std::size_t>(outcomes));
  for (int j = 0; j < outcomes; ++j) dark[j] = poisson_pmf(model.gamma, static_cast<std::uint64_t>(j));

  Matrix pi = Matrix::Zero(outcomes, truncation);
  for (int m = 0; m < truncation; ++m) {
    for (int n = 0; n + 1 < outcomes; ++n) {
      double s = 0.0;
      for (int j = 0; j <= n; ++j)
        s += dark[j] * binomial_pmf(static_cast<std::uint64_t>(m), static_cast<std::uint64_t>(n - j), model.eta);
      pi(n, m) = s;
    }
  }
  close_last_row(pi);
  return PovmMatrix(std::move(pi), true);
}

Prediction predict_distribution(const PovmMatrix& povm, double mu, TailPolicy policy) {
  if (!(mu >= 0.0)) throw DomainError("Poisson mean must be >= 0");
  const int m_max = povm.truncation();
  Prediction out;
  out.tail_mass = poisson_upper_tail(mu, static_cast<std::uint64_t>(m_max));
  const Vector q = probe_q_column(mu, m_max, policy);
  const Vector r = povm.entries() * q;
  out.distribution.probs.assign(r.data(), r.data() + r.size());
  return out;
}

CountDistribution linear_prediction(double eta, double mu, int outcomes) {
  if (!(eta >= 0.0 && eta <= 1.0)) throw DomainError("quantum efficiency must lie in [0, 1]");
  if (!(mu >= 0.0)) throw DomainError("Poisson mean must be >= 0");
  return poisson_count_distribution(eta * mu, outcomes);
}

// ---------------------------------------------------------------------------
// Comparisons

double bhattacharyya(std::span<const double> p, std::span<const double> q) {
  require_shape(p.size() == q.size(), "distributions have different lengths");
  double f = 0.0;
  for (std::size_t n = 0; n < p.size(); ++n) f += std::sqrt(std::max(0.0, p[n]) * std::max(0.0, q[n]));
  return std::clamp(f, 0.0, 1.0);
}

double column_fidelity(const PovmMatrix& a, const PovmMatrix& b, int m) {
  require_shape(a.outcomes() == b.outcomes() && a.truncation() == b.truncation(), "POVM shapes differ");
  require_shape(m >= 0 && m < a.truncation(), "column index out of range");
  double f = 0.0;
  for (int n = 0; n < a.outcomes(); ++n) f += std::sqrt(a(n, m) * b(n, m));
  return std::clamp(f, 0.0, 1.0);
}

DistanceSummary distribution_distance(const CountDistribution& p, const CountDistribution& q) {
  require_shape(p.size() == q.size(), "distributions have different lengths");
  DistanceSummary s;
  s.abs_diff.resize(p.size());
  double l1 = 0.0;
  for (std::size_t n = 0; n < p.size(); ++n) {
    s.abs_diff[n] = std::abs(p[n] - q[n]);
    s.max = std::max(s.max, s.abs_diff[n]);
    l1 += s.abs_diff[n];
  }
  s.total_variation = 0.5 * l1;
  return s;
}

}  // namespace pnrtomo
