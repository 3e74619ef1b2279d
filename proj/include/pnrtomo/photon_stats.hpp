#pragma once

// Closed-form photon statistics: coherent-probe photon-number distributions,
// the binomial (linear) detector POVM, its Poissonian dark-count extension and
// the distribution comparisons used to validate a reconstruction.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace pnrtomo {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// One coherent probe state. `mean_photons` is the primary input; the
/// attenuator setting is carried as metadata only.
struct Probe {
  std::int64_t id = 0;
  double mean_photons = 0.0;
  std::optional<double> attenuation_db;
  std::uint64_t n_pulses = 1;
};

class ProbeEnsemble {
 public:
  ProbeEnsemble() = default;
  /// Throws DomainError if any invariant is violated (empty set, negative
  /// mean, duplicate id, zero pulses, mean not decreasing with attenuation).
  explicit ProbeEnsemble(std::vector<Probe> probes);

  /// 20 probes from 130 down to 6.5 mean photons, geometrically spaced, with
  /// attenuator metadata running linearly from 63.5 dB to 76.5 dB.
  static ProbeEnsemble paper_default(std::uint64_t n_pulses = 100000);

  const std::vector<Probe>& probes() const noexcept { return probes_; }
  std::size_t size() const noexcept { return probes_.size(); }
  const Probe& operator[](std::size_t j) const { return probes_[j]; }
  std::vector<double> means() const;
  /// Index of the probe with the given id, or nullopt.
  std::optional<std::size_t> index_of(std::int64_t id) const;

 private:
  std::vector<Probe> probes_;
};

/// N x M matrix of detection probabilities Pi(n, m): probability of reporting
/// outcome n given m incoming photons. Columns are probability vectors.
class PovmMatrix {
 public:
  static constexpr double kColumnTolerance = 1e-9;

  PovmMatrix() = default;
  /// Validates nonnegativity and column sums; throws DomainError.
  explicit PovmMatrix(Matrix entries, bool last_outcome_cumulative = true);

  int outcomes() const noexcept { return static_cast<int>(entries_.rows()); }
  int truncation() const noexcept { return static_cast<int>(entries_.cols()); }
  bool last_outcome_cumulative() const noexcept { return cumulative_; }
  double operator()(int n, int m) const { return entries_(n, m); }
  const Matrix& entries() const noexcept { return entries_; }

  /// Largest deviation of a column sum from one.
  double max_column_defect() const;

 private:
  Matrix entries_;
  bool cumulative_ = true;
};

struct LinearDetectorModel {
  double eta = 1.0;    // quantum efficiency
  double gamma = 0.0;  // mean dark counts per pulse

  void validate() const;
};

/// Distribution over outcomes n = 0..N-1 (last entry is "N-1 or more" when
/// produced by the cumulative operations below).
struct CountDistribution {
  std::vector<double> probs;

  std::size_t size() const noexcept { return probs.size(); }
  double operator[](std::size_t n) const { return probs[n]; }
};

/// Diagnostics from a truncated photon-number expansion.
struct QMatrix {
  Matrix q;                        // M x K, q(m, j) = Poisson(mu_j) at m
  std::vector<double> tail_mass;   // per probe, probability of m >= M
};

enum class TailPolicy {
  Renormalize,   // divide by the retained mass sum_{m<M} q_m
  LumpIntoLast,  // assign the tail mass to column M-1
};

struct Prediction {
  CountDistribution distribution;
  double tail_mass = 0.0;
};

struct DistanceSummary {
  std::vector<double> abs_diff;
  double max = 0.0;
  double total_variation = 0.0;  // half the L1 distance
};

/// log(n!) via a cached table for small n.
double log_factorial(std::uint64_t n);

/// exp(-mu) mu^m / m!, evaluated in log space. Throws DomainError for mu < 0.
double poisson_pmf(double mu, std::uint64_t m);

/// P(X >= from) for X ~ Poisson(mu), summed directly on whichever side of the
/// mode keeps the result accurate.
double poisson_upper_tail(double mu, std::uint64_t from);

/// C(m, n) eta^n (1-eta)^(m-n); zero for n > m.
double binomial_pmf(std::uint64_t m, std::uint64_t n, double eta);

/// Poisson(lambda) over n = 0..N-2, with entry N-1 holding P(X >= N-1).
CountDistribution poisson_count_distribution(double lambda, int outcomes);

QMatrix probe_q_matrix(const ProbeEnsemble& ensemble, int truncation);
/// Column j of the truncated expansion, with the tail handled by `policy`.
Vector probe_q_column(double mu, int truncation, TailPolicy policy);

PovmMatrix binomial_povm(double eta, int outcomes, int truncation);
PovmMatrix dark_count_povm(const LinearDetectorModel& model, int outcomes, int truncation);

/// r_n = sum_m Pi(n, m) q_m(mu).
Prediction predict_distribution(const PovmMatrix& povm, double mu,
                                TailPolicy policy = TailPolicy::Renormalize);

/// Poisson(eta mu) with cumulative last outcome.
CountDistribution linear_prediction(double eta, double mu, int outcomes);

/// sum_n sqrt(p_n q_n), clamped to [0, 1]. Throws ShapeError on length mismatch.
double bhattacharyya(std::span<const double> p, std::span<const double> q);

/// Bhattacharyya fidelity between column m of two POVMs of identical shape.
double column_fidelity(const PovmMatrix& a, const PovmMatrix& b, int m);

DistanceSummary distribution_distance(const CountDistribution& p, const CountDistribution& q);

}  // namespace pnrtomo
