#pragma once

// POVM reconstruction from coherent-probe count statistics: regularised least
// squares under per-column probability-simplex constraints.

#include <optional>
#include <span>
#include <vector>

#include "pnrtomo/calibration.hpp"
#include "pnrtomo/photon_stats.hpp"

namespace pnrtomo {

enum class SolverKind {
  Accelerated,  // projected gradient with Nesterov momentum, restarted on any objective increase
  Plain,        // projected gradient, fixed 1/L step
};

struct ReconstructionConfig {
  int truncation = 140;
  int outcomes = 12;
  double reg_weight = 1e-3;
  int max_iters = 200000;
  double tol = 1e-10;  // relative objective decrease
  SolverKind solver = SolverKind::Accelerated;
  /// Start from binomial_povm(init_eta) instead of uniform columns.
  std::optional<double> init_eta;
  /// How the photon-number tail beyond the truncation enters the design matrix.
  TailPolicy tail_policy = TailPolicy::LumpIntoLast;

  /// Throws ConfigError.
  void validate() const;
};

struct ReconstructionResult {
  PovmMatrix povm;
  std::vector<double> objective_history;  // entry 0 is the initial objective
  double data_term = 0.0;
  double reg_term = 0.0;                  // unweighted smoothness penalty
  std::vector<double> per_probe_residuals;
  bool converged = false;
  int iterations = 0;
  double lipschitz = 0.0;
  std::vector<std::size_t> skipped_probes;  // input indices with no events

  double objective(double reg_weight) const { return data_term + reg_weight * reg_term; }
};

/// (n, j) -> sum_m Pi(n, m) q(m, j). Throws ShapeError.
Matrix forward_model(const PovmMatrix& povm, const Matrix& q);

/// Euclidean projection onto {x >= 0, sum x = 1}. Throws DomainError for an
/// empty or non-finite input.
std::vector<double> project_simplex(std::span<const double> v);

/// sum_n sum_m (Pi(n, m+1) - Pi(n, m))^2.
double smoothness_penalty(const Matrix& pi);

/// sum_{n,j} (sum_m Pi(n, m) q(m, j) - p(n, j))^2.
double data_misfit(const Matrix& pi, const Matrix& q, const Matrix& p);

/// Design matrix used by the solver: M x K photon-number distributions of the
/// probes, with the truncation tail handled per `policy`.
Matrix design_matrix(std::span<const double> means, int truncation, TailPolicy policy);

/// Core solver on an N x K probability matrix and the K probe means.
ReconstructionResult reconstruct_povm(const Matrix& probs, std::span<const double> means,
                                      const ReconstructionConfig& cfg);

/// Matches count columns to probes by id; throws ShapeError if the two sets
/// differ or the outcome count disagrees with the config.
ReconstructionResult reconstruct_povm(const CountTable& counts, const ProbeEnsemble& ensemble,
                                      const ReconstructionConfig& cfg);

/// For each count column, the index of the probe with the same id.
std::vector<std::size_t> match_probes(const CountTable& counts, const ProbeEnsemble& ensemble);

}  // namespace pnrtomo
