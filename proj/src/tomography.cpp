#include "pnrtomo/tomography.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "pnrtomo/errors.hpp"

namespace pnrtomo {

void ReconstructionConfig::validate() const {
  if (truncation < 1) throw ConfigError("reconstruction.truncation must be >= 1");
  if (outcomes < 2) throw ConfigError("reconstruction.outcomes must be >= 2");
  if (!(reg_weight >= 0.0) || !std::isfinite(reg_weight)) throw ConfigError("reconstruction.reg_weight must be >= 0");
  if (max_iters < 1) throw ConfigError("reconstruction.max_iters must be >= 1");
  if (!(tol > 0.0)) throw ConfigError("reconstruction.tol must be positive");
  if (init_eta && !(*init_eta >= 0.0 && *init_eta <= 1.0))
    throw ConfigError("reconstruction initial efficiency must lie in [0, 1]");
}

Matrix forward_model(const PovmMatrix& povm, const Matrix& q) {
  if (q.rows() != povm.truncation()) throw ShapeError("forward model: q has " + std::to_string(q.rows()) +
                                                      " rows but the POVM truncation is " +
                                                      std::to_string(povm.truncation()));
  return povm.entries() * q;
}

std::vector<double> project_simplex(std::span<const double> v) {
  if (v.empty()) throw DomainError("cannot project an empty vector onto the simplex");
  for (double x : v)
    if (!std::isfinite(x)) throw DomainError("simplex projection needs finite entries");
  std::vector<double> u(v.begin(), v.end());
  std::sort(u.begin(), u.end(), std::greater<>());
  double css = 0.0, theta = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    css += u[j];
    const double t = (css - 1.0) / static_cast<double>(j + 1);
    if (u[j] - t > 0.0) theta = t;
  }
  std::vector<double> x(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) x[i] = std::max(v[i] - theta, 0.0);
  return x;
}

double smoothness_penalty(const Matrix& pi) {
  if (pi.cols() < 2) return 0.0;
  return (pi.rightCols(pi.cols() - 1) - pi.leftCols(pi.cols() - 1)).squaredNorm();
}

double data_misfit(const Matrix& pi, const Matrix& q, const Matrix& p) {
  if (pi.cols() != q.rows() || pi.rows() != p.rows() || q.cols() != p.cols())
    throw ShapeError("data misfit: inconsistent matrix shapes");
  return (pi * q - p).squaredNorm();
}

Matrix design_matrix(std::span<const double> means, int truncation, TailPolicy policy) {
  Matrix q(truncation, static_cast<Eigen::Index>(means.size()));
  for (std::size_t j = 0; j < means.size(); ++j)
    q.col(static_cast<Eigen::Index>(j)) = probe_q_column(means[j], truncation, policy);
  return q;
}

namespace {

void project_columns(Matrix& x) {
  std::vector<double> col(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index m = 0; m < x.cols(); ++m) {
    for (Eigen::Index n = 0; n < x.rows(); ++n) col[static_cast<std::size_t>(n)] = x(n, m);
    const auto proj = project_simplex(col);
    for (Eigen::Index n = 0; n < x.rows(); ++n) x(n, m) = proj[static_cast<std::size_t>(n)];
  }
}

struct Objective {
  const Matrix& q;
  const Matrix& p;
  double reg;

  double data(const Matrix& x) const { return (x * q - p).squaredNorm(); }
  double value(const Matrix& x) const { return data(x) + reg * smoothness_penalty(x); }

  Matrix gradient(const Matrix& x) const {
    Matrix g = 2.0 * (x * q - p) * q.transpose();
    if (reg > 0.0 && x.cols() > 1) {
      const Eigen::Index m = x.cols() - 1;
      const Matrix d = x.rightCols(m) - x.leftCols(m);
      g.leftCols(m) -= 2.0 * reg * d;
      g.rightCols(m) += 2.0 * reg * d;
    }
    return g;
  }
};

}  // namespace

ReconstructionResult reconstruct_povm(const Matrix& probs, std::span<const double> means,
                                      const ReconstructionConfig& cfg) {
  cfg.validate();
  if (probs.rows() != cfg.outcomes)
    throw ShapeError("probability matrix has " + std::to_string(probs.rows()) + " outcomes, config expects " +
                     std::to_string(cfg.outcomes));
  if (static_cast<std::size_t>(probs.cols()) != means.size())
    throw ShapeError("probability matrix and probe means disagree on the number of probes");
  if (!probs.allFinite()) throw DomainError("probability matrix has non-finite entries");
  for (double mu : means)
    if (!(mu >= 0.0) || !std::isfinite(mu)) throw DomainError("probe means must be finite and >= 0");

  ReconstructionResult res;
  // Canonical probe order (by mean, then by column contents) so that the
  // floating-point result does not depend on the order probes were listed in.
  std::vector<std::size_t> order;
  for (std::size_t j = 0; j < means.size(); ++j) {
    if (probs.col(static_cast<Eigen::Index>(j)).sum() <= 0.0) {
      res.skipped_probes.push_back(j);
      continue;
    }
    order.push_back(j);
  }
  if (order.empty()) throw DomainError("no probe carries any events");
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (means[a] != means[b]) return means[a] < means[b];
    for (Eigen::Index n = 0; n < probs.rows(); ++n) {
      const double pa = probs(n, static_cast<Eigen::Index>(a)), pb = probs(n, static_cast<Eigen::Index>(b));
      if (pa != pb) return pa < pb;
    }
    return false;
  });

  const auto k = static_cast<Eigen::Index>(order.size());
  std::vector<double> sorted_means(order.size());
  Matrix p(cfg.outcomes, k);
  for (Eigen::Index c = 0; c < k; ++c) {
    sorted_means[static_cast<std::size_t>(c)] = means[order[static_cast<std::size_t>(c)]];
    p.col(c) = probs.col(static_cast<Eigen::Index>(order[static_cast<std::size_t>(c)]));
  }
  const Matrix q = design_matrix(sorted_means, cfg.truncation, cfg.tail_policy);

  const Eigen::SelfAdjointEigenSolver<Matrix> eig(q.transpose() * q, Eigen::EigenvaluesOnly);
  const double lipschitz = 2.0 * (eig.eigenvalues().maxCoeff() + 4.0 * cfg.reg_weight);
  const Objective obj{q, p, cfg.reg_weight};

  Matrix x = cfg.init_eta ? binomial_povm(*cfg.init_eta, cfg.outcomes, cfg.truncation).entries()
                          : Matrix::Constant(cfg.outcomes, cfg.truncation, 1.0 / cfg.outcomes);
  double fx = obj.value(x);
  res.objective_history.push_back(fx);

  Matrix y = x;
  double t = 1.0;
  bool from_x = true;  // y currently equals x
  int it = 0;
  for (; it < cfg.max_iters; ++it) {
    if (fx == 0.0) {
      res.converged = true;
      break;
    }
    const Matrix& base = cfg.solver == SolverKind::Accelerated ? y : x;
    Matrix z = base - obj.gradient(base) / lipschitz;
    project_columns(z);
    const double fz = obj.value(z);
    if (fz > fx) {
      if (from_x || cfg.solver == SolverKind::Plain) {
        // A plain 1/L step cannot increase the objective beyond rounding.
        res.converged = true;
        ++it;
        break;
      }
      t = 1.0;
      y = x;
      from_x = true;
      continue;
    }
    from_x = false;
    if (cfg.solver == SolverKind::Accelerated) {
      const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      y = z + ((t - 1.0) / t_next) * (z - x);
      t = t_next;
    }
    const double rel = (fx - fz) / fx;
    x = std::move(z);
    fx = fz;
    res.objective_history.push_back(fx);
    if (rel < cfg.tol) {
      res.converged = true;
      ++it;
      break;
    }
  }
  res.iterations = it;
  res.lipschitz = lipschitz;
  res.data_term = obj.data(x);
  res.reg_term = smoothness_penalty(x);

  const Matrix resid = x * q - p;
  res.per_probe_residuals.assign(means.size(), 0.0);
  for (Eigen::Index c = 0; c < k; ++c)
    res.per_probe_residuals[order[static_cast<std::size_t>(c)]] = resid.col(c).squaredNorm();
  res.povm = PovmMatrix(std::move(x), true);
  return res;
}

std::vector<std::size_t> match_probes(const CountTable& counts, const ProbeEnsemble& ensemble) {
  if (counts.probes() != ensemble.size())
    throw ShapeError("count table has " + std::to_string(counts.probes()) + " probes but the ensemble has " +
                     std::to_string(ensemble.size()));
  std::vector<std::size_t> idx(counts.probes());
  for (std::size_t j = 0; j < counts.probes(); ++j) {
    const auto e = ensemble.index_of(counts.probe_ids()[j]);
    if (!e) throw ShapeError("probe id " + std::to_string(counts.probe_ids()[j]) + " is not in the ensemble");
    idx[j] = *e;
  }
  return idx;
}

ReconstructionResult reconstruct_povm(const CountTable& counts, const ProbeEnsemble& ensemble,
                                      const ReconstructionConfig& cfg) {
  const auto idx = match_probes(counts, ensemble);
  if (counts.outcomes() != cfg.outcomes)
    throw ShapeError("count table has " + std::to_string(counts.outcomes()) + " outcomes, config expects " +
                     std::to_string(cfg.outcomes));
  std::vector<double> means(idx.size());
  for (std::size_t j = 0; j < idx.size(); ++j) means[j] = ensemble[idx[j]].mean_photons;
  return reconstruct_povm(counts.prob_matrix(), means, cfg);
}

}  // namespace pnrtomo
