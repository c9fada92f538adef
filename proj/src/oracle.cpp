#include "sreg/oracle.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

#include "sreg/errors.hpp"

namespace sreg {

Matrix ExactCurvature::block(const GroupLayout& layout, std::size_t j) const {
  const auto& g = layout.group(j);
  return hessian.block(g.offset, g.offset, g.size, g.size);
}

ExactCurvature exact_hessian(const TaskModel& model, const ParamVector& theta0, const Batch& dataset,
                             double step, HessianScheme scheme, Index max_params) {
  const Index P = theta0.size();
  model.layout().check(theta0);
  if (P > max_params) {
    throw CapacityError("dense Hessian requested for " + std::to_string(P) + " parameters (limit " +
                        std::to_string(max_params) + ")");
  }
  if (!(step > 0.0)) throw PreconditionError("finite-difference step must be positive");

  Matrix H(P, P);
  ParamVector x = theta0;
  if (scheme == HessianScheme::loss_second_difference) {
    const double h2 = step * step;
    const double base = loss_eval(model, theta0, dataset);
    auto at = [&](Index i, double di, Index j, double dj) {
      x = theta0;
      x[i] += di;
      x[j] += dj;
      return loss_eval(model, x, dataset);
    };
    for (Index i = 0; i < P; ++i) {
      x = theta0;
      x[i] += step;
      const double plus = loss_eval(model, x, dataset);
      x[i] = theta0[i] - step;
      const double minus = loss_eval(model, x, dataset);
      H(i, i) = (plus - 2.0 * base + minus) / h2;
      for (Index j = 0; j < i; ++j) {
        const double pp = at(i, step, j, step);
        const double pm = at(i, step, j, -step);
        const double mp = at(i, -step, j, step);
        const double mm = at(i, -step, j, -step);
        H(i, j) = H(j, i) = (pp - pm - mp + mm) / (4.0 * h2);
      }
    }
  } else {
    for (Index i = 0; i < P; ++i) {
      x = theta0;
      x[i] += step;
      const Vector gp = grad_eval(model, x, dataset);
      x[i] = theta0[i] - step;
      const Vector gm = grad_eval(model, x, dataset);
      H.col(i) = (gp - gm) / (2.0 * step);
    }
  }
  if (!H.allFinite()) throw NumericError("non-finite Hessian entry", "hessian");
  ExactCurvature out;
  out.hessian = 0.5 * (H + H.transpose());
  return out;
}

Matrix empirical_fisher(const TaskModel& model, const ParamVector& theta, const Batch& dataset,
                        Index max_params) {
  const Index P = theta.size();
  if (P > max_params) throw CapacityError("dense Fisher requested for " + std::to_string(P) + " parameters");
  if (model.is_quadratic()) throw ConfigError("empirical Fisher needs a data-dependent model");
  Matrix F = Matrix::Zero(P, P);
  for (Index b = 0; b < dataset.size(); ++b) {
    const Vector g = grad_eval(model, theta, take_rows(dataset, b, 1));
    F.selfadjointView<Eigen::Lower>().rankUpdate(g);
  }
  F = F.selfadjointView<Eigen::Lower>();
  return F / static_cast<double>(dataset.size());
}

EigenPairs eigendecompose(const Matrix& symmetric) {
  if (symmetric.rows() != symmetric.cols()) throw PreconditionError("eigendecomposition needs a square matrix");
  const double scale = std::max(1.0, symmetric.cwiseAbs().maxCoeff());
  if ((symmetric - symmetric.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw PreconditionError("eigendecomposition needs a symmetric matrix");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> solver(symmetric);
  if (solver.info() != Eigen::Success) throw NumericError("eigensolver did not converge");
  EigenPairs out;
  out.values = solver.eigenvalues().reverse();
  out.vectors = solver.eigenvectors().rowwise().reverse();
  return out;
}

std::string to_string(ApproxVariant v) { return v == ApproxVariant::isotropic ? "isotropic" : "truncation"; }

Matrix build_approximation(const EigenPairs& pairs, std::size_t k, ApproxVariant variant) {
  const Index n = pairs.values.size();
  const auto K = static_cast<Index>(k);
  if (K < 1 || K > n) throw PreconditionError("K must lie in [1, block dimension]");
  if (pairs.vectors.rows() != n || pairs.vectors.cols() != n) throw PreconditionError("eigenvector shape mismatch");
  if (variant == ApproxVariant::isotropic) {
    const double gamma = pairs.values.head(K).mean();
    return gamma * Matrix::Identity(n, n);
  }
  const auto V = pairs.vectors.leftCols(K);
  return V * pairs.values.head(K).asDiagonal() * V.transpose();
}

std::vector<BlockApproximation> approximate_blocks(const Matrix& hessian, const GroupLayout& layout,
                                                   std::size_t k, ApproxVariant variant) {
  if (hessian.rows() != layout.total_size() || hessian.cols() != layout.total_size()) {
    throw PreconditionError("Hessian does not match layout");
  }
  std::vector<BlockApproximation> out;
  for (std::size_t j = 0; j < layout.num_groups(); ++j) {
    const auto& g = layout.group(j);
    BlockApproximation b;
    b.group = g.name;
    b.exact = hessian.block(g.offset, g.offset, g.size, g.size);
    b.pairs = eigendecompose(b.exact);
    b.approx = build_approximation(b.pairs, std::min<std::size_t>(k, static_cast<std::size_t>(g.size)), variant);
    out.push_back(std::move(b));
  }
  return out;
}

Matrix assemble_block_diagonal(const std::vector<BlockApproximation>& blocks, const GroupLayout& layout) {
  if (blocks.size() != layout.num_groups()) throw PreconditionError("block count does not match layout");
  Matrix out = Matrix::Zero(layout.total_size(), layout.total_size());
  for (std::size_t j = 0; j < blocks.size(); ++j) {
    const auto& g = layout.group(j);
    out.block(g.offset, g.offset, g.size, g.size) = blocks[j].approx;
  }
  return out;
}

FrobeniusCheck check_frobenius_bound(const Matrix& exact, const Matrix& approx,
                                     const Vector& eigenvalues_desc, std::size_t k) {
  if (exact.rows() != approx.rows() || exact.cols() != approx.cols()) {
    throw PreconditionError("Frobenius check shape mismatch");
  }
  FrobeniusCheck c;
  c.lhs = (exact - approx).norm();
  const Index n = eigenvalues_desc.size();
  const auto K = std::min<Index>(static_cast<Index>(k), n);
  c.rhs = std::sqrt(eigenvalues_desc.tail(n - K).squaredNorm());
  c.satisfied = c.lhs <= c.rhs + 1e-10 * std::max(1.0, exact.norm());
  return c;
}

FrobeniusReport check_frobenius_bound(const std::vector<BlockApproximation>& blocks, std::size_t k) {
  FrobeniusReport r;
  double lhs_sq = 0.0;
  double rhs_sq = 0.0;
  double exact_sq = 0.0;
  for (const auto& b : blocks) {
    r.groups.push_back(b.group);
    r.per_group.push_back(check_frobenius_bound(b.exact, b.approx, b.pairs.values, k));
    lhs_sq += r.per_group.back().lhs * r.per_group.back().lhs;
    rhs_sq += r.per_group.back().rhs * r.per_group.back().rhs;
    exact_sq += b.exact.squaredNorm();
  }
  r.total.lhs = std::sqrt(lhs_sq);
  r.total.rhs = std::sqrt(rhs_sq);
  r.total.satisfied = r.total.lhs <= r.total.rhs + 1e-10 * std::max(1.0, std::sqrt(exact_sq));
  return r;
}

double gap_bound_ratio(const Matrix& exact, const Matrix& approx, double lambda_max, const Vector& delta) {
  const double diff = 0.5 * std::abs(delta.dot((exact - approx) * delta));
  const double bound = 0.5 * delta.squaredNorm() * lambda_max;
  if (bound == 0.0) return diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return diff / bound;
}

GapBoundReport check_gap_bound(const Matrix& exact, const Matrix& approx, double lambda_max,
                               std::size_t samples, std::uint64_t seed) {
  if (exact.rows() != approx.rows()) throw PreconditionError("gap check shape mismatch");
  GapBoundReport r;
  r.samples = samples;
  Rng rng(seed);
  const Matrix diff = exact - approx;
  for (std::size_t s = 0; s < samples; ++s) {
    const Vector d = standard_normal(exact.rows(), rng);
    const double ratio = gap_bound_ratio(exact, approx, lambda_max, d);
    r.max_ratio = std::max(r.max_ratio, ratio);
    if (ratio > 1.0 + 1e-12) ++r.violations;
  }
  return r;
}

Vector worst_gap_direction(const Matrix& exact, const Matrix& approx) {
  const EigenPairs p = eigendecompose(exact - approx);
  const Index last = p.values.size() - 1;
  return std::abs(p.values[0]) >= std::abs(p.values[last]) ? Vector(p.vectors.col(0))
                                                            : Vector(p.vectors.col(last));
}

double generalization_gap(const TaskModel& model, const ParamVector& theta, const ParamVector& theta0,
                          const Batch& source, GapMode mode, const Matrix* fisher) {
  if (theta.size() != theta0.size()) throw PreconditionError("theta and theta0 differ in length");
  if (mode == GapMode::direct) return loss_eval(model, theta, source) - loss_eval(model, theta0, source);
  if (!fisher) throw ConfigError("quadratic generalization gap needs a curvature matrix");
  if (fisher->rows() != theta.size()) throw PreconditionError("curvature matrix does not match theta");
  const Vector d = theta - theta0;
  return 0.5 * d.dot(*fisher * d);
}

double joint_risk(const TaskModel& target_model, const TaskModel& source_model, const ParamVector& theta,
                  double beta, const Batch& target, const Batch& source) {
  if (!(beta >= 0.0)) throw PreconditionError("beta must be non-negative");
  return loss_eval(target_model, theta, target) + beta * loss_eval(source_model, theta, source);
}

}  // namespace sreg
