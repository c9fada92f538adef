#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sreg/model.hpp"

namespace sreg {

/// loss_second_difference: every H_ij from four (or three) loss evaluations.
/// gradient_difference: column i from central differences of grad_eval.
enum class HessianScheme { loss_second_difference, gradient_difference };

struct ExactCurvature {
  Matrix hessian;  // symmetrized, P x P

  Matrix block(const GroupLayout& layout, std::size_t j) const;
};

constexpr Index kMaxDenseParams = 2000;

/// Dense Hessian of the dataset-mean loss at theta0.
ExactCurvature exact_hessian(const TaskModel& model, const ParamVector& theta0, const Batch& dataset,
                             double step = 1e-4,
                             HessianScheme scheme = HessianScheme::loss_second_difference,
                             Index max_params = kMaxDenseParams);

/// Mean of per-sample gradient outer products.
Matrix empirical_fisher(const TaskModel& model, const ParamVector& theta, const Batch& dataset,
                        Index max_params = kMaxDenseParams);

struct EigenPairs {
  Vector values;   // descending
  Matrix vectors;  // column i pairs with values[i]
};

EigenPairs eigendecompose(const Matrix& symmetric);

enum class ApproxVariant { isotropic, truncation };

std::string to_string(ApproxVariant v);

/// isotropic: gamma I with gamma the mean of the top-K eigenvalues.
/// truncation: V_K diag(lambda_1..K) V_K^T.
Matrix build_approximation(const EigenPairs& pairs, std::size_t k, ApproxVariant variant);

/// Per-group exact block, its spectrum and the chosen approximation.
struct BlockApproximation {
  std::string group;
  Matrix exact;
  EigenPairs pairs;
  Matrix approx;
};

std::vector<BlockApproximation> approximate_blocks(const Matrix& hessian, const GroupLayout& layout,
                                                   std::size_t k, ApproxVariant variant);

/// Places per-group approximations on the block diagonal.
Matrix assemble_block_diagonal(const std::vector<BlockApproximation>& blocks,
                               const GroupLayout& layout);

struct FrobeniusCheck {
  double lhs = 0.0;  // |F - F~|_F
  double rhs = 0.0;  // sqrt(sum_{i>K} lambda_i^2)
  bool satisfied = false;
};

FrobeniusCheck check_frobenius_bound(const Matrix& exact, const Matrix& approx,
                                     const Vector& eigenvalues_desc, std::size_t k);

struct FrobeniusReport {
  std::vector<std::string> groups;
  std::vector<FrobeniusCheck> per_group;
  FrobeniusCheck total;  // summed over groups in quadrature
};

FrobeniusReport check_frobenius_bound(const std::vector<BlockApproximation>& blocks, std::size_t k);

/// |1/2 d^T F d - 1/2 d^T F~ d| / (1/2 |d|^2 lambda_max).
double gap_bound_ratio(const Matrix& exact, const Matrix& approx, double lambda_max, const Vector& delta);

struct GapBoundReport {
  std::size_t samples = 0;
  std::size_t violations = 0;
  double max_ratio = 0.0;
};

/// Gaussian displacement samples; a ratio above 1 counts as a violation.
GapBoundReport check_gap_bound(const Matrix& exact, const Matrix& approx, double lambda_max,
                               std::size_t samples, std::uint64_t seed);

/// Eigenvector of F - F~ with the largest absolute eigenvalue.
Vector worst_gap_direction(const Matrix& exact, const Matrix& approx);

enum class GapMode { direct, quadratic };

/// direct: L(theta | D0) - L(theta0 | D0); quadratic: 1/2 d^T F d.
double generalization_gap(const TaskModel& model, const ParamVector& theta, const ParamVector& theta0,
                          const Batch& source, GapMode mode, const Matrix* fisher = nullptr);

/// L(theta | D_t) + beta L(theta | D_0).
double joint_risk(const TaskModel& target_model, const TaskModel& source_model, const ParamVector& theta,
                  double beta, const Batch& target, const Batch& source);

}  // namespace sreg
