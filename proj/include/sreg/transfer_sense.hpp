#pragma once

#include <cstdint>

#include "sreg/model.hpp"

namespace sreg {

struct GradientStats {
  double l1 = 0.0;
  double l2 = 0.0;
  double sparsity = 1.0;  // l1 / (sqrt(P) l2); 1 for a zero gradient
  Vector transfer_sensitivity;  // g_n^2
};

GradientStats gradient_stats(const Vector& gradient);

/// S(theta, delta | batch) = L(theta) - L(theta + delta).
double sensitivity_function(const TaskModel& model, const ParamVector& theta, const Vector& delta,
                            const Batch& batch);

enum class RiskMode { linearized, exact_loss };

struct RiskConfig {
  double alpha = 1e-4;  // centre of the perturbation is alpha * G
  double sigma = 1e-3;
  std::size_t num_pairs = 10000;
  std::uint64_t seed = 0;
  RiskMode mode = RiskMode::linearized;
  unsigned threads = 1;

  void validate() const;
};

struct AdaptationRisk {
  double estimate = 0.0;   // Monte-Carlo mean of |S(delta) - S(delta')|
  double reference = 0.0;  // (2 sigma / sqrt(pi)) |G|_2
};

/// Monte-Carlo adaptation risk over num_pairs pairs delta, delta' ~ N(alpha G, sigma^2 I).
AdaptationRisk adaptation_risk(const TaskModel& model, const ParamVector& theta, const Batch& batch,
                               const RiskConfig& cfg);

/// Linearized estimator for a given gradient, S(delta) = G^T delta. The mode
/// field of `cfg` is ignored.
AdaptationRisk linearized_adaptation_risk(const Vector& gradient, const RiskConfig& cfg);

double adaptation_risk_reference(const Vector& gradient, double sigma);

}  // namespace sreg
