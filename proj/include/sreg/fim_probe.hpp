#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sreg/model.hpp"

namespace sreg {

struct ProbeConfig {
  double radius_factor = 1e-5;  // probe radius relative to the group norm at theta0
  std::size_t k_top = 10;
  std::size_t probes_per_group = 500;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
  unsigned threads = 1;

  void validate() const;
};

struct GroupEigenEstimates {
  std::string group;
  std::vector<double> eigenvalues;  // descending, >= 0, at most k_top
};

struct EigenEstimateSet {
  std::vector<GroupEigenEstimates> groups;
};

/// Isotropic Gaussian draw rescaled to Euclidean norm `radius`.
Vector sample_direction(Index group_size, double radius, Rng& rng);

/// Symmetric second difference of the loss along `direction` embedded into
/// group j's span, divided by |direction|^2. All other coordinates stay at theta0.
double curvature_probe(const TaskModel& model, const ParamVector& theta0, std::size_t group,
                       const Vector& direction, const Batch& batch);

/// Probe radius for group j: radius_factor * |theta0^j|, falling back to
/// radius_factor itself for an all-zero group.
double probe_radius(const ParamVector& theta0, const GroupLayout& layout, std::size_t group,
                    double radius_factor);

/// Every clamped estimate for group j, in probe order. Probe i uses its own
/// seed stream, so the first n entries do not depend on probes_per_group.
std::vector<double> probe_group(const TaskModel& model, const ParamVector& theta0,
                                std::size_t group, const Batch& source, const ProbeConfig& config);

/// Top-K clamped curvature estimates for every group.
EigenEstimateSet probe_sweep(const TaskModel& model, const ParamVector& theta0,
                             const Batch& source, const ProbeConfig& config);

/// Retains the K largest values, sorted descending.
std::vector<double> top_k(std::vector<double> values, std::size_t k);

/// Mean of the retained eigenvalues per group, in group order.
std::vector<double> prior_sensitivity(const EigenEstimateSet& estimates);

/// Reorders named prior sensitivities to match `layout`. Throws ConfigError
/// naming the first group without a value.
Vector align_prior(const GroupLayout& layout, const std::vector<std::string>& names,
                   const std::vector<double>& values);

}  // namespace sreg
