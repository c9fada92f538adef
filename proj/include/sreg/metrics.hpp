#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "sreg/layout.hpp"

namespace sreg {

struct WeightDistanceReport {
  std::vector<std::string> groups;
  /// |theta_t^j - theta_0^j| / |theta_0^j|, or the absolute distance when
  /// theta_0^j is all zero (see `absolute`).
  std::vector<double> relative;
  std::vector<bool> absolute;
  /// sum_n s^p_{group(n)} (theta_t,n - theta_0,n)^2
  double weighted = 0.0;
};

WeightDistanceReport weight_distance_report(const ParamVector& theta_t, const ParamVector& theta0,
                                            const GroupLayout& layout, const Vector& prior);

struct StepMetrics {
  std::size_t step = 0;
  double train_loss_t = 0.0;  // full target training set
  double test_loss_t = 0.0;
  double test_loss_s = 0.0;   // forgetting proxy
  double sparsity = 1.0;      // of the step's batch gradient
  std::vector<double> group_distance;
  double weighted_distance = 0.0;
};

struct RunMetrics {
  std::vector<std::string> groups;
  std::vector<StepMetrics> rows;
};

/// Columns: step, train_loss_t, test_loss_t, test_loss_s, sparsity,
/// dist.<group>..., dist.weighted. Values printed with 17 significant digits.
void write_metrics_csv(std::ostream& os, const RunMetrics& metrics);
RunMetrics read_metrics_csv(std::istream& is);

std::string format_double(double v);

}  // namespace sreg
