#pragma once

#include <cstdint>
#include <functional>

#include "sreg/metrics.hpp"
#include "sreg/model.hpp"

namespace sreg {

/// How the convex combination of normalized sensitivities is mapped into
/// [0, clamp_max]. fixed_scale multiplies by clamp_max; min_max rescales the
/// step's range onto [0, clamp_max].
enum class CombineScaling { fixed_scale, min_max };

/// sgd is the bare masked gradient step. adamw applies the mask to the
/// AdamW-adapted step instead (extension, off by default).
enum class UpdateRule { sgd, adamw };

struct ScheduleConfig {
  double kappa = 0.6;
  std::size_t total_steps = 1000;
  double alpha = 1e-4;
  double clamp_max = 0.99;
  std::size_t batch_size = 32;
  CombineScaling scaling = CombineScaling::fixed_scale;
  UpdateRule rule = UpdateRule::sgd;
  /// Exponential smoothing factor for the transfer sensitivity; 0 keeps it
  /// instantaneous.
  double transfer_ema = 0.0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 1e-4;

  void validate() const;
};

/// (average rank - 1) / (n - 1), ties sharing their average rank; n = 1 maps to 0.
Vector rank_normalize(const Vector& values);

struct ScheduleWeights {
  double prior = 0.0;
  double transfer = 0.0;
};

/// prior = kappa + (1 - 2 kappa) t / T, transfer = 1 - prior.
ScheduleWeights schedule_weights(std::size_t t, const ScheduleConfig& cfg);

/// Combined per-parameter sensitivity in [0, clamp_max].
Vector combine_sensitivity(const Vector& prior_norm, const Vector& transfer_norm, std::size_t t,
                           const ScheduleConfig& cfg, const GroupLayout& layout);

/// theta_n - (1 - s_n) alpha G_n.
ParamVector sreg_step(const ParamVector& theta, const Vector& gradient, const Vector& combined,
                      double alpha);

enum class TuneMode { vanilla, sreg };

std::string to_string(TuneMode m);
TuneMode parse_tune_mode(const std::string& s);

struct EvalSets {
  const Batch& target_train;
  const Batch& target_test;
  const Batch& source_test;
};

struct StepState {
  std::size_t step;
  const ParamVector& theta;
  const Batch& batch;
  const LossAndGrad& loss_grad;
};

using StepObserver = std::function<void(const StepState&)>;

struct TrainResult {
  ParamVector theta;
  RunMetrics metrics;
};

/// Masked fine-tuning loop. Step t in [0, T]: draw a batch from the target
/// training set, evaluate loss and gradient at theta^(t), record a metrics
/// row, then (for t < T) apply the update. Vanilla mode uses s = 0.
/// `prior` holds the raw per-group prior sensitivities in layout order.
TrainResult train_sreg(const TaskModel& model, const ParamVector& theta0, const Vector& prior,
                       const ScheduleConfig& cfg, TuneMode mode, const EvalSets& eval,
                       std::uint64_t seed, const StepObserver& observer = {});

}  // namespace sreg
