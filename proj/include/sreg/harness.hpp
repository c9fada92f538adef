#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sreg/fim_probe.hpp"
#include "sreg/metrics.hpp"
#include "sreg/model.hpp"
#include "sreg/optimizer.hpp"

namespace sreg {

enum class ShiftKind { input_distribution_shift, channel_permutation, nonlinear_warp };

std::string to_string(ShiftKind k);
ShiftKind parse_shift_kind(const std::string& s);

/// Source and target data come from a fixed random teacher network. The target
/// is a shifted version of the source:
///   input_distribution_shift  x ~ N(magnitude * 1, I), same teacher
///   channel_permutation       y = teacher(P x)
///   nonlinear_warp            y = teacher(x + magnitude * sin(x))
struct TaskPairSpec {
  std::size_t source_size = 1000;
  std::size_t target_size = 100;
  std::size_t source_test_size = 1000;
  std::size_t target_test_size = 500;
  ShiftKind shift = ShiftKind::channel_permutation;
  double shift_magnitude = 1.0;
  double noise = 0.05;
  std::uint64_t seed = 0;
  Index input_dim = 8;
  Index output_dim = 4;
  Index teacher_hidden = 32;
  double teacher_gain = 1.0;  // scales the teacher weights
  /// Replace each noisy teacher output by the one-hot of its argmax
  /// (classification targets for cross-entropy models).
  bool one_hot_labels = false;
  /// Explicit channel permutation; empty draws one from the seed.
  std::vector<Index> permutation;

  void validate() const;
};

struct TaskPair {
  Batch source_train;
  Batch source_test;
  Batch target_train;
  Batch target_test;
};

TaskPair generate_task_pair(const TaskPairSpec& spec);

struct PretrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 64;
  double learning_rate = 1e-2;  // Adam, minibatch phase
  std::size_t refine_iterations = 4000;  // full-batch L-BFGS phase
  double grad_tolerance = 1e-9;  // absolute, on the full-batch gradient
  double grad_ratio = 2e-4;      // relative to the gradient norm at init
  std::uint64_t seed = 0;
};

struct PretrainResult {
  ParamVector theta;
  double initial_grad_norm = 0.0;
  double final_grad_norm = 0.0;
  double final_loss = 0.0;
};

/// Minibatch Adam followed by full-batch L-BFGS so that the source gradient
/// at the returned point is close to zero. Throws TrainingError on divergence.
PretrainResult pretrain(const TaskModel& model, const ParamVector& init, const Batch& source,
                        const PretrainConfig& cfg);

struct ArmSpec {
  std::string name;
  TuneMode mode = TuneMode::vanilla;
  double lr_scale = 1.0;
};

/// vanilla, sreg, vanilla_lr10 (alpha/10), vanilla_lr100 (alpha/100).
std::vector<ArmSpec> standard_arms();
ArmSpec parse_arm(const std::string& name);

struct ArmSummary {
  std::string name;
  double best_target_test_loss = 0.0;
  std::size_t best_step = 0;
  double initial_target_test_loss = 0.0;
  double final_target_test_loss = 0.0;
  double target_gain = 0.0;  // initial - final target test loss
  double initial_source_test_loss = 0.0;
  double final_source_test_loss = 0.0;
  double source_loss_increase = 0.0;
  double train_test_gap_at_best = 0.0;
  double forgetting_auc = 0.0;  // mean over steps of the source test loss increase
  double final_weighted_distance = 0.0;
};

struct ComparisonSummary {
  std::vector<ArmSummary> arms;

  const ArmSummary& arm(const std::string& name) const;
};

ArmSummary summarize_run(const std::string& name, const RunMetrics& metrics);

struct ArmRun {
  ArmSpec arm;
  RunMetrics metrics;
  ParamVector theta;
};

struct ComparisonResult {
  ComparisonSummary summary;
  std::vector<ArmRun> runs;
};

/// Runs every arm from the same theta0, seed and batch schedule.
ComparisonResult run_comparison(const TaskModel& model, const ParamVector& theta0, const Vector& prior,
                                const TaskPair& data, const std::vector<ArmSpec>& arms,
                                const ScheduleConfig& cfg, std::uint64_t seed);

/// Five seeds x three shift kinds on an MLP [8, 16, 16, 4].
struct SuiteConfig {
  std::vector<Index> widths = {8, 16, 16, 4};
  Activation activation = Activation::tanh;
  LossKind loss = LossKind::squared_error;
  TaskPairSpec data;
  PretrainConfig pretrain;
  ProbeConfig probe;
  ScheduleConfig schedule;
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  std::vector<ShiftKind> shifts = {ShiftKind::input_distribution_shift, ShiftKind::channel_permutation,
                                   ShiftKind::nonlinear_warp};
  std::vector<ArmSpec> arms = standard_arms();

  SuiteConfig();
};

struct SuiteCase {
  std::uint64_t seed = 0;
  ShiftKind shift = ShiftKind::channel_permutation;
  PretrainResult pretrained;
  EigenEstimateSet probe;
  Vector prior;
  ComparisonResult comparison;
};

/// Seeds for the stages of one suite case, all derived from the case seed.
struct CaseSeeds {
  std::uint64_t data, model, pretrain, probe, finetune, oracle, analyze;
};
CaseSeeds case_seeds(std::uint64_t seed);

SuiteCase run_suite_case(const SuiteConfig& cfg, ShiftKind shift, std::uint64_t seed);

}  // namespace sreg
