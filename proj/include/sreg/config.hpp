#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sreg/fim_probe.hpp"
#include "sreg/harness.hpp"
#include "sreg/model.hpp"
#include "sreg/optimizer.hpp"
#include "sreg/oracle.hpp"
#include "sreg/transfer_sense.hpp"

namespace sreg {

struct ModelConfig {
  std::string kind = "mlp";  // mlp | attention
  std::vector<Index> widths = {8, 16, 16, 4};  // attention reads only the last (output) width
  Activation activation = Activation::tanh;
  LossKind loss = LossKind::squared_error;
  Index seq_len = 2;  // attention only; seq_len * d_model is the input width
  Index d_model = 4;
  /// Loss under which prior sensitivity is probed: "task" reuses `loss`.
  std::string probe_loss = "task";
};

struct HarnessConfig {
  TaskPairSpec data;
  PretrainConfig pretrain;
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  std::vector<ShiftKind> shifts = {ShiftKind::input_distribution_shift, ShiftKind::channel_permutation,
                                   ShiftKind::nonlinear_warp};
  std::vector<std::string> arms = {"vanilla", "sreg", "vanilla_lr10", "vanilla_lr100"};
};

struct OracleConfig {
  double step = 1e-4;
  HessianScheme scheme = HessianScheme::gradient_difference;
  std::size_t k_top = 10;
  std::size_t gap_samples = 1000;
  /// Rows of the source training set used for the dense Hessian; 0 = all.
  std::size_t max_rows = 0;
  /// Displacement scale of the second-order regime check, relative to |theta0|.
  double regime_scale = 1e-3;
  std::size_t regime_samples = 10;
  bool empirical_fisher = false;
};

struct RunConfig {
  ModelConfig model;
  ProbeConfig probe;
  ScheduleConfig schedule;
  RiskConfig risk;
  std::size_t risk_every = 10;  // analyze every n-th step
  HarnessConfig harness;
  OracleConfig oracle;
  std::string out = "runs/default";

  RunConfig();
};

/// INI-style text: `[section]` headers, `key = value` lines, `#` or `;`
/// comments. Lists are comma separated. Unknown sections or keys, malformed
/// lines and bad values throw ConfigError citing origin, line and key.
RunConfig parse_config(const std::string& text, const std::string& origin = "<config>");

/// Reads and parses a file; a missing file is an InputError.
RunConfig load_config(const std::string& path);

/// `section.key=value`, validated like a config line.
void apply_override(RunConfig& cfg, const std::string& assignment);

/// Every key with its effective value, in a fixed order. Parsing the result
/// gives back an identical config. Without `with_io` the [io] section is
/// left out, so the text does not depend on where outputs go.
std::string serialize_config(const RunConfig& cfg, bool with_io = true);

/// Cross-section checks (model shape vs. data, label kind vs. loss, ...).
void validate_config(const RunConfig& cfg);

/// Model for the configured architecture, seeded for initialization.
TaskModel make_model(const RunConfig& cfg, std::uint64_t seed);

/// Model used for probing (probe_loss applied).
TaskModel make_probe_model(const RunConfig& cfg, const TaskModel& task_model);

std::vector<ArmSpec> configured_arms(const RunConfig& cfg);

/// Suite settings taken from the config (MLP only).
SuiteConfig make_suite(const RunConfig& cfg);

std::string to_string(HessianScheme s);
std::string to_string(RiskMode m);
std::string to_string(CombineScaling s);
std::string to_string(UpdateRule r);

}  // namespace sreg
