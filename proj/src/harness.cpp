#include "sreg/harness.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

#include "sreg/errors.hpp"

namespace sreg {

std::string to_string(ShiftKind k) {
  switch (k) {
    case ShiftKind::input_distribution_shift: return "input-distribution-shift";
    case ShiftKind::channel_permutation: return "channel-permutation";
    case ShiftKind::nonlinear_warp: return "nonlinear-warp";
  }
  return "channel-permutation";
}

ShiftKind parse_shift_kind(const std::string& s) {
  if (s == "input-distribution-shift") return ShiftKind::input_distribution_shift;
  if (s == "channel-permutation") return ShiftKind::channel_permutation;
  if (s == "nonlinear-warp") return ShiftKind::nonlinear_warp;
  throw ConfigError("unknown shift kind '" + s + "'");
}

void TaskPairSpec::validate() const {
  if (source_size < 1 || target_size < 1 || source_test_size < 1 || target_test_size < 1) {
    throw ConfigError("dataset sizes must be positive");
  }
  if (source_size < 10 * target_size) throw ConfigError("source set must be at least 10x the target set");
  if (input_dim < 1 || output_dim < 1 || teacher_hidden < 1) throw ConfigError("teacher dimensions must be positive");
  if (!(noise >= 0.0) || !std::isfinite(shift_magnitude)) throw ConfigError("invalid noise or shift magnitude");
  if (!permutation.empty()) {
    if (static_cast<Index>(permutation.size()) != input_dim) throw ConfigError("permutation length must equal input_dim");
    std::vector<Index> sorted = permutation;
    std::sort(sorted.begin(), sorted.end());
    for (Index i = 0; i < input_dim; ++i) {
      if (sorted[static_cast<std::size_t>(i)] != i) throw ConfigError("channel permutation is not a permutation");
    }
  }
}

namespace {

enum class Domain { source, target };

Batch draw_split(const TaskPairSpec& spec, const TaskModel& teacher, const ParamVector& teacher_theta,
                 const std::vector<Index>& perm, Domain domain, std::size_t rows, std::uint64_t stream) {
  Rng rng(derive_seed(spec.seed, stream));
  const auto n = static_cast<Index>(rows);
  Matrix x(n, spec.input_dim);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Index r = 0; r < n; ++r) {
    for (Index c = 0; c < spec.input_dim; ++c) x(r, c) = normal(rng);
  }
  Matrix teacher_in = x;
  if (domain == Domain::target) {
    switch (spec.shift) {
      case ShiftKind::input_distribution_shift:
        x.array() += spec.shift_magnitude;
        teacher_in = x;
        break;
      case ShiftKind::channel_permutation:
        for (Index c = 0; c < spec.input_dim; ++c) teacher_in.col(c) = x.col(perm[static_cast<std::size_t>(c)]);
        break;
      case ShiftKind::nonlinear_warp:
        teacher_in = x + spec.shift_magnitude * x.array().sin().matrix();
        break;
    }
  }
  Matrix y = forward(teacher, teacher_theta, teacher_in);
  for (Index r = 0; r < n; ++r) {
    for (Index c = 0; c < y.cols(); ++c) y(r, c) += spec.noise * normal(rng);
  }
  if (spec.one_hot_labels) {
    for (Index r = 0; r < n; ++r) {
      Index top = 0;
      y.row(r).maxCoeff(&top);
      y.row(r).setZero();
      y(r, top) = 1.0;
    }
  }
  return {std::move(x), std::move(y)};
}

}  // namespace

TaskPair generate_task_pair(const TaskPairSpec& spec) {
  spec.validate();
  const TaskModel teacher = TaskModel::mlp({spec.input_dim, spec.teacher_hidden, spec.output_dim},
                                           Activation::tanh, LossKind::squared_error,
                                           derive_seed(spec.seed, 100));
  ParamVector teacher_theta = build_model(teacher).theta;
  teacher_theta *= spec.teacher_gain;

  std::vector<Index> perm = spec.permutation;
  if (perm.empty()) {
    perm.resize(static_cast<std::size_t>(spec.input_dim));
    std::iota(perm.begin(), perm.end(), Index{0});
    Rng rng(derive_seed(spec.seed, 101));
    std::shuffle(perm.begin(), perm.end(), rng);
  }

  TaskPair pair;
  pair.source_train = draw_split(spec, teacher, teacher_theta, perm, Domain::source, spec.source_size, 1);
  pair.source_test = draw_split(spec, teacher, teacher_theta, perm, Domain::source, spec.source_test_size, 2);
  pair.target_train = draw_split(spec, teacher, teacher_theta, perm, Domain::target, spec.target_size, 3);
  pair.target_test = draw_split(spec, teacher, teacher_theta, perm, Domain::target, spec.target_test_size, 4);
  return pair;
}

namespace {

void check_training(double loss, const std::string& phase) {
  if (!std::isfinite(loss)) throw TrainingError("pretraining diverged", phase);
}

// Full-batch L-BFGS with Armijo backtracking.
ParamVector refine_lbfgs(const TaskModel& model, ParamVector theta, const Batch& data,
                         double tolerance, std::size_t iterations) {
  constexpr std::size_t kHistory = 10;
  std::deque<std::pair<Vector, Vector>> history;  // (s, y)
  LossAndGrad cur = loss_and_grad(model, theta, data);
  for (std::size_t it = 0; it < iterations; ++it) {
    if (cur.grad.norm() <= tolerance) break;
    Vector q = cur.grad;
    std::vector<double> alphas(history.size());
    for (std::size_t i = history.size(); i-- > 0;) {
      const auto& [s, y] = history[i];
      alphas[i] = s.dot(q) / y.dot(s);
      q -= alphas[i] * y;
    }
    if (!history.empty()) {
      const auto& [s, y] = history.back();
      q *= s.dot(y) / y.squaredNorm();
    }
    for (std::size_t i = 0; i < history.size(); ++i) {
      const auto& [s, y] = history[i];
      const double beta = y.dot(q) / y.dot(s);
      q += s * (alphas[i] - beta);
    }
    Vector dir = -q;
    double slope = dir.dot(cur.grad);
    if (!(slope < 0.0)) {
      history.clear();
      dir = -cur.grad;
      slope = -cur.grad.squaredNorm();
    }
    double step = history.empty() ? std::min(1.0, 1.0 / cur.grad.norm()) : 1.0;
    bool accepted = false;
    LossAndGrad next;
    for (int ls = 0; ls < 40; ++ls) {
      const ParamVector trial = theta + step * dir;
      try {
        next = loss_and_grad(model, trial, data);
      } catch (const NumericError&) {
        step *= 0.5;
        continue;
      }
      if (next.loss <= cur.loss + 1e-4 * step * slope) {
        accepted = true;
        const Vector s = trial - theta;
        const Vector y = next.grad - cur.grad;
        if (s.dot(y) > 1e-16 * s.norm() * y.norm()) {
          history.emplace_back(s, y);
          if (history.size() > kHistory) history.pop_front();
        }
        theta = trial;
        cur = std::move(next);
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      if (history.empty()) break;  // no descent possible along -g
      history.clear();
    }
  }
  check_training(cur.loss, "refine");
  return theta;
}

}  // namespace

PretrainResult pretrain(const TaskModel& model, const ParamVector& init, const Batch& source,
                        const PretrainConfig& cfg) {
  if (cfg.epochs < 1) throw ConfigError("pretraining needs at least one epoch");
  if (cfg.batch_size < 1 || !(cfg.learning_rate > 0.0)) throw ConfigError("invalid pretraining optimizer settings");
  model.layout().check(init);
  PretrainResult out;
  out.initial_grad_norm = grad_eval(model, init, source).norm();

  ParamVector theta = init;
  Vector m = Vector::Zero(theta.size());
  Vector v = Vector::Zero(theta.size());
  Rng rng(cfg.seed);
  const std::size_t per_epoch =
      model.is_quadratic() ? 1 : std::max<std::size_t>(1, static_cast<std::size_t>(source.size()) / cfg.batch_size);
  std::size_t k = 0;
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    for (std::size_t b = 0; b < per_epoch; ++b) {
      const Batch batch = model.is_quadratic() ? Batch{} : sample_batch(source, cfg.batch_size, rng);
      LossAndGrad lg;
      try {
        lg = loss_and_grad(model, theta, batch);
      } catch (const NumericError& err) {
        throw TrainingError(err.what(), "epoch " + std::to_string(e));
      }
      check_training(lg.loss, "epoch " + std::to_string(e));
      ++k;
      m = 0.9 * m + 0.1 * lg.grad;
      v = 0.999 * v + 0.001 * lg.grad.array().square().matrix();
      const double c1 = 1.0 - std::pow(0.9, static_cast<double>(k));
      const double c2 = 1.0 - std::pow(0.999, static_cast<double>(k));
      theta -= (cfg.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + 1e-8)).matrix();
    }
  }
  const double tolerance = std::max(cfg.grad_tolerance, cfg.grad_ratio * out.initial_grad_norm);
  theta = refine_lbfgs(model, std::move(theta), source, tolerance, cfg.refine_iterations);
  const auto final_lg = loss_and_grad(model, theta, source);
  out.theta = std::move(theta);
  out.final_grad_norm = final_lg.grad.norm();
  out.final_loss = final_lg.loss;
  return out;
}

std::vector<ArmSpec> standard_arms() {
  return {{"vanilla", TuneMode::vanilla, 1.0},
          {"sreg", TuneMode::sreg, 1.0},
          {"vanilla_lr10", TuneMode::vanilla, 0.1},
          {"vanilla_lr100", TuneMode::vanilla, 0.01}};
}

ArmSpec parse_arm(const std::string& name) {
  for (const auto& a : standard_arms()) {
    if (a.name == name) return a;
  }
  throw ConfigError("unknown arm '" + name + "' (expected vanilla, sreg, vanilla_lr10 or vanilla_lr100)");
}

const ArmSummary& ComparisonSummary::arm(const std::string& name) const {
  for (const auto& a : arms) {
    if (a.name == name) return a;
  }
  throw ConfigError("comparison has no arm '" + name + "'");
}

ArmSummary summarize_run(const std::string& name, const RunMetrics& metrics) {
  if (metrics.rows.empty()) throw InputError("run '" + name + "' has no metrics rows");
  const auto& rows = metrics.rows;
  ArmSummary s;
  s.name = name;
  std::size_t best = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].test_loss_t < rows[best].test_loss_t) best = i;
  }
  s.best_step = rows[best].step;
  s.best_target_test_loss = rows[best].test_loss_t;
  s.train_test_gap_at_best = rows[best].test_loss_t - rows[best].train_loss_t;
  s.initial_target_test_loss = rows.front().test_loss_t;
  s.final_target_test_loss = rows.back().test_loss_t;
  s.target_gain = s.initial_target_test_loss - s.final_target_test_loss;
  s.initial_source_test_loss = rows.front().test_loss_s;
  s.final_source_test_loss = rows.back().test_loss_s;
  s.source_loss_increase = s.final_source_test_loss - s.initial_source_test_loss;
  double area = 0.0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double a = rows[i - 1].test_loss_s - s.initial_source_test_loss;
    const double b = rows[i].test_loss_s - s.initial_source_test_loss;
    area += 0.5 * (a + b);
  }
  s.forgetting_auc = rows.size() > 1 ? area / static_cast<double>(rows.size() - 1) : 0.0;
  s.final_weighted_distance = rows.back().weighted_distance;
  return s;
}

ComparisonResult run_comparison(const TaskModel& model, const ParamVector& theta0, const Vector& prior,
                                const TaskPair& data, const std::vector<ArmSpec>& arms,
                                const ScheduleConfig& cfg, std::uint64_t seed) {
  if (arms.empty()) throw ConfigError("comparison needs at least one arm");
  ComparisonResult out;
  const EvalSets eval{data.target_train, data.target_test, data.source_test};
  for (const auto& arm : arms) {
    ScheduleConfig arm_cfg = cfg;
    arm_cfg.alpha = cfg.alpha * arm.lr_scale;
    auto run = train_sreg(model, theta0, prior, arm_cfg, arm.mode, eval, seed);
    out.summary.arms.push_back(summarize_run(arm.name, run.metrics));
    out.runs.push_back({arm, std::move(run.metrics), std::move(run.theta)});
  }
  return out;
}

SuiteConfig::SuiteConfig() {
  schedule.total_steps = 2000;
  schedule.batch_size = 32;
}

CaseSeeds case_seeds(std::uint64_t seed) {
  return {derive_seed(seed, 1), derive_seed(seed, 2), derive_seed(seed, 3), derive_seed(seed, 4),
          derive_seed(seed, 5), derive_seed(seed, 6), derive_seed(seed, 7)};
}

SuiteCase run_suite_case(const SuiteConfig& cfg, ShiftKind shift, std::uint64_t seed) {
  const CaseSeeds seeds = case_seeds(seed);
  TaskPairSpec spec = cfg.data;
  spec.shift = shift;
  spec.seed = seeds.data;
  const TaskPair data = generate_task_pair(spec);

  const TaskModel model = TaskModel::mlp(cfg.widths, cfg.activation, cfg.loss, seeds.model);
  const ModelInstance init = build_model(model);

  SuiteCase c;
  c.seed = seed;
  c.shift = shift;
  PretrainConfig pcfg = cfg.pretrain;
  pcfg.seed = seeds.pretrain;
  c.pretrained = pretrain(model, init.theta, data.source_train, pcfg);

  ProbeConfig probe_cfg = cfg.probe;
  probe_cfg.seed = seeds.probe;
  c.probe = probe_sweep(model, c.pretrained.theta, data.source_train, probe_cfg);
  const auto sp = prior_sensitivity(c.probe);
  c.prior = Eigen::Map<const Vector>(sp.data(), static_cast<Index>(sp.size()));

  c.comparison = run_comparison(model, c.pretrained.theta, c.prior, data, cfg.arms, cfg.schedule, seeds.finetune);
  return c;
}

}  // namespace sreg
