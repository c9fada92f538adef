#include "sreg/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sreg/errors.hpp"
#include "sreg/transfer_sense.hpp"

namespace sreg {

void ScheduleConfig::validate() const {
  if (!(kappa >= 0.0 && kappa <= 1.0)) throw ConfigError("kappa must lie in [0, 1]");
  if (total_steps < 1) throw ConfigError("total steps must be at least 1");
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ConfigError("learning rate must be non-negative");
  if (!(clamp_max > 0.0 && clamp_max < 1.0)) throw ConfigError("clamp must lie in (0, 1)");
  if (batch_size < 1) throw ConfigError("batch size must be positive");
  if (!(transfer_ema >= 0.0 && transfer_ema < 1.0)) throw ConfigError("transfer_ema must lie in [0, 1)");
}

Vector rank_normalize(const Vector& values) {
  const Index n = values.size();
  if (n < 1) throw PreconditionError("cannot rank an empty vector");
  if (!values.allFinite()) throw NumericError("non-finite value in rank normalization");
  Vector out(n);
  if (n == 1) {
    out[0] = 0.0;
    return out;
  }
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return values[a] < values[b]; });
  const double denom = static_cast<double>(n - 1);
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    // zero-based ranks i..j share their mean
    const double rank = 0.5 * static_cast<double>(i + j);
    for (std::size_t k = i; k <= j; ++k) out[order[k]] = rank / denom;
    i = j + 1;
  }
  return out;
}

ScheduleWeights schedule_weights(std::size_t t, const ScheduleConfig& cfg) {
  if (t > cfg.total_steps) {
    throw PreconditionError("step " + std::to_string(t) + " beyond schedule length " +
                            std::to_string(cfg.total_steps));
  }
  const double progress = static_cast<double>(t) / static_cast<double>(cfg.total_steps);
  ScheduleWeights w;
  w.prior = cfg.kappa + (1.0 - 2.0 * cfg.kappa) * progress;
  w.transfer = 1.0 - w.prior;
  return w;
}

Vector combine_sensitivity(const Vector& prior_norm, const Vector& transfer_norm, std::size_t t,
                           const ScheduleConfig& cfg, const GroupLayout& layout) {
  if (transfer_norm.size() != layout.total_size()) {
    throw PreconditionError("transfer sensitivity does not match parameter count");
  }
  const auto w = schedule_weights(t, cfg);
  Vector raw = w.prior * layout.broadcast(prior_norm) + w.transfer * transfer_norm;
  if (cfg.scaling == CombineScaling::fixed_scale) return cfg.clamp_max * raw;
  const double lo = raw.minCoeff();
  const double hi = raw.maxCoeff();
  if (hi <= lo) return Vector::Zero(raw.size());
  return (cfg.clamp_max / (hi - lo)) * (raw.array() - lo).matrix();
}

ParamVector sreg_step(const ParamVector& theta, const Vector& gradient, const Vector& combined,
                      double alpha) {
  if (gradient.size() != theta.size() || combined.size() != theta.size()) {
    throw PreconditionError("update vectors differ in length");
  }
  ParamVector next(theta.size());
  for (Index n = 0; n < theta.size(); ++n) {
    next[n] = theta[n] - (1.0 - combined[n]) * alpha * gradient[n];
    if (!std::isfinite(next[n])) throw NumericError("non-finite update", "index " + std::to_string(n));
  }
  return next;
}

std::string to_string(TuneMode m) { return m == TuneMode::vanilla ? "vanilla" : "sreg"; }

TuneMode parse_tune_mode(const std::string& s) {
  if (s == "vanilla") return TuneMode::vanilla;
  if (s == "sreg") return TuneMode::sreg;
  throw ConfigError("unknown fine-tuning mode '" + s + "'");
}

namespace {

StepMetrics evaluate_row(const TaskModel& model, std::size_t step, const ParamVector& theta,
                         const ParamVector& theta0, const Vector& prior, const EvalSets& eval,
                         const Vector& gradient) {
  StepMetrics row;
  row.step = step;
  row.train_loss_t = loss_eval(model, theta, eval.target_train);
  row.test_loss_t = loss_eval(model, theta, eval.target_test);
  row.test_loss_s = loss_eval(model, theta, eval.source_test);
  row.sparsity = gradient_stats(gradient).sparsity;
  const auto dist = weight_distance_report(theta, theta0, model.layout(), prior);
  row.group_distance = dist.relative;
  row.weighted_distance = dist.weighted;
  return row;
}

}  // namespace

TrainResult train_sreg(const TaskModel& model, const ParamVector& theta0, const Vector& prior,
                       const ScheduleConfig& cfg, TuneMode mode, const EvalSets& eval,
                       std::uint64_t seed, const StepObserver& observer) {
  cfg.validate();
  const auto& layout = model.layout();
  layout.check(theta0);
  if (prior.size() != static_cast<Index>(layout.num_groups())) {
    throw ConfigError("prior sensitivity covers " + std::to_string(prior.size()) + " groups, model has " +
                      std::to_string(layout.num_groups()));
  }
  if (!model.is_quadratic() && eval.target_train.size() < 1) {
    throw PreconditionError("empty target training set");
  }

  const Index P = layout.total_size();
  const Vector prior_norm = rank_normalize(prior);
  Rng rng(seed);
  TrainResult result{theta0, {layout.names(), {}}};
  ParamVector& theta = result.theta;
  Vector transfer_smoothed;
  Vector adam_m = Vector::Zero(P);
  Vector adam_v = Vector::Zero(P);

  for (std::size_t t = 0; t <= cfg.total_steps; ++t) {
    try {
      const Batch batch = model.is_quadratic() ? Batch{} : sample_batch(eval.target_train, cfg.batch_size, rng);
      const LossAndGrad lg = loss_and_grad(model, theta, batch);
      result.metrics.rows.push_back(evaluate_row(model, t, theta, theta0, prior, eval, lg.grad));
      if (observer) observer(StepState{t, theta, batch, lg});
      if (t == cfg.total_steps) break;

      Vector combined = Vector::Zero(P);
      if (mode == TuneMode::sreg) {
        Vector transfer = lg.grad.array().square().matrix();
        if (cfg.transfer_ema > 0.0) {
          transfer_smoothed = transfer_smoothed.size() == 0
                                  ? transfer
                                  : Vector(cfg.transfer_ema * transfer_smoothed +
                                           (1.0 - cfg.transfer_ema) * transfer);
          transfer = transfer_smoothed;
        }
        combined = combine_sensitivity(prior_norm, rank_normalize(transfer), t, cfg, layout);
      }

      if (cfg.rule == UpdateRule::sgd) {
        theta = sreg_step(theta, lg.grad, combined, cfg.alpha);
      } else {
        adam_m = cfg.adam_beta1 * adam_m + (1.0 - cfg.adam_beta1) * lg.grad;
        adam_v = cfg.adam_beta2 * adam_v + (1.0 - cfg.adam_beta2) * lg.grad.array().square().matrix();
        const double k = static_cast<double>(t + 1);
        const double c1 = 1.0 - std::pow(cfg.adam_beta1, k);
        const double c2 = 1.0 - std::pow(cfg.adam_beta2, k);
        const Vector adapted = (adam_m.array() / c1) / ((adam_v.array() / c2).sqrt() + cfg.adam_eps) +
                               cfg.weight_decay * theta.array();
        theta = sreg_step(theta, adapted, combined, cfg.alpha);
      }
    } catch (const NumericError& e) {
      throw NumericError(e.what(), "step " + std::to_string(t));
    }
  }
  return result;
}

}  // namespace sreg
