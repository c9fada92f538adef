#include "sreg/transfer_sense.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <thread>

#include "sreg/errors.hpp"

namespace sreg {

GradientStats gradient_stats(const Vector& gradient) {
  for (Index n = 0; n < gradient.size(); ++n) {
    if (!std::isfinite(gradient[n])) {
      throw NumericError("non-finite gradient entry", "index " + std::to_string(n));
    }
  }
  GradientStats s;
  s.l1 = gradient.lpNorm<1>();
  s.l2 = std::sqrt(gradient.squaredNorm());
  if (s.l2 > 0.0) {
    // on the max-scaled vector: exact for constant and one-hot inputs
    const Vector u = gradient / gradient.cwiseAbs().maxCoeff();
    const double n = static_cast<double>(gradient.size());
    const double ratio = u.lpNorm<1>() / std::sqrt(n * u.squaredNorm());
    s.sparsity = std::clamp(ratio, 1.0 / std::sqrt(n), 1.0);
  }
  s.transfer_sensitivity = gradient.array().square().matrix();
  return s;
}

double sensitivity_function(const TaskModel& model, const ParamVector& theta, const Vector& delta,
                            const Batch& batch) {
  if (delta.size() != theta.size()) throw PreconditionError("perturbation does not match theta");
  return loss_eval(model, theta, batch) - loss_eval(model, theta + delta, batch);
}

void RiskConfig::validate() const {
  if (!(alpha > 0.0)) throw ConfigError("risk alpha must be positive");
  if (!(sigma > 0.0)) throw ConfigError("risk sigma must be positive");
  if (num_pairs < 1) throw PreconditionError("adaptation risk needs at least one pair");
  if (threads < 1) throw ConfigError("risk threads must be positive");
}

double adaptation_risk_reference(const Vector& gradient, double sigma) {
  return 2.0 * sigma / std::sqrt(std::numbers::pi) * std::sqrt(gradient.squaredNorm());
}

namespace {

constexpr std::size_t kPairsPerChunk = 1024;

// Evaluates |S(delta) - S(delta')| for every pair. Chunk c draws from its own
// seed stream, so the result does not depend on the thread count.
double mean_abs_difference(const RiskConfig& cfg, Index dim,
                           const std::function<double(const Vector&, const Vector&)>& pair_value) {
  const std::size_t chunks = (cfg.num_pairs + kPairsPerChunk - 1) / kPairsPerChunk;
  std::vector<double> values(cfg.num_pairs);
  auto run = [&](std::size_t first_chunk, std::size_t last_chunk) {
    for (std::size_t c = first_chunk; c < last_chunk; ++c) {
      Rng rng(derive_seed(cfg.seed, c));
      const std::size_t begin = c * kPairsPerChunk;
      const std::size_t end = std::min(cfg.num_pairs, begin + kPairsPerChunk);
      for (std::size_t i = begin; i < end; ++i) {
        const Vector z1 = standard_normal(dim, rng);
        const Vector z2 = standard_normal(dim, rng);
        values[i] = std::abs(pair_value(z1, z2));
      }
    }
  };
  const std::size_t workers = std::min<std::size_t>(cfg.threads, chunks);
  if (workers <= 1) {
    run(0, chunks);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    const std::size_t per = (chunks + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          run(w * per, std::min(chunks, (w + 1) * per));
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  return pairwise_sum(values.data(), values.size()) / static_cast<double>(values.size());
}

}  // namespace

AdaptationRisk linearized_adaptation_risk(const Vector& gradient, const RiskConfig& cfg) {
  cfg.validate();
  const Vector centre = cfg.alpha * gradient;
  AdaptationRisk out;
  out.estimate = mean_abs_difference(cfg, gradient.size(), [&](const Vector& z1, const Vector& z2) {
    const double s1 = gradient.dot(centre + cfg.sigma * z1);
    const double s2 = gradient.dot(centre + cfg.sigma * z2);
    return s1 - s2;
  });
  out.reference = adaptation_risk_reference(gradient, cfg.sigma);
  return out;
}

AdaptationRisk adaptation_risk(const TaskModel& model, const ParamVector& theta, const Batch& batch,
                               const RiskConfig& cfg) {
  cfg.validate();
  const auto lg = loss_and_grad(model, theta, batch);
  if (cfg.mode == RiskMode::linearized) return linearized_adaptation_risk(lg.grad, cfg);

  const Vector centre = cfg.alpha * lg.grad;
  AdaptationRisk out;
  out.estimate = mean_abs_difference(cfg, theta.size(), [&](const Vector& z1, const Vector& z2) {
    const double s1 = lg.loss - loss_eval(model, theta + centre + cfg.sigma * z1, batch);
    const double s2 = lg.loss - loss_eval(model, theta + centre + cfg.sigma * z2, batch);
    return s1 - s2;
  });
  out.reference = adaptation_risk_reference(lg.grad, cfg.sigma);
  return out;
}

}  // namespace sreg
