#include "sreg/fim_probe.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <thread>

#include "sreg/errors.hpp"

namespace sreg {

void ProbeConfig::validate() const {
  if (!(radius_factor > 0.0) || !std::isfinite(radius_factor)) {
    throw ConfigError("probe radius factor must be positive");
  }
  if (k_top < 1) throw ConfigError("probe k_top must be at least 1");
  if (probes_per_group < k_top) throw ConfigError("probes_per_group must be >= k_top");
  if (batch_size < 1) throw ConfigError("probe batch size must be positive");
  if (threads < 1) throw ConfigError("probe threads must be positive");
}

Vector sample_direction(Index group_size, double radius, Rng& rng) {
  if (group_size < 1) throw PreconditionError("direction needs a positive group size");
  if (!(radius > 0.0)) throw PreconditionError("direction radius must be positive");
  for (;;) {
    Vector v = standard_normal(group_size, rng);
    const double norm = v.norm();
    if (norm > 0.0) return v * (radius / norm);
  }
}

double curvature_probe(const TaskModel& model, const ParamVector& theta0, std::size_t group,
                       const Vector& direction, const Batch& batch) {
  const auto& layout = model.layout();
  const auto& g = layout.group(group);
  if (direction.size() != g.size) {
    throw PreconditionError("probe direction does not match group '" + g.name + "'");
  }
  const double norm_sq = direction.squaredNorm();
  if (!(norm_sq > 0.0)) throw PreconditionError("probe direction must be non-zero");

  ParamVector shifted = theta0;
  const double base = loss_eval(model, theta0, batch);
  shifted.segment(g.offset, g.size) = theta0.segment(g.offset, g.size) + direction;
  double plus = 0.0;
  double minus = 0.0;
  try {
    plus = loss_eval(model, shifted, batch);
    shifted.segment(g.offset, g.size) = theta0.segment(g.offset, g.size) - direction;
    minus = loss_eval(model, shifted, batch);
  } catch (const NumericError& e) {
    throw NumericError(std::string("non-finite loss at perturbed point: ") + e.what(), g.name);
  }
  const double value = (plus - 2.0 * base + minus) / norm_sq;
  if (!std::isfinite(value)) throw NumericError("non-finite curvature estimate", g.name);
  return value;
}

double probe_radius(const ParamVector& theta0, const GroupLayout& layout, std::size_t group,
                    double radius_factor) {
  const auto& g = layout.group(group);
  const double norm = theta0.segment(g.offset, g.size).norm();
  return norm > 0.0 ? radius_factor * norm : radius_factor;
}

std::vector<double> probe_group(const TaskModel& model, const ParamVector& theta0,
                                std::size_t group, const Batch& source, const ProbeConfig& config) {
  config.validate();
  const auto& layout = model.layout();
  layout.check(theta0);
  if (!model.is_quadratic() && source.size() < 1) {
    throw PreconditionError("probe needs non-empty source data");
  }
  const auto& g = layout.group(group);
  const double radius = probe_radius(theta0, layout, group, config.radius_factor);
  const std::size_t n = config.probes_per_group;
  std::vector<double> estimates(n);

  auto run = [&](std::size_t first, std::size_t last) {
    for (std::size_t i = first; i < last; ++i) {
      Rng rng(derive_seed(config.seed, group, i));
      const Batch batch = model.is_quadratic() ? Batch{} : sample_batch(source, config.batch_size, rng);
      const Vector dir = sample_direction(g.size, radius, rng);
      double value = 0.0;
      try {
        value = curvature_probe(model, theta0, group, dir, batch);
      } catch (const NumericError& e) {
        throw NumericError(e.what(), g.name + " probe " + std::to_string(i));
      }
      estimates[i] = std::max(value, 0.0);
    }
  };

  const std::size_t workers = std::min<std::size_t>(config.threads, n);
  if (workers <= 1) {
    run(0, n);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          run(w * chunk, std::min(n, (w + 1) * chunk));
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
  return estimates;
}

std::vector<double> top_k(std::vector<double> values, std::size_t k) {
  std::sort(values.begin(), values.end(), std::greater<>());
  if (values.size() > k) values.resize(k);
  return values;
}

EigenEstimateSet probe_sweep(const TaskModel& model, const ParamVector& theta0,
                             const Batch& source, const ProbeConfig& config) {
  config.validate();
  EigenEstimateSet out;
  const auto& layout = model.layout();
  for (std::size_t j = 0; j < layout.num_groups(); ++j) {
    out.groups.push_back(
        {layout.group(j).name, top_k(probe_group(model, theta0, j, source, config), config.k_top)});
  }
  return out;
}

std::vector<double> prior_sensitivity(const EigenEstimateSet& estimates) {
  if (estimates.groups.empty()) throw PreconditionError("no groups to condense");
  std::vector<double> out;
  out.reserve(estimates.groups.size());
  for (const auto& g : estimates.groups) {
    if (g.eigenvalues.empty()) {
      throw PreconditionError("group '" + g.group + "' has no retained eigenvalues");
    }
    double sum = 0.0;
    for (double v : g.eigenvalues) sum += v;
    out.push_back(sum / static_cast<double>(g.eigenvalues.size()));
  }
  return out;
}

Vector align_prior(const GroupLayout& layout, const std::vector<std::string>& names,
                   const std::vector<double>& values) {
  if (names.size() != values.size()) throw PreconditionError("prior names and values differ in length");
  Vector out(static_cast<Index>(layout.num_groups()));
  for (std::size_t j = 0; j < layout.num_groups(); ++j) {
    const auto& name = layout.group(j).name;
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw ConfigError("missing prior sensitivity for group '" + name + "'");
    out[static_cast<Index>(j)] = values[static_cast<std::size_t>(it - names.begin())];
  }
  return out;
}

}  // namespace sreg
