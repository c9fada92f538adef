#include "sreg/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "sreg/errors.hpp"

namespace sreg {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) throw ConfigError("empty list element");
    out.push_back(item);
  }
  return out;
}

double to_double(const std::string& s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw ConfigError("expected a finite number, got '" + s + "'");
  }
  return v;
}

std::uint64_t to_u64(const std::string& s) {
  std::uint64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ConfigError("expected a non-negative integer, got '" + s + "'");
  }
  return v;
}

std::size_t to_size(const std::string& s) { return static_cast<std::size_t>(to_u64(s)); }

Index to_index(const std::string& s) { return static_cast<Index>(to_u64(s)); }

bool to_bool(const std::string& s) {
  if (s == "true") return true;
  if (s == "false") return false;
  throw ConfigError("expected true or false, got '" + s + "'");
}

std::string shortest(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

template <typename T, typename F>
std::string join(const std::vector<T>& xs, F fmt) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ", ";
    out += fmt(xs[i]);
  }
  return out;
}

HessianScheme parse_scheme(const std::string& s) {
  if (s == "loss_second_difference") return HessianScheme::loss_second_difference;
  if (s == "gradient_difference") return HessianScheme::gradient_difference;
  throw ConfigError("unknown Hessian scheme '" + s + "'");
}

RiskMode parse_risk_mode(const std::string& s) {
  if (s == "linearized") return RiskMode::linearized;
  if (s == "exact_loss") return RiskMode::exact_loss;
  throw ConfigError("unknown risk mode '" + s + "'");
}

CombineScaling parse_scaling(const std::string& s) {
  if (s == "fixed_scale") return CombineScaling::fixed_scale;
  if (s == "min_max") return CombineScaling::min_max;
  throw ConfigError("unknown scaling '" + s + "'");
}

UpdateRule parse_rule(const std::string& s) {
  if (s == "sgd") return UpdateRule::sgd;
  if (s == "adamw") return UpdateRule::adamw;
  throw ConfigError("unknown update rule '" + s + "'");
}

struct Key {
  const char* section;
  const char* name;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define SREG_DOUBLE(sec, key, field)                                          \
  Key {                                                                       \
    sec, key, [](RunConfig& c, const std::string& v) { c.field = to_double(v); }, \
        [](const RunConfig& c) { return shortest(c.field); }                  \
  }
#define SREG_SIZE(sec, key, field)                                               \
  Key {                                                                          \
    sec, key, [](RunConfig& c, const std::string& v) { c.field = to_size(v); },  \
        [](const RunConfig& c) { return std::to_string(c.field); }               \
  }
#define SREG_INDEX(sec, key, field)                                              \
  Key {                                                                          \
    sec, key, [](RunConfig& c, const std::string& v) { c.field = to_index(v); }, \
        [](const RunConfig& c) { return std::to_string(c.field); }               \
  }

const std::vector<Key>& keys() {
  static const std::vector<Key> table = {
      {"model", "kind",
       [](RunConfig& c, const std::string& v) {
         if (v != "mlp" && v != "attention") throw ConfigError("kind must be mlp or attention");
         c.model.kind = v;
       },
       [](const RunConfig& c) { return c.model.kind; }},
      {"model", "widths",
       [](RunConfig& c, const std::string& v) {
         std::vector<Index> w;
         for (const auto& x : split_list(v)) w.push_back(to_index(x));
         c.model.widths = w;
       },
       [](const RunConfig& c) { return join(c.model.widths, [](Index i) { return std::to_string(i); }); }},
      {"model", "activation",
       [](RunConfig& c, const std::string& v) { c.model.activation = parse_activation(v); },
       [](const RunConfig& c) { return to_string(c.model.activation); }},
      {"model", "loss", [](RunConfig& c, const std::string& v) { c.model.loss = parse_loss_kind(v); },
       [](const RunConfig& c) { return to_string(c.model.loss); }},
      SREG_INDEX("model", "seq_len", model.seq_len),
      SREG_INDEX("model", "d_model", model.d_model),
      {"model", "probe_loss",
       [](RunConfig& c, const std::string& v) {
         if (v != "task") parse_loss_kind(v);
         c.model.probe_loss = v;
       },
       [](const RunConfig& c) { return c.model.probe_loss; }},

      SREG_DOUBLE("probe", "rho", probe.radius_factor),
      SREG_SIZE("probe", "k_top", probe.k_top),
      SREG_SIZE("probe", "probes_per_group", probe.probes_per_group),
      SREG_SIZE("probe", "batch_size", probe.batch_size),
      {"probe", "threads",
       [](RunConfig& c, const std::string& v) { c.probe.threads = static_cast<unsigned>(to_u64(v)); },
       [](const RunConfig& c) { return std::to_string(c.probe.threads); }},

      SREG_DOUBLE("schedule", "kappa", schedule.kappa),
      SREG_SIZE("schedule", "t_steps", schedule.total_steps),
      SREG_DOUBLE("schedule", "alpha", schedule.alpha),
      SREG_DOUBLE("schedule", "clamp", schedule.clamp_max),
      SREG_SIZE("schedule", "batch_size", schedule.batch_size),
      {"schedule", "scaling", [](RunConfig& c, const std::string& v) { c.schedule.scaling = parse_scaling(v); },
       [](const RunConfig& c) { return to_string(c.schedule.scaling); }},
      {"schedule", "update", [](RunConfig& c, const std::string& v) { c.schedule.rule = parse_rule(v); },
       [](const RunConfig& c) { return to_string(c.schedule.rule); }},
      SREG_DOUBLE("schedule", "transfer_ema", schedule.transfer_ema),
      SREG_DOUBLE("schedule", "adam_beta1", schedule.adam_beta1),
      SREG_DOUBLE("schedule", "adam_beta2", schedule.adam_beta2),
      SREG_DOUBLE("schedule", "adam_eps", schedule.adam_eps),
      SREG_DOUBLE("schedule", "weight_decay", schedule.weight_decay),

      SREG_DOUBLE("risk", "alpha", risk.alpha),
      SREG_DOUBLE("risk", "sigma", risk.sigma),
      SREG_SIZE("risk", "num_pairs", risk.num_pairs),
      {"risk", "mode", [](RunConfig& c, const std::string& v) { c.risk.mode = parse_risk_mode(v); },
       [](const RunConfig& c) { return to_string(c.risk.mode); }},
      SREG_SIZE("risk", "every", risk_every),
      {"risk", "threads",
       [](RunConfig& c, const std::string& v) { c.risk.threads = static_cast<unsigned>(to_u64(v)); },
       [](const RunConfig& c) { return std::to_string(c.risk.threads); }},

      SREG_SIZE("harness", "source_size", harness.data.source_size),
      SREG_SIZE("harness", "target_size", harness.data.target_size),
      SREG_SIZE("harness", "source_test_size", harness.data.source_test_size),
      SREG_SIZE("harness", "target_test_size", harness.data.target_test_size),
      {"harness", "shift",
       [](RunConfig& c, const std::string& v) { c.harness.data.shift = parse_shift_kind(v); },
       [](const RunConfig& c) { return to_string(c.harness.data.shift); }},
      SREG_DOUBLE("harness", "shift_magnitude", harness.data.shift_magnitude),
      SREG_DOUBLE("harness", "noise", harness.data.noise),
      SREG_INDEX("harness", "teacher_hidden", harness.data.teacher_hidden),
      SREG_DOUBLE("harness", "teacher_gain", harness.data.teacher_gain),
      {"harness", "labels",
       [](RunConfig& c, const std::string& v) {
         if (v != "regression" && v != "one_hot") throw ConfigError("labels must be regression or one_hot");
         c.harness.data.one_hot_labels = v == "one_hot";
       },
       [](const RunConfig& c) { return std::string(c.harness.data.one_hot_labels ? "one_hot" : "regression"); }},
      {"harness", "permutation",
       [](RunConfig& c, const std::string& v) {
         std::vector<Index> p;
         for (const auto& x : split_list(v)) p.push_back(to_index(x));
         c.harness.data.permutation = p;
       },
       [](const RunConfig& c) {
         return join(c.harness.data.permutation, [](Index i) { return std::to_string(i); });
       }},
      {"harness", "seeds",
       [](RunConfig& c, const std::string& v) {
         std::vector<std::uint64_t> s;
         for (const auto& x : split_list(v)) s.push_back(to_u64(x));
         c.harness.seeds = s;
       },
       [](const RunConfig& c) {
         return join(c.harness.seeds, [](std::uint64_t s) { return std::to_string(s); });
       }},
      {"harness", "shifts",
       [](RunConfig& c, const std::string& v) {
         std::vector<ShiftKind> s;
         for (const auto& x : split_list(v)) s.push_back(parse_shift_kind(x));
         c.harness.shifts = s;
       },
       [](const RunConfig& c) { return join(c.harness.shifts, [](ShiftKind k) { return to_string(k); }); }},
      {"harness", "arms",
       [](RunConfig& c, const std::string& v) {
         std::vector<std::string> a;
         for (const auto& x : split_list(v)) a.push_back(parse_arm(x).name);
         c.harness.arms = a;
       },
       [](const RunConfig& c) { return join(c.harness.arms, [](const std::string& s) { return s; }); }},
      SREG_SIZE("harness", "pretrain_epochs", harness.pretrain.epochs),
      SREG_SIZE("harness", "pretrain_batch_size", harness.pretrain.batch_size),
      SREG_DOUBLE("harness", "pretrain_lr", harness.pretrain.learning_rate),
      SREG_SIZE("harness", "pretrain_refine_iterations", harness.pretrain.refine_iterations),
      SREG_DOUBLE("harness", "pretrain_grad_tolerance", harness.pretrain.grad_tolerance),
      SREG_DOUBLE("harness", "pretrain_grad_ratio", harness.pretrain.grad_ratio),

      SREG_DOUBLE("oracle", "step", oracle.step),
      {"oracle", "scheme", [](RunConfig& c, const std::string& v) { c.oracle.scheme = parse_scheme(v); },
       [](const RunConfig& c) { return to_string(c.oracle.scheme); }},
      SREG_SIZE("oracle", "k_top", oracle.k_top),
      SREG_SIZE("oracle", "gap_samples", oracle.gap_samples),
      SREG_SIZE("oracle", "max_rows", oracle.max_rows),
      SREG_DOUBLE("oracle", "regime_scale", oracle.regime_scale),
      SREG_SIZE("oracle", "regime_samples", oracle.regime_samples),
      {"oracle", "empirical_fisher",
       [](RunConfig& c, const std::string& v) { c.oracle.empirical_fisher = to_bool(v); },
       [](const RunConfig& c) { return std::string(c.oracle.empirical_fisher ? "true" : "false"); }},

      {"io", "out",
       [](RunConfig& c, const std::string& v) {
         if (v.empty()) throw ConfigError("output directory must not be empty");
         c.out = v;
       },
       [](const RunConfig& c) { return c.out; }},
  };
  return table;
}

#undef SREG_DOUBLE
#undef SREG_SIZE
#undef SREG_INDEX

const Key* find_key(const std::string& section, const std::string& name) {
  for (const auto& k : keys()) {
    if (section == k.section && name == k.name) return &k;
  }
  return nullptr;
}

bool known_section(const std::string& section) {
  for (const auto& k : keys()) {
    if (section == k.section) return true;
  }
  return false;
}

void assign(RunConfig& cfg, const std::string& section, const std::string& name, const std::string& value,
            const std::string& where) {
  const Key* key = find_key(section, name);
  if (!key) throw ConfigError(where + ": unknown key '" + name + "' in section [" + section + "]");
  try {
    key->set(cfg, value);
  } catch (const ConfigError& e) {
    throw ConfigError(where + ": key '" + section + "." + name + "': " + e.what());
  }
}

}  // namespace

RunConfig::RunConfig() {
  schedule.total_steps = 2000;
  schedule.batch_size = 32;
}

RunConfig parse_config(const std::string& text, const std::string& origin) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  std::size_t line_no = 0;
  std::vector<std::string> seen;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string where = origin + ":" + std::to_string(line_no);
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + ": malformed section header '" + line + "'");
      section = trim(line.substr(1, line.size() - 2));
      if (!known_section(section)) throw ConfigError(where + ": unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value', got '" + line + "'");
    const std::string name = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (section.empty()) throw ConfigError(where + ": key '" + name + "' outside any section");
    const std::string full = section + "." + name;
    for (const auto& s : seen) {
      if (s == full) throw ConfigError(where + ": duplicate key '" + full + "'");
    }
    seen.push_back(full);
    assign(cfg, section, name, value, where);
  }
  validate_config(cfg);
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw InputError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str(), path);
}

void apply_override(RunConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  const auto dot = assignment.find('.');
  if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
    throw ConfigError("override '" + assignment + "' is not of the form section.key=value");
  }
  assign(cfg, trim(assignment.substr(0, dot)), trim(assignment.substr(dot + 1, eq - dot - 1)),
         trim(assignment.substr(eq + 1)), "override '" + assignment + "'");
}

std::string serialize_config(const RunConfig& cfg, bool with_io) {
  std::string out;
  std::string section;
  for (const auto& k : keys()) {
    if (!with_io && std::string(k.section) == "io") continue;
    if (section != k.section) {
      if (!section.empty()) out += "\n";
      section = k.section;
      out += "[" + section + "]\n";
    }
    out += std::string(k.name) + " = " + k.get(cfg) + "\n";
  }
  return out;
}

void validate_config(const RunConfig& cfg) {
  const auto& m = cfg.model;
  if (m.kind == "mlp") {
    if (m.widths.size() < 2) throw ConfigError("model.widths needs at least an input and an output width");
    for (Index w : m.widths) {
      if (w < 1) throw ConfigError("model.widths must be positive");
    }
  } else if (m.seq_len < 1 || m.d_model < 1) {
    throw ConfigError("model.seq_len and model.d_model must be positive");
  }
  const bool ce_task = m.loss == LossKind::cross_entropy;
  const bool ce_probe = m.probe_loss == "cross_entropy" || (m.probe_loss == "task" && ce_task);
  if ((ce_task || ce_probe) && !cfg.harness.data.one_hot_labels) {
    throw ConfigError("cross-entropy needs harness.labels = one_hot");
  }
  cfg.probe.validate();
  cfg.schedule.validate();
  cfg.risk.validate();
  if (cfg.risk_every < 1) throw ConfigError("risk.every must be at least 1");
  if (cfg.harness.seeds.empty()) throw ConfigError("harness.seeds must not be empty");
  if (cfg.harness.shifts.empty()) throw ConfigError("harness.shifts must not be empty");
  if (cfg.harness.arms.empty()) throw ConfigError("harness.arms must not be empty");
  if (cfg.oracle.k_top < 1) throw ConfigError("oracle.k_top must be at least 1");
  if (!(cfg.oracle.step > 0.0)) throw ConfigError("oracle.step must be positive");
  if (!(cfg.oracle.regime_scale > 0.0)) throw ConfigError("oracle.regime_scale must be positive");
  TaskPairSpec spec = cfg.harness.data;
  const TaskModel model = make_model(cfg, 0);
  spec.input_dim = model.input_dim();
  spec.output_dim = model.output_dim();
  spec.validate();
}

TaskModel make_model(const RunConfig& cfg, std::uint64_t seed) {
  if (cfg.model.kind == "attention") {
    return TaskModel::attention(cfg.model.seq_len, cfg.model.d_model, cfg.model.widths.back(), cfg.model.loss,
                                seed);
  }
  return TaskModel::mlp(cfg.model.widths, cfg.model.activation, cfg.model.loss, seed);
}

TaskModel make_probe_model(const RunConfig& cfg, const TaskModel& task_model) {
  if (cfg.model.probe_loss == "task") return task_model;
  return task_model.with_loss(parse_loss_kind(cfg.model.probe_loss));
}

std::vector<ArmSpec> configured_arms(const RunConfig& cfg) {
  std::vector<ArmSpec> arms;
  for (const auto& a : cfg.harness.arms) arms.push_back(parse_arm(a));
  return arms;
}

SuiteConfig make_suite(const RunConfig& cfg) {
  if (cfg.model.kind != "mlp") throw ConfigError("the seeded suite runs MLP models only");
  if (cfg.model.probe_loss != "task") throw ConfigError("the seeded suite probes under the task loss");
  SuiteConfig s;
  s.widths = cfg.model.widths;
  s.activation = cfg.model.activation;
  s.loss = cfg.model.loss;
  s.data = cfg.harness.data;
  s.data.input_dim = cfg.model.widths.front();
  s.data.output_dim = cfg.model.widths.back();
  s.pretrain = cfg.harness.pretrain;
  s.probe = cfg.probe;
  s.schedule = cfg.schedule;
  s.seeds = cfg.harness.seeds;
  s.shifts = cfg.harness.shifts;
  s.arms = configured_arms(cfg);
  return s;
}

std::string to_string(HessianScheme s) {
  return s == HessianScheme::loss_second_difference ? "loss_second_difference" : "gradient_difference";
}

std::string to_string(RiskMode m) { return m == RiskMode::linearized ? "linearized" : "exact_loss"; }

std::string to_string(CombineScaling s) { return s == CombineScaling::fixed_scale ? "fixed_scale" : "min_max"; }

std::string to_string(UpdateRule r) { return r == UpdateRule::sgd ? "sgd" : "adamw"; }

}  // namespace sreg
