#include "sreg/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "sreg/config.hpp"
#include "sreg/errors.hpp"
#include "sreg/io.hpp"
#include "sreg/metrics.hpp"
#include "sreg/oracle.hpp"
#include "sreg/transfer_sense.hpp"

namespace sreg {

namespace fs = std::filesystem;

namespace {

constexpr const char* kManifest = "manifest.json";
constexpr const char* kStoredConfig = "config.ini";

const char* const kSplits[] = {"source_train", "source_test", "target_train", "target_test"};

std::string data_file(const std::string& split) { return "data/" + split + ".csv"; }

struct Options {
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::vector<std::string> overrides;
  std::string mode = "sreg";
  std::string probe;  // explicit probe report path
};

/// One subcommand invocation: effective config, directory and the files it touched.
struct Context {
  RunConfig cfg;
  std::string dir;
  std::uint64_t seed = 0;
  CaseSeeds seeds{};
  std::string hash;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::ostream* log = nullptr;

  std::string path(const std::string& rel) const { return (fs::path(dir) / rel).string(); }

  std::string read(const std::string& rel) {
    inputs.push_back(rel);
    return read_text_file(path(rel));
  }

  std::string read_external(const std::string& p) {
    inputs.push_back(p);
    return read_text_file(p);
  }

  void write(const std::string& rel, const std::string& content) {
    outputs.push_back(rel);
    write_text_file(path(rel), content);
    *log << "wrote " << path(rel) << "\n";
  }
};

Context make_context(RunConfig cfg, std::uint64_t seed, std::ostream& log) {
  validate_config(cfg);
  Context ctx;
  ctx.dir = cfg.out;
  ctx.cfg = std::move(cfg);
  ctx.seed = seed;
  ctx.seeds = case_seeds(seed);
  ctx.hash = fnv1a_hex(serialize_config(ctx.cfg, false));
  ctx.log = &log;
  return ctx;
}

RunConfig effective_config(const Options& o) {
  RunConfig cfg = o.config.empty() ? RunConfig{} : load_config(o.config);
  for (const auto& ov : o.overrides) apply_override(cfg, ov);
  if (!o.out.empty()) cfg.out = o.out;
  return cfg;
}

TaskModel task_model(const Context& ctx) { return make_model(ctx.cfg, ctx.seeds.model); }

Batch load_split(Context& ctx, const std::string& split, const TaskModel& model) {
  const std::string rel = data_file(split);
  std::istringstream in(ctx.read(rel));
  Batch b = read_batch_csv(in, ctx.path(rel));
  if (b.inputs.cols() != model.input_dim() || b.targets.cols() != model.output_dim()) {
    throw InputError(ctx.path(rel) + ": dataset shape does not match the configured model");
  }
  return b;
}

ParamVector load_theta(Context& ctx, const std::string& rel, const TaskModel& model) {
  return theta_from_json(parse_json(ctx.read(rel), ctx.path(rel)), model.layout(), ctx.path(rel));
}

Vector load_prior(Context& ctx, const std::string& probe_path, const TaskModel& model) {
  if (probe_path.empty()) {
    return prior_from_json(parse_json(ctx.read("probe.json"), ctx.path("probe.json")), model.layout(),
                           ctx.path("probe.json"));
  }
  return prior_from_json(parse_json(ctx.read_external(probe_path), probe_path), model.layout(), probe_path);
}

std::uint64_t cmd_gen_data(Context& ctx, const Options&) {
  const TaskModel model = task_model(ctx);
  TaskPairSpec spec = ctx.cfg.harness.data;
  spec.input_dim = model.input_dim();
  spec.output_dim = model.output_dim();
  spec.seed = ctx.seeds.data;
  const TaskPair pair = generate_task_pair(spec);
  const Batch* sets[] = {&pair.source_train, &pair.source_test, &pair.target_train, &pair.target_test};
  for (std::size_t i = 0; i < 4; ++i) {
    std::ostringstream os;
    write_batch_csv(os, *sets[i]);
    ctx.write(data_file(kSplits[i]), os.str());
  }
  return ctx.seeds.data;
}

std::uint64_t cmd_pretrain(Context& ctx, const Options&) {
  const TaskModel model = task_model(ctx);
  const Batch source = load_split(ctx, "source_train", model);
  PretrainConfig pc = ctx.cfg.harness.pretrain;
  pc.seed = ctx.seeds.pretrain;
  const PretrainResult r = pretrain(model, build_model(model).theta, source, pc);
  Json j = theta_to_json(model.layout(), r.theta);
  j["pretrain"] = {{"initial_grad_norm", r.initial_grad_norm},
                   {"final_grad_norm", r.final_grad_norm},
                   {"final_loss", r.final_loss}};
  ctx.write("theta0.json", dump_json(j));
  *ctx.log << "source loss " << r.final_loss << ", gradient norm " << r.initial_grad_norm << " -> "
           << r.final_grad_norm << "\n";
  return ctx.seeds.pretrain;
}

std::uint64_t cmd_probe(Context& ctx, const Options&) {
  const TaskModel model = task_model(ctx);
  const ParamVector theta0 = load_theta(ctx, "theta0.json", model);
  const Batch source = load_split(ctx, "source_train", model);
  ProbeConfig pc = ctx.cfg.probe;
  pc.seed = ctx.seeds.probe;
  const EigenEstimateSet est = probe_sweep(make_probe_model(ctx.cfg, model), theta0, source, pc);
  ctx.write("probe.json", dump_json(probe_to_json(est, pc)));
  return ctx.seeds.probe;
}

struct FinetuneInputs {
  TaskModel model;
  ParamVector theta0;
  Vector prior;
  Batch target_train, target_test, source_test;
  ArmSpec arm;
  ScheduleConfig schedule;
};

FinetuneInputs load_finetune(Context& ctx, const Options& o) {
  FinetuneInputs in{task_model(ctx), {}, {}, {}, {}, {}, parse_arm(o.mode), ctx.cfg.schedule};
  in.theta0 = load_theta(ctx, "theta0.json", in.model);
  in.prior = load_prior(ctx, o.probe, in.model);
  in.target_train = load_split(ctx, "target_train", in.model);
  in.target_test = load_split(ctx, "target_test", in.model);
  in.source_test = load_split(ctx, "source_test", in.model);
  in.schedule.alpha *= in.arm.lr_scale;
  return in;
}

std::uint64_t cmd_finetune(Context& ctx, const Options& o) {
  const FinetuneInputs in = load_finetune(ctx, o);
  const EvalSets eval{in.target_train, in.target_test, in.source_test};
  const TrainResult r = train_sreg(in.model, in.theta0, in.prior, in.schedule, in.arm.mode, eval, ctx.seeds.finetune);
  std::ostringstream csv;
  write_metrics_csv(csv, r.metrics);
  ctx.write("metrics_" + in.arm.name + ".csv", csv.str());
  ctx.write("theta_" + in.arm.name + ".json", dump_json(theta_to_json(in.model.layout(), r.theta)));
  const ArmSummary s = summarize_run(in.arm.name, r.metrics);
  *ctx.log << in.arm.name << ": target test loss " << s.initial_target_test_loss << " -> " << s.final_target_test_loss
           << ", source test loss " << s.initial_source_test_loss << " -> " << s.final_source_test_loss << "\n";
  return ctx.seeds.finetune;
}

std::uint64_t cmd_analyze(Context& ctx, const Options& o) {
  const FinetuneInputs in = load_finetune(ctx, o);
  const EvalSets eval{in.target_train, in.target_test, in.source_test};
  const std::size_t every = ctx.cfg.risk_every;
  const std::size_t T = in.schedule.total_steps;
  std::ostringstream csv;
  csv << "step,l1,l2,sparsity,adaptation_risk_mc,adaptation_risk_ref\n";
  auto observe = [&](const StepState& s) {
    if (s.step % every != 0 && s.step != T) return;
    const GradientStats g = gradient_stats(s.loss_grad.grad);
    RiskConfig rc = ctx.cfg.risk;
    rc.seed = derive_seed(ctx.seeds.analyze, s.step);
    const AdaptationRisk risk = rc.mode == RiskMode::linearized
                                    ? linearized_adaptation_risk(s.loss_grad.grad, rc)
                                    : adaptation_risk(in.model, s.theta, s.batch, rc);
    csv << s.step << ',' << format_double(g.l1) << ',' << format_double(g.l2) << ',' << format_double(g.sparsity)
        << ',' << format_double(risk.estimate) << ',' << format_double(risk.reference) << '\n';
  };
  train_sreg(in.model, in.theta0, in.prior, in.schedule, in.arm.mode, eval, ctx.seeds.finetune, observe);
  ctx.write("analyze_" + in.arm.name + ".csv", csv.str());
  return ctx.seeds.analyze;
}

Json check_json(const FrobeniusCheck& c) {
  return {{"lhs", c.lhs}, {"rhs", c.rhs}, {"satisfied", c.satisfied}};
}

std::uint64_t cmd_oracle(Context& ctx, const Options&) {
  const auto& oc = ctx.cfg.oracle;
  const TaskModel model = task_model(ctx);
  const GroupLayout& layout = model.layout();
  const ParamVector theta0 = load_theta(ctx, "theta0.json", model);
  Batch source = load_split(ctx, "source_train", model);
  if (oc.max_rows > 0 && static_cast<Index>(oc.max_rows) < source.size()) {
    source = take_rows(source, 0, static_cast<Index>(oc.max_rows));
  }
  const ExactCurvature curv = exact_hessian(model, theta0, source, oc.step, oc.scheme);

  Json report;
  report["dataset_rows"] = source.size();
  report["scheme"] = to_string(oc.scheme);
  report["step"] = oc.step;
  report["k_top"] = oc.k_top;

  const ApproxVariant variants[] = {ApproxVariant::truncation, ApproxVariant::isotropic};
  std::map<std::string, std::vector<BlockApproximation>> blocks;
  for (auto v : variants) blocks[to_string(v)] = approximate_blocks(curv.hessian, layout, oc.k_top, v);

  const auto& exact_blocks = blocks.at("truncation");
  double lambda_max = -std::numeric_limits<double>::infinity();
  for (const auto& b : exact_blocks) lambda_max = std::max(lambda_max, b.pairs.values[0]);

  std::map<std::string, FrobeniusReport> frob;
  for (auto v : variants) frob[to_string(v)] = check_frobenius_bound(blocks.at(to_string(v)), oc.k_top);

  Json groups = Json::object();
  for (std::size_t j = 0; j < layout.num_groups(); ++j) {
    const auto& b = exact_blocks[j];
    Json g;
    g["eigenvalues"] = std::vector<double>(b.pairs.values.data(), b.pairs.values.data() + b.pairs.values.size());
    g["lambda_max"] = b.pairs.values[0];
    const std::size_t k = std::min<std::size_t>(oc.k_top, static_cast<std::size_t>(b.pairs.values.size()));
    g["top_k_mean"] = b.pairs.values.head(static_cast<Index>(k)).mean();
    for (auto v : variants) g[to_string(v)] = check_json(frob.at(to_string(v)).per_group[j]);
    groups[b.group] = g;
  }
  report["groups"] = groups;
  Json frob_total;
  for (auto v : variants) frob_total[to_string(v)] = check_json(frob.at(to_string(v)).total);
  report["frobenius_total"] = frob_total;

  Matrix block_exact = Matrix::Zero(layout.total_size(), layout.total_size());
  for (std::size_t j = 0; j < layout.num_groups(); ++j) {
    const auto& g = layout.group(j);
    block_exact.block(g.offset, g.offset, g.size, g.size) = exact_blocks[j].exact;
  }
  Json gap;
  gap["lambda_max"] = lambda_max;
  gap["samples"] = oc.gap_samples;
  for (auto v : variants) {
    const Matrix approx = assemble_block_diagonal(blocks.at(to_string(v)), layout);
    const GapBoundReport r = check_gap_bound(block_exact, approx, lambda_max, oc.gap_samples,
                                             derive_seed(ctx.seeds.oracle, 1));
    gap[to_string(v)] = {{"violations", r.violations}, {"max_ratio", r.max_ratio}};
  }
  report["gap_bound"] = gap;

  Matrix fisher;
  if (oc.empirical_fisher) fisher = empirical_fisher(model, theta0, source);

  Json regime;
  regime["scale"] = oc.regime_scale;
  Json samples = Json::array();
  double worst = 0.0;
  Rng rng(derive_seed(ctx.seeds.oracle, 2));
  for (std::size_t s = 0; s < oc.regime_samples; ++s) {
    Vector d = standard_normal(theta0.size(), rng);
    d *= oc.regime_scale * theta0.norm() / d.norm();
    const ParamVector theta = theta0 + d;
    const double direct = generalization_gap(model, theta, theta0, source, GapMode::direct);
    const double quad = generalization_gap(model, theta, theta0, source, GapMode::quadratic, &curv.hessian);
    const double rel = std::abs(direct - quad) / std::max(std::abs(direct), std::numeric_limits<double>::min());
    worst = std::max(worst, rel);
    Json row = {{"direct", direct}, {"quadratic", quad}, {"relative_disagreement", rel}};
    if (oc.empirical_fisher) {
      row["quadratic_empirical_fisher"] = generalization_gap(model, theta, theta0, source, GapMode::quadratic, &fisher);
    }
    samples.push_back(row);
  }
  regime["samples"] = samples;
  regime["max_relative_disagreement"] = worst;
  report["regime_check"] = regime;

  Json arms = Json::object();
  for (const auto& arm : ctx.cfg.harness.arms) {
    const std::string rel = "theta_" + arm + ".json";
    if (!file_exists(ctx.path(rel))) continue;
    const ParamVector theta = load_theta(ctx, rel, model);
    arms[arm] = {{"direct", generalization_gap(model, theta, theta0, source, GapMode::direct)},
                 {"quadratic", generalization_gap(model, theta, theta0, source, GapMode::quadratic, &curv.hessian)}};
  }
  report["arms"] = arms;
  ctx.write("oracle.json", dump_json(report));
  return ctx.seeds.oracle;
}

std::uint64_t cmd_compare(Context& ctx, const Options&) {
  ComparisonSummary summary;
  for (const auto& arm : ctx.cfg.harness.arms) {
    const std::string rel = "metrics_" + arm + ".csv";
    const bool required = arm == "vanilla" || arm == "sreg";
    if (!required && !file_exists(ctx.path(rel))) continue;
    std::istringstream in(ctx.read(rel));
    summary.arms.push_back(summarize_run(arm, read_metrics_csv(in)));
  }
  const ArmSummary& v = summary.arm("vanilla");
  const ArmSummary& s = summary.arm("sreg");
  Json j = comparison_to_json(summary);
  j["sreg_vs_vanilla"] = {{"source_loss_increase_le", s.source_loss_increase <= v.source_loss_increase},
                          {"weighted_distance_lt", s.final_weighted_distance < v.final_weighted_distance}};
  ctx.write("comparison.json", dump_json(j));
  return ctx.seed;
}

std::uint64_t cmd_suite(Context& ctx, const Options&) {
  const SuiteConfig sc = make_suite(ctx.cfg);
  Json cases = Json::array();
  std::size_t total = 0;
  std::size_t forgetting = 0;
  std::size_t distance = 0;
  for (auto shift : sc.shifts) {
    for (auto seed : sc.seeds) {
      const SuiteCase c = run_suite_case(sc, shift, seed);
      const std::string dir = "suite/" + to_string(shift) + "/seed" + std::to_string(seed) + "/";
      for (const auto& run : c.comparison.runs) {
        std::ostringstream csv;
        write_metrics_csv(csv, run.metrics);
        ctx.write(dir + "metrics_" + run.arm.name + ".csv", csv.str());
      }
      Json entry = {{"shift", to_string(shift)},
                    {"seed", seed},
                    {"pretrain_grad_ratio", c.pretrained.final_grad_norm / c.pretrained.initial_grad_norm},
                    {"prior_sensitivity", std::vector<double>(c.prior.data(), c.prior.data() + c.prior.size())}};
      entry["comparison"] = comparison_to_json(c.comparison.summary);
      const auto& summary = c.comparison.summary;
      ++total;
      if (summary.arm("sreg").source_loss_increase <= summary.arm("vanilla").source_loss_increase) ++forgetting;
      if (summary.arm("sreg").final_weighted_distance < summary.arm("vanilla").final_weighted_distance) ++distance;
      cases.push_back(entry);
      *ctx.log << to_string(shift) << " seed " << seed << " done\n";
    }
  }
  Json j;
  j["cases"] = cases;
  j["counts"] = {{"total", total},
                 {"sreg_source_loss_increase_le_vanilla", forgetting},
                 {"sreg_weighted_distance_lt_vanilla", distance}};
  ctx.write("suite.json", dump_json(j));
  return ctx.seed;
}

using Command = std::function<std::uint64_t(Context&, const Options&)>;

const std::map<std::string, Command>& commands() {
  static const std::map<std::string, Command> table = {
      {"gen-data", cmd_gen_data}, {"pretrain", cmd_pretrain}, {"probe", cmd_probe},
      {"finetune", cmd_finetune}, {"analyze", cmd_analyze},   {"oracle", cmd_oracle},
      {"compare", cmd_compare},   {"suite", cmd_suite},
  };
  return table;
}

bool takes_mode(const std::string& name) { return name == "finetune" || name == "analyze"; }

const char* describe(const std::string& name) {
  static const std::map<std::string, const char*> text = {
      {"gen-data", "Draw source/target train and test splits from the teacher"},
      {"pretrain", "Fit theta0 on the source training split"},
      {"probe", "Per-group curvature probe and prior sensitivities"},
      {"finetune", "Fine-tune theta0 on the target split with one arm"},
      {"analyze", "Gradient sparsity and adaptation risk along a fine-tuning run"},
      {"oracle", "Dense Hessian checks of the curvature approximation"},
      {"compare", "Summarize the finished arms against vanilla"},
      {"suite", "Every arm over all configured seeds and shifts"},
  };
  return text.at(name);
}

Json load_manifest(const std::string& dir) {
  const std::string p = (fs::path(dir) / kManifest).string();
  if (!file_exists(p)) return Json{{"config", kStoredConfig}, {"config_hash", ""}, {"runs", Json::array()}};
  return parse_json(read_text_file(p), p);
}

void record_run(const Context& ctx, const std::string& name, const Options& o, std::uint64_t stage_seed) {
  Json manifest = load_manifest(ctx.dir);
  Json args = Json::object();
  if (takes_mode(name)) {
    args["mode"] = o.mode;
    if (!o.probe.empty()) args["probe"] = o.probe;
  }
  const std::string key = takes_mode(name) ? name + ":" + o.mode : name;
  Json entry = {{"key", key},           {"command", name},       {"args", args},
                {"seed", ctx.seed},     {"stage_seed", stage_seed}, {"config_hash", ctx.hash},
                {"inputs", ctx.inputs}, {"outputs", ctx.outputs}};
  manifest["config_hash"] = ctx.hash;
  auto& runs = manifest["runs"];
  auto it = std::find_if(runs.begin(), runs.end(), [&](const Json& r) { return r.at("key") == key; });
  if (it != runs.end()) {
    *it = entry;
  } else {
    runs.push_back(entry);
  }
  write_text_file((fs::path(ctx.dir) / kManifest).string(), dump_json(manifest));
}

void execute(const std::string& name, RunConfig cfg, std::uint64_t seed, const Options& o, std::ostream& log) {
  Context ctx = make_context(std::move(cfg), seed, log);
  write_text_file(ctx.path(kStoredConfig), serialize_config(ctx.cfg, false));
  const std::uint64_t stage_seed = commands().at(name)(ctx, o);
  record_run(ctx, name, o, stage_seed);
}

void rerun(const std::string& manifest_path, const std::string& out, std::ostream& log) {
  const Json manifest = parse_json(read_text_file(manifest_path), manifest_path);
  const std::string config_path = (fs::path(manifest_path).parent_path() / kStoredConfig).string();
  RunConfig cfg = load_config(config_path);
  const std::string hash = fnv1a_hex(serialize_config(cfg, false));
  cfg.out = out;
  for (const auto& run : manifest.at("runs")) {
    if (run.at("config_hash") != hash) {
      throw ConfigError("run '" + run.at("key").get<std::string>() + "' in " + manifest_path +
                        " used a different config than " + config_path);
    }
    Options o;
    const Json& args = run.at("args");
    if (args.contains("mode")) o.mode = args.at("mode").get<std::string>();
    if (args.contains("probe")) o.probe = args.at("probe").get<std::string>();
    execute(run.at("command").get<std::string>(), cfg, run.at("seed").get<std::uint64_t>(), o, log);
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sensitivity-regularized fine-tuning toolkit", "sreg"};
  app.require_subcommand(1);
  Options opts;
  std::string manifest_path;
  std::string selected;

  for (const auto& [name, fn] : commands()) {
    CLI::App* sub = app.add_subcommand(name, describe(name));
    sub->add_option("--config", opts.config, "Run configuration file (defaults apply when omitted)");
    sub->add_option("--out", opts.out, "Output directory (overrides io.out)");
    sub->add_option("--seed", opts.seed, "Case seed (default: first harness seed)")
        ->each([&](const std::string&) { opts.seed_given = true; });
    sub->add_option("--override", opts.overrides, "section.key=value")->take_all();
    if (takes_mode(name)) {
      sub->add_option("--mode", opts.mode, "vanilla | sreg | vanilla_lr10 | vanilla_lr100");
      sub->add_option("--probe", opts.probe, "Probe report (default: <out>/probe.json)");
    }
    sub->callback([&selected, n = name] { selected = n; });
  }
  CLI::App* re = app.add_subcommand("rerun", "Replay every run recorded in a manifest");
  re->add_option("--manifest", manifest_path, "manifest.json of an earlier run")->required();
  re->add_option("--out", opts.out, "Output directory for the replay")->required();
  re->callback([&selected] { selected = "rerun"; });

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (selected == "rerun") {
      rerun(manifest_path, opts.out, out);
    } else {
      RunConfig cfg = effective_config(opts);
      validate_config(cfg);
      const std::uint64_t seed = opts.seed_given ? opts.seed : cfg.harness.seeds.front();
      if (takes_mode(selected)) parse_arm(opts.mode);
      execute(selected, std::move(cfg), seed, opts, out);
    }
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "sreg: configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const PreconditionError& e) {
    err << "sreg: configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const InputError& e) {
    err << "sreg: input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const CapacityError& e) {
    err << "sreg: capacity error: " << e.what() << "\n";
    return kExitCapacity;
  } catch (const NumericError& e) {
    err << "sreg: numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const nlohmann::json::exception& e) {
    err << "sreg: input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const fs::filesystem_error& e) {
    err << "sreg: input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    err << "sreg: error: " << e.what() << "\n";
    return kExitUsage;
  }
}

}  // namespace sreg
