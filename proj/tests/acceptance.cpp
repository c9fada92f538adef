// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Usage: acceptance [criterion numbers...]   (default: all)

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>

#include "sreg/cli.hpp"
#include "sreg/config.hpp"
#include "sreg/fim_probe.hpp"
#include "sreg/harness.hpp"
#include "sreg/io.hpp"
#include "sreg/optimizer.hpp"
#include "sreg/oracle.hpp"
#include "sreg/transfer_sense.hpp"
#include "test_util.hpp"

#ifndef SREG_FIXTURE_DIR
#define SREG_FIXTURE_DIR "tests/fixtures"
#endif

namespace fs = std::filesystem;
using namespace sreg;
using namespace sreg::testing;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Shared by criteria 5 and 6: the first seed of the standard suite, pretrained,
// with its dense source Hessian.
struct SuiteMlp {
  TaskModel model = TaskModel::mlp({1, 1});
  TaskPair data;
  ParamVector theta0;
  Matrix hessian;
  double setup_seconds = 0.0;
};

const SuiteMlp& suite_mlp() {
  static const SuiteMlp m = [] {
    const auto t0 = std::chrono::steady_clock::now();
    const SuiteConfig cfg = make_suite(RunConfig{});
    const CaseSeeds seeds = case_seeds(cfg.seeds.front());
    SuiteMlp s;
    TaskPairSpec spec = cfg.data;
    spec.seed = seeds.data;
    s.data = generate_task_pair(spec);
    s.model = TaskModel::mlp(cfg.widths, cfg.activation, cfg.loss, seeds.model);
    PretrainConfig pc = cfg.pretrain;
    pc.seed = seeds.pretrain;
    s.theta0 = pretrain(s.model, build_model(s.model).theta, s.data.source_train, pc).theta;
    s.hessian = exact_hessian(s.model, s.theta0, s.data.source_train, 1e-4, HessianScheme::gradient_difference).hessian;
    s.setup_seconds = seconds_since(t0);
    return s;
  }();
  return m;
}

Outcome probe_exactness() {
  Rng rng(1001);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const Index p = uniform_index(rng, 1, 50);
    const Matrix a = random_spd(p, rng);
    const Vector center = standard_normal(p, rng);
    const auto model = TaskModel::quadratic(a, center, {{"all", p}});
    const double radius = probe_radius(center, model.layout(), 0, 1e-5);
    const Vector eps = sample_direction(p, radius, rng);
    const double exact = eps.dot(a * eps) / eps.squaredNorm();
    const double probed = curvature_probe(model, center, 0, eps, Batch{});
    worst = std::max(worst, std::abs(probed - exact) / std::abs(exact));
  }
  return {worst < 1e-8, "max relative error " + fmt("%.2e", worst) + " over 100 quadratics"};
}

Outcome gradient_fidelity() {
  Rng rng(1002);
  struct Kind {
    std::string name;
    std::function<TaskModel(std::uint64_t)> make;
    bool soft_labels;
  };
  const std::vector<Kind> kinds = {
      {"mlp-tanh", [](std::uint64_t s) { return TaskModel::mlp({4, 6, 3}, Activation::tanh, LossKind::squared_error, s); }, false},
      {"mlp-relu", [](std::uint64_t s) { return TaskModel::mlp({4, 6, 5, 3}, Activation::relu, LossKind::squared_error, s); }, false},
      {"mlp-identity", [](std::uint64_t s) { return TaskModel::mlp({4, 3}, Activation::identity, LossKind::squared_error, s); }, false},
      {"mlp-cross-entropy", [](std::uint64_t s) { return TaskModel::mlp({4, 6, 3}, Activation::tanh, LossKind::cross_entropy, s); }, true},
      {"attention", [](std::uint64_t s) { return TaskModel::attention(2, 2, 3, LossKind::squared_error, s); }, false},
      {"attention-cross-entropy", [](std::uint64_t s) { return TaskModel::attention(2, 2, 3, LossKind::cross_entropy, s); }, true},
  };
  double worst = 0.0;
  std::string worst_kind;
  for (const auto& k : kinds) {
    for (int draw = 0; draw < 10; ++draw) {
      const TaskModel model = k.make(static_cast<std::uint64_t>(draw));
      const ParamVector theta = build_model(model).theta + 0.1 * standard_normal(model.layout().total_size(), rng);
      const Batch b = k.soft_labels ? soft_label_batch(8, model.input_dim(), model.output_dim(), rng)
                                    : random_batch(8, model.input_dim(), model.output_dim(), rng);
      const Vector g = grad_eval(model, theta, b);
      const Vector fd = fd_gradient(model, theta, b, 1e-5);
      for (Index i = 0; i < g.size(); ++i) {
        const double rel = std::abs(g[i] - fd[i]) / std::max(std::abs(fd[i]), 1e-5);
        if (rel > worst) {
          worst = rel;
          worst_kind = k.name;
        }
      }
    }
  }
  for (int draw = 0; draw < 10; ++draw) {
    const Index p = uniform_index(rng, 2, 20);
    const auto model = TaskModel::quadratic(random_symmetric(p, rng), standard_normal(p, rng), {{"q", p}},
                                            standard_normal(p, rng));
    const ParamVector theta = standard_normal(p, rng);
    const Vector g = grad_eval(model, theta, Batch{});
    const Vector fd = fd_gradient(model, theta, Batch{}, 1e-5);
    for (Index i = 0; i < p; ++i) {
      const double rel = std::abs(g[i] - fd[i]) / std::max(std::abs(fd[i]), 1e-5);
      if (rel > worst) {
        worst = rel;
        worst_kind = "quadratic";
      }
    }
  }
  return {worst < 1e-5, "max per-coordinate relative error " + fmt("%.2e", worst) + " (" + worst_kind +
                            "), 7 model kinds x 10 draws"};
}

Outcome prior_ranking() {
  double worst = 1.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(2000 + seed);
    std::vector<Matrix> blocks;
    std::vector<double> oracle;
    const int groups = 6;
    for (int j = 0; j < groups; ++j) {
      const Index n = uniform_index(rng, 12, 30);
      Vector spectrum(n);
      const double scale = std::pow(2.0, j);
      for (Index i = 0; i < n; ++i) spectrum[i] = scale * uniform(rng, 0.05, 1.0);
      blocks.push_back(with_spectrum(spectrum, rng));
      const auto pairs = eigendecompose(blocks.back());
      oracle.push_back(pairs.values.head(10).mean());
    }
    Index p = 0;
    for (const auto& b : blocks) p += b.rows();
    const Vector center = standard_normal(p, rng);
    const auto model = block_quadratic(blocks, center);
    ProbeConfig cfg;
    cfg.seed = seed;
    const auto probed = prior_sensitivity(probe_sweep(model, center, Batch{}, cfg));
    worst = std::min(worst, spearman(probed, oracle));
  }
  return {worst >= 0.9, "min Spearman " + fmt("%.3f", worst) + " over 5 seeds (6 groups, rho=1e-5, K=10, 500 probes)"};
}

Outcome frobenius_bound() {
  Rng rng(1004);
  double worst = 0.0;
  int cases = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const Index p = uniform_index(rng, 10, 50);
    const Matrix a = random_symmetric(p, rng);
    const auto pairs = eigendecompose(a);
    for (std::size_t k : {1u, 5u, 10u}) {
      const auto c = check_frobenius_bound(a, build_approximation(pairs, k, ApproxVariant::truncation), pairs.values, k);
      worst = std::max(worst, std::abs(c.lhs - c.rhs));
      ++cases;
    }
  }
  Matrix d = Matrix::Zero(3, 3);
  d(0, 0) = 10.0;
  const auto dp = eigendecompose(d);
  const auto iso = check_frobenius_bound(d, build_approximation(dp, 1, ApproxVariant::isotropic), dp.values, 1);
  const bool flagged = !iso.satisfied && std::abs(iso.lhs - std::sqrt(200.0)) < 1e-12 && iso.rhs == 0.0;
  return {worst < 1e-8 && flagged, "truncation max |lhs-rhs| " + fmt("%.2e", worst) + " over " +
                                       std::to_string(cases) + " cases; isotropic (10,0,0) K=1 flagged: lhs " +
                                       fmt("%.6f", iso.lhs) + ", bound " + fmt("%g", iso.rhs)};
}

Outcome gap_bound() {
  Rng rng(1005);
  std::size_t violations = 0;
  double max_ratio = 0.0;
  int models = 0;
  auto check = [&](const Matrix& h, const GroupLayout& layout, std::uint64_t seed) {
    for (auto v : {ApproxVariant::isotropic, ApproxVariant::truncation}) {
      const auto blocks = approximate_blocks(h, layout, 10, v);
      Matrix exact = Matrix::Zero(h.rows(), h.cols());
      double lambda_max = 0.0;
      for (std::size_t j = 0; j < layout.num_groups(); ++j) {
        const auto& g = layout.group(j);
        exact.block(g.offset, g.offset, g.size, g.size) = blocks[j].exact;
        lambda_max = std::max(lambda_max, blocks[j].pairs.values[0]);
      }
      const auto r = check_gap_bound(exact, assemble_block_diagonal(blocks, layout), lambda_max, 1000, seed);
      violations += r.violations;
      max_ratio = std::max(max_ratio, r.max_ratio);
    }
    ++models;
  };
  for (int m = 0; m < 5; ++m) {
    std::vector<Matrix> blocks;
    for (int j = 0; j < 5; ++j) blocks.push_back(random_spd(uniform_index(rng, 10, 30), rng, 0.0));
    Index p = 0;
    for (const auto& b : blocks) p += b.rows();
    const auto model = block_quadratic(blocks, Vector::Zero(p));
    Matrix h = Matrix::Zero(p, p);
    Index off = 0;
    for (const auto& b : blocks) {
      h.block(off, off, b.rows(), b.rows()) = b;
      off += b.rows();
    }
    check(h, model.layout(), static_cast<std::uint64_t>(m));
  }
  const auto& mlp = suite_mlp();
  check(mlp.hessian, mlp.model.layout(), 99);
  return {violations == 0, std::to_string(violations) + " violations over " + std::to_string(models) +
                               " models x 2 variants x 1000 samples; max ratio " + fmt("%.4f", max_ratio)};
}

Outcome regime_check() {
  Rng rng(1006);
  double quad_worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const Index p = uniform_index(rng, 2, 30);
    const Matrix a = random_spd(p, rng);
    const Vector center = standard_normal(p, rng);
    const auto model = TaskModel::quadratic(a, center, {{"q", p}});
    const Vector theta = center + 1e-2 * standard_normal(p, rng);
    const double direct = generalization_gap(model, theta, center, Batch{}, GapMode::direct);
    const double quad = generalization_gap(model, theta, center, Batch{}, GapMode::quadratic, &a);
    quad_worst = std::max(quad_worst, std::abs(direct - quad));
  }
  const auto& mlp = suite_mlp();
  double mlp_worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const Vector d = 1e-3 * mlp.theta0.norm() * standard_normal(mlp.theta0.size(), rng).normalized();
    const ParamVector theta = mlp.theta0 + d;
    const double direct = generalization_gap(mlp.model, theta, mlp.theta0, mlp.data.source_train, GapMode::direct);
    const double quad =
        generalization_gap(mlp.model, theta, mlp.theta0, mlp.data.source_train, GapMode::quadratic, &mlp.hessian);
    mlp_worst = std::max(mlp_worst, std::abs(direct - quad) / std::abs(quad));
  }
  return {quad_worst < 1e-8 && mlp_worst < 0.1,
          "quadratics max |direct-quadratic| " + fmt("%.2e", quad_worst) + "; suite MLP max relative " +
              fmt("%.4f", mlp_worst) + " at |dtheta| = 1e-3 |theta0| (20 directions)"};
}

Outcome sparsity_identities() {
  bool ok = gradient_stats(Vector::Ones(4)).sparsity == 1.0;
  for (Index n : {4, 100, 10000}) {
    Vector g = Vector::Zero(n);
    g[n / 2] = -3.0;
    ok = ok && gradient_stats(g).sparsity == 1.0 / std::sqrt(static_cast<double>(n));
    ok = ok && gradient_stats(Vector::Constant(n, 0.7)).sparsity == 1.0;
  }
  Rng rng(1007);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const Index p = uniform_index(rng, 1, 500);
    const Vector g = standard_normal(p, rng) * std::exp(uniform(rng, -5.0, 5.0));
    const auto s = gradient_stats(g);
    worst = std::max(worst, std::abs(s.l1 - s.sparsity * std::sqrt(static_cast<double>(p)) * s.l2) / s.l1);
  }
  return {ok && worst < 1e-12, std::string(ok ? "uniform and one-hot values exact" : "uniform/one-hot mismatch") +
                                   "; identity max relative residual " + fmt("%.2e", worst)};
}

Outcome adaptation_risk_check() {
  Rng rng(1008);
  RiskConfig cfg;
  cfg.num_pairs = 1000000;
  cfg.seed = 17;
  const Index p = 40;
  const Vector base = standard_normal(p, rng);
  const auto r = linearized_adaptation_risk(base, cfg);
  const double dev = std::abs(r.estimate / r.reference - 1.0);
  std::vector<double> ratios;
  for (int k = 0; k < 5; ++k) {
    const Vector dir = standard_normal(p, rng).normalized() * base.norm();
    cfg.seed = 100 + static_cast<std::uint64_t>(k);
    ratios.push_back(linearized_adaptation_risk(dir, cfg).estimate / dir.norm());
  }
  const double hi = *std::max_element(ratios.begin(), ratios.end());
  const double lo = *std::min_element(ratios.begin(), ratios.end());
  const double spread = (hi - lo) / lo;
  const auto doubled = linearized_adaptation_risk(2.0 * base, cfg);
  const double scale_dev = std::abs(doubled.estimate / linearized_adaptation_risk(base, cfg).estimate - 2.0) / 2.0;
  return {dev < 0.02 && spread < 0.02 && scale_dev < 0.02,
          "1e6 pairs: estimate/reference - 1 = " + fmt("%+.4f", r.estimate / r.reference - 1.0) +
              "; ratio spread over 5 equal-norm directions " + fmt("%.4f", spread) + "; 2G scaling error " +
              fmt("%.4f", scale_dev)};
}

Outcome schedule_and_update() {
  bool sums = true;
  for (double kappa : {0.1, 0.5, 0.6, 0.9}) {
    ScheduleConfig c;
    c.kappa = kappa;
    c.total_steps = 2000;
    for (std::size_t t : {std::size_t{0}, std::size_t{1000}, std::size_t{2000}}) {
      const auto w = schedule_weights(t, c);
      sums = sums && std::abs(w.prior + w.transfer - 1.0) < 1e-15;
    }
  }
  ScheduleConfig c;
  c.total_steps = 2000;
  const bool start = schedule_weights(0, c).prior == 0.6;

  // s = 0 against a hand-written SGD loop
  Rng rng(1009);
  const auto model = TaskModel::mlp({4, 6, 2}, Activation::tanh, LossKind::squared_error, 5);
  const ParamVector theta0 = build_model(model).theta;
  const Batch train = random_batch(40, 4, 2, rng);
  const Batch test = random_batch(20, 4, 2, rng);
  const Vector prior = Vector::LinSpaced(static_cast<Index>(model.layout().num_groups()), 1.0, 2.0);
  ScheduleConfig run_cfg;
  run_cfg.total_steps = 100;
  run_cfg.alpha = 0.05;
  run_cfg.batch_size = 8;
  const EvalSets eval{train, test, test};
  const auto vanilla = train_sreg(model, theta0, prior, run_cfg, TuneMode::vanilla, eval, 3);
  Rng batch_rng(3);
  ParamVector theta = theta0;
  for (std::size_t t = 0; t < run_cfg.total_steps; ++t) {
    const Batch b = sample_batch(train, run_cfg.batch_size, batch_rng);
    theta = theta - run_cfg.alpha * loss_and_grad(model, theta, b).grad;
  }
  const bool same = std::memcmp(theta.data(), vanilla.theta.data(), sizeof(double) * static_cast<std::size_t>(theta.size())) == 0;

  // effective multiplier along a real run, both scalings
  double min_multiplier = 1.0;
  const Vector prior_norm = rank_normalize(prior);
  for (auto scaling : {CombineScaling::fixed_scale, CombineScaling::min_max}) {
    run_cfg.scaling = scaling;
    train_sreg(model, theta0, prior, run_cfg, TuneMode::sreg, eval, 3, [&](const StepState& s) {
      if (s.step == run_cfg.total_steps) return;
      const Vector transfer = s.loss_grad.grad.array().square().matrix();
      const Vector combined =
          combine_sensitivity(prior_norm, rank_normalize(transfer), s.step, run_cfg, model.layout());
      min_multiplier = std::min(min_multiplier, (1.0 - combined.array()).minCoeff());
    });
  }
  return {sums && start && same && min_multiplier >= 0.01 - 1e-15,
          std::string("weights sum to 1: ") + (sums ? "yes" : "no") + "; prior weight at t=0 (kappa 0.6) " +
              (start ? "0.6" : "wrong") + "; s=0 matches SGD bitwise: " + (same ? "yes" : "no") +
              "; min multiplier " + fmt("%.4f", min_multiplier)};
}

Outcome suite_effect() {
  const Json fx = parse_json(read_text_file(std::string(SREG_FIXTURE_DIR) + "/suite_margins.json"), "suite_margins.json");
  const double fraction = fx["target_gain_fraction"];
  const int need_sreg = fx["min_sreg_margin_passes"];
  const int need_dist = fx["min_sreg_distance_wins"];
  const int need_fail = fx["min_reduced_lr_margin_failures"];

  const SuiteConfig cfg = make_suite(RunConfig{});
  int runs = 0, sreg_pass = 0, dist_wins = 0, lr10_fail = 0, lr100_fail = 0, sreg_forget_le = 0;
  double drift = 0.0;
  for (ShiftKind shift : cfg.shifts) {
    for (std::uint64_t seed : cfg.seeds) {
      const auto c = run_suite_case(cfg, shift, seed);
      const auto& s = c.comparison.summary;
      const auto& v = s.arm("vanilla");
      auto meets = [&](const ArmSummary& a) {
        return a.source_loss_increase <= v.source_loss_increase && a.target_gain >= fraction * v.target_gain;
      };
      ++runs;
      sreg_forget_le += s.arm("sreg").source_loss_increase <= v.source_loss_increase;
      sreg_pass += meets(s.arm("sreg"));
      dist_wins += s.arm("sreg").final_weighted_distance < v.final_weighted_distance;
      lr10_fail += !meets(s.arm("vanilla_lr10"));
      lr100_fail += !meets(s.arm("vanilla_lr100"));
      for (const auto& ref : fx["first_run"]) {
        if (ref["shift"] == to_string(shift) && ref["seed"] == seed) {
          const double then = ref["sreg"]["target_gain"];
          drift = std::max(drift, std::abs(s.arm("sreg").target_gain - then) / std::abs(then));
        }
      }
    }
  }
  std::ostringstream d;
  d << "(a) sreg meets margin " << sreg_pass << "/" << runs << " (need " << need_sreg << "; forgetting <= vanilla "
    << sreg_forget_le << "/" << runs << "); (b) weighted distance < vanilla " << dist_wins << "/" << runs
    << " (need " << need_dist << "); (c) margin failures lr/10 " << lr10_fail << "/" << runs << ", lr/100 "
    << lr100_fail << "/" << runs << " (need " << need_fail << "); gain fraction " << fraction
    << "; max drift from pinned run " << fmt("%.1e", drift);
  return {runs == fx["runs"].get<int>() && sreg_pass >= need_sreg && dist_wins >= need_dist &&
              lr10_fail >= need_fail && lr100_fail >= need_fail,
          d.str()};
}

Outcome manifest_determinism() {
  const fs::path root = fs::temp_directory_path() / "sreg_acceptance_rerun";
  fs::remove_all(root);
  fs::create_directories(root);
  const std::string config = (root / "run.ini").string();
  write_text_file(config, "[schedule]\nt_steps = 200\n[risk]\nnum_pairs = 2000\nevery = 50\n[oracle]\ngap_samples = 200\n");
  const std::string first = (root / "first").string();
  const std::string second = (root / "second").string();
  std::ostringstream out, err;
  std::vector<std::vector<std::string>> steps = {{"gen-data"}, {"pretrain"}, {"probe"}};
  for (const char* arm : {"vanilla", "sreg", "vanilla_lr10", "vanilla_lr100"}) steps.push_back({"finetune", "--mode", arm});
  steps.push_back({"analyze", "--mode", "sreg"});
  steps.push_back({"oracle"});
  steps.push_back({"compare"});
  for (auto args : steps) {
    args.insert(args.end(), {"--config", config, "--out", first});
    if (run_cli(args, out, err) != 0) return {false, args.front() + " failed: " + err.str()};
  }
  if (run_cli({"rerun", "--manifest", first + "/manifest.json", "--out", second}, out, err) != 0) {
    return {false, "rerun failed: " + err.str()};
  }
  std::size_t files = 0, differing = 0;
  std::string first_diff;
  for (const auto& e : fs::recursive_directory_iterator(first)) {
    if (!e.is_regular_file()) continue;
    const auto ext = e.path().extension();
    if (ext != ".csv" && ext != ".json") continue;
    ++files;
    const fs::path twin = fs::path(second) / fs::relative(e.path(), first);
    if (!fs::exists(twin) || read_text_file(e.path().string()) != read_text_file(twin.string())) {
      ++differing;
      if (first_diff.empty()) first_diff = fs::relative(e.path(), first).string();
    }
  }
  fs::remove_all(root);
  return {files >= 15 && differing == 0,
          std::to_string(files) + " CSV/JSON artifacts from 10 commands, " + std::to_string(differing) +
              " differ after rerun" + (first_diff.empty() ? "" : " (first: " + first_diff + ")")};
}

struct Criterion {
  int id;
  std::string name;
  double limit_seconds;  // 0 = no stated limit
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {1, "probe exactness on quadratics", 1, probe_exactness},
      {2, "gradient fidelity", 10, gradient_fidelity},
      {3, "prior-sensitivity ranking", 30, prior_ranking},
      {4, "Frobenius bound of the approximation", 5, frobenius_bound},
      {5, "generalization-gap bound", 10, gap_bound},
      {6, "second-order regime check", 30, regime_check},
      {7, "sparsity identities", 0, sparsity_identities},
      {8, "adaptation risk", 60, adaptation_risk_check},
      {9, "schedule and update", 0, schedule_and_update},
      {10, "end-to-end suite effect", 600, suite_effect},
      {11, "manifest rerun determinism", 0, manifest_determinism},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failures = 0;
  bool mlp_reported = false;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    if ((c.id == 5 || c.id == 6) && !mlp_reported) {
      mlp_reported = true;
      const auto& m = suite_mlp();
      std::cout << "       setup: pretrained suite MLP (seed 0) and its dense Hessian in "
                << fmt("%.1f", m.setup_seconds) << " s, shared by criteria 5 and 6\n";
    }
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = seconds_since(t0);
    const bool in_time = c.limit_seconds == 0 || secs < c.limit_seconds;
    const bool pass = o.pass && in_time;
    failures += !pass;
    std::cout << (pass ? "[PASS] " : "[FAIL] ") << c.id << ". " << c.name << " (" << fmt("%.2f", secs) << " s"
              << (c.limit_seconds > 0 ? ", limit " + fmt("%g", c.limit_seconds) + " s" : std::string()) << "): "
              << o.detail << (in_time ? "" : " [over time limit]") << "\n"
              << std::flush;
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << "\n";
  return failures == 0 ? 0 : 1;
}
