#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

#include "sreg/errors.hpp"
#include "sreg/model.hpp"
#include "test_util.hpp"

using namespace sreg;
using namespace sreg::testing;

TEST(Layout, ContiguousCoversRange) {
  const auto layout = GroupLayout::contiguous({{"a", 3}, {"b", 1}, {"c", 4}});
  EXPECT_EQ(layout.total_size(), 8);
  EXPECT_EQ(layout.group(2).offset, 4);
  EXPECT_EQ(layout.group_of(3), 1u);
  EXPECT_EQ(layout.index_of("c"), 2u);
  EXPECT_THROW(layout.index_of("d"), ConfigError);
}

TEST(Layout, RejectsInvalidSpans) {
  EXPECT_THROW(GroupLayout({{"a", 0, 3}, {"b", 2, 2}}), ConfigError);  // overlap
  EXPECT_THROW(GroupLayout({{"a", 0, 3}, {"b", 4, 2}}), ConfigError);  // gap
  EXPECT_THROW(GroupLayout({{"a", 0, 3}, {"a", 3, 2}}), ConfigError);  // duplicate name
  EXPECT_THROW(GroupLayout({{"a", 0, 0}}), ConfigError);
  EXPECT_THROW(GroupLayout(std::vector<ParamGroup>{}), ConfigError);
  // out-of-order spans are fine as long as they tile [0, P)
  const GroupLayout shuffled({{"tail", 3, 2}, {"head", 0, 3}});
  EXPECT_EQ(shuffled.total_size(), 5);
  EXPECT_EQ(shuffled.group_of(4), 0u);
}

TEST(Layout, SplitJoinRoundTripProperty) {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::pair<std::string, Index>> groups;
    const Index n = uniform_index(rng, 1, 6);
    for (Index j = 0; j < n; ++j) groups.emplace_back("g" + std::to_string(j), uniform_index(rng, 1, 9));
    const auto layout = GroupLayout::contiguous(groups);
    const ParamVector theta = standard_normal(layout.total_size(), rng);
    const ParamVector back = layout.join(layout.split(theta));
    EXPECT_EQ((back - theta).cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(Layout, CheckNamesNonFiniteGroup) {
  const auto layout = GroupLayout::contiguous({{"w", 2}, {"b", 2}});
  ParamVector theta = ParamVector::Zero(4);
  theta[3] = std::nan("");
  try {
    layout.check(theta);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_EQ(e.where(), "b");
  }
  EXPECT_THROW(layout.check(ParamVector::Zero(3)), ConfigError);
}

TEST(Layout, PairwiseSumMatchesNaiveOnIntegers) {
  std::vector<double> v(1000);
  std::iota(v.begin(), v.end(), 1.0);
  EXPECT_EQ(pairwise_sum(v.data(), v.size()), 500500.0);
  EXPECT_EQ(pairwise_sum(v.data(), 0), 0.0);
}

TEST(Layout, DeriveSeedSeparatesStreams) {
  EXPECT_NE(derive_seed(1, 0, 0), derive_seed(1, 0, 1));
  EXPECT_NE(derive_seed(1, 1, 0), derive_seed(1, 0, 1));
  EXPECT_EQ(derive_seed(7, 3, 2), derive_seed(7, 3, 2));
}

TEST(BuildModel, MlpParameterCount) {
  const auto inst = build_model(TaskModel::mlp({2, 3, 1}));
  ASSERT_EQ(inst.layout.num_groups(), 4u);
  EXPECT_EQ(inst.layout.total_size(), 2 * 3 + 3 + 3 * 1 + 1);
  EXPECT_EQ(inst.layout.group(0).name, "layer0.weight");
  EXPECT_EQ(inst.layout.group(1).name, "layer0.bias");
  EXPECT_EQ(inst.layout.group(3).name, "layer1.bias");
}

TEST(BuildModel, AttentionGroups) {
  const auto inst = build_model(TaskModel::attention(3, 4, 2));
  const auto names = inst.layout.names();
  EXPECT_NE(std::find(names.begin(), names.end(), "attn.qkv"), names.end());
  EXPECT_NE(std::find(names.begin(), names.end(), "attn.proj"), names.end());
  EXPECT_EQ(inst.layout.group(inst.layout.index_of("attn.qkv")).size, 4 * 12);
}

TEST(BuildModel, DeterministicInSeed) {
  const auto a = build_model(TaskModel::mlp({4, 5, 2}, Activation::tanh, LossKind::squared_error, 9));
  const auto b = build_model(TaskModel::mlp({4, 5, 2}, Activation::tanh, LossKind::squared_error, 9));
  const auto c = build_model(TaskModel::mlp({4, 5, 2}, Activation::tanh, LossKind::squared_error, 10));
  EXPECT_EQ((a.theta - b.theta).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_GT((a.theta - c.theta).cwiseAbs().maxCoeff(), 0.0);
}

TEST(BuildModel, InvalidDimensions) {
  EXPECT_THROW(TaskModel::mlp({3}), ConfigError);
  EXPECT_THROW(TaskModel::mlp({3, 0, 1}), ConfigError);
  EXPECT_THROW(TaskModel::attention(0, 4, 1), ConfigError);
}

TEST(LossEval, ExactLinearModelHasZeroLoss) {
  const auto model = TaskModel::mlp({1, 1}, Activation::identity);
  ParamVector theta(2);
  theta << 2.5, 0.0;
  Batch b;
  b.inputs = Matrix(3, 1);
  b.inputs << -1.0, 0.5, 2.0;
  b.targets = 2.5 * b.inputs;
  EXPECT_EQ(loss_eval(model, theta, b), 0.0);
  EXPECT_EQ(grad_eval(model, theta, b).cwiseAbs().maxCoeff(), 0.0);
}

TEST(LossEval, DoublingResidualsQuadruplesLoss) {
  Rng rng(3);
  const auto model = TaskModel::mlp({3, 4, 2});
  const ParamVector theta = build_model(model).theta;
  Batch b = random_batch(7, 3, 2, rng);
  const Matrix z = forward(model, theta, b.inputs);
  const double base = loss_eval(model, theta, b);
  b.targets = z - 2.0 * (z - b.targets);
  EXPECT_NEAR(loss_eval(model, theta, b), 4.0 * base, 1e-12 * base);
}

TEST(LossEval, MatchesScalarForwardOracle) {
  Rng rng(5);
  const std::vector<Index> widths = {3, 5, 4, 2};
  const auto model = TaskModel::mlp(widths);
  const ParamVector theta = build_model(model).theta;
  const Batch b = random_batch(6, 3, 2, rng);
  double total = 0.0;
  for (Index r = 0; r < b.size(); ++r) {
    std::vector<double> a(3, 0.0);
    for (Index c = 0; c < 3; ++c) a[static_cast<std::size_t>(c)] = b.inputs(r, c);
    Index off = 0;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
      const Index in = widths[l];
      const Index out = widths[l + 1];
      std::vector<double> z(static_cast<std::size_t>(out), 0.0);
      for (Index o = 0; o < out; ++o) {
        double s = theta[off + out * in + o];
        for (Index i = 0; i < in; ++i) s += theta[off + o * in + i] * a[static_cast<std::size_t>(i)];
        z[static_cast<std::size_t>(o)] = l + 2 < widths.size() ? std::tanh(s) : s;
      }
      off += out * in + out;
      a = z;
    }
    for (Index c = 0; c < 2; ++c) {
      const double d = a[static_cast<std::size_t>(c)] - b.targets(r, c);
      total += 0.5 * d * d;
    }
  }
  EXPECT_NEAR(loss_eval(model, theta, b), total / 6.0, 1e-13);
}

TEST(LossEval, NonFiniteForwardNamesGroup) {
  const auto model = TaskModel::mlp({2, 2, 1}, Activation::identity);
  ParamVector theta = ParamVector::Constant(model.layout().total_size(), 1e200);
  Batch b;
  b.inputs = Matrix::Constant(1, 2, 1e200);
  b.targets = Matrix::Zero(1, 1);
  try {
    loss_eval(model, theta, b);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_FALSE(e.where().empty());
  }
}

TEST(GradEval, QuadraticClosedForm) {
  Rng rng(2);
  const Matrix a = random_spd(6, rng);
  const Vector center = standard_normal(6, rng);
  const auto model = TaskModel::quadratic(a, center, {{"x", 2}, {"y", 4}});
  const ParamVector theta = standard_normal(6, rng);
  const Vector g = grad_eval(model, theta, Batch{});
  EXPECT_LT((g - a * (theta - center)).norm(), 1e-12);
  EXPECT_NEAR(loss_eval(model, theta, Batch{}), 0.5 * (theta - center).dot(a * (theta - center)), 1e-12);
}

namespace {

double worst_relative_error(const TaskModel& model, const ParamVector& theta, const Batch& b) {
  const Vector g = grad_eval(model, theta, b);
  const Vector fd = fd_gradient(model, theta, b, 1e-5);
  double worst = 0.0;
  for (Index i = 0; i < g.size(); ++i) {
    worst = std::max(worst, std::abs(g[i] - fd[i]) / std::max(std::abs(fd[i]), 1e-5));
  }
  return worst;
}

}  // namespace

TEST(GradEval, MatchesCentralDifferencesForEveryModelKind) {
  Rng rng(17);
  for (int draw = 0; draw < 10; ++draw) {
    const auto seed = static_cast<std::uint64_t>(draw);
    const auto mlp = TaskModel::mlp({3, 5, 2}, Activation::tanh, LossKind::squared_error, seed);
    EXPECT_LT(worst_relative_error(mlp, build_model(mlp).theta, random_batch(5, 3, 2, rng)), 1e-5);

    const auto mlp_ce = TaskModel::mlp({3, 4, 3}, Activation::tanh, LossKind::cross_entropy, seed);
    EXPECT_LT(worst_relative_error(mlp_ce, build_model(mlp_ce).theta, soft_label_batch(5, 3, 3, rng)), 1e-5);

    const auto att = TaskModel::attention(3, 4, 2, LossKind::squared_error, seed);
    EXPECT_LT(worst_relative_error(att, build_model(att).theta, random_batch(4, 12, 2, rng)), 1e-5);

    const auto att_ce = TaskModel::attention(2, 3, 3, LossKind::cross_entropy, seed);
    EXPECT_LT(worst_relative_error(att_ce, build_model(att_ce).theta, soft_label_batch(4, 6, 3, rng)), 1e-5);

    const Matrix a = random_spd(5, rng);
    const auto quad = TaskModel::quadratic(a, standard_normal(5, rng), {{"q", 5}});
    EXPECT_LT(worst_relative_error(quad, standard_normal(5, rng), Batch{}), 1e-5);
  }
}

TEST(GradEval, BitwiseDeterministic) {
  Rng rng(1);
  const auto model = TaskModel::attention(3, 4, 2);
  const ParamVector theta = build_model(model).theta;
  const Batch b = random_batch(8, 12, 2, rng);
  const Vector g1 = grad_eval(model, theta, b);
  const Vector g2 = grad_eval(model, theta, b);
  EXPECT_EQ(std::memcmp(g1.data(), g2.data(), sizeof(double) * static_cast<std::size_t>(g1.size())), 0);
  EXPECT_EQ(loss_eval(model, theta, b), loss_eval(model, theta, b));
}

TEST(GradEval, LossAndGradAgreeWithSeparateCalls) {
  Rng rng(4);
  const auto model = TaskModel::mlp({2, 3, 2});
  const ParamVector theta = build_model(model).theta;
  const Batch b = random_batch(5, 2, 2, rng);
  const auto lg = loss_and_grad(model, theta, b);
  EXPECT_EQ(lg.loss, loss_eval(model, theta, b));
  EXPECT_EQ((lg.grad - grad_eval(model, theta, b)).cwiseAbs().maxCoeff(), 0.0);
}
