#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "sreg/layout.hpp"

namespace sreg {

enum class Activation { tanh, relu, identity };
enum class LossKind { squared_error, cross_entropy };

/// Fully connected network. widths = {d_in, h_1, ..., d_out}; the activation
/// is applied after every layer except the last.
struct MlpSpec {
  std::vector<Index> widths;
  Activation activation = Activation::tanh;
};

/// Single-head self-attention over `seq_len` tokens of width `d_model`,
/// followed by a residual connection, mean pooling and a linear head.
/// Inputs are flattened row-major token matrices (d_in = seq_len * d_model).
struct AttentionSpec {
  Index seq_len = 0;
  Index d_model = 0;
  Index d_out = 0;
};

/// L(theta) = 1/2 (theta - center)^T A (theta - center) + linear^T theta,
/// independent of the batch. Curvature is exact, which anchors the oracle tests.
struct QuadraticSpec {
  std::shared_ptr<const Matrix> curvature;
  Vector center;
  Vector linear;  // empty means zero
  std::vector<std::pair<std::string, Index>> groups;
};

/// Architecture + loss + initialization seed. Evaluation is a pure function
/// of (theta, batch).
class TaskModel {
 public:
  using Architecture = std::variant<MlpSpec, AttentionSpec, QuadraticSpec>;

  TaskModel(Architecture arch, LossKind loss, std::uint64_t seed);

  static TaskModel mlp(std::vector<Index> widths, Activation act = Activation::tanh,
                       LossKind loss = LossKind::squared_error, std::uint64_t seed = 0);
  static TaskModel attention(Index seq_len, Index d_model, Index d_out,
                             LossKind loss = LossKind::squared_error, std::uint64_t seed = 0);
  static TaskModel quadratic(Matrix curvature, Vector center,
                             std::vector<std::pair<std::string, Index>> groups,
                             Vector linear = {}, std::uint64_t seed = 0);

  const Architecture& architecture() const { return arch_; }
  LossKind loss() const { return loss_; }
  std::uint64_t seed() const { return seed_; }
  const GroupLayout& layout() const { return layout_; }
  Index input_dim() const { return d_in_; }
  Index output_dim() const { return d_out_; }
  bool is_quadratic() const { return std::holds_alternative<QuadraticSpec>(arch_); }

  /// Same architecture evaluated under a different loss.
  TaskModel with_loss(LossKind loss) const;

 private:
  Architecture arch_;
  LossKind loss_;
  std::uint64_t seed_;
  GroupLayout layout_;
  Index d_in_ = 0;
  Index d_out_ = 0;
};

struct ModelInstance {
  GroupLayout layout;
  ParamVector theta;
};

/// One group per weight/bias tensor; initial theta drawn from the model seed.
ModelInstance build_model(const TaskModel& model);

/// Mean loss over the batch rows.
double loss_eval(const TaskModel& model, const ParamVector& theta, const Batch& batch);

/// Exact gradient of loss_eval (closed-form reverse pass).
ParamVector grad_eval(const TaskModel& model, const ParamVector& theta, const Batch& batch);

struct LossAndGrad {
  double loss = 0.0;
  ParamVector grad;
};

LossAndGrad loss_and_grad(const TaskModel& model, const ParamVector& theta, const Batch& batch);

/// Network outputs (pre-softmax for cross-entropy), one row per sample.
/// Quadratic models have no outputs.
Matrix forward(const TaskModel& model, const ParamVector& theta, const Matrix& inputs);

std::string to_string(Activation a);
std::string to_string(LossKind k);
Activation parse_activation(const std::string& s);
LossKind parse_loss_kind(const std::string& s);

}  // namespace sreg
