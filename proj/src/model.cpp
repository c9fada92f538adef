#include "sreg/model.hpp"

#include <cmath>

#include "sreg/errors.hpp"

namespace sreg {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstRowMap = Eigen::Map<const RowMatrix>;
using RowMap = Eigen::Map<RowMatrix>;

namespace {

GroupLayout mlp_layout(const MlpSpec& spec) {
  std::vector<std::pair<std::string, Index>> groups;
  for (std::size_t l = 0; l + 1 < spec.widths.size(); ++l) {
    const auto prefix = "layer" + std::to_string(l);
    groups.emplace_back(prefix + ".weight", spec.widths[l] * spec.widths[l + 1]);
    groups.emplace_back(prefix + ".bias", spec.widths[l + 1]);
  }
  return GroupLayout::contiguous(groups);
}

GroupLayout attention_layout(const AttentionSpec& spec) {
  const Index d = spec.d_model;
  return GroupLayout::contiguous({{"attn.qkv", d * 3 * d},
                                  {"attn.proj", d * d},
                                  {"head.weight", spec.d_out * d},
                                  {"head.bias", spec.d_out}});
}

Matrix activate(Activation act, const Matrix& z) {
  switch (act) {
    case Activation::tanh:
      return z.array().tanh().matrix();
    case Activation::relu:
      return z.cwiseMax(0.0);
    case Activation::identity:
      return z;
  }
  return z;
}

// Derivative expressed through pre-activation z and activation a.
Matrix activation_slope(Activation act, const Matrix& z, const Matrix& a) {
  switch (act) {
    case Activation::tanh:
      return (1.0 - a.array().square()).matrix();
    case Activation::relu:
      return (z.array() > 0.0).cast<double>().matrix();
    case Activation::identity:
      return Matrix::Ones(z.rows(), z.cols());
  }
  return Matrix::Ones(z.rows(), z.cols());
}

// Returns the mean loss; writes dL/dz into `dz` when non-null.
double output_loss(LossKind kind, const Matrix& z, const Matrix& y, Matrix* dz) {
  const double inv_b = 1.0 / static_cast<double>(z.rows());
  if (kind == LossKind::squared_error) {
    const Matrix r = z - y;
    if (dz) *dz = r * inv_b;
    return 0.5 * r.squaredNorm() * inv_b;
  }
  double total = 0.0;
  if (dz) dz->resize(z.rows(), z.cols());
  for (Index b = 0; b < z.rows(); ++b) {
    const double m = z.row(b).maxCoeff();
    const Eigen::RowVectorXd shifted = z.row(b).array() - m;
    const double log_norm = std::log(shifted.array().exp().sum());
    const Eigen::RowVectorXd log_p = shifted.array() - log_norm;
    total -= y.row(b).dot(log_p);
    if (dz) {
      dz->row(b) = (log_p.array().exp() * y.row(b).sum() - y.row(b).array()).matrix() * inv_b;
    }
  }
  return total * inv_b;
}

void check_finite(const Matrix& m, const std::string& group) {
  if (!m.allFinite()) throw NumericError("non-finite forward value", group);
}

// ---- MLP -------------------------------------------------------------------

struct MlpTape {
  std::vector<Matrix> pre;   // z_l
  std::vector<Matrix> post;  // a_l, post[0] = inputs
};

Matrix mlp_forward(const MlpSpec& spec, const GroupLayout& layout, const ParamVector& theta,
                   const Matrix& x, MlpTape* tape) {
  const std::size_t layers = spec.widths.size() - 1;
  Matrix a = x;
  if (tape) tape->post.push_back(a);
  for (std::size_t l = 0; l < layers; ++l) {
    const auto& wg = layout.group(2 * l);
    const auto& bg = layout.group(2 * l + 1);
    ConstRowMap w(theta.data() + wg.offset, spec.widths[l + 1], spec.widths[l]);
    const auto bias = theta.segment(bg.offset, bg.size);
    Matrix z = a * w.transpose();
    z.rowwise() += bias.transpose();
    check_finite(z, wg.name);
    const bool last = l + 1 == layers;
    a = last ? z : activate(spec.activation, z);
    if (tape) {
      tape->pre.push_back(z);
      tape->post.push_back(a);
    }
  }
  return a;
}

void mlp_backward(const MlpSpec& spec, const GroupLayout& layout, const ParamVector& theta,
                  const MlpTape& tape, Matrix dz, ParamVector& grad) {
  const std::size_t layers = spec.widths.size() - 1;
  for (std::size_t l = layers; l-- > 0;) {
    const auto& wg = layout.group(2 * l);
    const auto& bg = layout.group(2 * l + 1);
    RowMap dw(grad.data() + wg.offset, spec.widths[l + 1], spec.widths[l]);
    dw = dz.transpose() * tape.post[l];
    grad.segment(bg.offset, bg.size) = dz.colwise().sum().transpose();
    if (l == 0) break;
    ConstRowMap w(theta.data() + wg.offset, spec.widths[l + 1], spec.widths[l]);
    const Matrix da = dz * w;
    dz = da.cwiseProduct(activation_slope(spec.activation, tape.pre[l - 1], tape.post[l]));
  }
}

// ---- Attention ---------------------------------------------------------------

struct AttentionWeights {
  ConstRowMap qkv;
  ConstRowMap proj;
  ConstRowMap head;
  Eigen::Map<const Vector> head_bias;
};

AttentionWeights attention_weights(const AttentionSpec& spec, const GroupLayout& layout,
                                   const ParamVector& theta) {
  const Index d = spec.d_model;
  return {ConstRowMap(theta.data() + layout.group(0).offset, d, 3 * d),
          ConstRowMap(theta.data() + layout.group(1).offset, d, d),
          ConstRowMap(theta.data() + layout.group(2).offset, spec.d_out, d),
          Eigen::Map<const Vector>(theta.data() + layout.group(3).offset, spec.d_out)};
}

struct TokenPass {
  Matrix tokens, q, k, v, attn, context, pooled_input;
  Vector pooled;
};

void softmax_rows(Matrix& s) {
  for (Index i = 0; i < s.rows(); ++i) {
    const double m = s.row(i).maxCoeff();
    s.row(i) = (s.row(i).array() - m).exp();
    s.row(i) /= s.row(i).sum();
  }
}

TokenPass attention_tokens(const AttentionSpec& spec, const AttentionWeights& w,
                           const Eigen::RowVectorXd& flat) {
  const Index L = spec.seq_len;
  const Index d = spec.d_model;
  TokenPass p;
  p.tokens = ConstRowMap(flat.data(), L, d);
  const Matrix qkv = p.tokens * w.qkv;
  p.q = qkv.leftCols(d);
  p.k = qkv.middleCols(d, d);
  p.v = qkv.rightCols(d);
  p.attn = (p.q * p.k.transpose()) / std::sqrt(static_cast<double>(d));
  softmax_rows(p.attn);
  p.context = p.attn * p.v;
  p.pooled_input = p.tokens + p.context * w.proj;
  p.pooled = p.pooled_input.colwise().mean().transpose();
  return p;
}

Matrix attention_forward(const AttentionSpec& spec, const GroupLayout& layout,
                         const ParamVector& theta, const Matrix& x, std::vector<TokenPass>* tape) {
  const auto w = attention_weights(spec, layout, theta);
  Matrix out(x.rows(), spec.d_out);
  for (Index b = 0; b < x.rows(); ++b) {
    TokenPass p = attention_tokens(spec, w, x.row(b));
    check_finite(p.attn, "attn.qkv");
    check_finite(p.pooled, "attn.proj");
    out.row(b) = (w.head * p.pooled + w.head_bias).transpose();
    if (tape) tape->push_back(std::move(p));
  }
  check_finite(out, "head.weight");
  return out;
}

void attention_backward(const AttentionSpec& spec, const GroupLayout& layout,
                        const ParamVector& theta, const std::vector<TokenPass>& tape,
                        const Matrix& dz, ParamVector& grad) {
  const auto w = attention_weights(spec, layout, theta);
  const Index L = spec.seq_len;
  const Index d = spec.d_model;
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  RowMap d_qkv(grad.data() + layout.group(0).offset, d, 3 * d);
  RowMap d_proj(grad.data() + layout.group(1).offset, d, d);
  RowMap d_head(grad.data() + layout.group(2).offset, spec.d_out, d);
  auto d_bias = grad.segment(layout.group(3).offset, spec.d_out);
  d_qkv.setZero();
  d_proj.setZero();
  d_head.setZero();
  d_bias.setZero();

  for (std::size_t b = 0; b < tape.size(); ++b) {
    const TokenPass& p = tape[b];
    const Vector dzb = dz.row(static_cast<Index>(b)).transpose();
    d_head += dzb * p.pooled.transpose();
    d_bias += dzb;
    const Vector dpooled = w.head.transpose() * dzb;
    // Mean pooling spreads the gradient evenly over tokens.
    const Matrix dy = Matrix::Ones(L, 1) * (dpooled.transpose() / static_cast<double>(L));
    d_proj += p.context.transpose() * dy;
    const Matrix dcontext = dy * w.proj.transpose();
    const Matrix dattn = dcontext * p.v.transpose();
    const Matrix dv = p.attn.transpose() * dcontext;
    Matrix dscores(L, L);
    for (Index i = 0; i < L; ++i) {
      const double inner = dattn.row(i).dot(p.attn.row(i));
      dscores.row(i) = p.attn.row(i).array() * (dattn.row(i).array() - inner);
    }
    dscores *= scale;
    Matrix dqkv(L, 3 * d);
    dqkv.leftCols(d) = dscores * p.k;
    dqkv.middleCols(d, d) = dscores.transpose() * p.q;
    dqkv.rightCols(d) = dv;
    d_qkv += p.tokens.transpose() * dqkv;
  }
}

// ---- Quadratic ---------------------------------------------------------------

double quadratic_loss(const QuadraticSpec& q, const ParamVector& theta) {
  const Vector r = theta - q.center;
  double value = 0.5 * r.dot(*q.curvature * r);
  if (q.linear.size() > 0) value += q.linear.dot(theta);
  return value;
}

ParamVector quadratic_grad(const QuadraticSpec& q, const ParamVector& theta) {
  ParamVector g = *q.curvature * (theta - q.center);
  if (q.linear.size() > 0) g += q.linear;
  return g;
}

}  // namespace

TaskModel::TaskModel(Architecture arch, LossKind loss, std::uint64_t seed)
    : arch_(std::move(arch)), loss_(loss), seed_(seed) {
  if (const auto* m = std::get_if<MlpSpec>(&arch_)) {
    if (m->widths.size() < 2) throw ConfigError("MLP needs at least input and output widths");
    for (Index w : m->widths) {
      if (w <= 0) throw ConfigError("MLP widths must be positive");
    }
    layout_ = mlp_layout(*m);
    d_in_ = m->widths.front();
    d_out_ = m->widths.back();
  } else if (const auto* a = std::get_if<AttentionSpec>(&arch_)) {
    if (a->seq_len <= 0 || a->d_model <= 0 || a->d_out <= 0) {
      throw ConfigError("attention dimensions must be positive");
    }
    layout_ = attention_layout(*a);
    d_in_ = a->seq_len * a->d_model;
    d_out_ = a->d_out;
  } else {
    const auto& q = std::get<QuadraticSpec>(arch_);
    if (!q.curvature) throw ConfigError("quadratic model without curvature matrix");
    const Index p = q.center.size();
    if (p <= 0 || q.curvature->rows() != p || q.curvature->cols() != p) {
      throw ConfigError("quadratic curvature must be square and match the center");
    }
    if (q.linear.size() != 0 && q.linear.size() != p) {
      throw ConfigError("quadratic linear term does not match the center");
    }
    layout_ = q.groups.empty() ? GroupLayout::contiguous({{"theta", p}})
                               : GroupLayout::contiguous(q.groups);
    if (layout_.total_size() != p) throw ConfigError("quadratic groups do not cover the center");
    d_in_ = 0;
    d_out_ = 0;
  }
}

TaskModel TaskModel::mlp(std::vector<Index> widths, Activation act, LossKind loss,
                         std::uint64_t seed) {
  return TaskModel(MlpSpec{std::move(widths), act}, loss, seed);
}

TaskModel TaskModel::attention(Index seq_len, Index d_model, Index d_out, LossKind loss,
                               std::uint64_t seed) {
  return TaskModel(AttentionSpec{seq_len, d_model, d_out}, loss, seed);
}

TaskModel TaskModel::quadratic(Matrix curvature, Vector center,
                               std::vector<std::pair<std::string, Index>> groups, Vector linear,
                               std::uint64_t seed) {
  QuadraticSpec q{std::make_shared<const Matrix>(std::move(curvature)), std::move(center),
                  std::move(linear), std::move(groups)};
  return TaskModel(std::move(q), LossKind::squared_error, seed);
}

TaskModel TaskModel::with_loss(LossKind loss) const {
  TaskModel copy = *this;
  copy.loss_ = loss;
  return copy;
}

ModelInstance build_model(const TaskModel& model) {
  Rng rng(model.seed());
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto& layout = model.layout();
  ParamVector theta(layout.total_size());
  for (std::size_t j = 0; j < layout.num_groups(); ++j) {
    const auto& g = layout.group(j);
    const bool is_bias = g.name.ends_with(".bias");
    double scale = 1.0;
    if (const auto* m = std::get_if<MlpSpec>(&model.architecture())) {
      scale = is_bias ? 0.1 : 1.0 / std::sqrt(static_cast<double>(m->widths[j / 2]));
    } else if (const auto* a = std::get_if<AttentionSpec>(&model.architecture())) {
      scale = is_bias ? 0.1 : 1.0 / std::sqrt(static_cast<double>(a->d_model));
    }
    for (Index n = g.offset; n < g.end(); ++n) theta[n] = scale * normal(rng);
  }
  return {layout, theta};
}

Matrix forward(const TaskModel& model, const ParamVector& theta, const Matrix& inputs) {
  model.layout().check(theta);
  if (const auto* m = std::get_if<MlpSpec>(&model.architecture())) {
    return mlp_forward(*m, model.layout(), theta, inputs, nullptr);
  }
  if (const auto* a = std::get_if<AttentionSpec>(&model.architecture())) {
    return attention_forward(*a, model.layout(), theta, inputs, nullptr);
  }
  return Matrix(inputs.rows(), 0);
}

double loss_eval(const TaskModel& model, const ParamVector& theta, const Batch& batch) {
  model.layout().check(theta);
  double value = 0.0;
  if (const auto* q = std::get_if<QuadraticSpec>(&model.architecture())) {
    value = quadratic_loss(*q, theta);
  } else {
    validate_batch(batch, model.input_dim(), model.output_dim());
    const Matrix z = forward(model, theta, batch.inputs);
    value = output_loss(model.loss(), z, batch.targets, nullptr);
  }
  if (!std::isfinite(value)) throw NumericError("non-finite loss", "loss");
  return value;
}

LossAndGrad loss_and_grad(const TaskModel& model, const ParamVector& theta, const Batch& batch) {
  const auto& layout = model.layout();
  layout.check(theta);
  LossAndGrad out;
  if (const auto* q = std::get_if<QuadraticSpec>(&model.architecture())) {
    out.loss = quadratic_loss(*q, theta);
    out.grad = quadratic_grad(*q, theta);
  } else {
    validate_batch(batch, model.input_dim(), model.output_dim());
    out.grad = ParamVector::Zero(layout.total_size());
    Matrix dz;
    if (const auto* m = std::get_if<MlpSpec>(&model.architecture())) {
      MlpTape tape;
      const Matrix z = mlp_forward(*m, layout, theta, batch.inputs, &tape);
      out.loss = output_loss(model.loss(), z, batch.targets, &dz);
      mlp_backward(*m, layout, theta, tape, std::move(dz), out.grad);
    } else {
      const auto& a = std::get<AttentionSpec>(model.architecture());
      std::vector<TokenPass> tape;
      tape.reserve(static_cast<std::size_t>(batch.size()));
      const Matrix z = attention_forward(a, layout, theta, batch.inputs, &tape);
      out.loss = output_loss(model.loss(), z, batch.targets, &dz);
      attention_backward(a, layout, theta, tape, dz, out.grad);
    }
  }
  if (!std::isfinite(out.loss)) throw NumericError("non-finite loss", "loss");
  for (std::size_t j = 0; j < layout.num_groups(); ++j) {
    const auto& g = layout.group(j);
    if (!out.grad.segment(g.offset, g.size).allFinite()) {
      throw NumericError("non-finite gradient", g.name);
    }
  }
  return out;
}

ParamVector grad_eval(const TaskModel& model, const ParamVector& theta, const Batch& batch) {
  return loss_and_grad(model, theta, batch).grad;
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::tanh: return "tanh";
    case Activation::relu: return "relu";
    case Activation::identity: return "identity";
  }
  return "tanh";
}

std::string to_string(LossKind k) {
  return k == LossKind::squared_error ? "squared_error" : "cross_entropy";
}

Activation parse_activation(const std::string& s) {
  if (s == "tanh") return Activation::tanh;
  if (s == "relu") return Activation::relu;
  if (s == "identity") return Activation::identity;
  throw ConfigError("unknown activation '" + s + "'");
}

LossKind parse_loss_kind(const std::string& s) {
  if (s == "squared_error" || s == "mse") return LossKind::squared_error;
  if (s == "cross_entropy") return LossKind::cross_entropy;
  throw ConfigError("unknown loss kind '" + s + "'");
}

}  // namespace sreg
