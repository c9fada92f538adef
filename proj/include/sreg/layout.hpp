#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace sreg {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Flat parameter state of a model. Interpreted through a GroupLayout.
using ParamVector = Eigen::VectorXd;

using Rng = std::mt19937_64;

struct ParamGroup {
  std::string name;
  Index offset = 0;
  Index size = 0;

  Index end() const { return offset + size; }
};

/// Named, disjoint, contiguous operation groups covering [0, P).
class GroupLayout {
 public:
  GroupLayout() = default;

  /// Lays groups out back to back in the given order.
  static GroupLayout contiguous(const std::vector<std::pair<std::string, Index>>& groups);

  /// Validates an arbitrary list of spans; throws ConfigError unless they
  /// are disjoint, non-empty, uniquely named and cover [0, P).
  explicit GroupLayout(std::vector<ParamGroup> groups);

  std::size_t num_groups() const { return groups_.size(); }
  Index total_size() const { return total_; }
  const ParamGroup& group(std::size_t j) const { return groups_.at(j); }
  const std::vector<ParamGroup>& groups() const { return groups_; }

  /// Index of the group called `name`; throws ConfigError when absent.
  std::size_t index_of(const std::string& name) const;
  /// Group index owning parameter n.
  std::size_t group_of(Index n) const { return owner_.at(static_cast<std::size_t>(n)); }

  std::vector<std::string> names() const;

  Vector slice(const ParamVector& theta, std::size_t j) const;
  void assign(ParamVector& theta, std::size_t j, const Vector& values) const;
  std::vector<Vector> split(const ParamVector& theta) const;
  ParamVector join(const std::vector<Vector>& slices) const;

  /// Broadcasts a per-group value to every parameter of that group.
  Vector broadcast(const Vector& per_group) const;

  /// Throws ConfigError if `theta` does not span the layout, NumericError
  /// naming the group when it holds a non-finite entry.
  void check(const ParamVector& theta) const;

  bool operator==(const GroupLayout& other) const;

 private:
  std::vector<ParamGroup> groups_;
  std::vector<std::size_t> owner_;
  Index total_ = 0;
};

/// Rows are samples. Also used for whole datasets.
struct Batch {
  Matrix inputs;   // B x d_in
  Matrix targets;  // B x d_out

  Index size() const { return inputs.rows(); }
};

/// Throws PreconditionError on an empty or ragged batch and NumericError
/// on non-finite entries.
void validate_batch(const Batch& batch, Index d_in, Index d_out);

/// Uniform sampling with replacement.
Batch sample_batch(const Batch& data, std::size_t batch_size, Rng& rng);

Batch take_rows(const Batch& data, Index first, Index count);

/// Mixes a base seed with stream identifiers so that independent consumers
/// (probe i of group j, Monte-Carlo chunk c, ...) get decorrelated streams.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0,
                          std::uint64_t c = 0);

Vector standard_normal(Index n, Rng& rng);

/// Sum in a fixed binary-tree order, independent of how terms were produced.
double pairwise_sum(const double* values, std::size_t n);

}  // namespace sreg
