#include "sreg/layout.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "sreg/errors.hpp"

namespace sreg {

GroupLayout GroupLayout::contiguous(const std::vector<std::pair<std::string, Index>>& groups) {
  std::vector<ParamGroup> out;
  Index offset = 0;
  for (const auto& [name, size] : groups) {
    out.push_back({name, offset, size});
    offset += size;
  }
  return GroupLayout(std::move(out));
}

GroupLayout::GroupLayout(std::vector<ParamGroup> groups) : groups_(std::move(groups)) {
  if (groups_.empty()) throw ConfigError("layout needs at least one group");
  std::set<std::string> seen;
  for (const auto& g : groups_) {
    if (g.name.empty()) throw ConfigError("layout group with empty name");
    if (!seen.insert(g.name).second) throw ConfigError("duplicate layout group '" + g.name + "'");
    if (g.size <= 0 || g.offset < 0) throw ConfigError("layout group '" + g.name + "' has empty span");
    total_ = std::max(total_, g.end());
  }
  owner_.assign(static_cast<std::size_t>(total_), groups_.size());
  for (std::size_t j = 0; j < groups_.size(); ++j) {
    for (Index n = groups_[j].offset; n < groups_[j].end(); ++n) {
      auto& o = owner_[static_cast<std::size_t>(n)];
      if (o != groups_.size()) {
        throw ConfigError("layout groups '" + groups_[o].name + "' and '" + groups_[j].name +
                          "' overlap");
      }
      o = j;
    }
  }
  for (std::size_t n = 0; n < owner_.size(); ++n) {
    if (owner_[n] == groups_.size()) {
      throw ConfigError("layout leaves parameter " + std::to_string(n) + " uncovered");
    }
  }
}

std::size_t GroupLayout::index_of(const std::string& name) const {
  for (std::size_t j = 0; j < groups_.size(); ++j) {
    if (groups_[j].name == name) return j;
  }
  throw ConfigError("no parameter group named '" + name + "'");
}

std::vector<std::string> GroupLayout::names() const {
  std::vector<std::string> out;
  out.reserve(groups_.size());
  for (const auto& g : groups_) out.push_back(g.name);
  return out;
}

Vector GroupLayout::slice(const ParamVector& theta, std::size_t j) const {
  const auto& g = groups_.at(j);
  return theta.segment(g.offset, g.size);
}

void GroupLayout::assign(ParamVector& theta, std::size_t j, const Vector& values) const {
  const auto& g = groups_.at(j);
  if (values.size() != g.size) throw PreconditionError("slice size mismatch for '" + g.name + "'");
  theta.segment(g.offset, g.size) = values;
}

std::vector<Vector> GroupLayout::split(const ParamVector& theta) const {
  check(theta);
  std::vector<Vector> out;
  out.reserve(groups_.size());
  for (std::size_t j = 0; j < groups_.size(); ++j) out.push_back(slice(theta, j));
  return out;
}

ParamVector GroupLayout::join(const std::vector<Vector>& slices) const {
  if (slices.size() != groups_.size()) throw PreconditionError("slice count does not match layout");
  ParamVector theta(total_);
  for (std::size_t j = 0; j < groups_.size(); ++j) assign(theta, j, slices[j]);
  return theta;
}

Vector GroupLayout::broadcast(const Vector& per_group) const {
  if (per_group.size() != static_cast<Index>(groups_.size())) {
    throw PreconditionError("per-group vector does not match group count");
  }
  Vector out(total_);
  for (std::size_t j = 0; j < groups_.size(); ++j) {
    out.segment(groups_[j].offset, groups_[j].size).setConstant(per_group[static_cast<Index>(j)]);
  }
  return out;
}

void GroupLayout::check(const ParamVector& theta) const {
  if (theta.size() != total_) {
    throw ConfigError("parameter vector has length " + std::to_string(theta.size()) +
                      ", layout expects " + std::to_string(total_));
  }
  for (const auto& g : groups_) {
    if (!theta.segment(g.offset, g.size).allFinite()) {
      throw NumericError("non-finite parameter", g.name);
    }
  }
}

bool GroupLayout::operator==(const GroupLayout& other) const {
  if (groups_.size() != other.groups_.size()) return false;
  for (std::size_t j = 0; j < groups_.size(); ++j) {
    const auto& a = groups_[j];
    const auto& b = other.groups_[j];
    if (a.name != b.name || a.offset != b.offset || a.size != b.size) return false;
  }
  return true;
}

void validate_batch(const Batch& batch, Index d_in, Index d_out) {
  if (batch.inputs.rows() < 1) throw PreconditionError("empty batch");
  if (batch.targets.rows() != batch.inputs.rows()) {
    throw PreconditionError("batch inputs and targets differ in row count");
  }
  if (batch.inputs.cols() != d_in || batch.targets.cols() != d_out) {
    throw PreconditionError("batch shape (" + std::to_string(batch.inputs.cols()) + " -> " +
                            std::to_string(batch.targets.cols()) + ") does not match model (" +
                            std::to_string(d_in) + " -> " + std::to_string(d_out) + ")");
  }
  if (!batch.inputs.allFinite() || !batch.targets.allFinite()) {
    throw NumericError("non-finite batch entry", "batch");
  }
}

Batch sample_batch(const Batch& data, std::size_t batch_size, Rng& rng) {
  if (data.size() < 1) throw PreconditionError("cannot sample from an empty dataset");
  if (batch_size < 1) throw PreconditionError("batch size must be positive");
  std::uniform_int_distribution<Index> pick(0, data.size() - 1);
  Batch out{Matrix(static_cast<Index>(batch_size), data.inputs.cols()),
            Matrix(static_cast<Index>(batch_size), data.targets.cols())};
  for (Index b = 0; b < static_cast<Index>(batch_size); ++b) {
    const Index r = pick(rng);
    out.inputs.row(b) = data.inputs.row(r);
    out.targets.row(b) = data.targets.row(r);
  }
  return out;
}

Batch take_rows(const Batch& data, Index first, Index count) {
  if (first < 0 || count < 0 || first + count > data.size()) {
    throw PreconditionError("row range outside dataset");
  }
  return {data.inputs.middleRows(first, count), data.targets.middleRows(first, count)};
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  std::uint64_t h = splitmix64(base);
  h = splitmix64(h ^ a);
  h = splitmix64(h ^ (b + 0x632be59bd9b4e019ULL));
  h = splitmix64(h ^ (c + 0x8cb92ba72f3d8dd7ULL));
  return h;
}

Vector standard_normal(Index n, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = normal(rng);
  return v;
}

double pairwise_sum(const double* values, std::size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += values[i];
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(values, half) + pairwise_sum(values + half, n - half);
}

}  // namespace sreg
