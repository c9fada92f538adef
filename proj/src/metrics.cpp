#include "sreg/metrics.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "sreg/errors.hpp"

namespace sreg {

WeightDistanceReport weight_distance_report(const ParamVector& theta_t, const ParamVector& theta0,
                                            const GroupLayout& layout, const Vector& prior) {
  layout.check(theta_t);
  layout.check(theta0);
  if (prior.size() != static_cast<Index>(layout.num_groups())) {
    throw PreconditionError("prior sensitivity does not match group count");
  }
  WeightDistanceReport r;
  for (std::size_t j = 0; j < layout.num_groups(); ++j) {
    const auto& g = layout.group(j);
    const auto delta = theta_t.segment(g.offset, g.size) - theta0.segment(g.offset, g.size);
    const double dist = delta.norm();
    const double base = theta0.segment(g.offset, g.size).norm();
    r.groups.push_back(g.name);
    r.absolute.push_back(base == 0.0);
    r.relative.push_back(base == 0.0 ? dist : dist / base);
    r.weighted += prior[static_cast<Index>(j)] * delta.squaredNorm();
  }
  return r;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

void write_metrics_csv(std::ostream& os, const RunMetrics& metrics) {
  os << "step,train_loss_t,test_loss_t,test_loss_s,sparsity";
  for (const auto& g : metrics.groups) os << ",dist." << g;
  os << ",dist.weighted\n";
  for (const auto& row : metrics.rows) {
    os << row.step << ',' << format_double(row.train_loss_t) << ',' << format_double(row.test_loss_t)
       << ',' << format_double(row.test_loss_s) << ',' << format_double(row.sparsity);
    for (double d : row.group_distance) os << ',' << format_double(d);
    os << ',' << format_double(row.weighted_distance) << '\n';
  }
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

double parse_number(const std::string& s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw InputError("malformed number '" + s + "' in metrics CSV");
  }
  return v;
}

}  // namespace

RunMetrics read_metrics_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw InputError("empty metrics CSV");
  const auto header = split_csv(line);
  const std::vector<std::string> fixed = {"step", "train_loss_t", "test_loss_t", "test_loss_s",
                                          "sparsity"};
  if (header.size() < fixed.size() + 1 || header.back() != "dist.weighted") {
    throw InputError("metrics CSV header is not recognized");
  }
  for (std::size_t i = 0; i < fixed.size(); ++i) {
    if (header[i] != fixed[i]) throw InputError("metrics CSV column " + std::to_string(i) + " should be " + fixed[i]);
  }
  RunMetrics m;
  for (std::size_t i = fixed.size(); i + 1 < header.size(); ++i) {
    if (!header[i].starts_with("dist.")) throw InputError("unexpected metrics column " + header[i]);
    m.groups.push_back(header[i].substr(5));
  }
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != header.size()) throw InputError("ragged metrics CSV row");
    StepMetrics row;
    row.step = static_cast<std::size_t>(parse_number(cells[0]));
    row.train_loss_t = parse_number(cells[1]);
    row.test_loss_t = parse_number(cells[2]);
    row.test_loss_s = parse_number(cells[3]);
    row.sparsity = parse_number(cells[4]);
    for (std::size_t i = fixed.size(); i + 1 < cells.size(); ++i) {
      row.group_distance.push_back(parse_number(cells[i]));
    }
    row.weighted_distance = parse_number(cells.back());
    m.rows.push_back(std::move(row));
  }
  return m;
}

}  // namespace sreg
