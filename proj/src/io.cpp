#include "sreg/io.hpp"

#include <filesystem>
#include <fstream>
#include <istream>
#include <sstream>

#include "sreg/errors.hpp"
#include "sreg/metrics.hpp"

namespace sreg {

namespace fs = std::filesystem;

std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InputError("missing input artifact '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw InputError("cannot write '" + path + "'");
  f << content;
  if (!f) throw InputError("write to '" + path + "' failed");
}

bool file_exists(const std::string& path) { return fs::is_regular_file(path); }

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[h & 0xF];
    h >>= 4;
  }
  return out;
}

void write_batch_csv(std::ostream& os, const Batch& batch) {
  const Index d = batch.inputs.cols();
  const Index k = batch.targets.cols();
  for (Index c = 0; c < d; ++c) os << (c ? "," : "") << 'x' << c;
  for (Index c = 0; c < k; ++c) os << (d + c ? "," : "") << 'y' << c;
  os << '\n';
  for (Index r = 0; r < batch.size(); ++r) {
    for (Index c = 0; c < d; ++c) os << (c ? "," : "") << format_double(batch.inputs(r, c));
    for (Index c = 0; c < k; ++c) os << (d + c ? "," : "") << format_double(batch.targets(r, c));
    os << '\n';
  }
}

Batch read_batch_csv(std::istream& is, const std::string& origin) {
  std::string line;
  if (!std::getline(is, line)) throw InputError(origin + ": empty dataset file");
  Index d = 0;
  Index k = 0;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      if (cell.size() > 1 && cell[0] == 'x' && k == 0) {
        ++d;
      } else if (cell.size() > 1 && cell[0] == 'y') {
        ++k;
      } else {
        throw InputError(origin + ": unexpected column '" + cell + "'");
      }
    }
  }
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw InputError(origin + ":" + std::to_string(line_no) + ": bad number '" + cell + "'");
      }
    }
    if (static_cast<Index>(row.size()) != d + k) {
      throw InputError(origin + ":" + std::to_string(line_no) + ": expected " + std::to_string(d + k) +
                       " columns");
    }
    rows.push_back(std::move(row));
  }
  Batch b;
  b.inputs.resize(static_cast<Index>(rows.size()), d);
  b.targets.resize(static_cast<Index>(rows.size()), k);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (Index c = 0; c < d; ++c) b.inputs(static_cast<Index>(r), c) = rows[r][static_cast<std::size_t>(c)];
    for (Index c = 0; c < k; ++c) b.targets(static_cast<Index>(r), c) = rows[r][static_cast<std::size_t>(d + c)];
  }
  return b;
}

Json layout_to_json(const GroupLayout& layout) {
  Json arr = Json::array();
  for (const auto& g : layout.groups()) arr.push_back({{"name", g.name}, {"offset", g.offset}, {"size", g.size}});
  return arr;
}

GroupLayout layout_from_json(const Json& j) {
  std::vector<ParamGroup> groups;
  for (const auto& g : j) {
    groups.push_back({g.at("name").get<std::string>(), g.at("offset").get<Index>(), g.at("size").get<Index>()});
  }
  return GroupLayout(std::move(groups));
}

Json theta_to_json(const GroupLayout& layout, const ParamVector& theta) {
  Json j;
  j["layout"] = layout_to_json(layout);
  j["theta"] = std::vector<double>(theta.data(), theta.data() + theta.size());
  return j;
}

ParamVector theta_from_json(const Json& j, const GroupLayout& expected, const std::string& origin) {
  try {
    const GroupLayout stored = layout_from_json(j.at("layout"));
    if (!(stored == expected)) throw InputError(origin + ": parameter layout does not match the configured model");
    const auto values = j.at("theta").get<std::vector<double>>();
    ParamVector theta = Eigen::Map<const Vector>(values.data(), static_cast<Index>(values.size()));
    expected.check(theta);
    return theta;
  } catch (const Json::exception& e) {
    throw InputError(origin + ": malformed parameter file (" + e.what() + ")");
  } catch (const ConfigError& e) {
    throw InputError(origin + ": " + e.what());
  }
}

Json probe_to_json(const EigenEstimateSet& estimates, const ProbeConfig& cfg) {
  Json j;
  j["config"] = {{"rho", cfg.radius_factor},
                 {"k_top", cfg.k_top},
                 {"probes_per_group", cfg.probes_per_group},
                 {"batch_size", cfg.batch_size},
                 {"seed", cfg.seed}};
  const auto prior = prior_sensitivity(estimates);
  Json groups = Json::object();
  for (std::size_t i = 0; i < estimates.groups.size(); ++i) {
    groups[estimates.groups[i].group] = {{"eigenvalues", estimates.groups[i].eigenvalues},
                                         {"prior_sensitivity", prior[i]}};
  }
  j["groups"] = groups;
  return j;
}

Vector prior_from_json(const Json& j, const GroupLayout& layout, const std::string& origin) {
  std::vector<std::string> names;
  std::vector<double> values;
  try {
    for (const auto& [name, entry] : j.at("groups").items()) {
      names.push_back(name);
      values.push_back(entry.at("prior_sensitivity").get<double>());
    }
  } catch (const Json::exception& e) {
    throw InputError(origin + ": malformed probe report (" + e.what() + ")");
  }
  return align_prior(layout, names, values);
}

Json summary_to_json(const ArmSummary& s) {
  return {{"name", s.name},
          {"best_target_test_loss", s.best_target_test_loss},
          {"best_step", s.best_step},
          {"initial_target_test_loss", s.initial_target_test_loss},
          {"final_target_test_loss", s.final_target_test_loss},
          {"target_gain", s.target_gain},
          {"initial_source_test_loss", s.initial_source_test_loss},
          {"final_source_test_loss", s.final_source_test_loss},
          {"source_loss_increase", s.source_loss_increase},
          {"train_test_gap_at_best", s.train_test_gap_at_best},
          {"forgetting_auc", s.forgetting_auc},
          {"final_weighted_distance", s.final_weighted_distance}};
}

Json comparison_to_json(const ComparisonSummary& summary) {
  Json arms = Json::array();
  for (const auto& a : summary.arms) arms.push_back(summary_to_json(a));
  return {{"arms", arms}};
}

Json parse_json(const std::string& text, const std::string& origin) {
  try {
    return Json::parse(text);
  } catch (const Json::exception& e) {
    throw InputError(origin + ": invalid JSON (" + e.what() + ")");
  }
}

std::string dump_json(const Json& j) { return j.dump(2) + "\n"; }

}  // namespace sreg
