#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "sreg/fim_probe.hpp"
#include "sreg/harness.hpp"
#include "sreg/layout.hpp"

namespace sreg {

using Json = nlohmann::ordered_json;

/// Reads a whole file; InputError naming the path when it cannot be opened.
std::string read_text_file(const std::string& path);

/// Writes a file, creating parent directories.
void write_text_file(const std::string& path, const std::string& content);

bool file_exists(const std::string& path);

/// 64-bit FNV-1a, as 16 lowercase hex digits.
std::string fnv1a_hex(const std::string& text);

/// Columns x0..x{d-1}, y0..y{k-1}; 17 significant digits.
void write_batch_csv(std::ostream& os, const Batch& batch);
Batch read_batch_csv(std::istream& is, const std::string& origin);

Json layout_to_json(const GroupLayout& layout);
GroupLayout layout_from_json(const Json& j);

/// {"layout": [...], "theta": [...]}
Json theta_to_json(const GroupLayout& layout, const ParamVector& theta);

/// Checks the stored layout against `expected` and returns theta.
ParamVector theta_from_json(const Json& j, const GroupLayout& expected, const std::string& origin);

/// {"config": {...}, "groups": {name: {"eigenvalues": [...], "prior_sensitivity": s}}}
Json probe_to_json(const EigenEstimateSet& estimates, const ProbeConfig& cfg);

/// Prior sensitivities from a probe report, in layout order.
Vector prior_from_json(const Json& j, const GroupLayout& layout, const std::string& origin);

Json summary_to_json(const ArmSummary& s);
Json comparison_to_json(const ComparisonSummary& summary);

Json parse_json(const std::string& text, const std::string& origin);

/// JSON text with two-space indentation and a trailing newline.
std::string dump_json(const Json& j);

}  // namespace sreg
