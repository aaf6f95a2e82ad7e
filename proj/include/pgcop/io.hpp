#pragma once

// File formats: dataset CSV, chain CSV + metadata sidecar, summary JSON and
// predictive grid CSV. Doubles are written in shortest round-trip form so a
// re-read reproduces every bit.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "pgcop/diagnostics.hpp"
#include "pgcop/inference.hpp"
#include "pgcop/joint_model.hpp"

namespace pgcop {

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  if (*first == '+') ++first;
  const auto res = std::from_chars(first, s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Dataset CSV
// ---------------------------------------------------------------------------

/// One row per observation. A non-numeric first line is taken as the header.
/// With `degrees` set, values are converted to radians once, here.
inline Dataset read_dataset_csv(std::istream& in, bool degrees = false) {
  std::vector<std::string> labels;
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_csv(line);
    std::vector<double> values;
    bool numeric = true;
    for (const auto& f : fields) {
      double v;
      if (!detail::parse_double(f, v)) {
        numeric = false;
        break;
      }
      values.push_back(degrees ? v * std::numbers::pi / 180.0 : v);
    }
    if (!numeric) {
      if (labels.empty() && rows.empty()) {
        labels = fields;
        continue;
      }
      throw ParseError("dataset line " + std::to_string(line_no) + ": non-numeric field");
    }
    if (!rows.empty() && values.size() != rows.front().size())
      throw ParseError("dataset line " + std::to_string(line_no) + ": expected " +
                       std::to_string(rows.front().size()) + " fields, found " + std::to_string(values.size()));
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw ParseError("dataset has no data rows");
  if (!labels.empty() && labels.size() != rows.front().size())
    throw ParseError("dataset header has " + std::to_string(labels.size()) + " columns but rows have " +
                     std::to_string(rows.front().size()));
  return Dataset(Matrix::from_rows(rows), labels);
}

inline Dataset read_dataset_csv(const std::filesystem::path& path, bool degrees = false) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open dataset file " + path.string());
  return read_dataset_csv(in, degrees);
}

inline void write_dataset_csv(const Dataset& data, std::ostream& out, bool degrees = false) {
  const auto& labels = data.labels();
  for (std::size_t j = 0; j < labels.size(); ++j) out << (j ? "," : "") << labels[j];
  out << '\n';
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t j = 0; j < data.dimension(); ++j) {
      const double v = degrees ? data(i, j) * 180.0 / std::numbers::pi : data(i, j);
      out << (j ? "," : "") << detail::format_double(v);
    }
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Chain CSV and metadata
// ---------------------------------------------------------------------------

inline void write_chain_csv(const Chain& chain, std::ostream& out) {
  const auto names = parameter_names(chain.dimension, chain.family);
  out << "iteration";
  for (const auto& n : names) out << ',' << n;
  out << '\n';
  for (std::size_t k = 0; k < chain.size(); ++k) {
    out << (k < chain.iterations.size() ? chain.iterations[k] : k + 1);
    for (double v : flatten(chain.draws[k])) out << ',' << detail::format_double(v);
    out << '\n';
  }
}

/// The header fixes the dimension (alpha columns) and family (a nu column).
inline Chain read_chain_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("chain file is empty");
  const auto header = detail::split_csv(line);
  if (header.empty() || header.front() != "iteration") throw ParseError("chain header must start with 'iteration'");
  std::size_t betas = 0;
  bool has_nu = false;
  for (const auto& h : header) {
    if (h.rfind("beta_", 0) == 0) ++betas;
    if (h == "nu") has_nu = true;
  }
  Chain chain;
  chain.dimension = betas;
  chain.family = has_nu ? CopulaFamily::StudentT : CopulaFamily::Gaussian;
  const auto names = parameter_names(betas, chain.family);
  if (betas < 2 || header.size() != names.size() + 1 ||
      !std::equal(names.begin(), names.end(), header.begin() + 1))
    throw ParseError("chain header does not match the expected column layout");

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_csv(line);
    if (fields.size() != header.size())
      throw ParseError("chain line " + std::to_string(line_no) + ": wrong field count");
    std::vector<double> values(fields.size());
    for (std::size_t k = 0; k < fields.size(); ++k)
      if (!detail::parse_double(fields[k], values[k]))
        throw ParseError("chain line " + std::to_string(line_no) + ": non-numeric field");
    chain.iterations.push_back(static_cast<std::size_t>(values[0]));
    chain.draws.push_back(unflatten(std::span<const double>(values).subspan(1), betas, chain.family));
  }
  if (chain.draws.empty()) throw ParseError("chain file has no draws");
  return chain;
}

inline Chain read_chain_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open chain file " + path.string());
  return read_chain_csv(in);
}

/// key=value lines; `config_echo` is stored verbatim on the last line.
inline void write_metadata(const Chain& chain, const std::string& config_echo, std::ostream& out) {
  const McmcConfig& c = chain.config;
  auto list = [&](const std::vector<double>& v) {
    std::string s;
    for (std::size_t k = 0; k < v.size(); ++k) s += (k ? " " : "") + detail::format_double(v[k]);
    return s;
  };
  out << "family=" << to_string(chain.family) << '\n'
      << "dimension=" << chain.dimension << '\n'
      << "stage=" << chain.stage << '\n'
      << "seed=" << c.seed << '\n'
      << "iterations=" << c.iterations << '\n'
      << "burn_in=" << c.burn_in << '\n'
      << "thin=" << c.thin << '\n'
      << "draws=" << chain.size() << '\n'
      << "stage2_burn_in=" << c.stage2_burn_in << '\n'
      << "stage2_sweeps=" << c.stage2_sweeps << '\n'
      << "adapt_window=" << c.adapt_window << '\n'
      << "target_acceptance=" << detail::format_double(c.target_acceptance) << '\n';
  for (const auto& [name, rate] : chain.acceptance) out << "acceptance." << name << '=' << detail::format_double(rate) << '\n';
  out << "steps_after_burn_in.stage1=" << list(chain.steps_after_burn_in.stage1) << '\n'
      << "steps_after_burn_in.stage2=" << list(chain.steps_after_burn_in.stage2) << '\n'
      << "steps_final.stage1=" << list(chain.steps_final.stage1) << '\n'
      << "steps_final.stage2=" << list(chain.steps_final.stage2) << '\n'
      << "config=" << config_echo << '\n';
}

// ---------------------------------------------------------------------------
// Summary JSON and grid CSV
// ---------------------------------------------------------------------------

inline nlohmann::ordered_json summary_to_json(const Summary& s) {
  nlohmann::ordered_json j;
  j["level"] = s.level;
  j["draws"] = s.draws;
  nlohmann::ordered_json params = nlohmann::ordered_json::object();
  for (const auto& p : s.parameters) {
    nlohmann::ordered_json e;
    e["mean"] = p.mean;
    e["sd"] = p.sd;
    e["interval"] = {p.interval.lower, p.interval.upper};
    e["ess"] = p.ess ? nlohmann::ordered_json(*p.ess) : nlohmann::ordered_json(nullptr);
    e["geweke"] = p.geweke ? nlohmann::ordered_json(*p.geweke) : nlohmann::ordered_json(nullptr);
    if (p.interval.degenerate) e["warning"] = "degenerate interval: constant draws";
    params[p.name] = std::move(e);
  }
  j["parameters"] = std::move(params);
  return j;
}

inline void write_grid_csv(const PredictiveGrid& grid, std::ostream& out) {
  out << "theta_a,theta_b,density\n";
  for (std::size_t i = 0; i < grid.nodes.size(); ++i)
    for (std::size_t j = 0; j < grid.nodes.size(); ++j)
      out << detail::format_double(grid.nodes[i]) << ',' << detail::format_double(grid.nodes[j]) << ','
          << detail::format_double(grid.density(i, j)) << '\n';
}

/// Writes through a sibling temporary file and renames it into place, so a
/// failure never leaves a partial file at `path`.
inline void atomic_write(const std::filesystem::path& path, const std::function<void(std::ostream&)>& body) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ParseError("cannot open " + tmp.string() + " for writing");
    try {
      body(out);
    } catch (...) {
      out.close();
      std::filesystem::remove(tmp);
      throw;
    }
    out.flush();
    if (!out) {
      out.close();
      std::filesystem::remove(tmp);
      throw ParseError("write to " + tmp.string() + " failed");
    }
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace pgcop
