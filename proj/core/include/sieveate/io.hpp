#pragma once

#include "sieveate/dataset.hpp"
#include "sieveate/effects.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace sieveate::io {

/// RFC-4180 records (quoted fields, doubled quotes, CRLF or LF line ends).
std::vector<std::vector<std::string>> parse_csv(std::istream& in);

struct ColumnMap {
  std::string outcome;
  std::string treatment;
  std::vector<std::string> covariates;
};

Dataset load_csv(const std::filesystem::path& path, const ColumnMap& columns);
Dataset read_csv(std::istream& in, const ColumnMap& columns);

/// Header y,d,x1..xd (or the given names); values at 17 significant digits.
void write_csv(const Dataset& data, std::ostream& out, const ColumnMap& columns = {});

enum class Command { Estimate, Cv, Simulate, LinkPlot };

struct RunConfig {
  Command command = Command::Estimate;
  std::optional<std::filesystem::path> input_path;
  ColumnMap columns;
  KPolicy k_policy = KPolicy::default_rule();
  double ci_level = 0.95;
  double trim = 0.0;
  unsigned long long seed = 0;
  int bootstrap_b = 500;
  std::filesystem::path output_dir = ".";
  bool standardize_covariates = false;
  bool timestamp = true;  // leading timestamp line in text reports
  int threads = 1;
  FitOptions fit;

  // simulate
  std::vector<std::string> settings;
  std::vector<long> sample_sizes;
  long replications = 0;
  std::vector<std::string> estimators;

  // link-plot grid; count = 0 means the default quantile grid
  std::optional<double> grid_min;
  std::optional<double> grid_max;
  int grid_count = 101;

  void validate() const;
};

Command parse_command(const std::string& name);
std::string to_string(Command c);

/// Applies keys of a JSON config object onto `config` (flags are applied afterwards by the caller).
void apply_config_json(const std::string& json_text, RunConfig& config);

/// "2..6" or "2,3,5" -> candidate list.
std::vector<int> parse_k_range(const std::string& text);

/// Runs one command and writes its artifacts into output_dir. Throws Error on
/// failure after removing any files it created.
void run_command(const RunConfig& config, std::ostream& log);

}  // namespace sieveate::io
