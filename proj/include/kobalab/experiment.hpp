#pragma once

#include <string>
#include <variant>
#include <vector>

#include "kobalab/config.hpp"

namespace kobalab {

/// Unwritable output (CLI exit code 4).
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Cell = std::variant<std::string, long, double, bool>;

/// Rows of one output file. Interval quantities occupy two adjacent columns
/// named <name>_lo and <name>_hi.
struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
};

struct Flag {
  std::string key;
  Cell value;
};

struct ReportEnvelope {
  ExperimentConfig config;
  std::string tool_version;
  std::string anchor;  // the statement the experiment probes
  std::string domain;
  double wall_clock_seconds = 0.0;
  std::vector<Flag> summary;
  std::vector<Table> tables;  // tables[0] is the primary output
  int items = 0;
  int non_converged = 0;
  int skipped = 0;

  bool within_budget() const;
  int exit_code() const { return within_budget() ? 0 : 3; }
};

/// Executes the experiment. Does not write files; see emit.
ReportEnvelope run(const ExperimentConfig& config);

/// Short statement each kind probes; echoed in every report header.
std::string anchor(ExperimentKind kind);

std::string to_csv(const Table& t);

/// Single JSON document with config echo, version, wall-clock, flags and all
/// tables (interval columns folded into {"lo", "hi"} objects).
std::string to_report(const ReportEnvelope& r);

/// csv: tables[0] goes to `path`, every further table to <stem>_<name>.csv
/// next to it. report: the JSON document at `path`. Throws IoError.
void emit(const ReportEnvelope& r, OutputFormat format, const std::string& path);

/// Human-readable summary for the terminal.
std::string summarize(const ReportEnvelope& r);

}  // namespace kobalab
