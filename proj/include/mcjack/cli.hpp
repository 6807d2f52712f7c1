#pragma once

// User-facing layer: area CSV ingestion, the embedded hospital dataset,
// the analysis report and file output for analyses and simulations.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "mcjack/core_model.hpp"
#include "mcjack/harness.hpp"
#include "mcjack/monte_carlo_jackknife.hpp"

namespace mcjack {

std::string_view version() noexcept;

// Parsed area table before a mean structure is applied.
struct AreaTable {
  std::vector<std::string> area_ids;
  std::vector<double> y;
  std::vector<double> d;
  // Covariate columns in file order.
  std::vector<std::string> covariate_names;
  std::vector<std::vector<double>> covariates;
  // True when the file gave sqrtD rather than D.
  bool sqrt_d_column = false;
};

// Header must contain `area`, `y` and one of `D` / `sqrtD`; every other
// column is a covariate. Errors carry 1-based line/column coordinates.
AreaTable parse_area_csv(std::string_view text);

// Mean structure applied to the covariate columns:
//   "linear"          every covariate column as is (default)
//   "cols:a,b"        the listed columns
//   "poly:s:k"        s, s^2, ..., s^k
// An intercept column is prepended unless `intercept` is false.
AreaDataset build_dataset(const AreaTable& table, const std::string& mean_spec, bool intercept = true);

AreaDataset ingest_csv(const std::filesystem::path& path, const std::string& mean_spec = "linear",
                       bool intercept = true);

// Kidney-transplant graft-failure data, 23 hospitals (area, y, s, sqrtD).
std::string_view hospital_csv() noexcept;
AreaTable hospital_table();

struct AnalysisOptions {
  std::string mean_spec = "linear";
  bool intercept = true;
  // "dhm" (test for random effects) or "bic" (BIC over all intercept-containing submodels).
  std::string selection = "dhm";
  double alpha = 0.05;
  std::size_t K = 4000;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  TruncationConfig truncation;
};

struct AnalysisRow {
  std::string area;
  double y = 0.0;
  std::vector<double> covariates;
  double sqrt_d = 0.0;
  // Prediction of the selection procedure.
  double theta_hat = 0.0;
  // Plain EBLUP with the Prasad-Rao A.
  double theta_tilde = 0.0;
  // sqrt(MSPE) columns: analytic under the selected model (DHM / naive),
  // bootstrap and McJack for theta_hat, bootstrap and McJack for theta_tilde.
  double reference = 0.0;
  double bt = 0.0;
  double mj = 0.0;
  double bt_eblup = 0.0;
  double mj_eblup = 0.0;
};

struct AnalysisReport {
  std::vector<std::string> covariate_names;
  std::vector<AnalysisRow> rows;
  AnalysisOptions options;
  std::string selection_detail;
  std::string reference_name;  // "DHM" or "naive"
  // Random-effect test (dhm selection).
  double statistic = 0.0;
  double critical = 0.0;
  bool rejected = false;
  double A_hat = 0.0;
  std::size_t truncation_hits = 0;
  std::vector<std::string> warnings;
};

AnalysisReport analyze(const AreaTable& table, const AnalysisOptions& options);

void write_report_csv(const AnalysisReport& report, std::ostream& os);
void write_report_json(const AnalysisReport& report, std::ostream& os);

// Flat key=value configuration; '#' starts a comment. Unknown keys are
// rejected against `allowed`.
std::map<std::string, std::string> parse_config(std::string_view text,
                                                const std::vector<std::string>& allowed);

// Keys understood by simulate configs.
const std::vector<std::string>& simulate_config_keys();

// Applies config entries (already validated) to a scenario.
void apply_scenario_config(Scenario& s, const std::map<std::string, std::string>& config);

// key=value lines describing a scenario including derived substream seeds.
std::string resolved_config(const Scenario& s);

void write_rb_tables_csv(const std::vector<RbTable>& tables, std::ostream& os);
void write_rb_tables_json(const std::vector<RbTable>& tables, const std::vector<Scenario>& scenarios,
                          std::ostream& os);
void write_boxplots_json(const std::vector<RbTable>& tables, std::ostream& os);

// %.17g
std::string format_number(double v);

}  // namespace mcjack
