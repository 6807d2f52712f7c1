#pragma once

// Simulation experiments for the two-group design: scenario definitions,
// replicate driver, percentage relative bias tables and boxplot summaries.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mcjack/candidate_model.hpp"
#include "mcjack/core_model.hpp"
#include "mcjack/monte_carlo_jackknife.hpp"
#include "mcjack/procedures.hpp"

namespace mcjack {

enum class SelectionKind { Bic, Dhm };
enum class CovariateSource { Reference, Seeded };

// Intercept, group indicator (0 for the first m/2 areas, 1 after) and
// optionally a fixed N(0,1)-like covariate x2. D_i = 1 in the first half and
// `a` in the second.
struct Scenario {
  std::string name = "custom";
  std::size_t m = 20;
  double a = 4.0;
  bool include_x2 = true;
  CovariateSource x2_source = CovariateSource::Reference;
  std::vector<double> beta_true{1.0, 1.0, 0.0};
  double A_true = 0.0;
  // true: A is known to be zero (psi = beta_f); false: Prasad-Rao psi.
  bool known_zero_A = true;
  SelectionKind selection = SelectionKind::Bic;
  double alpha = 0.05;
  std::size_t n_sim = 200;
  std::size_t K = 500;
  std::uint64_t seed = 1;
  std::size_t truth_n = 200000;
  TruncationConfig truncation;
  std::size_t threads = 1;
};

// Throws ValidationError describing the first violated constraint.
void validate(const Scenario& s);

// The fixed x2 column shipped for m = 20 (group-centred, unit RMS).
const std::vector<double>& reference_covariate();

// x2 for a scenario: the reference column, or N(0,1) draws from the
// substream derive_seed(seed, "x2").
std::vector<double> scenario_covariate(const Scenario& s);

// Design of the scenario with y = 0.
AreaDataset scenario_shape(const Scenario& s);

Psi scenario_truth(const Scenario& s);

// BIC: {full, full without x2} without random effects when A is known to
// be zero, otherwise every intercept-containing subset with and without
// random effects. DHM: the full mean model.
std::unique_ptr<PredictionProcedure> scenario_procedure(const Scenario& s);

double percent_rb(double mean_estimate, double truth);

struct BoxplotSummary {
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
  double lower_fence = 0.0;
  double upper_fence = 0.0;
  std::vector<double> outliers;
};

// Quantiles by linear interpolation between order statistics at position
// (n-1)p (Hyndman-Fan type 7); outliers lie beyond 1.5 IQR from the
// quartiles. Throws DomainError on empty input.
BoxplotSummary boxplot_summary(std::vector<double> samples);

struct EstimatorColumn {
  std::string name;
  Vector mean;
  Vector percent_rb;
  // runs[r][i]: estimate from replicate r for area i.
  std::vector<std::vector<double>> runs;
};

struct RbTable {
  std::string scenario;
  Vector truth;
  Vector truth_std_error;
  std::vector<EstimatorColumn> columns;
  std::size_t n_sim = 0;
  std::size_t failed_replicates = 0;
  std::size_t truncation_hits = 0;
  std::size_t zero_mspe_events = 0;
  // BIC: share of replicates choosing the full mean model; DHM: rejection rate.
  double selection_rate = 0.0;

  const EstimatorColumn& column(const std::string& name) const;
  const EstimatorColumn* find(const std::string& name) const;
};

// Boxplots of per-replicate %RB, one per area, for a column.
std::vector<BoxplotSummary> percent_rb_boxplots(const RbTable& table, const EstimatorColumn& column);

// Runs all replicates and the truth run. Columns: "naive" (BIC), "dhm"
// (DHM), "bootstrap", "mcjack". Replicates whose jackknife is rank
// deficient are counted and excluded; more than 0.1% of them aborts with
// NumericError. Pure function of the scenario.
RbTable run_scenario(const Scenario& s);

struct PresetOptions {
  bool paper = false;  // paper: N_sim=K=1000; quick: N_sim=200, K=500
  std::uint64_t seed = 1;
  std::size_t threads = 1;
};

// "table2", "table3", "fig2", "fig3", "fig4". Throws ValidationError otherwise.
std::vector<Scenario> preset_scenarios(const std::string& preset, const PresetOptions& options);

}  // namespace mcjack
