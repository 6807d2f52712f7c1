#include "mcjack/harness.hpp"

#include <algorithm>
#include <cmath>

#include "mcjack/errors.hpp"
#include "mcjack/estimation.hpp"
#include "mcjack/parallel.hpp"
#include "mcjack/rng.hpp"
#include "mcjack/selection.hpp"

namespace mcjack {

namespace {

// Linear-interpolation quantile of sorted data.
double quantile_sorted(const std::vector<double>& v, double p) {
  const double h = (static_cast<double>(v.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

struct ReplicateResult {
  bool failed = false;
  std::vector<double> reference;  // naive or dhm
  std::vector<double> bootstrap;
  std::vector<double> mcjack;
  bool selected_full = false;
  std::size_t truncation_hits = 0;
  std::size_t zero_events = 0;
};

}  // namespace

void validate(const Scenario& s) {
  if (s.m < 4 || s.m % 2 != 0) throw ValidationError("m must be even and at least 4");
  if (!(s.a > 0.0)) throw ValidationError("a must be positive");
  const std::size_t p = s.include_x2 ? 3 : 2;
  if (s.beta_true.size() != p) {
    throw ValidationError("beta must have " + std::to_string(p) + " entries");
  }
  if (!(s.A_true >= 0.0)) throw ValidationError("A must be >= 0");
  if (s.known_zero_A && s.A_true != 0.0) throw ValidationError("known_zero_A requires A = 0");
  if (s.n_sim == 0 || s.K == 0 || s.truth_n == 0) throw ValidationError("n_sim, K and truth_n must be >= 1");
  if (!(s.alpha > 0.0 && s.alpha < 1.0)) throw ValidationError("alpha must lie in (0, 1)");
  if (s.include_x2 && s.x2_source == CovariateSource::Reference && s.m != 20) {
    throw ValidationError("the reference covariate exists for m = 20 only; use x2_source=seed");
  }
  if (s.selection == SelectionKind::Bic && !s.include_x2 && s.known_zero_A) {
    throw ValidationError("BIC with known A = 0 needs the x2 column to select over");
  }
  validate(s.truncation);
}

const std::vector<double>& reference_covariate() {
  static const std::vector<double> values{
      1.141053,  1.881669,  -0.923432, -0.507099, 1.726441, -0.975169, -0.723085,
      -2.017973, -0.548005, 0.945601,  0.006224,  0.006241, -1.398743, -0.196447,
      0.004977,  0.004985,  1.526384,  0.004985,  0.006224, 0.035170};
  return values;
}

std::vector<double> scenario_covariate(const Scenario& s) {
  if (s.x2_source == CovariateSource::Reference) {
    if (s.m != reference_covariate().size()) {
      throw ValidationError("the reference covariate exists for m = 20 only");
    }
    return reference_covariate();
  }
  std::vector<double> x2(s.m);
  auto gen = substream(derive_seed(s.seed, "x2"), 0);
  fill_standard_normal(gen, x2);
  return x2;
}

AreaDataset scenario_shape(const Scenario& s) {
  const auto m = static_cast<Eigen::Index>(s.m);
  const Eigen::Index p = s.include_x2 ? 3 : 2;
  Matrix x(m, p);
  Vector d(m);
  const auto x2 = s.include_x2 ? scenario_covariate(s) : std::vector<double>{};
  for (Eigen::Index i = 0; i < m; ++i) {
    const bool second = i >= m / 2;
    x(i, 0) = 1.0;
    x(i, 1) = second ? 1.0 : 0.0;
    if (s.include_x2) x(i, 2) = x2[static_cast<std::size_t>(i)];
    d[i] = second ? s.a : 1.0;
  }
  std::vector<std::string> names{"intercept", "x1"};
  if (s.include_x2) names.emplace_back("x2");
  return AreaDataset(Vector::Zero(m), std::move(x), std::move(d), {}, std::move(names));
}

Psi scenario_truth(const Scenario& s) {
  Psi psi;
  psi.beta_f = Eigen::Map<const Vector>(s.beta_true.data(), static_cast<Eigen::Index>(s.beta_true.size()));
  psi.A = s.A_true;
  return psi;
}

std::unique_ptr<PredictionProcedure> scenario_procedure(const Scenario& s) {
  const std::size_t p = s.include_x2 ? 3 : 2;
  if (s.selection == SelectionKind::Dhm) {
    return std::make_unique<DhmProcedure>(CandidateModel::full(p, false), s.alpha);
  }
  std::vector<CandidateModel> candidates;
  if (s.known_zero_A) {
    candidates.push_back(CandidateModel::full(p, false));
    std::vector<bool> reduced(p, true);
    reduced[p - 1] = false;
    candidates.push_back(CandidateModel{reduced, false});
  } else {
    candidates = enumerate_candidates(p);
  }
  return std::make_unique<BicEblupProcedure>(std::move(candidates));
}

double percent_rb(double mean_estimate, double truth) {
  if (truth == 0.0 || !std::isfinite(truth)) throw DomainError("%RB needs a finite nonzero truth");
  return 100.0 * (mean_estimate - truth) / std::abs(truth);
}

BoxplotSummary boxplot_summary(std::vector<double> samples) {
  if (samples.empty()) throw DomainError("boxplot needs at least one sample");
  std::sort(samples.begin(), samples.end());
  BoxplotSummary b;
  b.min = samples.front();
  b.max = samples.back();
  b.q1 = quantile_sorted(samples, 0.25);
  b.median = quantile_sorted(samples, 0.5);
  b.q3 = quantile_sorted(samples, 0.75);
  const double iqr = b.q3 - b.q1;
  b.lower_fence = b.q1 - 1.5 * iqr;
  b.upper_fence = b.q3 + 1.5 * iqr;
  for (double v : samples) {
    if (v < b.lower_fence || v > b.upper_fence) b.outliers.push_back(v);
  }
  return b;
}

const EstimatorColumn* RbTable::find(const std::string& name) const {
  for (const auto& c : columns) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

const EstimatorColumn& RbTable::column(const std::string& name) const {
  const auto* c = find(name);
  if (c == nullptr) throw ValidationError("table has no column '" + name + "'");
  return *c;
}

std::vector<BoxplotSummary> percent_rb_boxplots(const RbTable& table, const EstimatorColumn& column) {
  std::vector<BoxplotSummary> out;
  const auto m = static_cast<std::size_t>(table.truth.size());
  for (std::size_t i = 0; i < m; ++i) {
    std::vector<double> rb;
    rb.reserve(column.runs.size());
    const double t = table.truth[static_cast<Eigen::Index>(i)];
    for (const auto& run : column.runs) rb.push_back(percent_rb(run[i], t));
    out.push_back(boxplot_summary(std::move(rb)));
  }
  return out;
}

RbTable run_scenario(const Scenario& s) {
  validate(s);
  const AreaDataset shape = scenario_shape(s);
  const Psi truth_psi = scenario_truth(s);
  const auto procedure = scenario_procedure(s);
  const std::size_t m = s.m;
  const std::size_t p = shape.p();
  const PsiEstimator estimator = s.known_zero_A ? PsiEstimator::KnownZeroA : PsiEstimator::PrasadRao;
  const bool bic = s.selection == SelectionKind::Bic;
  const auto* bic_procedure = dynamic_cast<const BicEblupProcedure*>(procedure.get());

  RbTable table;
  table.scenario = s.name;
  table.n_sim = s.n_sim;
  const TruthEstimate truth =
      empirical_true_log_mspe_all(truth_psi, *procedure, shape, s.truth_n, derive_seed(s.seed, "truth"));
  table.truth = truth.log_mspe;
  table.truth_std_error = truth.std_error;

  const std::uint64_t data_stream = derive_seed(s.seed, "data");
  std::vector<ReplicateResult> reps(s.n_sim);
  parallel_for(s.n_sim, s.threads, [&](std::size_t r) {
    ReplicateResult& out = reps[r];
    std::vector<double> xi(m), eta(m);
    draw_row(data_stream, r, xi, eta);
    const SimulatedPair pair = simulate_pair(truth_psi, shape, xi, eta);
    const AreaDataset data = shape.with_y(pair.y_sim);

    Vector reference;
    if (bic) {
      const auto sel = select_bic(bic_procedure->candidates(), data);
      const auto& chosen =
          std::find_if(sel.scores.begin(), sel.scores.end(),
                       [&](const BicEntry& e) { return e.fit.model == sel.chosen; })->fit;
      const Matrix x = chosen.model.design(data.x());
      reference = chosen.A_hat > 0.0 ? pr_mspe_all(chosen.A_hat, x, data.d())
                                     : analytic_mspe_A0_all(x, data.d());
      out.selected_full = chosen.model.covariate_count() == p;
    } else {
      const auto u = dhm_uncertainty(data, CandidateModel::full(p, false), s.alpha);
      reference = u.mspe;
      out.selected_full = u.rejected;
    }
    out.reference.resize(m);
    for (std::size_t i = 0; i < m; ++i) out.reference[i] = std::log(reference[static_cast<Eigen::Index>(i)]);

    McjackOptions options;
    options.estimator = estimator;
    options.truncation = s.truncation;
    options.threads = 1;
    try {
      const auto res = mcjack_estimate(data, *procedure, s.K, derive_seed(s.seed, "mcjack", r), options);
      out.bootstrap.resize(m);
      out.mcjack.resize(m);
      for (std::size_t i = 0; i < m; ++i) {
        out.bootstrap[i] = res.areas[i].log_mspe_bootstrap;
        out.mcjack[i] = res.areas[i].log_mspe_mcjack;
      }
      out.truncation_hits = res.truncation_hits;
      out.zero_events = res.zero_mspe_events;
    } catch (const JackknifeRankError&) {
      out.failed = true;
    }
  });

  for (const auto& r : reps) table.failed_replicates += r.failed ? 1 : 0;
  if (static_cast<double>(table.failed_replicates) > 0.001 * static_cast<double>(s.n_sim)) {
    throw NumericError(std::to_string(table.failed_replicates) + " of " + std::to_string(s.n_sim) +
                       " replicates hit a rank-deficient jackknife design");
  }

  EstimatorColumn reference{bic ? "naive" : "dhm", {}, {}, {}};
  EstimatorColumn boot{"bootstrap", {}, {}, {}};
  EstimatorColumn mj{"mcjack", {}, {}, {}};
  std::size_t selected = 0;
  for (const auto& r : reps) {
    if (r.failed) continue;
    reference.runs.push_back(r.reference);
    boot.runs.push_back(r.bootstrap);
    mj.runs.push_back(r.mcjack);
    table.truncation_hits += r.truncation_hits;
    table.zero_mspe_events += r.zero_events;
    selected += r.selected_full ? 1 : 0;
  }
  table.selection_rate = static_cast<double>(selected) / static_cast<double>(reference.runs.size());
  for (EstimatorColumn* col : {&reference, &boot, &mj}) {
    col->mean = Vector::Zero(static_cast<Eigen::Index>(m));
    for (const auto& run : col->runs) {
      for (std::size_t i = 0; i < m; ++i) col->mean[static_cast<Eigen::Index>(i)] += run[i];
    }
    col->mean /= static_cast<double>(col->runs.size());
    col->percent_rb.resize(static_cast<Eigen::Index>(m));
    for (Eigen::Index i = 0; i < col->mean.size(); ++i) {
      col->percent_rb[i] = percent_rb(col->mean[i], table.truth[i]);
    }
  }
  table.columns = {std::move(reference), std::move(boot), std::move(mj)};
  return table;
}

std::vector<Scenario> preset_scenarios(const std::string& preset, const PresetOptions& options) {
  Scenario base;
  base.n_sim = options.paper ? 1000 : 200;
  base.K = options.paper ? 1000 : 500;
  base.seed = options.seed;
  base.threads = options.threads;

  auto known_zero = [&](const std::string& name, double beta2, double a) {
    Scenario s = base;
    s.name = name;
    s.beta_true = {1.0, 1.0, beta2};
    s.a = a;
    return s;
  };
  auto dhm = [&](const std::string& name, double A) {
    Scenario s = base;
    s.name = name;
    s.beta_true = {1.0, 1.0, 0.5};
    s.a = 4.0;
    s.A_true = A;
    s.known_zero_A = false;
    s.selection = SelectionKind::Dhm;
    return s;
  };

  if (preset == "table2") return {known_zero("table2_model2_a4", 0.0, 4.0)};
  if (preset == "fig2") return {known_zero("fig2_model1_a4", 0.5, 4.0), known_zero("fig2_model1_a16", 0.5, 16.0)};
  if (preset == "fig3") return {known_zero("fig3_model2_a4", 0.0, 4.0), known_zero("fig3_model2_a16", 0.0, 16.0)};
  if (preset == "table3" || preset == "fig4") {
    return {dhm(preset + "_A0", 0.0), dhm(preset + "_A0.5", 0.5), dhm(preset + "_A1", 1.0)};
  }
  throw ValidationError("unknown preset '" + preset + "' (expected table2, table3, fig2, fig3 or fig4)");
}

}  // namespace mcjack
