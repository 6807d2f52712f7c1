// mcjack command-line tool: analyze a dataset, run simulation presets.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "mcjack/cli.hpp"
#include "mcjack/errors.hpp"

namespace fs = std::filesystem;
using namespace mcjack;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitInternal = 4;

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write '" + path.string() + "'");
  out << content;
}

template <class Fn>
std::string render(Fn&& fn) {
  std::ostringstream os;
  fn(os);
  return os.str();
}

struct AnalyzeFlags {
  std::string data;
  std::string builtin;
  std::string mean = "linear";
  bool no_intercept = false;
  std::string selection = "dhm";
  double alpha = 0.05;
  std::size_t K = 4000;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  double lambda = 2.0;
  double rho = 0.5;
  std::string out_dir = ".";
};

int run_analyze(const AnalyzeFlags& f) {
  AreaTable table;
  if (!f.builtin.empty()) {
    if (f.builtin != "hospital") throw ValidationError("unknown builtin dataset '" + f.builtin + "'");
    table = hospital_table();
  } else if (!f.data.empty()) {
    std::ifstream in(f.data, std::ios::binary);
    if (!in) throw ValidationError("cannot open '" + f.data + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    table = parse_area_csv(buf.str());
  } else {
    throw ValidationError("give --data <csv> or --builtin hospital");
  }

  AnalysisOptions opt;
  opt.mean_spec = f.mean;
  opt.intercept = !f.no_intercept;
  opt.selection = f.selection;
  opt.alpha = f.alpha;
  opt.K = f.K;
  opt.seed = f.seed;
  opt.threads = f.threads;
  opt.truncation = {f.lambda, f.rho};
  const AnalysisReport report = analyze(table, opt);

  fs::create_directories(f.out_dir);
  const fs::path dir(f.out_dir);
  write_file(dir / "report.csv", render([&](std::ostream& os) { write_report_csv(report, os); }));
  write_file(dir / "report.json", render([&](std::ostream& os) { write_report_json(report, os); }));
  std::ostringstream cfg;
  cfg << "command=analyze\n"
      << "data=" << (f.builtin.empty() ? f.data : "builtin:" + f.builtin) << '\n'
      << "mean=" << f.mean << '\n'
      << "intercept=" << (opt.intercept ? "true" : "false") << '\n'
      << "selection=" << f.selection << '\n'
      << "alpha=" << format_number(f.alpha) << '\n'
      << "K=" << f.K << '\n'
      << "seed=" << f.seed << '\n'
      << "lambda=" << format_number(f.lambda) << '\n'
      << "rho=" << format_number(f.rho) << '\n';
  write_file(dir / "resolved_config.txt", cfg.str());

  for (const auto& w : report.warnings) std::cerr << "warning: " << w << '\n';
  if (f.selection == "dhm") {
    std::printf("random-effect test: T = %.3f, critical value = %.3f -> %s\n", report.statistic,
                report.critical, report.rejected ? "reject A=0 (EBLUP)" : "accept A=0 (synthetic)");
  } else {
    std::printf("%s\n", report.selection_detail.c_str());
  }
  std::printf("%6s %8s %8s %9s %9s %7s %7s %7s %9s\n", "area", "y", "sqrtD", "theta_hat",
              report.reference_name.c_str(), "BT", "MJ", "theta~", "MJ_eblup");
  for (const auto& r : report.rows) {
    std::printf("%6s %8.3f %8.3f %9.3f %9.4f %7.4f %7.4f %7.3f %9.4f\n", r.area.c_str(), r.y, r.sqrt_d,
                r.theta_hat, r.reference, r.bt, r.mj, r.theta_tilde, r.mj_eblup);
  }
  std::printf("wrote %s/report.csv, report.json, resolved_config.txt\n", f.out_dir.c_str());
  return 0;
}

struct SimulateFlags {
  std::string preset;
  std::string config;
  bool quick = false;
  bool paper = false;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::optional<std::size_t> K;
  std::optional<std::size_t> n_sim;
  std::optional<double> lambda;
  std::optional<double> rho;
  std::string out_dir = ".";
};

int run_simulate(const SimulateFlags& f) {
  std::map<std::string, std::string> config;
  if (!f.config.empty()) {
    std::ifstream in(f.config, std::ios::binary);
    if (!in) throw ValidationError("cannot open '" + f.config + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    config = parse_config(buf.str(), simulate_config_keys());
  }
  std::string preset = f.preset;
  if (preset.empty() && config.count("preset")) preset = config.at("preset");
  bool paper = false;
  if (config.count("mode")) {
    if (config.at("mode") == "paper") paper = true;
    else if (config.at("mode") != "quick") throw ValidationError("mode must be quick or paper");
  }
  if (f.paper && f.quick) throw ValidationError("--quick and --paper are exclusive");
  if (f.paper) paper = true;
  if (f.quick) paper = false;

  std::vector<Scenario> scenarios;
  if (!preset.empty()) {
    scenarios = preset_scenarios(preset, PresetOptions{paper, 1, 1});
  } else if (!f.config.empty()) {
    scenarios = {Scenario{}};
  } else {
    throw ValidationError("give --preset <name> or --config <file>");
  }
  config.erase("preset");
  config.erase("mode");
  for (auto& s : scenarios) {
    apply_scenario_config(s, config);
    if (f.seed) s.seed = *f.seed;
    if (f.threads) s.threads = *f.threads;
    if (f.K) s.K = *f.K;
    if (f.n_sim) s.n_sim = *f.n_sim;
    if (f.lambda) s.truncation.lambda = *f.lambda;
    if (f.rho) s.truncation.rho = *f.rho;
    validate(s);
  }

  std::vector<RbTable> tables;
  for (const auto& s : scenarios) {
    std::fprintf(stderr, "running %s (n_sim=%zu, K=%zu)\n", s.name.c_str(), s.n_sim, s.K);
    tables.push_back(run_scenario(s));
  }

  fs::create_directories(f.out_dir);
  const fs::path dir(f.out_dir);
  write_file(dir / "rb_table.csv", render([&](std::ostream& os) { write_rb_tables_csv(tables, os); }));
  write_file(dir / "rb_table.json", render([&](std::ostream& os) { write_rb_tables_json(tables, scenarios, os); }));
  write_file(dir / "boxplots.json", render([&](std::ostream& os) { write_boxplots_json(tables, os); }));
  std::string resolved;
  for (const auto& s : scenarios) resolved += "[" + s.name + "]\n" + resolved_config(s) + "\n";
  std::cout << resolved;
  write_file(dir / "resolved_config.txt", resolved);

  for (const auto& t : tables) {
    std::printf("%s: selection rate %.3f, failed replicates %zu, truncation hits %zu\n", t.scenario.c_str(),
                t.selection_rate, t.failed_replicates, t.truncation_hits);
    std::printf("%5s %8s", "area", "truth");
    for (const auto& c : t.columns) std::printf(" %18s", c.name.c_str());
    std::printf("\n");
    for (Eigen::Index i = 0; i < t.truth.size(); ++i) {
      std::printf("%5ld %8.3f", static_cast<long>(i + 1), t.truth[i]);
      for (const auto& c : t.columns) std::printf("   %7.3f (%6.1f)", c.mean[i], c.percent_rb[i]);
      std::printf("\n");
    }
  }
  std::printf("wrote %s/rb_table.csv, rb_table.json, boxplots.json, resolved_config.txt\n", f.out_dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monte-Carlo jackknife log-MSPE estimation for small-area predictors after model selection"};
  app.require_subcommand(1);

  AnalyzeFlags af;
  auto* analyze_cmd = app.add_subcommand("analyze", "Estimate small-area means and their uncertainty");
  analyze_cmd->add_option("--data", af.data, "Input CSV (area,y,D|sqrtD,covariates...)");
  analyze_cmd->add_option("--builtin", af.builtin, "Built-in dataset (hospital)");
  analyze_cmd->add_option("--mean", af.mean, "Mean structure: linear | cols:a,b | poly:s:k");
  analyze_cmd->add_flag("--no-intercept", af.no_intercept, "Do not add an intercept column");
  analyze_cmd->add_option("--selection", af.selection, "dhm (test for random effects) or bic");
  analyze_cmd->add_option("--alpha", af.alpha, "Test level");
  analyze_cmd->add_option("--K", af.K, "Monte-Carlo size");
  analyze_cmd->add_option("--seed", af.seed, "Seed of the Monte-Carlo draws");
  analyze_cmd->add_option("--threads", af.threads, "Worker threads (0 = all cores)");
  analyze_cmd->add_option("--lambda", af.lambda, "Truncation lambda");
  analyze_cmd->add_option("--rho", af.rho, "Truncation rho");
  analyze_cmd->add_option("--out-dir", af.out_dir, "Output directory");

  SimulateFlags sf;
  auto* simulate_cmd = app.add_subcommand("simulate", "Run a simulation preset or scenario config");
  simulate_cmd->add_option("--preset", sf.preset, "table2 | table3 | fig2 | fig3 | fig4");
  simulate_cmd->add_option("--config", sf.config, "Scenario config file (key=value)");
  simulate_cmd->add_flag("--quick", sf.quick, "N_sim=200, K=500 (default)");
  simulate_cmd->add_flag("--paper", sf.paper, "N_sim=1000, K=1000");
  simulate_cmd->add_option("--seed", sf.seed, "Master seed");
  simulate_cmd->add_option("--threads", sf.threads, "Worker threads (0 = all cores)");
  simulate_cmd->add_option("--K", sf.K, "Monte-Carlo size override");
  simulate_cmd->add_option("--n-sim", sf.n_sim, "Number of replicates override");
  simulate_cmd->add_option("--lambda", sf.lambda, "Truncation lambda");
  simulate_cmd->add_option("--rho", sf.rho, "Truncation rho");
  simulate_cmd->add_option("--out-dir", sf.out_dir, "Output directory");

  app.add_subcommand("version", "Print the version");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    if (app.got_subcommand("version")) {
      std::printf("mcjack %s\n", std::string(version()).c_str());
      return 0;
    }
    if (app.got_subcommand(analyze_cmd)) return run_analyze(af);
    if (app.got_subcommand(simulate_cmd)) return run_simulate(sf);
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitValidation;
  } catch (const JackknifeRankError& e) {
    std::fprintf(stderr, "error: %s\nhint: drop covariates or use more areas so every leave-one-out design keeps full rank\n",
                 e.what());
    return kExitNumeric;
  } catch (const SingularDesign& e) {
    std::fprintf(stderr, "error: %s\nhint: check for collinear covariates or lower the polynomial degree\n", e.what());
    return kExitNumeric;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return kExitInternal;
  }
  return kExitInternal;
}
