#include "mcjack/cli.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "mcjack/errors.hpp"
#include "mcjack/estimation.hpp"
#include "mcjack/rng.hpp"
#include "mcjack/selection.hpp"

#ifndef MCJACK_VERSION
#define MCJACK_VERSION "0.0.0"
#endif

namespace mcjack {

namespace {

using ojson = nlohmann::ordered_json;

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

std::vector<std::string_view> lines_of(std::string_view text) {
  if (text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto pos = text.find('\n', start);
    if (pos == std::string_view::npos) {
      out.push_back(text.substr(start));
      break;
    }
    out.push_back(text.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::vector<double> column_or_throw(const AreaTable& t, const std::string& name) {
  for (std::size_t c = 0; c < t.covariate_names.size(); ++c) {
    if (t.covariate_names[c] == name) return t.covariates[c];
  }
  throw ValidationError("mean structure refers to unknown column '" + name + "'");
}

double to_number(const std::string& key, const std::string& value) {
  double v = 0.0;
  if (!parse_double(value, v)) throw ValidationError("config key '" + key + "': '" + value + "' is not a number");
  return v;
}

std::size_t to_count(const std::string& key, const std::string& value) {
  const double v = to_number(key, value);
  if (v < 0 || v != std::floor(v)) throw ValidationError("config key '" + key + "' must be a non-negative integer");
  return static_cast<std::size_t>(v);
}

std::uint64_t to_seed(const std::string& key, const std::string& value) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw ValidationError("config key '" + key + "' must be an unsigned integer");
  }
  return v;
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ValidationError("config key '" + key + "' must be true or false");
}

ojson vector_json(const Vector& v) {
  ojson a = ojson::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

double sqrt_mspe(double log_mspe) { return std::exp(0.5 * log_mspe); }

}  // namespace

std::string_view version() noexcept { return MCJACK_VERSION; }

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

AreaTable parse_area_csv(std::string_view text) {
  const auto lines = lines_of(text);
  std::size_t header_line = 0;
  while (header_line < lines.size() && trim(lines[header_line]).empty()) ++header_line;
  if (header_line == lines.size()) {
    throw ParseError(1, 0, "missing header row (expected columns area,y,D or area,y,sqrtD)");
  }
  const auto header = split(lines[header_line], ',');
  const std::size_t hline = header_line + 1;
  std::size_t area_col = SIZE_MAX, y_col = SIZE_MAX, d_col = SIZE_MAX;
  AreaTable t;
  std::set<std::string, std::less<>> seen;
  std::vector<std::size_t> cov_cols;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string name(header[c]);
    if (name.empty()) throw ParseError(hline, c + 1, "empty column name");
    if (!seen.insert(name).second) throw ParseError(hline, c + 1, "duplicate column '" + name + "'");
    if (name == "area") {
      area_col = c;
    } else if (name == "y") {
      y_col = c;
    } else if (name == "D" || name == "sqrtD") {
      if (d_col != SIZE_MAX) throw ParseError(hline, c + 1, "give either D or sqrtD, not both");
      d_col = c;
      t.sqrt_d_column = name == "sqrtD";
    } else {
      cov_cols.push_back(c);
      t.covariate_names.push_back(name);
    }
  }
  if (area_col == SIZE_MAX) throw ParseError(hline, 0, "header is missing column 'area'");
  if (y_col == SIZE_MAX) throw ParseError(hline, 0, "header is missing column 'y'");
  if (d_col == SIZE_MAX) throw ParseError(hline, 0, "header is missing column 'D' (or 'sqrtD')");
  t.covariates.resize(cov_cols.size());

  std::set<std::string, std::less<>> ids;
  for (std::size_t l = header_line + 1; l < lines.size(); ++l) {
    if (trim(lines[l]).empty()) continue;
    const std::size_t lineno = l + 1;
    const auto fields = split(lines[l], ',');
    if (fields.size() != header.size()) {
      throw ParseError(lineno, 0, "expected " + std::to_string(header.size()) + " fields, found " +
                                      std::to_string(fields.size()));
    }
    auto number = [&](std::size_t c) {
      double v = 0.0;
      if (!parse_double(fields[c], v)) {
        throw ParseError(lineno, c + 1, "'" + std::string(fields[c]) + "' is not a number");
      }
      return v;
    };
    const std::string id(fields[area_col]);
    if (id.empty()) throw ParseError(lineno, area_col + 1, "empty area id");
    if (!ids.insert(id).second) throw ParseError(lineno, area_col + 1, "duplicate area id '" + id + "'");
    t.area_ids.push_back(id);
    t.y.push_back(number(y_col));
    const double dv = number(d_col);
    if (!(dv > 0.0)) {
      throw ParseError(lineno, d_col + 1, std::string(t.sqrt_d_column ? "sqrtD" : "D") + " must be positive");
    }
    t.d.push_back(t.sqrt_d_column ? dv * dv : dv);
    for (std::size_t k = 0; k < cov_cols.size(); ++k) t.covariates[k].push_back(number(cov_cols[k]));
  }
  if (t.y.empty()) throw ParseError(hline + 1, 0, "no data rows");
  return t;
}

AreaDataset build_dataset(const AreaTable& table, const std::string& mean_spec, bool intercept) {
  std::vector<std::string> names;
  std::vector<std::vector<double>> cols;
  if (mean_spec.empty() || mean_spec == "linear") {
    names = table.covariate_names;
    cols = table.covariates;
  } else if (mean_spec.starts_with("cols:")) {
    for (auto part : split(std::string_view(mean_spec).substr(5), ',')) {
      const std::string name(part);
      cols.push_back(column_or_throw(table, name));
      names.push_back(name);
    }
  } else if (mean_spec.starts_with("poly:")) {
    const auto parts = split(std::string_view(mean_spec).substr(5), ':');
    double degree = 0.0;
    if (parts.size() != 2 || !parse_double(parts[1], degree) || degree < 1 || degree != std::floor(degree)) {
      throw ValidationError("mean spec '" + mean_spec + "' should look like poly:<column>:<degree>");
    }
    const std::string base(parts[0]);
    const auto s = column_or_throw(table, base);
    for (int k = 1; k <= static_cast<int>(degree); ++k) {
      std::vector<double> c(s.size());
      for (std::size_t i = 0; i < s.size(); ++i) c[i] = std::pow(s[i], k);
      cols.push_back(std::move(c));
      names.push_back(k == 1 ? base : base + "^" + std::to_string(k));
    }
  } else {
    throw ValidationError("unknown mean spec '" + mean_spec + "' (use linear, cols:a,b or poly:s:k)");
  }
  if (intercept) {
    cols.insert(cols.begin(), std::vector<double>(table.y.size(), 1.0));
    names.insert(names.begin(), "intercept");
  }
  if (cols.empty()) throw ValidationError("mean structure has no columns");
  const auto m = static_cast<Eigen::Index>(table.y.size());
  Matrix x(m, static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) {
    for (Eigen::Index i = 0; i < m; ++i) x(i, static_cast<Eigen::Index>(c)) = cols[c][static_cast<std::size_t>(i)];
  }
  return AreaDataset(Eigen::Map<const Vector>(table.y.data(), m), std::move(x),
                     Eigen::Map<const Vector>(table.d.data(), m), table.area_ids, std::move(names));
}

AreaDataset ingest_csv(const std::filesystem::path& path, const std::string& mean_spec, bool intercept) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return build_dataset(parse_area_csv(buf.str()), mean_spec, intercept);
}

AreaTable hospital_table() { return parse_area_csv(hospital_csv()); }

AnalysisReport analyze(const AreaTable& table, const AnalysisOptions& options) {
  const AreaDataset data = build_dataset(table, options.mean_spec, options.intercept);
  const CandidateModel mean_model = CandidateModel::full(data.p(), false);

  AnalysisReport report;
  report.options = options;
  report.covariate_names = table.covariate_names;

  std::unique_ptr<PredictionProcedure> procedure;
  Vector reference;
  if (options.selection == "dhm") {
    procedure = std::make_unique<DhmProcedure>(mean_model, options.alpha);
    const auto u = dhm_uncertainty(data, mean_model, options.alpha);
    reference = u.mspe;
    report.statistic = u.statistic;
    report.critical = u.critical;
    report.rejected = u.rejected;
    report.reference_name = "DHM";
    report.selection_detail = procedure->describe();
  } else if (options.selection == "bic") {
    if (!options.intercept) throw ValidationError("BIC selection needs the intercept column");
    auto candidates = enumerate_candidates(data.p());
    const auto sel = select_bic(candidates, data);
    for (const auto& e : sel.scores) {
      if (e.fit.model != sel.chosen) continue;
      const Matrix x = e.fit.model.design(data.x());
      reference = e.fit.A_hat > 0.0 ? pr_mspe_all(e.fit.A_hat, x, data.d()) : analytic_mspe_A0_all(x, data.d());
    }
    procedure = std::make_unique<BicEblupProcedure>(std::move(candidates));
    report.reference_name = "naive";
    report.selection_detail = "BIC chose " + sel.chosen.label();
  } else {
    throw ValidationError("unknown selection '" + options.selection + "' (use dhm or bic)");
  }
  const PlainEblupProcedure eblup(mean_model);
  report.A_hat = prasad_rao_A(data.x(), data.d(), data.y());

  const Vector theta_hat = procedure->predict(data);
  const Vector theta_tilde = eblup.predict(data);

  McjackOptions mc;
  mc.estimator = PsiEstimator::PrasadRao;
  mc.truncation = options.truncation;
  mc.threads = options.threads;
  const auto mj = mcjack_estimate(data, *procedure, options.K, options.seed, mc);
  const auto mj_eblup = mcjack_estimate(data, eblup, options.K, options.seed, mc);
  report.truncation_hits = mj.truncation_hits + mj_eblup.truncation_hits;
  report.warnings = mj.warnings;

  for (std::size_t i = 0; i < data.m(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    AnalysisRow row;
    row.area = table.area_ids[i];
    row.y = table.y[i];
    for (const auto& c : table.covariates) row.covariates.push_back(c[i]);
    row.sqrt_d = std::sqrt(table.d[i]);
    row.theta_hat = theta_hat[ii];
    row.theta_tilde = theta_tilde[ii];
    row.reference = std::sqrt(reference[ii]);
    row.bt = sqrt_mspe(mj.areas[i].log_mspe_bootstrap);
    row.mj = sqrt_mspe(mj.areas[i].log_mspe_mcjack);
    row.bt_eblup = sqrt_mspe(mj_eblup.areas[i].log_mspe_bootstrap);
    row.mj_eblup = sqrt_mspe(mj_eblup.areas[i].log_mspe_mcjack);
    report.rows.push_back(std::move(row));
  }
  return report;
}

void write_report_csv(const AnalysisReport& report, std::ostream& os) {
  os << "area,y";
  for (const auto& n : report.covariate_names) os << ',' << n;
  os << ",sqrtD,theta_hat,theta_tilde," << report.reference_name << ",BT,MJ,BT_eblup,MJ_eblup\n";
  for (const auto& r : report.rows) {
    os << r.area << ',' << format_number(r.y);
    for (double c : r.covariates) os << ',' << format_number(c);
    for (double v : {r.sqrt_d, r.theta_hat, r.theta_tilde, r.reference, r.bt, r.mj, r.bt_eblup, r.mj_eblup}) {
      os << ',' << format_number(v);
    }
    os << '\n';
  }
}

void write_report_json(const AnalysisReport& report, std::ostream& os) {
  ojson meta;
  meta["software"] = std::string("mcjack ") + std::string(version());
  meta["mean"] = report.options.mean_spec;
  meta["intercept"] = report.options.intercept;
  meta["selection"] = report.options.selection;
  meta["selection_detail"] = report.selection_detail;
  meta["alpha"] = report.options.alpha;
  meta["K"] = report.options.K;
  meta["seed"] = report.options.seed;
  meta["lambda"] = report.options.truncation.lambda;
  meta["rho"] = report.options.truncation.rho;
  if (report.options.selection == "dhm") {
    meta["test_statistic"] = report.statistic;
    meta["critical_value"] = report.critical;
    meta["rejected"] = report.rejected;
  }
  meta["A_hat_prasad_rao"] = report.A_hat;
  meta["truncation_hits"] = report.truncation_hits;
  meta["warnings"] = report.warnings;

  ojson areas = ojson::array();
  for (const auto& r : report.rows) {
    ojson a;
    a["area"] = r.area;
    a["y"] = r.y;
    ojson cov;
    for (std::size_t c = 0; c < r.covariates.size(); ++c) cov[report.covariate_names[c]] = r.covariates[c];
    a["covariates"] = cov;
    a["sqrtD"] = r.sqrt_d;
    a["theta_hat"] = r.theta_hat;
    a["theta_tilde"] = r.theta_tilde;
    a[report.reference_name] = r.reference;
    a["BT"] = r.bt;
    a["MJ"] = r.mj;
    a["BT_eblup"] = r.bt_eblup;
    a["MJ_eblup"] = r.mj_eblup;
    areas.push_back(std::move(a));
  }
  ojson doc;
  doc["metadata"] = std::move(meta);
  doc["areas"] = std::move(areas);
  os << doc.dump(2) << '\n';
}

std::map<std::string, std::string> parse_config(std::string_view text,
                                                const std::vector<std::string>& allowed) {
  std::map<std::string, std::string> out;
  const auto lines = lines_of(text);
  for (std::size_t l = 0; l < lines.size(); ++l) {
    auto line = lines[l];
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(l + 1, 0, "expected key=value");
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ParseError(l + 1, 0, "unknown config key '" + key + "'");
    }
    if (!out.emplace(key, value).second) throw ParseError(l + 1, 0, "duplicate config key '" + key + "'");
  }
  return out;
}

const std::vector<std::string>& simulate_config_keys() {
  static const std::vector<std::string> keys{
      "preset", "mode",         "seed",      "threads", "name",   "m",    "a",
      "include_x2", "x2_source", "beta",    "A",       "known_zero_A", "selection", "alpha",
      "n_sim",  "K",            "truth_n",   "lambda",  "rho"};
  return keys;
}

void apply_scenario_config(Scenario& s, const std::map<std::string, std::string>& config) {
  for (const auto& [key, value] : config) {
    if (key == "name") {
      s.name = value;
    } else if (key == "seed") {
      s.seed = to_seed(key, value);
    } else if (key == "threads") {
      s.threads = to_count(key, value);
    } else if (key == "m") {
      s.m = to_count(key, value);
    } else if (key == "a") {
      s.a = to_number(key, value);
    } else if (key == "include_x2") {
      s.include_x2 = to_bool(key, value);
    } else if (key == "x2_source") {
      if (value == "reference") s.x2_source = CovariateSource::Reference;
      else if (value == "seed") s.x2_source = CovariateSource::Seeded;
      else throw ValidationError("x2_source must be reference or seed");
    } else if (key == "beta") {
      s.beta_true.clear();
      for (auto part : split(value, ',')) s.beta_true.push_back(to_number(key, std::string(part)));
    } else if (key == "A") {
      s.A_true = to_number(key, value);
    } else if (key == "known_zero_A") {
      s.known_zero_A = to_bool(key, value);
    } else if (key == "selection") {
      if (value == "bic") s.selection = SelectionKind::Bic;
      else if (value == "dhm") s.selection = SelectionKind::Dhm;
      else throw ValidationError("selection must be bic or dhm");
    } else if (key == "alpha") {
      s.alpha = to_number(key, value);
    } else if (key == "n_sim") {
      s.n_sim = to_count(key, value);
    } else if (key == "K") {
      s.K = to_count(key, value);
    } else if (key == "truth_n") {
      s.truth_n = to_count(key, value);
    } else if (key == "lambda") {
      s.truncation.lambda = to_number(key, value);
    } else if (key == "rho") {
      s.truncation.rho = to_number(key, value);
    }
  }
}

std::string resolved_config(const Scenario& s) {
  std::ostringstream os;
  os << "name=" << s.name << '\n'
     << "m=" << s.m << '\n'
     << "a=" << format_number(s.a) << '\n'
     << "include_x2=" << (s.include_x2 ? "true" : "false") << '\n'
     << "x2_source=" << (s.x2_source == CovariateSource::Reference ? "reference" : "seed") << '\n'
     << "beta=";
  for (std::size_t k = 0; k < s.beta_true.size(); ++k) os << (k ? "," : "") << format_number(s.beta_true[k]);
  os << '\n'
     << "A=" << format_number(s.A_true) << '\n'
     << "known_zero_A=" << (s.known_zero_A ? "true" : "false") << '\n'
     << "selection=" << (s.selection == SelectionKind::Bic ? "bic" : "dhm") << '\n'
     << "alpha=" << format_number(s.alpha) << '\n'
     << "n_sim=" << s.n_sim << '\n'
     << "K=" << s.K << '\n'
     << "truth_n=" << s.truth_n << '\n'
     << "lambda=" << format_number(s.truncation.lambda) << '\n'
     << "rho=" << format_number(s.truncation.rho) << '\n'
     << "seed=" << s.seed << '\n'
     << "# derived substream seeds\n"
     << "# seed.x2=" << derive_seed(s.seed, "x2") << '\n'
     << "# seed.truth=" << derive_seed(s.seed, "truth") << '\n'
     << "# seed.data=" << derive_seed(s.seed, "data") << '\n'
     << "# seed.mcjack(r)=derive_seed(seed, \"mcjack\", r)\n";
  return os.str();
}

void write_rb_tables_csv(const std::vector<RbTable>& tables, std::ostream& os) {
  os << "scenario,area,truth,truth_se,estimator,mean,percent_rb\n";
  for (const auto& t : tables) {
    for (const auto& col : t.columns) {
      for (Eigen::Index i = 0; i < t.truth.size(); ++i) {
        os << t.scenario << ',' << (i + 1) << ',' << format_number(t.truth[i]) << ','
           << format_number(t.truth_std_error[i]) << ',' << col.name << ',' << format_number(col.mean[i]) << ','
           << format_number(col.percent_rb[i]) << '\n';
      }
    }
  }
}

void write_rb_tables_json(const std::vector<RbTable>& tables, const std::vector<Scenario>& scenarios,
                          std::ostream& os) {
  ojson doc = ojson::array();
  for (std::size_t k = 0; k < tables.size(); ++k) {
    const auto& t = tables[k];
    ojson j;
    j["scenario"] = t.scenario;
    if (k < scenarios.size()) j["resolved_config"] = resolved_config(scenarios[k]);
    j["n_sim"] = t.n_sim;
    j["failed_replicates"] = t.failed_replicates;
    j["truncation_hits"] = t.truncation_hits;
    j["zero_mspe_events"] = t.zero_mspe_events;
    j["selection_rate"] = t.selection_rate;
    j["truth"] = vector_json(t.truth);
    j["truth_se"] = vector_json(t.truth_std_error);
    ojson est;
    for (const auto& col : t.columns) {
      ojson c;
      c["mean"] = vector_json(col.mean);
      c["percent_rb"] = vector_json(col.percent_rb);
      c["runs"] = col.runs;
      est[col.name] = std::move(c);
    }
    j["estimators"] = std::move(est);
    doc.push_back(std::move(j));
  }
  os << doc.dump(1) << '\n';
}

void write_boxplots_json(const std::vector<RbTable>& tables, std::ostream& os) {
  ojson doc;
  for (const auto& t : tables) {
    ojson sc;
    for (const auto& col : t.columns) {
      ojson boxes = ojson::array();
      const auto summaries = percent_rb_boxplots(t, col);
      for (std::size_t i = 0; i < summaries.size(); ++i) {
        const auto& b = summaries[i];
        boxes.push_back({{"area", i + 1},
                         {"min", b.min},
                         {"q1", b.q1},
                         {"median", b.median},
                         {"q3", b.q3},
                         {"max", b.max},
                         {"lower_fence", b.lower_fence},
                         {"upper_fence", b.upper_fence},
                         {"outliers", b.outliers}});
      }
      sc[col.name] = std::move(boxes);
    }
    doc[t.scenario] = std::move(sc);
  }
  os << doc.dump(1) << '\n';
}

}  // namespace mcjack
