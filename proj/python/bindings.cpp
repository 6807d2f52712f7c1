#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "mcjack/cli.hpp"
#include "mcjack/errors.hpp"
#include "mcjack/estimation.hpp"
#include "mcjack/monte_carlo_jackknife.hpp"
#include "mcjack/procedures.hpp"
#include "mcjack/selection.hpp"

namespace py = pybind11;
using namespace pybind11::literals;
using namespace mcjack;

namespace {

std::unique_ptr<PredictionProcedure> procedure_for(const std::string& name, std::size_t p, double alpha) {
  return make_procedure(name, CandidateModel::full(p, false), alpha, enumerate_candidates(p));
}

}  // namespace

PYBIND11_MODULE(_mcjack, m) {
  m.doc() = "Monte-Carlo jackknife MSPE estimation for Fay-Herriot small-area prediction";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
  py::register_exception<NumericError>(m, "NumericError", base.ptr());

  py::class_<AreaDataset>(m, "AreaDataset")
      .def(py::init<Vector, Matrix, Vector, std::vector<std::string>, std::vector<std::string>>(),
           py::arg("y"), py::arg("x"), py::arg("d"), py::arg("area_ids") = std::vector<std::string>{},
           py::arg("covariate_names") = std::vector<std::string>{})
      .def_property_readonly("m", &AreaDataset::m)
      .def_property_readonly("p", &AreaDataset::p)
      .def_property_readonly("y", &AreaDataset::y)
      .def_property_readonly("x", &AreaDataset::x)
      .def_property_readonly("d", &AreaDataset::d)
      .def_property_readonly("area_ids", &AreaDataset::area_ids)
      .def_property_readonly("covariate_names", &AreaDataset::covariate_names)
      .def("without", &AreaDataset::without, py::arg("j"))
      .def("__repr__", [](const AreaDataset& d) {
        return "<AreaDataset m=" + std::to_string(d.m()) + " p=" + std::to_string(d.p()) + ">";
      });

  m.def("hospital", [](const std::string& mean) { return build_dataset(hospital_table(), mean); },
        py::arg("mean") = "poly:s:3", "The 23-hospital graft-failure data with the given mean structure.");
  m.def("read_csv", [](const std::string& path, const std::string& mean) { return ingest_csv(path, mean); },
        py::arg("path"), py::arg("mean") = "linear");

  m.def("gls_beta", &gls_beta, py::arg("x"), py::arg("d"), py::arg("A"), py::arg("y"));
  m.def("prasad_rao_A", &prasad_rao_A, py::arg("x"), py::arg("d"), py::arg("y"));
  m.def("profile_loglik", &profile_loglik, py::arg("A"), py::arg("x"), py::arg("d"), py::arg("y"));
  m.def("analytic_mspe_A0", &analytic_mspe_A0_all, py::arg("x"), py::arg("d"));
  m.def("pr_mspe", &pr_mspe_all, py::arg("A_hat"), py::arg("x"), py::arg("d"));
  m.def("chi_square_quantile", &chi_square_quantile, py::arg("df"), py::arg("prob"));
  m.def("chi_square_cdf", &chi_square_cdf, py::arg("df"), py::arg("x"));

  m.def(
      "fit",
      [](const AreaDataset& data, const std::string& method) {
        const auto model = CandidateModel::full(data.p(), true);
        const auto f = method == "ml" ? fit_ml(model, data) : fit_prasad_rao(model, data);
        return py::dict("beta"_a = f.beta, "A_hat"_a = f.A_hat, "loglik"_a = f.loglik,
                        "eblup"_a = eblup_all(f, data));
      },
      py::arg("data"), py::arg("method") = "prasad_rao");

  m.def(
      "dhm_test",
      [](const AreaDataset& data, double alpha) {
        const auto out = dhm_test(data, CandidateModel::full(data.p(), false), alpha);
        return py::dict("statistic"_a = out.test->statistic, "critical"_a = out.test->critical,
                        "df"_a = out.test->df, "rejected"_a = out.test->rejected);
      },
      py::arg("data"), py::arg("alpha") = 0.05);

  m.def(
      "select_bic",
      [](const AreaDataset& data) {
        const auto out = select_bic(enumerate_candidates(data.p()), data);
        return py::dict("mask"_a = out.chosen.covariate_mask,
                        "random_effect"_a = out.chosen.include_random_effect,
                        "label"_a = out.chosen.label());
      },
      py::arg("data"));

  m.def(
      "predict",
      [](const AreaDataset& data, const std::string& procedure, double alpha) {
        return procedure_for(procedure, data.p(), alpha)->predict(data);
      },
      py::arg("data"), py::arg("procedure") = "dhm", py::arg("alpha") = 0.05);

  m.def(
      "mcjack_estimate",
      [](const AreaDataset& data, const std::string& procedure, std::size_t K, std::uint64_t seed,
         double alpha, std::size_t threads, double lambda, double rho) {
        const auto proc = procedure_for(procedure, data.p(), alpha);
        McjackOptions opt;
        opt.threads = threads;
        opt.truncation.lambda = lambda;
        opt.truncation.rho = rho;
        McjackResult r;
        {
          py::gil_scoped_release release;
          r = mcjack_estimate(data, *proc, K, seed, opt);
        }
        Vector mj(data.m()), bt(data.m());
        for (std::size_t i = 0; i < data.m(); ++i) {
          mj[i] = r.areas[i].log_mspe_mcjack;
          bt[i] = r.areas[i].log_mspe_bootstrap;
        }
        return py::dict("log_mspe"_a = mj, "log_mspe_bootstrap"_a = bt,
                        "truncation_hits"_a = r.truncation_hits, "warnings"_a = r.warnings);
      },
      py::arg("data"), py::arg("procedure") = "dhm", py::arg("K") = kDefaultMonteCarloSize,
      py::arg("seed") = 1, py::arg("alpha") = 0.05, py::arg("threads") = 1, py::arg("lambda_") = 2.0,
      py::arg("rho") = 0.5);

  m.def(
      "analyze_hospital",
      [](std::size_t K, std::uint64_t seed) {
        AnalysisOptions opt;
        opt.mean_spec = "poly:s:3";
        opt.K = K;
        opt.seed = seed;
        AnalysisReport report;
        {
          py::gil_scoped_release release;
          report = analyze(hospital_table(), opt);
        }
        std::ostringstream os;
        write_report_json(report, os);
        return os.str();
      },
      py::arg("K") = 4000, py::arg("seed") = 1, "Full hospital analysis as a JSON string.");

  m.attr("__version__") = std::string(version());
}
