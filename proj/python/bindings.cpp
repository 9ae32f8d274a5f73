#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "condind/construction.hpp"
#include "condind/inequalities.hpp"
#include "condind/io.hpp"

namespace py = pybind11;
using namespace cind;

namespace {

py::dict split_dict(const BlockSplit& s) {
  py::dict d;
  d["I1"] = s.I1;
  d["I2"] = s.I2;
  d["J1"] = s.J1;
  d["J2"] = s.J2;
  return d;
}

py::dict verdict_dict(const BoundVerdict& v) {
  py::dict d;
  d["lhs"] = v.lhs;
  d["rhs"] = v.rhs;
  d["slack"] = v.slack;
  d["holds"] = v.holds;
  return d;
}

GammaCoupling gamma_from(const JointDistribution& j, py::object gamma, int range) {
  if (py::isinstance<py::list>(gamma) || py::isinstance<py::tuple>(gamma))
    return deterministic_gamma(j.rows(), j.cols(), gamma.cast<std::vector<int>>(), range);
  const Matrix q = gamma.cast<Matrix>();
  return GammaCoupling{static_cast<int>(q.cols()), q};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Discrete conditional independence: structure, derivation witnesses, information inequalities";

  static py::exception<Error> exc(m, "CondIndError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object err = exc;
      py::object inst = err(e.what());
      inst.attr("code") = errc_name(e.code());
      PyErr_SetObject(err.ptr(), inst.ptr());
    }
  });

  py::class_<ValidationReport>(m, "ValidationReport")
      .def_readonly("verdict", &ValidationReport::verdict)
      .def_readonly("final_mi", &ValidationReport::finalMI)
      .def_readonly("tol", &ValidationReport::tol)
      .def_readonly("first_bad_step", &ValidationReport::firstBadStep)
      .def_property_readonly("max_cmi", &ValidationReport::max_cmi)
      .def_property_readonly("steps", [](const ValidationReport& r) {
        py::list out;
        for (const StepReport& s : r.perStep)
          out.append(py::make_tuple(s.cmiA, s.cmiB, s.marginalTV, s.wellFormed));
        return out;
      });

  py::class_<DerivationWitness>(m, "Witness")
      .def_property_readonly("order", &DerivationWitness::order)
      .def_property_readonly("base", [](const DerivationWitness& w) { return w.base; })
      .def_readwrite("tol", &DerivationWitness::tol)
      .def("final_pair", &DerivationWitness::final_pair)
      .def("to_json", [](const DerivationWitness& w) { return witness_to_json(w).dump(); })
      .def_static("from_json",
                  [](const std::string& s) {
                    json j;
                    try {
                      j = json::parse(s);
                    } catch (const json::exception& e) {
                      throw Error(Errc::ParseError, e.what());
                    }
                    return witness_from_json(j);
                  })
      .def("validate",
           [](const DerivationWitness& w, std::optional<double> tol) { return validate_witness(w, tol.value_or(w.tol)); },
           py::arg("tol") = py::none());

  m.def("validate_distribution", [](const Matrix& p) { return validate_distribution(p).p; }, py::arg("p"));
  m.def("parse_matrix", &parse_matrix, py::arg("text"), "JSON {rows,cols,p} or CSV text");
  m.def(
      "block_split",
      [](const Matrix& p, double zeroTol) -> py::object {
        const auto s = block_split(validate_distribution(p), zeroTol);
        return s ? py::object(split_dict(*s)) : py::object(py::none());
      },
      py::arg("p"), py::arg("zero_tol") = 0.0);
  m.def(
      "r_complexity_bound", [](const Matrix& p, double zeroTol) { return r_complexity_bound(validate_distribution(p), zeroTol); },
      py::arg("p"), py::arg("zero_tol") = 0.0);
  m.def("mutual_information", [](const Matrix& p) { return mutual_information(validate_distribution(p).p); });
  m.def("conditional_entropy", [](const Matrix& p) { return conditional_entropy(validate_distribution(p).p); },
        "H(a|b) for a joint matrix p[a, b]");

  m.def("d_epsilon", [](double eps) { return d_epsilon(eps).p; }, py::arg("eps"));
  m.def("d_epsilon_chain", &d_epsilon_chain, py::arg("n"));
  m.def("sharp_good", &sharp_good, py::arg("c"), py::arg("t"));

  m.def(
      "derive",
      [](const Matrix& p, double delta, double tol, int maxOrder, bool smoothFallback) {
        ConstructionConfig cfg;
        cfg.delta = delta;
        cfg.stepTol = tol;
        cfg.maxOrder = maxOrder;
        cfg.smoothFallback = smoothFallback;
        ConstructionResult r;
        {
          py::gil_scoped_release release;
          r = derive_nonblock(validate_distribution(p), cfg);
        }
        return py::make_tuple(r.witness, r.achievedTV, r.report);
      },
      py::arg("p"), py::arg("delta") = 1e-2, py::arg("tol") = 1e-7, py::arg("max_order") = 1 << 16,
      py::arg("smooth_fallback") = true, "Returns (witness, achieved_tv, report).");

  m.def(
      "check_theorem1",
      [](const Matrix& p, py::object gamma, int k, int range) {
        const JointDistribution j = validate_distribution(p);
        return verdict_dict(check_theorem1(j, gamma_from(j, gamma, range), k));
      },
      py::arg("p"), py::arg("gamma"), py::arg("k"), py::arg("range") = 2,
      "gamma: list of values per cell (row-major) or a (cells x range) stochastic matrix");
  m.def(
      "check_theorem3",
      [](const Matrix& p, py::object gamma, int k, int range) {
        const JointDistribution j = validate_distribution(p);
        const Theorem3Verdict t = check_theorem3(j, gamma_from(j, gamma, range), k);
        return py::make_tuple(verdict_dict(t.entropyForm), verdict_dict(t.infoForm));
      },
      py::arg("p"), py::arg("gamma"), py::arg("k"), py::arg("range") = 2);
  m.def(
      "gamma_sweep",
      [](const Matrix& p, int k, int maxRange, int thm) {
        if (thm != 1 && thm != 3) throw Error(Errc::OutOfRange, "thm must be 1 or 3");
        const SweepResult s =
            gamma_sweep(validate_distribution(p), k, maxRange, thm == 1 ? SweepBound::Theorem1 : SweepBound::Theorem3);
        py::dict d = verdict_dict(s.verdict);
        d["worst_map"] = s.worstMap;
        d["max_ratio"] = s.maxRatio;
        return d;
      },
      py::arg("p"), py::arg("k"), py::arg("max_range") = 4, py::arg("thm") = 1);
  m.def(
      "rate_bound",
      [](double u, double v, double w, int k, double hAlpha, double hBeta) {
        const RateVerdict r = rate_bound(RatePoint{u, v, w}, k, hAlpha, hBeta);
        return py::make_tuple(verdict_dict(r.bound), verdict_dict(r.generic));
      },
      py::arg("u"), py::arg("v"), py::arg("w"), py::arg("k"), py::arg("h_alpha"), py::arg("h_beta"));
  m.def("lemma12_bound", &lemma12_bound, py::arg("h_mu"), py::arg("eps"), py::arg("m"));
}
