#include <pybind11/complex.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "bicavity/cmt.hpp"
#include "bicavity/error.hpp"
#include "bicavity/optomech.hpp"
#include "bicavity/rcwa.hpp"
#include "bicavity/resonance.hpp"
#include "bicavity/stack_optics.hpp"
#include "bicavity/sweep.hpp"

namespace py = pybind11;
using namespace bicavity;

namespace {

// json <-> Python via the json module; configs are small.
nlohmann::json to_json(const py::object& obj) {
  const auto dumps = py::module_::import("json").attr("dumps");
  return nlohmann::json::parse(dumps(obj).cast<std::string>());
}

py::object from_json(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

LayerStack make_stack(const std::vector<std::pair<cplx, double>>& layers) {
  LayerStack s;
  for (const auto& [n, d] : layers) s.layers.push_back({Medium{n.real(), n.imag()}, d});
  return s;
}

JobConfig job_from(const py::object& config, const std::vector<std::string>& overrides) {
  nlohmann::json doc = to_json(config);
  for (const auto& o : overrides) apply_override(doc, o);
  return JobConfig::from_json(doc);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Double-slab photonic-crystal cavity solvers";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_RuntimeError);

  py::enum_<Parity>(m, "Parity").value("Even", Parity::Even).value("Odd", Parity::Odd).value("Unknown", Parity::Unknown);
  py::enum_<Polarization>(m, "Polarization").value("X", Polarization::X).value("Y", Polarization::Y);
  py::enum_<Factorization>(m, "Factorization")
      .value("Laurent", Factorization::Laurent)
      .value("InverseRule", Factorization::InverseRule);

  py::class_<Medium>(m, "Medium")
      .def(py::init([](double n_re, double n_im) { return Medium{n_re, n_im}; }), py::arg("n_re") = 1.0,
           py::arg("n_im") = 0.0)
      .def_readwrite("n_re", &Medium::n_re)
      .def_readwrite("n_im", &Medium::n_im)
      .def("__repr__", [](const Medium& x) {
        return "Medium(" + std::to_string(x.n_re) + ", " + std::to_string(x.n_im) + ")";
      });

  py::class_<PhcSlabSpec>(m, "PhcSlab")
      .def(py::init<>())
      .def_readwrite("thickness", &PhcSlabSpec::thickness)
      .def_readwrite("period", &PhcSlabSpec::period)
      .def_readwrite("hole_radius", &PhcSlabSpec::hole_radius)
      .def_readwrite("slab", &PhcSlabSpec::slab)
      .def_readwrite("hole", &PhcSlabSpec::hole)
      .def_property_readonly("fill_factor", &PhcSlabSpec::fill_factor)
      .def("validate", &PhcSlabSpec::validate);

  py::class_<CavitySpec>(m, "Cavity")
      .def(py::init([](const PhcSlabSpec& a, const PhcSlabSpec& b, double gap) { return CavitySpec{a, b, gap}; }),
           py::arg("slab1"), py::arg("slab2"), py::arg("gap"))
      .def_static("symmetric", &CavitySpec::symmetric, py::arg("slab"), py::arg("gap"))
      .def_readwrite("slab1", &CavitySpec::slab1)
      .def_readwrite("slab2", &CavitySpec::slab2)
      .def_readwrite("gap", &CavitySpec::gap)
      .def_property_readonly("length", &CavitySpec::length)
      .def_property_readonly("midplane", &CavitySpec::midplane);

  auto d = m.def_submodule("designs", "Reference GaAs membranes");
  d.def("fano_mirror", &designs::fano_mirror, py::arg("extinction") = 0.0);
  d.def("dispersive_bic", &designs::dispersive_bic, py::arg("extinction") = 0.0);
  d.def("quadratic_bic", &designs::quadratic_bic, py::arg("extinction") = 0.0);
  d.def("gaas_slab", &designs::gaas_slab, py::arg("period"), py::arg("hole_radius"), py::arg("extinction") = 0.0);

  py::class_<ScatteringAmplitudes>(m, "Scattering")
      .def_readonly("r", &ScatteringAmplitudes::r)
      .def_readonly("t", &ScatteringAmplitudes::t)
      .def_readonly("R", &ScatteringAmplitudes::R)
      .def_readonly("T", &ScatteringAmplitudes::T)
      .def_property_readonly("A", &ScatteringAmplitudes::A);

  m.def("effective_index", &effective_index, py::arg("slab"));
  m.def(
      "tmm_scatter", [](const std::vector<std::pair<cplx, double>>& layers, cplx f) {
        return tmm_scatter(make_stack(layers), f);
      },
      py::arg("layers"), py::arg("freq"), "Layers as (complex index, thickness) pairs in lambda0 units.");
  m.def(
      "effective_scatter", [](const CavitySpec& c, cplx f) { return tmm_scatter(effective_stack(c), f); },
      py::arg("cavity"), py::arg("freq"));

  py::class_<RcwaConfig>(m, "RcwaConfig")
      .def(py::init([](int half_order, Polarization pol, std::array<double, 2> k, bool sym) {
             RcwaConfig c;
             c.half_order = half_order;
             c.polarization = pol;
             c.bloch_k = k;
             c.use_symmetry = sym;
             c.validate();
             return c;
           }),
           py::arg("half_order") = 4, py::arg("polarization") = Polarization::X,
           py::arg("bloch_k") = std::array<double, 2>{0.0, 0.0}, py::arg("use_symmetry") = true)
      .def_readwrite("half_order", &RcwaConfig::half_order)
      .def_readwrite("factorization", &RcwaConfig::factorization)
      .def_readwrite("polarization", &RcwaConfig::polarization)
      .def_readwrite("bloch_k", &RcwaConfig::bloch_k)
      .def_readwrite("use_symmetry", &RcwaConfig::use_symmetry);

  m.def(
      "rcwa_scatter", [](const PhcSlabSpec& s, cplx f, const RcwaConfig& c) { return rcwa_scatter(s, f, c); },
      py::arg("slab"), py::arg("freq"), py::arg("config") = RcwaConfig{});
  m.def(
      "rcwa_scatter", [](const CavitySpec& s, cplx f, const RcwaConfig& c) { return rcwa_scatter(s, f, c); },
      py::arg("cavity"), py::arg("freq"), py::arg("config") = RcwaConfig{});

  py::class_<Eigenmode>(m, "Eigenmode")
      .def_readonly("f_c", &Eigenmode::f_c)
      .def_readonly("q", &Eigenmode::q)
      .def_readonly("parity", &Eigenmode::parity)
      .def_readonly("Q", &Eigenmode::Q)
      .def_readonly("residual", &Eigenmode::residual)
      .def_readonly("fit_derived", &Eigenmode::fit_derived);

  m.def(
      "find_pole",
      [](const CavitySpec& c, cplx guess, Parity parity, const RcwaConfig& cfg) {
        py::gil_scoped_release release;
        return find_pole(CavityPoleProblem(c, cfg), guess, parity);
      },
      py::arg("cavity"), py::arg("guess"), py::arg("parity") = Parity::Unknown, py::arg("config") = RcwaConfig{},
      "Cavity resonance near `guess`; f_c has Im >= 0 for decaying modes.");

  py::class_<FanoParams>(m, "FanoParams")
      .def(py::init([](double wf, double ke, double ki, cplx rd, cplx td) { return FanoParams{wf, ke, ki, rd, td}; }),
           py::arg("omega_f") = 1.0, py::arg("kappa_e") = 1e-3, py::arg("kappa_i") = 0.0,
           py::arg("r_d") = cplx(0.0, 0.0), py::arg("t_d") = cplx(0.0, -1.0))
      .def_readwrite("omega_f", &FanoParams::omega_f)
      .def_readwrite("kappa_e", &FanoParams::kappa_e)
      .def_readwrite("kappa_i", &FanoParams::kappa_i)
      .def_readwrite("r_d", &FanoParams::r_d)
      .def_readwrite("t_d", &FanoParams::t_d);

  m.def(
      "fano_rt", [](const FanoParams& p, double w) { return fano_rt(p, w); }, py::arg("params"), py::arg("omega"));
  m.def(
      "double_slab_response",
      [](const FanoParams& p, double zeta_c, double zeta_delta, double w, double q) {
        return double_slab_response(DoubleSlabCmt{p, {}, zeta_c, zeta_delta, false}, w, q);
      },
      py::arg("params"), py::arg("zeta_c"), py::arg("zeta_delta"), py::arg("omega"), py::arg("q"));
  m.def(
      "supermode_eigenvalues",
      [](const FanoParams& p, double zeta_c, double zeta_delta, double q) {
        return supermode_eigenvalues(DoubleSlabCmt{p, {}, zeta_c, zeta_delta, false}, q);
      },
      py::arg("params"), py::arg("zeta_c"), py::arg("zeta_delta"), py::arg("q"));

  m.def(
      "figure_of_merit",
      [](cplx g, cplx g2, double kappa_hz, double m_eff, double q_m, double temperature, double f_m) {
        MechanicalSpec mech;
        mech.m_eff = m_eff;
        mech.q_m = q_m;
        mech.temperature = temperature;
        mech.omega_m = to_angular(Hertz{f_m});
        return from_json(to_json(figure_of_merit(g, g2, Hertz{kappa_hz}, mech)));
      },
      py::arg("g_hz_per_m"), py::arg("g2_hz_per_m2"), py::arg("kappa_hz"), py::arg("m_eff"), py::arg("q_m"),
      py::arg("temperature"), py::arg("f_m"), "Optomechanical figures of merit as a dict (SI units).");

  m.def(
      "validate_config",
      [](const py::object& config, const std::vector<std::string>& overrides) {
        return job_from(config, overrides).hash();
      },
      py::arg("config"), py::arg("overrides") = std::vector<std::string>{},
      "Validates a job document and returns its SHA-256 hash.");
  m.def(
      "run",
      [](const py::object& config, const std::string& out_dir, int threads, std::vector<std::string> overrides) {
        const JobConfig job = job_from(config, overrides);
        SweepOutcome r;
        {
          py::gil_scoped_release release;
          r = run_sweep(job, {out_dir, threads, 0});
        }
        if (r.failed) throw NumericalError(r.message);
        py::dict out;
        out["summary"] = r.summary;
        out["record"] = from_json(r.record.to_json());
        return out;
      },
      py::arg("config"), py::arg("out_dir") = "out", py::arg("threads") = 1,
      py::arg("overrides") = std::vector<std::string>{}, "Runs a job and returns its run record.");

  m.attr("__version__") = kToolVersion;
}
