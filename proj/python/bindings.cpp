// Python bindings. Arrays cross as numpy; composite results come back as
// plain dicts so scripts need no wrapper classes.

#include <cstdint>
#include <string>
#include <vector>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "onphase/energy.hpp"
#include "onphase/error.hpp"
#include "onphase/ingest.hpp"
#include "onphase/interaction_graph.hpp"
#include "onphase/lattice.hpp"
#include "onphase/potts.hpp"
#include "onphase/scaling.hpp"
#include "onphase/sweep.hpp"

namespace py = pybind11;
using namespace onphase;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

py::dict fit_dict(const scaling::CriticalFit& f) {
  py::dict d;
  d["critical_temperature"] = f.critical_temperature;
  d["critical_energy"] = f.critical_energy;
  d["amplitude_plus"] = f.amplitude_plus;
  d["amplitude_minus"] = f.amplitude_minus;
  d["alpha"] = f.alpha;
  d["alpha_prime"] = f.alpha_prime;
  d["residual_sse"] = f.residual_sse;
  d["d_internal"] = f.d_internal;
  d["converged"] = f.converged;
  d["iterations"] = f.iterations;
  return d;
}

energy::EnergyCurve make_curve(const std::vector<double>& t, const std::vector<double>& e,
                               const std::vector<double>& se) {
  if (t.size() != e.size() || (!se.empty() && se.size() != t.size())) {
    throw Error(ErrorKind::Validation, "temperatures, energies and stderr must have equal length");
  }
  energy::EnergyCurve c;
  for (std::size_t i = 0; i < t.size(); ++i) c.points.push_back({t[i], e[i], se.empty() ? 0.0 : se[i], 1});
  return c;
}

ingest::EmbeddingSequence sequence_from(const Array& vectors) {
  if (vectors.ndim() != 2) throw Error(ErrorKind::Validation, "expected a 2-D array (length x dim)");
  const auto* p = vectors.data();
  std::vector<double> v(p, p + vectors.size());
  return ingest::EmbeddingSequence(static_cast<std::size_t>(vectors.shape(1)), std::move(v), 0.0);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "onphase native core";

  // Errors surface as onphase.OnphaseError (defined in __init__.py) with
  // the kind as a string attribute.
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      const py::object cls = py::module_::import("onphase").attr("OnphaseError");
      const py::object inst = cls(std::string(e.what()), std::string(to_string(e.kind())));
      PyErr_SetObject(cls.ptr(), inst.ptr());
    }
  });

  // ingest
  py::class_<ingest::EmbeddingTable>(m, "EmbeddingTable")
      .def(py::init([](const py::array_t<float, py::array::c_style | py::array::forcecast>& values,
                       const std::string& model_id) {
             if (values.ndim() != 2) throw Error(ErrorKind::Validation, "expected a 2-D array (V x N)");
             std::vector<float> v(values.data(), values.data() + values.size());
             return ingest::EmbeddingTable(static_cast<std::size_t>(values.shape(0)),
                                           static_cast<std::size_t>(values.shape(1)), std::move(v), model_id);
           }),
           py::arg("values"), py::arg("model_id") = "")
      .def_property_readonly("vocab_size", &ingest::EmbeddingTable::vocab_size)
      .def_property_readonly("dim", &ingest::EmbeddingTable::dim)
      .def_property_readonly("model_id", &ingest::EmbeddingTable::model_id)
      .def("to_numpy", [](const ingest::EmbeddingTable& t) {
        py::array_t<float> out({t.vocab_size(), t.dim()});
        std::copy(t.values().begin(), t.values().end(), out.mutable_data());
        return out;
      });
  m.def("load_embedding_table", &ingest::load_embedding_table, py::arg("path"));
  m.def("write_embedding_table", &ingest::write_embedding_table, py::arg("table"), py::arg("path"),
        py::arg("write_sidecar") = false);

  m.def(
      "read_token_dump",
      [](const std::filesystem::path& path) {
        py::list out;
        for (const auto& s : ingest::load_token_dump(path)) {
          py::dict d;
          d["token_ids"] = s.token_ids;
          d["temperature"] = s.temperature;
          d["prompt_id"] = s.prompt_id;
          d["model_id"] = s.model_id;
          out.append(d);
        }
        return out;
      },
      py::arg("path"));
  m.def(
      "write_token_dump",
      [](const std::vector<py::dict>& records, const std::filesystem::path& path) {
        std::vector<ingest::TokenSequence> seqs;
        for (const auto& d : records) {
          ingest::TokenSequence s;
          s.token_ids = d["token_ids"].cast<std::vector<std::int64_t>>();
          s.temperature = d["temperature"].cast<double>();
          s.prompt_id = d.contains("prompt_id") ? d["prompt_id"].cast<std::string>() : "";
          s.model_id = d.contains("model_id") ? d["model_id"].cast<std::string>() : "";
          seqs.push_back(std::move(s));
        }
        ingest::write_token_dump(seqs, path);
      },
      py::arg("records"), py::arg("path"));

  // energy
  m.def(
      "sequence_energy",
      [](const Array& vectors, const std::string& convention) {
        return energy::sequence_energy(sequence_from(vectors), energy::parse_convention(convention));
      },
      py::arg("vectors"), py::arg("convention") = energy::to_string(energy::EnergyConvention{}));
  m.def(
      "transition_gap",
      [](const std::vector<double>& t, const std::vector<double>& e, double tc, double tail_fraction) {
        return energy::transition_gap(make_curve(t, e, {}), tc, tail_fraction);
      },
      py::arg("temperatures"), py::arg("energies"), py::arg("critical_temperature"),
      py::arg("tail_fraction") = 0.2);
  m.def(
      "diagnose_capacity",
      [](double gap, double tolerance) { return energy::to_string(energy::diagnose_capacity(gap, tolerance)); },
      py::arg("gap"), py::arg("tolerance") = 0.1);

  // attention graph
  m.def(
      "twonn_dimension",
      [](const Array& points) {
        if (points.ndim() != 2) throw Error(ErrorKind::Validation, "expected a 2-D array (count x dim)");
        graph::PointCloud c;
        c.dim = static_cast<std::size_t>(points.shape(1));
        c.coords.assign(points.data(), points.data() + points.size());
        return graph::twonn_dimension(c);
      },
      py::arg("points"));
  m.def("dominance_threshold", &graph::dominance_threshold, py::arg("dim"), py::arg("k") = 1.0);
  m.def(
      "interaction_edges",
      [](const Array& vectors, double threshold) {
        return graph::build_interaction_graph(sequence_from(vectors), threshold).edges();
      },
      py::arg("vectors"), py::arg("threshold"));

  // scaling
  m.def("internal_dimension", &scaling::internal_dimension, py::arg("alpha"));
  m.def("alpha_of_dimension", &scaling::alpha_of_dimension, py::arg("d"));
  m.def("nu_of_dimension", &scaling::nu_of_dimension, py::arg("d"));
  m.def(
      "fit_critical",
      [](const std::vector<double>& t, const std::vector<double>& e, const std::vector<double>& se) {
        return fit_dict(scaling::fit_critical(make_curve(t, e, se)));
      },
      py::arg("temperatures"), py::arg("energies"), py::arg("stderr") = std::vector<double>{});

  // lattice
  m.def(
      "simulate",
      [](std::size_t dim, std::size_t side, std::size_t ncomp, double temperature, std::size_t therm,
         std::size_t sweeps, const std::string& sampler, std::uint64_t seed, std::uint64_t chain) {
        lattice::SimulationConfig c;
        c.dim = dim;
        c.side = side;
        c.ncomp = ncomp;
        c.temperature = temperature;
        c.thermalization_sweeps = therm;
        c.measurement_sweeps = sweeps;
        c.sampler = lattice::parse_sampler(sampler);
        c.seed = seed;
        c.chain_index = chain;
        lattice::ObservableSeries s;
        {
          py::gil_scoped_release release;
          s = lattice::run_simulation(c);
        }
        const auto row = lattice::summarize(s);
        py::dict d;
        d["temperature"] = row.temperature;
        d["mean_energy_per_site"] = row.mean_energy_per_site;
        d["stderr"] = row.std_error;
        d["specific_heat"] = row.specific_heat;
        d["susceptibility"] = row.susceptibility;
        d["energies"] = py::array_t<double>(s.energies.size(), s.energies.data());
        d["acceptance_rate"] = s.acceptance_rate;
        d["mean_cluster_size"] = s.mean_cluster_size;
        return d;
      },
      py::arg("dim") = 2, py::arg("side") = 8, py::arg("ncomp") = 1, py::arg("temperature") = 2.0,
      py::arg("therm") = 1000, py::arg("sweeps") = 10000, py::arg("sampler") = "wolff", py::arg("seed") = 0,
      py::arg("chain") = 0);
  m.def(
      "enumerate_exact",
      [](std::size_t dim, std::size_t side, double temperature) {
        const auto x = lattice::enumerate_exact(dim, side, temperature);
        return py::make_tuple(x.energy_per_site, x.specific_heat_per_site);
      },
      py::arg("dim"), py::arg("side"), py::arg("temperature"));
  m.def(
      "potts_basis",
      [](std::size_t n) {
        const auto b = lattice::potts_basis(n);
        py::array_t<double> out({b.state_count(), n});
        for (std::size_t a = 0; a < b.state_count(); ++a) {
          std::copy(b.state(a).begin(), b.state(a).end(), out.mutable_data() + a * n);
        }
        return out;
      },
      py::arg("ncomp"));

  // sweep harness (offline half)
  m.def(
      "analyze_run",
      [](const std::filesystem::path& run_dir, const std::filesystem::path& embeddings,
         const std::string& convention, double tail_fraction, double tolerance) {
        sweep::AnalysisOptions o;
        o.convention = energy::parse_convention(convention);
        o.tail_fraction = tail_fraction;
        o.tolerance = tolerance;
        const auto table = ingest::load_embedding_table(embeddings);
        const auto report = sweep::analyze_run(run_dir, table, o);
        sweep::save_report(report, run_dir / sweep::kAnalysisFile);
        return py::module_::import("json").attr("loads")(sweep::report_to_json(report));
      },
      py::arg("run_dir"), py::arg("embeddings"),
      py::arg("convention") = energy::to_string(energy::EnergyConvention{}), py::arg("tail_fraction") = 0.2,
      py::arg("tolerance") = 0.1);
  m.def(
      "render_report",
      [](const std::filesystem::path& run_dir, const std::filesystem::path& out_dir) {
        return sweep::render_report(sweep::load_report(run_dir / sweep::kAnalysisFile), out_dir);
      },
      py::arg("run_dir"), py::arg("out_dir"));
}
