// Python bindings. Structured values cross the boundary as JSON text; the package
// __init__ turns them into dicts. Bulk arrays go through numpy.

#include "nanowb/errors.hpp"
#include "nanowb/lattice.hpp"
#include "nanowb/recovery.hpp"
#include "nanowb/runner.hpp"
#include "nanowb/scene.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace nanowb;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

py::tuple atoms_out(const std::vector<Atom>& atoms) {
  std::vector<std::string> species;
  Array xyz({static_cast<py::ssize_t>(atoms.size()), py::ssize_t{3}});
  auto m = xyz.mutable_unchecked<2>();
  for (std::size_t k = 0; k < atoms.size(); ++k) {
    species.push_back(atoms[k].species);
    m(k, 0) = atoms[k].r.x;
    m(k, 1) = atoms[k].r.y;
    m(k, 2) = atoms[k].r.z;
  }
  return py::make_tuple(species, xyz);
}

std::vector<Atom> atoms_in(const std::vector<std::string>& species, const Array& xyz) {
  if (xyz.ndim() != 2 || xyz.shape(1) != 3 || static_cast<std::size_t>(xyz.shape(0)) != species.size())
    throw InvalidArgument("positions must have shape (n, 3) matching the species list");
  const auto r = xyz.unchecked<2>();
  std::vector<Atom> out;
  for (std::size_t k = 0; k < species.size(); ++k) out.push_back({species[k], {r(k, 0), r(k, 1), r(k, 2)}});
  return out;
}

py::dict frame_out(const FieldFrame& f) {
  Array values({static_cast<py::ssize_t>(f.ny), static_cast<py::ssize_t>(f.nx)});
  std::copy(f.values.begin(), f.values.end(), values.mutable_data());
  py::dict d;
  d["name"] = f.name;
  d["time"] = f.time;
  d["bounds"] = py::make_tuple(f.xmin, f.xmax, f.ymin, f.ymax);
  d["values"] = values;
  return d;
}

FieldFrame frame_in(const Array& values, const std::array<double, 4>& bounds, const std::string& name) {
  if (values.ndim() != 2) throw InvalidArgument("field values must be a 2-D array (ny, nx)");
  FieldFrame f;
  f.name = name;
  f.ny = static_cast<int>(values.shape(0));
  f.nx = static_cast<int>(values.shape(1));
  f.xmin = bounds[0];
  f.xmax = bounds[1];
  f.ymin = bounds[2];
  f.ymax = bounds[3];
  f.values.assign(values.data(), values.data() + values.size());
  f.validate();
  return f;
}

}  // namespace

PYBIND11_MODULE(_nanowb, m) {
  m.doc() = "nanowb core bindings";

  static PyObject* base = PyErr_NewException("nanowb._nanowb.Error", PyExc_RuntimeError, nullptr);
  static PyObject* validation = PyErr_NewException("nanowb._nanowb.ValidationError", base, nullptr);
  m.add_object("Error", py::handle(base));
  m.add_object("ValidationError", py::handle(validation));
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ValidationError& e) {
      py::list issues;
      for (const auto& i : e.issues()) issues.append(py::make_tuple(i.path, i.message));
      PyErr_SetObject(validation, py::make_tuple(e.what(), issues).ptr());
    } catch (const InvalidArgument& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const Error& e) {
      PyErr_SetString(base, e.what());
    }
  });

  m.def("validate_scene", [](const std::string& text) { return scene_to_json(parse_scene_text(text)).dump(); },
        py::arg("text"), "Validate a scene document; returns the normalized scene as JSON text.");
  m.def("scene_id", [](const std::string& text) { return scene_id(parse_scene_text(text)); }, py::arg("text"));
  m.def(
      "run_scene",
      [](const std::string& text, const std::string& root) {
        const SceneSpec scene = parse_scene_text(text);
        py::gil_scoped_release release;
        return run_scene(scene, root).dump();
      },
      py::arg("text"), py::arg("root"), "Run a scene into root/<run_id>; returns the manifest as JSON text.");

  m.def(
      "build_lattice", [](const std::string& spec) { return atoms_out(build_lattice(parse_lattice_spec(Json::parse(spec)))); },
      py::arg("spec"));
  m.def(
      "build_particle",
      [](const std::string& spec) { return atoms_out(build_particle(parse_particle_spec(Json::parse(spec)))); },
      py::arg("spec"));
  m.def(
      "to_xyz",
      [](const std::vector<std::string>& species, const Array& xyz, const std::string& comment) {
        return to_xyz(atoms_in(species, xyz), comment);
      },
      py::arg("species"), py::arg("positions"), py::arg("comment") = "");
  m.def("parse_xyz", [](const std::string& text) { return atoms_out(parse_xyz(text)); }, py::arg("text"));

  m.def(
      "detect_bands",
      [](const Array& values, const std::array<double, 4>& bounds, double threshold_factor, int min_cells) {
        const FieldFrame f = frame_in(values, bounds, "eq_plastic");
        BandOptions opt;
        opt.threshold_factor = threshold_factor;
        opt.min_cells = min_cells;
        return bands_to_json(detect_bands(f, opt), f, opt).dump();
      },
      py::arg("values"), py::arg("bounds"), py::arg("threshold_factor") = 3.0, py::arg("min_cells") = 10);
  m.def("read_field_csv", [](const std::string& path) { return frame_out(read_field_csv(path)); }, py::arg("path"));
  m.def(
      "write_field_png",
      [](const Array& values, const std::array<double, 4>& bounds, const std::string& name, const std::string& path,
         int scale) { export_field_png(frame_in(values, bounds, name), path, scale); },
      py::arg("values"), py::arg("bounds"), py::arg("name"), py::arg("path"), py::arg("scale") = 0);

  m.def(
      "recover_stress",
      [](const Array& samples, const Array& points, double radius) {
        if (samples.ndim() != 2 || samples.shape(1) != 5) throw InvalidArgument("samples must have shape (n, 5)");
        if (points.ndim() != 2 || points.shape(1) != 2) throw InvalidArgument("points must have shape (m, 2)");
        const auto s = samples.unchecked<2>();
        std::vector<StressSample> in;
        for (py::ssize_t k = 0; k < s.shape(0); ++k) in.push_back({{s(k, 0), s(k, 1)}, s(k, 2), s(k, 3), s(k, 4)});
        StressRecovery rec(std::move(in), {}, {radius});
        const auto p = points.unchecked<2>();
        Array out({p.shape(0), py::ssize_t{3}});
        auto o = out.mutable_unchecked<2>();
        for (py::ssize_t k = 0; k < p.shape(0); ++k) {
          const auto r = rec.evaluate({p(k, 0), p(k, 1)});
          o(k, 0) = r.xx;
          o(k, 1) = r.yy;
          o(k, 2) = r.xy;
        }
        return out;
      },
      py::arg("samples"), py::arg("points"), py::arg("radius"),
      "MLS stress at points (m, 2) from samples with columns x, y, sxx, syy, sxy.");
}
