#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "sssbathy/cli.hpp"
#include "sssbathy/error.hpp"
#include "sssbathy/fusion.hpp"
#include "sssbathy/geom.hpp"
#include "sssbathy/metrics.hpp"
#include "sssbathy/nn/ops.hpp"
#include "sssbathy/pipeline.hpp"
#include "sssbathy/raster.hpp"
#include "sssbathy/terrain.hpp"

namespace py = pybind11;
using namespace sssbathy;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Array to_numpy(const Array2D<double>& a) {
  Array out({a.rows(), a.cols()});
  std::copy(a.data().begin(), a.data().end(), out.mutable_data());
  return out;
}

Array2D<double> from_numpy(const Array& a) {
  if (a.ndim() != 2) throw py::value_error("expected a 2-D array");
  Array2D<double> out(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
  std::copy(a.data(), a.data() + a.size(), out.data().begin());
  return out;
}

py::dict spec_dict(const GridSpec& s) {
  py::dict d;
  d["x0"] = s.x0;
  d["y0"] = s.y0;
  d["cell_size"] = s.cell_size;
  d["n_cols"] = s.n_cols;
  d["n_rows"] = s.n_rows;
  return d;
}

GridSpec spec_from(const py::dict& d) {
  GridSpec s;
  s.x0 = d["x0"].cast<double>();
  s.y0 = d["y0"].cast<double>();
  s.cell_size = d["cell_size"].cast<double>();
  s.n_cols = d["n_cols"].cast<std::size_t>();
  s.n_rows = d["n_rows"].cast<std::size_t>();
  s.validate();
  return s;
}

// Rasters cross the boundary as (values, spec) with nodata mapped to NaN.
py::tuple raster_out(const Raster& r) {
  Array2D<double> v = r.values();
  for (double& x : v.data()) {
    if (r.is_nodata(x)) x = std::numeric_limits<double>::quiet_NaN();
  }
  return py::make_tuple(to_numpy(v), spec_dict(r.spec()));
}

Raster raster_in(const Array& values, const py::dict& spec) {
  const GridSpec s = spec_from(spec);
  Array2D<double> v = from_numpy(values);
  if (v.rows() != s.n_rows || v.cols() != s.n_cols) throw py::value_error("array shape does not match the grid spec");
  Raster r(s, kNoData);
  for (std::size_t i = 0; i < v.size(); ++i) r.values().data()[i] = std::isfinite(v.data()[i]) ? v.data()[i] : kNoData;
  return r;
}

SonarPose make_pose(double x, double y, double z, double heading, double altitude) {
  SonarPose p;
  p.position = Vec3(x, y, z);
  p.heading = heading;
  p.altitude = altitude;
  return p;
}

std::vector<PointEstimate> points_in(const Array& pts) {
  if (pts.ndim() != 2 || pts.shape(1) != 4) throw py::value_error("points must be an (N, 4) array of x, y, z, confidence");
  std::vector<PointEstimate> out(static_cast<std::size_t>(pts.shape(0)));
  const double* d = pts.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].point = Vec3(d[4 * i], d[4 * i + 1], d[4 * i + 2]);
    out[i].confidence = d[4 * i + 3];
    out[i].provenance.ping = i;
  }
  return out;
}

py::dict grid_out(const BathyGrid& g) {
  py::dict d;
  d["depth"] = raster_out(g.depth)[0];
  d["confidence"] = raster_out(g.confidence)[0];
  d["count"] = to_numpy(g.count.values());
  d["spec"] = spec_dict(g.spec());
  return d;
}

nn::Tensor tensor_in(const Array& a) {
  const Array2D<double> v = from_numpy(a);
  return nn::Tensor(nn::Shape{1, 1, v.rows(), v.cols()}, v.data());
}

}  // namespace

PYBIND11_MODULE(_sssbathy, m) {
  m.doc() = "Sidescan bathymetry reconstruction toolkit";

  py::register_exception<ParameterError>(m, "ParameterError", PyExc_ValueError);
  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);

  m.def("grazing_angle", &grazing_angle, py::arg("altitude"), py::arg("point_altitude"), py::arg("slant_range"));
  m.def("slant_range", &slant_range, py::arg("sound_speed"), py::arg("two_way_time"));
  m.def("ground_range", &ground_range, py::arg("slant_range"), py::arg("delta_z"));
  m.def(
      "bin_to_slant_range",
      [](std::size_t bin, double max_range, std::size_t n_bins) {
        SonarParams p;
        p.max_range = max_range;
        p.n_bins = n_bins;
        return bin_to_slant_range(bin, p);
      },
      py::arg("bin"), py::arg("max_range") = 50.0, py::arg("n_bins") = 512);
  m.def(
      "backproject",
      [](double x, double y, double z, double heading, const std::string& side, double range, double relative_depth) {
        const GeoSample g = backproject_range(make_pose(x, y, z, heading, 0.0), side_from_string(side), range,
                                              relative_depth);
        return py::make_tuple(g.point.x(), g.point.y(), g.point.z());
      },
      py::arg("x"), py::arg("y"), py::arg("z"), py::arg("heading"), py::arg("side"), py::arg("range"),
      py::arg("relative_depth"), "Seabed point (x, y, z) seen at `range` with the given depth below the sensor.");

  m.def(
      "generate_heightfield",
      [](double x0, double y0, double width, double height, double cell_size, std::uint64_t seed) {
        return raster_out(generate_heightfield({x0, y0, width, height}, cell_size, SpectrumParams{}, seed));
      },
      py::arg("x0"), py::arg("y0"), py::arg("width"), py::arg("height"), py::arg("cell_size"), py::arg("seed"),
      "Random smooth seabed; returns (z array, spec dict).");

  m.def(
      "laplace_nll",
      [](const Array& mu, const Array& var, const Array& target, const Array& mask) {
        return nn::laplace_nll(nn::constant(tensor_in(mu)), nn::constant(tensor_in(var)), tensor_in(target),
                               tensor_in(mask))
            ->value[0];
      },
      py::arg("mu"), py::arg("var"), py::arg("target"), py::arg("mask"));
  m.def(
      "masked_mae",
      [](const Array& mu, const Array& target, const Array& mask) {
        return nn::masked_mae(nn::constant(tensor_in(mu)), tensor_in(target), tensor_in(mask))->value[0];
      },
      py::arg("mu"), py::arg("target"), py::arg("mask"));

  m.def(
      "fuse",
      [](const Array& points, const py::dict& spec, bool weighted, unsigned threads) {
        const auto pts = points_in(points);
        const GridSpec s = spec_from(spec);
        return grid_out(weighted ? fuse(pts, s, {threads}) : fuse_unweighted(pts, s, {threads}));
      },
      py::arg("points"), py::arg("spec"), py::arg("weighted") = true, py::arg("threads") = 1,
      "Fuses (N, 4) points [x, y, z, confidence] into a grid.");

  m.def(
      "grid_mae",
      [](const Array& depth, const Array& truth, const py::dict& spec) {
        return grid_mae(raster_in(depth, spec), raster_in(truth, spec)).to_json().dump();
      },
      py::arg("depth"), py::arg("truth"), py::arg("spec"), "JSON summary of the grid comparison.");
  m.def(
      "calibration",
      [](const std::vector<double>& residuals, const std::vector<double>& variances) {
        const auto r = calibration_from_residuals(residuals, variances);
        return py::make_tuple(r.band_fraction, r.nll);
      },
      py::arg("residuals"), py::arg("variances"), "(band fraction, NLL) of residuals under Laplace spreads.");

  m.def(
      "read_raster", [](const std::filesystem::path& p) { return raster_out(read_raster(p)); }, py::arg("path"));
  m.def(
      "default_config", [] { return config_to_json(ExperimentConfig{}).dump(); },
      "Default experiment configuration as JSON text.");
  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        py::gil_scoped_release release;
        return run_cli(args);
      },
      py::arg("args"), "Runs the command-line tool in-process; returns its exit code.");

  m.attr("__version__") = SSSBATHY_VERSION;
}
