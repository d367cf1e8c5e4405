#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "mcloc/icp.hpp"
#include "mcloc/index.hpp"
#include "mcloc/io.hpp"
#include "mcloc/metrics.hpp"
#include "mcloc/objectives.hpp"
#include "mcloc/oracle.hpp"
#include "mcloc/search.hpp"
#include "mcloc/synth.hpp"

namespace py = pybind11;
using namespace mcloc;

namespace {

using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<Point3> to_points(const DoubleArray& arr) {
  if (arr.ndim() != 2 || arr.shape(1) != 3) {
    throw std::invalid_argument("expected an (N, 3) array");
  }
  std::vector<Point3> out(arr.shape(0));
  auto a = arr.unchecked<2>();
  for (py::ssize_t i = 0; i < arr.shape(0); ++i) {
    out[i] = {a(i, 0), a(i, 1), a(i, 2)};
  }
  return out;
}

std::vector<UnitNormal3> to_normals(const DoubleArray& arr) {
  if (arr.ndim() != 2 || arr.shape(1) != 3) {
    throw std::invalid_argument("expected an (N, 3) array");
  }
  std::vector<UnitNormal3> out(arr.shape(0));
  auto a = arr.unchecked<2>();
  for (py::ssize_t i = 0; i < arr.shape(0); ++i) {
    out[i] = {a(i, 0), a(i, 1), a(i, 2)};
  }
  return out;
}

py::array_t<double> from_points(const std::vector<Point3>& pts) {
  py::array_t<double> arr({static_cast<py::ssize_t>(pts.size()),
                           static_cast<py::ssize_t>(3)});
  auto a = arr.mutable_unchecked<2>();
  for (size_t i = 0; i < pts.size(); ++i) {
    a(i, 0) = pts[i].x;
    a(i, 1) = pts[i].y;
    a(i, 2) = pts[i].z;
  }
  return arr;
}

py::array_t<double> from_normals(const std::vector<UnitNormal3>& ns) {
  py::array_t<double> arr({static_cast<py::ssize_t>(ns.size()),
                           static_cast<py::ssize_t>(3)});
  auto a = arr.mutable_unchecked<2>();
  for (size_t i = 0; i < ns.size(); ++i) {
    a(i, 0) = ns[i].nx;
    a(i, 1) = ns[i].ny;
    a(i, 2) = ns[i].nz;
  }
  return arr;
}

py::array_t<double> grid_to_array(const Grid2<double>& grid) {
  const int dim = grid.dim();
  py::array_t<double> arr({static_cast<py::ssize_t>(dim),
                           static_cast<py::ssize_t>(dim)});
  auto a = arr.mutable_unchecked<2>();
  for (int j = 0; j < dim; ++j) {
    for (int i = 0; i < dim; ++i) a(j, i) = grid(i, j);
  }
  return arr;
}

Pose2 to_pose(const std::array<double, 3>& v) { return {v[0], v[1], v[2]}; }

py::dict metrics_dict(const EpochMetrics& m) {
  py::dict d;
  d["peak_ratio"] = m.peak_ratio ? py::object(py::float_(*m.peak_ratio))
                                 : py::object(py::none());
  d["kurtosis"] = m.kurtosis ? py::object(py::float_(*m.kurtosis))
                             : py::object(py::none());
  d["kl_divergence"] = m.kl_divergence
                           ? py::object(py::float_(*m.kl_divergence))
                           : py::object(py::none());
  d["plateau_cells"] = m.plateau_distance
                           ? py::object(py::int_(*m.plateau_distance))
                           : py::object(py::none());
  d["ray"] = py::make_tuple(m.ray.anchor_i, m.ray.anchor_j, m.ray.dir_x,
                            m.ray.dir_y);
  return d;
}

struct PyResult {
  LocalizationResult result;
};

ScanCloud make_scan(const DoubleArray& points, const py::object& normals) {
  ScanCloud scan;
  scan.points = to_points(points);
  if (!normals.is_none()) scan.normals = to_normals(normals.cast<DoubleArray>());
  return scan;
}

MapCloud make_map(const DoubleArray& points, const DoubleArray& normals) {
  MapCloud map;
  map.points = to_points(points);
  map.normals = to_normals(normals);
  return map;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Maximum consensus LiDAR localization on a discretized pose grid";

  py::enum_<Objective>(m, "Objective")
      .value("COUNT", Objective::kCount)
      .value("HELMERT", Objective::kHelmert);
  py::enum_<MatchMode>(m, "MatchMode")
      .value("ALL_PAIRS", MatchMode::kAllPairs)
      .value("ONE_PER_SCAN_POINT", MatchMode::kOnePerScanPoint);
  py::enum_<Layout>(m, "Layout")
      .value("CORRIDOR", Layout::kCorridor)
      .value("CROSSING", Layout::kCrossing)
      .value("CUSTOM", Layout::kCustom);
  py::enum_<ProtrusionSide>(m, "ProtrusionSide")
      .value("BOTH", ProtrusionSide::kBoth)
      .value("POSITIVE_ONLY", ProtrusionSide::kPositiveOnly)
      .value("NEGATIVE_ONLY", ProtrusionSide::kNegativeOnly);

  py::class_<SearchSpec>(m, "SearchSpec")
      .def(py::init<>())
      .def_readwrite("half_extent_xy", &SearchSpec::half_extent_xy)
      .def_readwrite("cell_size", &SearchSpec::cell_size)
      .def_readwrite("heading_half_range", &SearchSpec::heading_half_range)
      .def_readwrite("heading_step", &SearchSpec::heading_step)
      .def_readwrite("epsilon", &SearchSpec::epsilon)
      .def_readwrite("match_mode", &SearchSpec::match_mode)
      .def("grid_dim", &SearchSpec::grid_dim)
      .def("heading_count", &SearchSpec::heading_count)
      .def("heading_angle", &SearchSpec::heading_angle)
      .def("cell_center", &SearchSpec::cell_center)
      .def("cell_of", [](const SearchSpec& spec, double tx, double ty)
                          -> py::object {
        const auto cell = spec.cell_of(tx, ty);
        if (!cell) return py::none();
        return py::make_tuple(cell->i, cell->j);
      })
      .def("validate", &SearchSpec::validate);

  py::class_<SceneSpec>(m, "SceneSpec")
      .def(py::init<>())
      .def_readwrite("layout", &SceneSpec::layout)
      .def_readwrite("street_width", &SceneSpec::street_width)
      .def_readwrite("length", &SceneSpec::length)
      .def_readwrite("facade_height", &SceneSpec::facade_height)
      .def_readwrite("map_spacing", &SceneSpec::map_spacing)
      .def_readwrite("protrusion_density", &SceneSpec::protrusion_density)
      .def_readwrite("protrusion_side", &SceneSpec::protrusion_side)
      .def_readwrite("seed", &SceneSpec::seed);

  py::class_<SensorSpec>(m, "SensorSpec")
      .def(py::init<>())
      .def_readwrite("layers", &SensorSpec::layers)
      .def_readwrite("azimuth_step", &SensorSpec::azimuth_step)
      .def_readwrite("noise_sigma", &SensorSpec::noise_sigma)
      .def_readwrite("height", &SensorSpec::height)
      .def_readwrite("max_range", &SensorSpec::max_range);

  py::class_<PyResult>(m, "LocalizationResult")
      .def_property_readonly("best_offset",
                             [](const PyResult& r) {
                               return py::make_tuple(r.result.best_pose.tx,
                                                     r.result.best_pose.ty,
                                                     r.result.best_pose.theta);
                             })
      .def_property_readonly("best_index",
                             [](const PyResult& r) {
                               return py::make_tuple(r.result.best_index.i,
                                                     r.result.best_index.j,
                                                     r.result.best_index.h);
                             })
      .def_property_readonly(
          "best_value", [](const PyResult& r) { return r.result.best_value; })
      .def_property_readonly(
          "seconds", [](const PyResult& r) { return r.result.seconds; })
      .def("heading_count",
           [](const PyResult& r) { return r.result.accumulator.heading_count(); })
      .def("score_grid",
           [](const PyResult& r, int h) {
             return grid_to_array(r.result.accumulator.score_grid(h));
           },
           py::arg("heading"),
           "Objective values of one heading as an array indexed [j, i]")
      .def("metrics", [](const PyResult& r) {
        return metrics_dict(compute_metrics(r.result.accumulator));
      });

  m.def("se2_apply",
        [](const std::array<double, 3>& pose, const DoubleArray& points) {
          const Pose2 p = to_pose(pose);
          std::vector<Point3> pts = to_points(points);
          for (auto& q : pts) q = se2_apply(p, q);
          return from_points(pts);
        },
        py::arg("pose"), py::arg("points"),
        "Applies (tx, ty, theta) to an (N, 3) array; z passes through");

  m.def("match_weight",
        [](const std::array<double, 3>& scan_n, const std::array<double, 3>& map_n) {
          return match_weight(UnitNormal3{scan_n[0], scan_n[1], scan_n[2]},
                              UnitNormal3{map_n[0], map_n[1], map_n[2]});
        });

  m.def("helmert_score", [](double sxx, double sxy, double syy) {
    NormalEquations2 ne;
    ne.sxx = sxx;
    ne.sxy = sxy;
    ne.syy = syy;
    return helmert_score(ne);
  });
  m.def("helmert_score_reference", [](double sxx, double sxy, double syy) {
    NormalEquations2 ne;
    ne.sxx = sxx;
    ne.sxy = sxy;
    ne.syy = syy;
    return helmert_score_reference(ne);
  });

  m.def("estimate_normals",
        [](const DoubleArray& points, int k, const std::array<double, 3>& vp,
           double degeneracy_ratio) {
          return from_normals(estimate_normals(
              to_points(points), k, Point3{vp[0], vp[1], vp[2]},
              degeneracy_ratio));
        },
        py::arg("points"), py::arg("k"), py::arg("viewpoint"),
        py::arg("degeneracy_ratio") = 0.02,
        "PCA plane normals; invalid normals come back as zero rows");

  m.def("generate_map", [](const SceneSpec& scene) {
    const MapCloud map = generate_map(scene);
    return py::make_tuple(from_points(map.points), from_normals(map.normals));
  });

  m.def("apply_density_bias",
        [](const DoubleArray& points, const DoubleArray& normals,
           const std::array<double, 6>& region, double factor, uint64_t seed) {
          DensityBias bias;
          bias.region = {region[0], region[1], region[2],
                         region[3], region[4], region[5]};
          bias.factor = factor;
          const MapCloud out =
              apply_density_bias(make_map(points, normals), bias, seed);
          return py::make_tuple(from_points(out.points),
                                from_normals(out.normals));
        },
        py::arg("points"), py::arg("normals"), py::arg("region"),
        py::arg("factor"), py::arg("seed") = 0);

  m.def("simulate_scan",
        [](const SceneSpec& scene, const std::array<double, 3>& pose,
           const SensorSpec& sensor, uint64_t seed) {
          return from_points(
              simulate_scan(scene, to_pose(pose), sensor, seed).points);
        },
        py::arg("scene"), py::arg("true_pose"),
        py::arg("sensor") = SensorSpec{}, py::arg("seed") = 0);

  m.def("maximum_consensus",
        [](const DoubleArray& scan_points, const py::object& scan_normals,
           const std::array<double, 3>& initial, const DoubleArray& map_points,
           const DoubleArray& map_normals, const SearchSpec& spec,
           Objective objective, int threads) {
          SearchOptions options;
          options.threads = threads;
          return PyResult{maximum_consensus(
              make_scan(scan_points, scan_normals), to_pose(initial),
              make_map(map_points, map_normals), spec, objective, options)};
        },
        py::arg("scan_points"), py::arg("scan_normals"), py::arg("initial"),
        py::arg("map_points"), py::arg("map_normals"), py::arg("spec"),
        py::arg("objective"), py::arg("threads") = 0);

  m.def("icp_point_to_plane",
        [](const DoubleArray& scan_points, const py::object& scan_normals,
           const DoubleArray& map_points, const DoubleArray& map_normals,
           const std::array<double, 3>& init) {
          const MapCloud map = make_map(map_points, map_normals);
          const VoxelIndex index(map.points, 0.75);
          const IcpResult r = icp_point_to_plane(
              make_scan(scan_points, scan_normals), map, index, to_pose(init));
          py::dict d;
          d["final_pose"] = py::make_tuple(r.final_pose.tx, r.final_pose.ty,
                                           r.final_pose.theta);
          d["iterations"] = r.iterations;
          d["converged"] = r.converged;
          d["final_rms"] = r.final_rms;
          return d;
        },
        py::arg("scan_points"), py::arg("scan_normals"), py::arg("map_points"),
        py::arg("map_normals"), py::arg("init"));

  m.def("grid_convergence_study",
        [](const DoubleArray& scan_points, const py::object& scan_normals,
           const DoubleArray& map_points, const DoubleArray& map_normals,
           const std::array<double, 3>& truth) {
          const MapCloud map = make_map(map_points, map_normals);
          const VoxelIndex index(map.points, 0.75);
          const ConvergenceStudy study = grid_convergence_study(
              make_scan(scan_points, scan_normals), map, index, to_pose(truth));
          py::list runs;
          for (const auto& run : study.runs) {
            py::dict d;
            d["offset"] = py::make_tuple(run.offset_x, run.offset_y);
            d["final_pose"] =
                py::make_tuple(run.result.final_pose.tx,
                               run.result.final_pose.ty,
                               run.result.final_pose.theta);
            d["reached_truth"] = run.result.reached_truth;
            runs.append(d);
          }
          return py::make_tuple(runs, study.epoch_failed);
        },
        py::arg("scan_points"), py::arg("scan_normals"), py::arg("map_points"),
        py::arg("map_normals"), py::arg("truth"));

  m.def("load_cloud", [](const std::filesystem::path& path) {
    const CloudData data = load_cloud(path);
    return py::make_tuple(from_points(data.points),
                          data.normals.empty()
                              ? py::object(py::none())
                              : py::object(from_normals(data.normals)));
  });
  m.def("save_cloud",
        [](const std::filesystem::path& path, const DoubleArray& points,
           const py::object& normals) {
          save_cloud(path, to_points(points),
                     normals.is_none() ? std::vector<UnitNormal3>{}
                                       : to_normals(normals.cast<DoubleArray>()));
        },
        py::arg("path"), py::arg("points"), py::arg("normals") = py::none());
}
