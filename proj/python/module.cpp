#include "prif/cli.hpp"
#include "prif/evaluation.hpp"
#include "prif/model.hpp"
#include "prif/shapes.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cmath>
#include <limits>

namespace py = pybind11;
using namespace prif;

namespace {

using RowsX3 = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;
using TrisX3 = Eigen::Matrix<std::uint32_t, Eigen::Dynamic, 3, Eigen::RowMajor>;

std::vector<Vec3> to_points(const RowsX3& m) {
  std::vector<Vec3> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) out[static_cast<std::size_t>(i)] = m.row(i).transpose();
  return out;
}

RowsX3 from_points(const std::vector<Vec3>& pts) {
  RowsX3 m(static_cast<Eigen::Index>(pts.size()), 3);
  for (std::size_t i = 0; i < pts.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = pts[i].transpose();
  return m;
}

geometry::TriangleMesh to_mesh(const RowsX3& v, const TrisX3& f) {
  geometry::TriangleMesh mesh;
  mesh.vertices = to_points(v);
  for (Eigen::Index i = 0; i < f.rows(); ++i) mesh.triangles.push_back({f(i, 0), f(i, 1), f(i, 2)});
  return mesh;
}

py::tuple mesh_arrays(const geometry::TriangleMesh& mesh) {
  TrisX3 f(static_cast<Eigen::Index>(mesh.triangles.size()), 3);
  for (std::size_t i = 0; i < mesh.triangles.size(); ++i) {
    for (int k = 0; k < 3; ++k) f(static_cast<Eigen::Index>(i), k) = mesh.triangles[i][static_cast<std::size_t>(k)];
  }
  return py::make_tuple(from_points(mesh.vertices), f);
}

void check_pairs(const RowsX3& a, const RowsX3& b) {
  if (a.rows() != b.rows()) fail(ErrorKind::shape_mismatch, "origins and directions differ in length");
}

std::vector<rays::RayEncoding> encode_all(const RowsX3& origins, const RowsX3& dirs, rays::EncodingMode mode) {
  check_pairs(origins, dirs);
  std::vector<rays::RayEncoding> enc;
  enc.reserve(static_cast<std::size_t>(origins.rows()));
  for (Eigen::Index i = 0; i < origins.rows(); ++i) {
    enc.push_back(rays::encode_ray({origins.row(i).transpose(), dirs.row(i).transpose()}, mode));
  }
  return enc;
}

}  // namespace

PYBIND11_MODULE(_prif, m) {
  m.doc() = "Primary ray-based implicit functions";

  py::register_exception<PrifError>(m, "PrifError", PyExc_RuntimeError);

  m.def("set_threads", &set_thread_count, py::arg("n"));

  m.def(
      "perpendicular_foot",
      [](const RowsX3& p, const RowsX3& d) {
        check_pairs(p, d);
        RowsX3 out(p.rows(), 3);
        for (Eigen::Index i = 0; i < p.rows(); ++i) {
          out.row(i) = rays::perpendicular_foot(p.row(i).transpose(), rays::checked_unit(d.row(i).transpose())).transpose();
        }
        return out;
      },
      py::arg("points"), py::arg("directions"), "Point on each ray's line closest to the origin.");

  m.def(
      "signed_displacement",
      [](const RowsX3& origins, const RowsX3& dirs, const RowsX3& hits) {
        check_pairs(origins, dirs);
        check_pairs(origins, hits);
        Eigen::VectorXd s(origins.rows());
        for (Eigen::Index i = 0; i < origins.rows(); ++i) {
          const Vec3 d = rays::checked_unit(dirs.row(i).transpose());
          s[i] = rays::signed_displacement(rays::perpendicular_foot(origins.row(i).transpose(), d), d, hits.row(i).transpose());
        }
        return s;
      },
      py::arg("origins"), py::arg("directions"), py::arg("hits"));

  m.def("load_mesh", [](const std::string& path) { return mesh_arrays(geometry::load_mesh(path)); }, py::arg("path"),
        "Returns (vertices, triangles).");
  m.def(
      "icosphere", [](int level, double radius) { return mesh_arrays(geometry::make_icosphere(level, radius)); },
      py::arg("level") = 3, py::arg("radius") = 1.0);
  m.def(
      "normalize",
      [](const RowsX3& v, const TrisX3& f, double target_radius) {
        return mesh_arrays(geometry::normalize_mesh(to_mesh(v, f), target_radius).mesh);
      },
      py::arg("vertices"), py::arg("triangles"), py::arg("target_radius") = geometry::kDefaultTargetRadius);

  m.def(
      "cast_rays",
      [](const RowsX3& v, const TrisX3& f, const RowsX3& origins, const RowsX3& dirs) {
        check_pairs(origins, dirs);
        const auto mesh = to_mesh(v, f);
        const auto bvh = geometry::build_bvh(mesh);
        Eigen::VectorXd t(origins.rows());
        for (Eigen::Index i = 0; i < origins.rows(); ++i) {
          const auto hit = geometry::cast_ray(bvh, mesh, {origins.row(i).transpose(), dirs.row(i).transpose()});
          t[i] = hit ? hit->t : std::numeric_limits<double>::quiet_NaN();
        }
        return t;
      },
      py::arg("vertices"), py::arg("triangles"), py::arg("origins"), py::arg("directions"),
      "Distance to the first hit along each ray, NaN on a miss.");

  m.def(
      "rig_rays",
      [](int cameras, int res, double radius, double fov_degrees) {
        const auto rig =
            geometry::fibonacci_camera_rig(cameras, radius, geometry::degrees_to_radians(fov_degrees), res, res);
        const auto rays = model::rig_rays(rig);
        RowsX3 o(static_cast<Eigen::Index>(rays.size()), 3), d(static_cast<Eigen::Index>(rays.size()), 3);
        for (std::size_t i = 0; i < rays.size(); ++i) {
          o.row(static_cast<Eigen::Index>(i)) = rays[i].origin.transpose();
          d.row(static_cast<Eigen::Index>(i)) = rays[i].direction.transpose();
        }
        return py::make_tuple(o, d);
      },
      py::arg("cameras"), py::arg("res"), py::arg("radius") = geometry::kDefaultRigRadius,
      py::arg("fov_degrees") = geometry::kDefaultFovDegrees, "Origins and directions of every pixel ray on the rig.");

  m.def(
      "chamfer",
      [](const RowsX3& a, const RowsX3& b) {
        const auto r = eval::chamfer(to_points(a), to_points(b));
        py::dict d;
        d["mean"] = r.mean;
        d["median"] = r.median;
        d["a_to_b"] = r.a_to_b;
        d["b_to_a"] = r.b_to_a;
        return d;
      },
      py::arg("a"), py::arg("b"));

  py::class_<model::PrifModel>(m, "Model")
      .def_static(
          "load", [](const std::string& path) { return model::load_model(path); }, py::arg("path"))
      .def("save", [](const model::PrifModel& self, const std::string& path) { model::save_model(path, self); },
           py::arg("path"))
      .def_property_readonly("encoding", [](const model::PrifModel& self) { return std::string(rays::to_string(self.mode())); })
      .def_property_readonly("latent_dim", &model::PrifModel::latent_dim)
      .def_property_readonly("shape_count", &model::PrifModel::shape_count)
      .def_property_readonly("queries", [](const model::PrifModel& self) { return self.queries().value(); })
      .def(
          "predict",
          [](const model::PrifModel& self, const RowsX3& origins, const RowsX3& dirs, int shape) {
            const auto enc = encode_all(origins, dirs, self.mode());
            const std::vector<std::uint16_t> ids(enc.size(), static_cast<std::uint16_t>(shape));
            py::gil_scoped_release release;
            auto p = model::prif_forward(self, enc, ids);
            return std::make_pair(Eigen::VectorXf(p.s), Eigen::VectorXf(p.a));
          },
          py::arg("origins"), py::arg("directions"), py::arg("shape") = 0,
          "Signed displacement and foreground probability per ray.")
      .def(
          "hit_points",
          [](const model::PrifModel& self, const RowsX3& origins, const RowsX3& dirs, int shape) {
            const auto enc = encode_all(origins, dirs, self.mode());
            const std::vector<std::uint16_t> ids(enc.size(), static_cast<std::uint16_t>(shape));
            const auto p = model::prif_forward(self, enc, ids);
            RowsX3 h(origins.rows(), 3);
            for (Eigen::Index i = 0; i < origins.rows(); ++i) {
              const auto& e = enc[static_cast<std::size_t>(i)];
              h.row(i) = rays::hit_point(rays::foot_of(e), e.direction, p.s[i]).transpose();
              if (!(p.a[i] > model::kDefaultMaskThreshold)) h.row(i).setConstant(std::numeric_limits<double>::quiet_NaN());
            }
            return h;
          },
          py::arg("origins"), py::arg("directions"), py::arg("shape") = 0, "Predicted hit points, NaN rows for background.");

  m.def(
      "run_cli",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "prif");
        return cli::run(args);
      },
      py::arg("args"), "Run a prif subcommand; returns the exit code.");
}
