#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <algorithm>
#include <string>
#include <vector>

#include "meshreg/baseline.hpp"
#include "meshreg/delaunay.hpp"
#include "meshreg/errors.hpp"
#include "meshreg/field.hpp"
#include "meshreg/image.hpp"
#include "meshreg/mesh_gen.hpp"
#include "meshreg/registration.hpp"
#include "meshreg/report.hpp"
#include "meshreg/synthetic.hpp"
#include "meshreg/trimesh.hpp"

namespace py = pybind11;
using namespace meshreg;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

// Images cross the boundary as (height, width) float64 arrays.
ImageGrid to_image(const Array& a) {
    if (a.ndim() != 2) throw ConfigError("image must be a 2-D array");
    const auto h = static_cast<std::size_t>(a.shape(0)), w = static_cast<std::size_t>(a.shape(1));
    return ImageGrid(w, h, std::vector<double>(a.data(), a.data() + a.size()));
}

Array from_image(const ImageGrid& img) {
    Array out({img.height(), img.width()});
    std::copy(img.data().begin(), img.data().end(), out.mutable_data());
    return out;
}

std::vector<Vec2> to_points(const Array& a) {
    if (a.ndim() != 2 || a.shape(1) != 2) throw ConfigError("expected an (n, 2) array");
    std::vector<Vec2> pts(static_cast<std::size_t>(a.shape(0)));
    for (std::size_t i = 0; i < pts.size(); ++i) pts[i] = {a.at(i, 0), a.at(i, 1)};
    return pts;
}

Array from_points(std::span<const Vec2> pts) {
    Array out({pts.size(), std::size_t{2}});
    auto v = out.mutable_unchecked<2>();
    for (std::size_t i = 0; i < pts.size(); ++i) {
        v(i, 0) = pts[i].x;
        v(i, 1) = pts[i].y;
    }
    return out;
}

// Fields as a (2, height, width) array: ux then uy.
Array from_field(const DenseField& f) {
    Array out({std::size_t{2}, f.height, f.width});
    double* p = out.mutable_data();
    std::copy(f.ux.begin(), f.ux.end(), p);
    std::copy(f.uy.begin(), f.uy.end(), p + f.ux.size());
    return out;
}

DenseField to_field(const Array& a) {
    if (a.ndim() != 3 || a.shape(0) != 2) throw ConfigError("field must be a (2, height, width) array");
    DenseField f(static_cast<std::size_t>(a.shape(2)), static_cast<std::size_t>(a.shape(1)));
    const double* p = a.data();
    std::copy(p, p + f.ux.size(), f.ux.begin());
    std::copy(p + f.ux.size(), p + 2 * f.ux.size(), f.uy.begin());
    return f;
}

SolverConfig make_config(double tau, double lambda, std::size_t iterations, std::size_t passes,
                         double tol, const std::string& gradient) {
    SolverConfig cfg;
    cfg.tau = tau;
    cfg.lambda = lambda;
    cfg.max_iterations = iterations;
    cfg.smoothing_passes = passes;
    cfg.energy_tolerance = tol;
    cfg.gradient = gradient_source_from_string(gradient);
    cfg.validate();
    return cfg;
}

py::dict report_dict(const RegistrationReport& r) {
    return py::module_::import("json").attr("loads")(to_json(r).dump());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Mesh-based deformable image registration";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);
    py::register_exception<GeometryError>(m, "GeometryError", PyExc_RuntimeError);
    py::register_exception<DivergenceError>(m, "DivergenceError", PyExc_ArithmeticError);

    m.def("load_image", [](const std::filesystem::path& p) { return from_image(load_image(p)); },
          py::arg("path"));
    m.def("save_image", [](const Array& img, const std::filesystem::path& p) { save_image(to_image(img), p); },
          py::arg("image"), py::arg("path"), "PGM or PNG by extension; values are rounded and clamped to 0..255.");
    m.def("sample", [](const Array& img, double x, double y) { return sample(to_image(img), {x, y}); },
          py::arg("image"), py::arg("x"), py::arg("y"), "Bicubic sample with border clamping.");
    m.def("msd", [](const Array& a, const Array& b) { return msd(to_image(a), to_image(b)); });
    m.def("textured_image", [](std::size_t w, std::size_t h, std::uint64_t seed) {
        return from_image(synthetic::textured_image(w, h, seed));
    }, py::arg("width"), py::arg("height"), py::arg("seed") = 1);

    py::class_<TriMesh>(m, "Mesh")
        .def(py::init([](const Array& v, const py::array_t<long long, py::array::c_style | py::array::forcecast>& t) {
                 if (t.ndim() != 2 || t.shape(1) != 3) throw ConfigError("triangles must be an (m, 3) array");
                 std::vector<Triangle> tris(static_cast<std::size_t>(t.shape(0)));
                 for (std::size_t i = 0; i < tris.size(); ++i)
                     for (int k = 0; k < 3; ++k) tris[i][k] = static_cast<Index>(t.at(i, k));
                 return TriMesh::build(to_points(v), std::move(tris));
             }),
             py::arg("vertices"), py::arg("triangles"))
        .def_property_readonly("vertices", [](const TriMesh& mesh) { return from_points(mesh.vertices()); })
        .def_property_readonly("triangles", [](const TriMesh& mesh) {
            py::array_t<long long> out({mesh.n_triangles(), std::size_t{3}});
            auto v = out.mutable_unchecked<2>();
            for (std::size_t i = 0; i < mesh.n_triangles(); ++i)
                for (int k = 0; k < 3; ++k) v(i, k) = mesh.triangle(i)[k];
            return out;
        })
        .def_property_readonly("n_vertices", &TriMesh::n_vertices)
        .def_property_readonly("n_triangles", &TriMesh::n_triangles)
        .def_property_readonly("n_edges", &TriMesh::n_edges)
        .def("ring", [](const TriMesh& mesh, std::size_t i) {
            if (i >= mesh.n_vertices()) throw py::index_error("vertex out of range");
            const auto r = mesh.ring(i);
            return std::vector<Index>(r.begin(), r.end());
        })
        .def("min_signed_area", &TriMesh::min_signed_area)
        .def("delaunay_violations", [](const TriMesh& mesh) { return count_delaunay_violations(mesh); })
        .def("min_angle", [](const TriMesh& mesh) { return min_angle_degrees(mesh); })
        .def("save", [](const TriMesh& mesh, const std::filesystem::path& p) {
            if (p.extension() == ".json") {
                write_mesh_json(mesh, p);
            } else {
                std::filesystem::path stem = p;
                write_triangle_files(mesh, stem.replace_extension(".node"), std::filesystem::path(p).replace_extension(".ele"));
            }
        })
        .def("__repr__", [](const TriMesh& mesh) {
            return "<Mesh " + std::to_string(mesh.n_vertices()) + " nodes, " + std::to_string(mesh.n_triangles()) +
                   " triangles>";
        });

    m.def("load_mesh", [](const std::filesystem::path& p) { return load_mesh(p); }, py::arg("path"));
    m.def("delaunay", [](const Array& pts) { return delaunay(to_points(pts)); }, py::arg("points"));
    m.def("generate_mesh", [](const Array& img, std::size_t target_nodes, std::uint64_t seed) {
        NodeBudget b;
        b.target_nodes = target_nodes;
        b.validate();
        MeshGenConfig cfg;
        cfg.seed = seed;
        cfg.validate();
        return generate_mesh(to_image(img), b, cfg);
    }, py::arg("image"), py::arg("target_nodes") = 1000, py::arg("seed") = 1);

    m.def("smooth_displacement", [](const TriMesh& mesh, const Array& u, double lambda, std::size_t iterations) {
        return from_points(smooth_displacement(build_laplacian(mesh), to_points(u), lambda, iterations));
    }, py::arg("mesh"), py::arg("u"), py::arg("lam"), py::arg("iterations") = 1);

    m.def("energy", [](const Array& re, const Array& te, const TriMesh& mesh, const Array& u) {
        return energy(to_image(re), to_image(te), mesh, to_points(u));
    }, py::arg("ref"), py::arg("template"), py::arg("mesh"), py::arg("u"));
    m.def("energy_gradient", [](const Array& re, const Array& te, const TriMesh& mesh, const Array& u,
                                const std::string& gradient) {
        return from_points(energy_gradient(to_image(re), to_image(te), mesh, to_points(u),
                                           gradient_source_from_string(gradient)));
    }, py::arg("ref"), py::arg("template"), py::arg("mesh"), py::arg("u"), py::arg("gradient") = "mesh");

    m.def("densify", [](const TriMesh& mesh, const Array& u, std::size_t w, std::size_t h) {
        return from_field(densify(mesh, to_points(u), w, h));
    }, py::arg("mesh"), py::arg("u"), py::arg("width"), py::arg("height"));
    m.def("warp", [](const Array& img, const Array& field) { return from_image(warp_image(to_image(img), to_field(field))); },
          py::arg("image"), py::arg("field"));
    m.def("write_field", [](const Array& field, const std::filesystem::path& p) { write_dense_field(to_field(field), p); },
          py::arg("field"), py::arg("path"));
    m.def("read_field", [](const std::filesystem::path& p) { return from_field(read_dense_field(p)); }, py::arg("path"));

    m.def("register", [](const Array& re, const Array& te, const TriMesh& mesh, double tau, double lambda,
                         std::size_t iterations, std::size_t passes, double tol, const std::string& gradient) {
        const SolverConfig cfg = make_config(tau, lambda, iterations, passes, tol, gradient);
        RegistrationResult r;
        {
            const ImageGrid ri = to_image(re), ti = to_image(te);
            py::gil_scoped_release release;
            r = register_images(ri, ti, mesh, cfg);
        }
        py::dict out;
        out["u"] = from_points(r.u);
        out["field"] = from_field(r.field);
        out["warped"] = from_image(r.warped);
        out["report"] = report_dict(r.report);
        return out;
    }, py::arg("ref"), py::arg("template"), py::arg("mesh"), py::arg("tau") = 0.005, py::arg("lam") = 0.8,
       py::arg("iterations") = 100, py::arg("smoothing_passes") = 1, py::arg("energy_tolerance") = 1e-6,
       py::arg("gradient") = "mesh");

    m.def("register_pixelwise", [](const Array& re, const Array& te, double tau, double lambda,
                                   std::size_t iterations, std::size_t passes, double tol) {
        const SolverConfig cfg = make_config(tau, lambda, iterations, passes, tol, "mesh");
        PixelRegistrationResult r;
        {
            const ImageGrid ri = to_image(re), ti = to_image(te);
            py::gil_scoped_release release;
            r = register_pixelwise(ri, ti, cfg);
        }
        py::dict out;
        out["field"] = from_field(r.field);
        out["warped"] = from_image(r.warped);
        out["report"] = report_dict(r.report);
        return out;
    }, py::arg("ref"), py::arg("template"), py::arg("tau") = 0.005, py::arg("lam") = 0.8,
       py::arg("iterations") = 100, py::arg("smoothing_passes") = 1, py::arg("energy_tolerance") = 1e-6);

    m.def("matched_pixel_passes", &matched_pixel_passes, py::arg("mesh"));
}
