// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits nonzero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cli.hpp"
#include "meshreg/baseline.hpp"
#include "meshreg/delaunay.hpp"
#include "meshreg/field.hpp"
#include "meshreg/image.hpp"
#include "meshreg/mesh_gen.hpp"
#include "meshreg/registration.hpp"
#include "meshreg/report.hpp"
#include "meshreg/synthetic.hpp"
#include "meshreg/trimesh.hpp"
#include "../test_util.hpp"

using namespace meshreg;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string num(double v, int prec = 3) {
    std::ostringstream s;
    s.precision(prec);
    s << v;
    return s.str();
}

double rel_error(const DisplacementField& a, const DisplacementField& b) {
    double n = 0, d = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        n += norm2(a[i] - b[i]);
        d += norm2(b[i]);
    }
    return std::sqrt(n) / std::max(std::sqrt(d), 1e-300);
}

// 1: triangle gradient, umbrella, Laplacian rows.
Outcome operators() {
    Outcome o;
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> c(-50, 50), k(-3, 3);
    double worst_affine = 0;
    int tris = 0;
    while (tris < 1000) {
        const std::array<Vec2, 3> v{Vec2{c(rng), c(rng)}, Vec2{c(rng), c(rng)}, Vec2{c(rng), c(rng)}};
        const double area = signed_area(v[0], v[1], v[2]);
        if (std::abs(area) < 1.0) continue;
        const TriMesh m = area > 0 ? TriMesh::build({v[0], v[1], v[2]}, {{0, 1, 2}})
                                   : TriMesh::build({v[0], v[2], v[1]}, {{0, 1, 2}});
        const double a = k(rng), b = k(rng), d = k(rng);
        std::vector<double> f(3);
        for (std::size_t i = 0; i < 3; ++i) f[i] = a * m.vertex(i).x + b * m.vertex(i).y + d;
        const TriangleGeometry g = compute_geometry(m);
        const Vec2 grad = triangle_gradient(m, g, 0, f);
        worst_affine = std::max({worst_affine, std::abs(grad.x - a), std::abs(grad.y - b)});
        ++tris;
    }

    std::uniform_real_distribution<double> uu(-5, 5);
    double worst_const = 0, worst_row = 0, worst_loop = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        std::mt19937_64 r(seed);
        auto pts = testutil::random_points(60, r, 100, 80);
        pts.insert(pts.end(), {{0, 0}, {100, 0}, {100, 80}, {0, 80}});
        const TriMesh m = delaunay(pts);
        const LaplacianMatrix L = build_laplacian(m);
        const std::vector<Vec2> ones(m.n_vertices(), Vec2{2.5, -1.0});
        for (const Vec2& v : L.apply_laplacian(ones)) worst_const = std::max({worst_const, std::abs(v.x), std::abs(v.y)});
        for (std::size_t i = 0; i < L.size(); ++i) {
            double s = 0;
            for (double w : L.row_values(i)) s += w;
            worst_row = std::max(worst_row, std::abs(s - 1.0));
        }
        std::vector<Vec2> u(m.n_vertices());
        for (auto& x : u) x = {uu(r), uu(r)};
        const auto lap = L.apply_laplacian(u);
        for (std::size_t i = 0; i < u.size(); ++i) {
            const Vec2 d = lap[i] - umbrella(m, u, i);
            worst_loop = std::max({worst_loop, std::abs(d.x), std::abs(d.y)});
        }
    }
    o.pass = worst_affine <= 1e-10 && worst_const <= 1e-12 && worst_row <= 1e-12 && worst_loop <= 1e-12;
    o.detail = "affine err " + num(worst_affine) + " on 1000 triangles, umbrella(const) " + num(worst_const) +
               ", row-sum err " + num(worst_row) + ", matrix-vs-loop " + num(worst_loop);
    return o;
}

DisplacementField fd_gradient(const ImageGrid& re, const ImageGrid& te, const TriMesh& m, DisplacementField u,
                              double h) {
    DisplacementField g(u.size());
    for (std::size_t i = 0; i < u.size(); ++i)
        for (int c = 0; c < 2; ++c) {
            double& x = c == 0 ? u[i].x : u[i].y;
            const double keep = x;
            x = keep + h;
            const double ep = energy(re, te, m, u);
            x = keep - h;
            const double em = energy(re, te, m, u);
            x = keep;
            (c == 0 ? g[i].x : g[i].y) = (ep - em) / (2 * h);
        }
    return g;
}

// 2: gradient vs central differences of the energy.
Outcome gradient_check() {
    Outcome o;
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> du(-1.5, 1.5);
    std::uniform_int_distribution<int> ni(3, 16);
    double worst = 0, worst_mesh = 0, mean_mesh = 0;
    std::size_t max_nodes = 0;
    for (int trial = 0; trial < 50; ++trial) {
        const ImageGrid re = synthetic::textured_image(48, 40, 500 + trial);
        const ImageGrid te = synthetic::textured_image(48, 40, 900 + trial);
        auto pts = testutil::random_points(static_cast<std::size_t>(ni(rng)), rng, 47, 39);
        pts.insert(pts.end(), {{0, 0}, {47, 0}, {47, 39}, {0, 39}});
        const TriMesh m = delaunay(pts);
        max_nodes = std::max(max_nodes, m.n_vertices());
        DisplacementField u(m.n_vertices());
        // Warped nodes stay off the border clamp, where the energy has a kink.
        for (std::size_t i = 0; i < u.size(); ++i) {
            const Vec2 q = m.vertex(i) + Vec2{du(rng), du(rng)};
            u[i] = Vec2{std::clamp(q.x, 0.01, 46.99), std::clamp(q.y, 0.01, 38.99)} - m.vertex(i);
        }
        const auto fd = fd_gradient(re, te, m, u, 1e-4);
        worst = std::max(worst, rel_error(energy_gradient(re, te, m, u, GradientSource::kAnalytic), fd));
        const double em = rel_error(energy_gradient(re, te, m, u, GradientSource::kMesh), fd);
        worst_mesh = std::max(worst_mesh, em);
        mean_mesh += em / 50;
    }
    o.pass = worst < 2e-2 && max_nodes <= 20;
    o.detail = "worst relative error " + num(worst) + " over 50 instances (<= " + std::to_string(max_nodes) +
               " nodes); mesh-gradient solver route: mean " + num(mean_mesh) + ", worst " + num(worst_mesh);
    return o;
}

// 3: recover a known Gaussian-bump deformation.
Outcome synthetic_registration() {
    Outcome o;
    const std::size_t s = 256;
    const ImageGrid re = synthetic::textured_image(s, s, 7);
    const DenseField truth = synthetic::gaussian_bump_field(s, s, {0.45 * s, 0.55 * s}, 0.16 * s, {2.4, 3.2});
    double peak = 0;
    for (std::size_t i = 0; i < truth.ux.size(); ++i) peak = std::max(peak, std::hypot(truth.ux[i], truth.uy[i]));
    const ImageGrid te = warp_image(re, truth);

    NodeBudget b;
    b.target_nodes = 3000;
    const TriMesh mesh = generate_mesh(te, b, MeshGenConfig{});
    const SolverConfig cfg;  // tau 0.005, lambda 0.8, 100 iterations
    const RegistrationResult r = register_images(re, te, mesh, cfg);
    const double ratio = r.report.msd_after / r.report.msd_before;
    o.pass = ratio < 0.3 && peak <= 4.0 + 1e-9 && cfg.tau == 0.005 && cfg.lambda == 0.8 && cfg.max_iterations == 100;
    o.detail = "msd " + num(r.report.msd_before, 4) + " -> " + num(r.report.msd_after, 4) + ", ratio " + num(ratio) +
               " (peak displacement " + num(peak) + " px, " + std::to_string(mesh.n_vertices()) + " nodes, " +
               std::to_string(r.report.iterations_run) + " iterations)";
    return o;
}

// 4: mesh engine vs pixel baseline over a slice stack.
Outcome stack_benchmark() {
    Outcome o;
    const auto slices = synthetic::slice_stack(10, 256, 256, 1.5, 3);
    NodeBudget b;
    b.target_nodes = 3000;
    SolverConfig cfg;
    cfg.energy_tolerance = 0.0;  // run all 100 iterations on both engines
    double mesh_time = 0, pixel_time = 0, mesh_msd = 0, pixel_msd = 0, before = 0;
    std::size_t nodes = 0, passes = 0, mesh_iters = 0, pixel_iters = 0;
    for (std::size_t k = 0; k + 1 < slices.size(); ++k) {
        const ImageGrid& re = slices[k];
        const ImageGrid& te = slices[k + 1];
        const auto t0 = Clock::now();
        const TriMesh mesh = generate_mesh(te, b, MeshGenConfig{});
        const RegistrationResult m = register_images(re, te, mesh, cfg);
        mesh_time += seconds_since(t0);

        SolverConfig pcfg = cfg;
        pcfg.smoothing_passes = matched_pixel_passes(mesh);
        const auto t1 = Clock::now();
        const PixelRegistrationResult p = register_pixelwise(re, te, pcfg);
        pixel_time += seconds_since(t1);

        before += m.report.msd_before / 9;
        mesh_msd += m.report.msd_after / 9;
        pixel_msd += p.report.msd_after / 9;
        nodes += mesh.n_vertices();
        passes += pcfg.smoothing_passes;
        mesh_iters += m.report.iterations_run;
        pixel_iters += p.report.iterations_run;
    }
    o.pass = mesh_time < pixel_time && mesh_msd <= 1.1 * pixel_msd;
    o.detail = "9 pairs, mean msd before " + num(before, 4) + "; mesh " + num(mesh_msd, 4) + " in " +
               num(mesh_time) + " s incl. meshing (avg " + std::to_string(nodes / 9) + " nodes, " +
               std::to_string(mesh_iters) + " iterations); pixel " + num(pixel_msd, 4) + " in " + num(pixel_time) +
               " s (avg " + std::to_string(passes / 9) + " smoothing passes, " + std::to_string(pixel_iters) +
               " iterations)";
    return o;
}

// 5: generated mesh quality over a small image corpus.
Outcome mesh_quality() {
    Outcome o;
    std::vector<std::pair<std::string, ImageGrid>> corpus;
    for (std::uint64_t seed : {1u, 2u, 3u}) corpus.push_back({"textured" + std::to_string(seed), synthetic::textured_image(128, 128, seed)});
    corpus.push_back({"wide", synthetic::textured_image(200, 90, 4)});
    corpus.push_back({"constant", ImageGrid(96, 96, 80.0)});
    corpus.push_back({"ramp", testutil::image_from(120, 100, [](double x, double y) { return x + 0.5 * y; })});
    corpus.push_back({"disc", testutil::image_from(128, 128, [](double x, double y) {
                          return std::hypot(x - 64, y - 64) < 40 ? 200.0 : 40.0;
                      })});
    corpus.push_back({"checker", testutil::image_from(128, 128, [](double x, double y) {
                          return ((int(x) / 16 + int(y) / 16) % 2) ? 220.0 : 30.0;
                      })});
    std::mt19937_64 rng(5);
    corpus.push_back({"noise", testutil::random_image(100, 100, rng)});

    std::size_t meshes = 0, violations = 0;
    double min_area = 1e300, worst_dev = 0;
    std::string worst_case;
    for (const auto& [name, img] : corpus)
        for (std::size_t target : {30u, 100u, 250u, 500u}) {
            NodeBudget b;
            b.target_nodes = target;
            const TriMesh m = generate_mesh(img, b, MeshGenConfig{});
            ++meshes;
            violations += testutil::brute_force_violations(m, 1e-9);
            min_area = std::min(min_area, m.min_signed_area());
            const double dev = std::abs(double(m.n_vertices()) - double(target)) / double(target);
            if (dev > worst_dev) {
                worst_dev = dev;
                worst_case = name + "@" + std::to_string(target) + " -> " + std::to_string(m.n_vertices());
            }
        }
    o.pass = violations == 0 && min_area > 1e-9 && worst_dev <= 0.2;
    o.detail = std::to_string(meshes) + " meshes, " + std::to_string(violations) + " circumcircle violations, min area " +
               num(min_area) + ", worst node-count deviation " + num(100 * worst_dev) + "% (" + worst_case + ")";
    return o;
}

// 6: densify and zero-field warp.
Outcome reconstruction() {
    Outcome o;
    double worst = 0;
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const std::size_t w = 90 + 10 * seed, h = 70;
        NodeBudget b;
        b.target_nodes = 150 * seed;
        const TriMesh m = generate_mesh(synthetic::textured_image(w, h, seed), b, MeshGenConfig{});
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> c(-2, 2), g(-0.05, 0.05);
        const Vec2 k{c(rng), c(rng)};
        const double a = g(rng), bb = g(rng), cc = g(rng), d = g(rng);
        auto affine = [&](const Vec2& p) { return Vec2{a * p.x + bb * p.y + k.x, cc * p.x + d * p.y + k.y}; };
        std::vector<Vec2> uc(m.n_vertices(), k), ua(m.n_vertices());
        for (std::size_t i = 0; i < ua.size(); ++i) ua[i] = affine(m.vertex(i));
        const DenseField fc = densify(m, uc, w, h), fa = densify(m, ua, w, h);
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x) {
                const Vec2 e = affine({double(x), double(y)});
                worst = std::max({worst, std::abs(fc.at(x, y).x - k.x), std::abs(fc.at(x, y).y - k.y),
                                  std::abs(fa.at(x, y).x - e.x), std::abs(fa.at(x, y).y - e.y)});
            }
    }
    std::mt19937_64 rng(6);
    const ImageGrid img = testutil::random_image(73, 41, rng);
    const ImageGrid same = warp_image(img, DenseField(73, 41));
    double ident = 0;
    for (std::size_t i = 0; i < img.size(); ++i) ident = std::max(ident, std::abs(same.data()[i] - img.data()[i]));
    o.pass = worst <= 1e-6 && ident == 0.0;
    o.detail = "max densify error " + num(worst) + " over all pixels, zero-field warp max change " + num(ident);
    return o;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

// 7: two CLI register runs with identical inputs.
Outcome determinism() {
    Outcome o;
    const fs::path dir = fs::temp_directory_path() / "meshreg_acceptance_det";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const ImageGrid re = synthetic::textured_image(160, 128, 21);
    const ImageGrid te = warp_image(re, synthetic::gaussian_bump_field(160, 128, {70, 60}, 25, {2.0, -1.5}));
    save_pgm(re, dir / "ref.pgm");
    save_pgm(te, dir / "template.pgm");
    std::ostringstream sink;
    auto run = [&](const std::string& out) {
        const std::vector<std::string> args = {"meshreg", "register", "--ref", (dir / "ref.pgm").string(),
                                               "--template", (dir / "template.pgm").string(), "--seed", "5",
                                               "--out", (dir / out).string()};
        std::vector<const char*> argv;
        for (const auto& a : args) argv.push_back(a.c_str());
        return cli::run(static_cast<int>(argv.size()), argv.data(), sink, sink);
    };
    if (run("a") != 0 || run("b") != 0) {
        o.pass = false;
        o.detail = "register failed: " + sink.str();
        return o;
    }
    const bool field_same = slurp(dir / "a" / "field.mrdf") == slurp(dir / "b" / "field.mrdf");
    auto ra = read_json(dir / "a" / "report.json"), rb = read_json(dir / "b" / "report.json");
    ra.erase("wall_time");
    rb.erase("wall_time");
    const bool report_same = ra.dump() == rb.dump();
    o.pass = field_same && report_same;
    o.detail = std::string("field.mrdf ") + (field_same ? "identical" : "DIFFERS") + ", report.json (timing removed) " +
               (report_same ? "identical" : "DIFFERS");
    fs::remove_all(dir);
    return o;
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char* name;
        double budget;  // seconds
        std::function<Outcome()> fn;
    };
    const std::vector<Criterion> criteria = {
        {1, "operator correctness", 5, operators},
        {2, "gradient check", 30, gradient_check},
        {3, "synthetic registration", 60, synthetic_registration},
        {4, "stack benchmark", 600, stack_benchmark},
        {5, "mesh quality", 60, mesh_quality},
        {6, "reconstruction exactness", 60, reconstruction},
        {7, "determinism", 60, determinism},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        const auto t0 = Clock::now();
        Outcome o;
        try {
            o = c.fn();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        const double t = seconds_since(t0);
        const bool pass = o.pass && t < c.budget;
        failed += !pass;
        std::cout << (pass ? "PASS" : "FAIL") << " [" << c.id << "] " << c.name << ": " << o.detail << " ("
                  << num(t) << " s, limit " << c.budget << " s)" << std::endl;
    }
    std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
    return failed ? 1 : 0;
}
