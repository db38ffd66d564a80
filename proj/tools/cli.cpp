#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "meshreg/baseline.hpp"
#include "meshreg/delaunay.hpp"
#include "meshreg/errors.hpp"
#include "meshreg/field.hpp"
#include "meshreg/image.hpp"
#include "meshreg/mesh_gen.hpp"
#include "meshreg/registration.hpp"
#include "meshreg/report.hpp"

#ifndef MESHREG_VERSION
#define MESHREG_VERSION "0.0.0"
#endif

namespace meshreg::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

struct RunConfig {
    std::string ref, tmpl, mesh, field, dir, config;
    std::string out = ".";
    std::size_t nodes = 0;  // 0: derived from the image size
    double tau = 0.005;
    double lambda = 0.8;
    std::size_t iters = 100;
    std::size_t smoothing_passes = 1;
    std::size_t pixel_passes = 0;  // 0: matched to the mesh edge length
    std::uint64_t seed = 1;
    std::string gradient = "mesh";
    std::string format = "pgm";
    double spacing = 2.0;
    std::size_t cvt = 3, odt = 3;
};

// Keys accepted in a config file. Keys that the running subcommand does not
// take are ignored so one file can serve several subcommands.
const std::set<std::string> kConfigKeys = {
    "ref",   "template",         "mesh",         "field", "dir",     "out",
    "nodes", "tau",              "lambda",       "iters", "seed",    "gradient",
    "format", "smoothing-passes", "pixel-passes", "spacing", "cvt",  "odt"};

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

/// key = value lines; '#' starts a comment, [section] headers are ignored,
/// values may be quoted. Underscores in keys are read as dashes.
std::vector<std::pair<std::string, std::string>> read_config_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path.string());
    std::vector<std::pair<std::string, std::string>> items;
    std::string line;
    for (int lineno = 1; std::getline(in, line); ++lineno) {
        std::string s = trim(line);
        if (s.empty() || s[0] == '#' || s[0] == '[') continue;
        const auto eq = s.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(s.substr(0, eq));
        std::string value = trim(s.substr(eq + 1));
        if (!value.empty() && (value[0] == '"' || value[0] == '\'')) {
            const auto close = value.find(value[0], 1);
            if (close == std::string::npos)
                throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": unterminated string");
            value = value.substr(1, close - 1);
        } else if (const auto hash = value.find(" #"); hash != std::string::npos) {
            value = trim(value.substr(0, hash));
        }
        std::replace(key.begin(), key.end(), '_', '-');
        if (key == "template-image") key = "template";
        if (!kConfigKeys.count(key))
            throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
        items.emplace_back(key, value);
    }
    return items;
}

std::uint64_t fnv1a64(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::uint64_t h = 1469598103934665603ULL;
    char buf[1 << 16];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ULL;
        }
    }
    return h;
}

json describe_input(const std::string& role, const fs::path& path) {
    std::ostringstream hex;
    hex << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(path);
    return {{"role", role},
            {"path", path.string()},
            {"bytes", fs::file_size(path)},
            {"fnv1a64", hex.str()}};
}

void require_file(const std::string& path, const std::string& what) {
    if (path.empty()) throw ConfigError("missing --" + what);
    std::error_code ec;
    if (!fs::is_regular_file(path, ec)) throw IoError(what + " file not readable: " + path);
    std::ifstream probe(path, std::ios::binary);
    if (!probe) throw IoError(what + " file not readable: " + path);
}

void validate_solver(const RunConfig& rc) {
    if (!(rc.tau > 0.0) || !std::isfinite(rc.tau)) throw ConfigError("--tau must be positive");
    if (!(rc.lambda > 0.0 && rc.lambda < 1.0)) throw ConfigError("--lambda must lie in (0, 1)");
    if (rc.iters < 1) throw ConfigError("--iters must be at least 1");
    gradient_source_from_string(rc.gradient);
}

void validate_format(const RunConfig& rc) {
    if (rc.format != "pgm" && rc.format != "png") throw ConfigError("--format must be pgm or png");
}

void validate_nodes(const RunConfig& rc, bool given) {
    if (given && rc.nodes < 4) throw ConfigError("--nodes must be at least 4");
}

void validate_mesh_settings(const RunConfig& rc) {
    if (!(rc.spacing >= 1.0)) throw ConfigError("--spacing must be at least 1");
}

std::size_t auto_nodes(const ImageGrid& img) {
    return std::clamp<std::size_t>(img.width() * img.height() / 20, 4, 3000);
}

SolverConfig solver_config(const RunConfig& rc) {
    SolverConfig cfg;
    cfg.tau = rc.tau;
    cfg.lambda = rc.lambda;
    cfg.max_iterations = rc.iters;
    cfg.smoothing_passes = rc.smoothing_passes;
    cfg.gradient = gradient_source_from_string(rc.gradient);
    cfg.validate();
    return cfg;
}

MeshGenConfig mesh_config(const RunConfig& rc) {
    MeshGenConfig cfg;
    cfg.seed = rc.seed;
    cfg.min_node_spacing = rc.spacing;
    cfg.cvt_iterations = rc.cvt;
    cfg.odt_iterations = rc.odt;
    cfg.validate();
    return cfg;
}

json mesh_settings_json(const MeshGenConfig& m, const NodeBudget& b) {
    return {{"target_nodes", b.target_nodes},
            {"canny_fraction", b.canny_fraction},
            {"halftone_fraction", b.halftone_fraction},
            {"uniform_fraction", b.uniform_fraction},
            {"canny_sigma", m.canny_sigma},
            {"canny_low", m.canny_low},
            {"canny_high", m.canny_high},
            {"min_node_spacing", m.min_node_spacing},
            {"cvt_iterations", m.cvt_iterations},
            {"odt_iterations", m.odt_iterations},
            {"flip_passes", m.flip_passes},
            {"seed", m.seed}};
}

json mesh_quality(const TriMesh& mesh) {
    return {{"n_nodes", mesh.n_vertices()},
            {"n_triangles", mesh.n_triangles()},
            {"n_edges", mesh.n_edges()},
            {"min_area", mesh.min_signed_area()},
            {"min_angle", min_angle_degrees(mesh)},
            {"delaunay_violations", count_delaunay_violations(mesh, 1e-9)}};
}

/// Refuses to overwrite any input file.
void guard_outputs(const std::vector<fs::path>& outputs, const std::vector<std::string>& inputs) {
    for (const auto& o : outputs) {
        std::error_code ec;
        if (!fs::exists(o, ec)) continue;
        for (const auto& i : inputs) {
            if (!i.empty() && fs::equivalent(o, i, ec))
                throw ConfigError("output " + o.string() + " would overwrite input " + i);
        }
    }
}

void write_manifest(const fs::path& dir, const std::string& command,
                    const std::vector<std::string>& argv, const json& inputs, const json& params,
                    std::uint64_t seed, const json& outputs) {
    json m;
    m["tool"] = "meshreg";
    m["command"] = command;
    m["argv"] = argv;
    m["inputs"] = inputs;
    m["parameters"] = params;
    m["seed"] = seed;
    m["outputs"] = outputs;
    m["versions"] = {{"meshreg", MESHREG_VERSION},
                     {"compiler", __VERSION__},
                     {"cplusplus", static_cast<long>(__cplusplus)},
                     {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                           std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                           std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
    write_json(m, dir / "manifest.json");
}

void make_out_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
}

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Context {
    RunConfig rc;
    std::vector<std::string> argv;
    CLI::App* sub = nullptr;
    std::ostream* out = nullptr;

    bool given(const std::string& name) const { return sub->count("--" + name) > 0; }
};

int cmd_mesh(const Context& ctx) {
    const RunConfig& rc = ctx.rc;
    validate_nodes(rc, ctx.given("nodes"));
    validate_mesh_settings(rc);
    require_file(rc.tmpl, "template");
    const MeshGenConfig mcfg = mesh_config(rc);

    const ImageGrid img = load_image(rc.tmpl);
    NodeBudget budget;
    budget.target_nodes = ctx.given("nodes") ? rc.nodes : auto_nodes(img);
    budget.validate();

    const fs::path dir = rc.out;
    const std::vector<fs::path> outputs = {dir / "mesh.node", dir / "mesh.ele", dir / "mesh.json",
                                           dir / "mesh_quality.json", dir / "manifest.json"};
    guard_outputs(outputs, {rc.tmpl});

    MeshGenStats stats;
    const auto t0 = Clock::now();
    const TriMesh mesh = generate_mesh(img, budget, mcfg, &stats);
    const double elapsed = seconds_since(t0);

    json quality = mesh_quality(mesh);
    quality["samples"] = {{"canny", stats.canny}, {"halftone", stats.halftone}, {"uniform", stats.uniform}};

    make_out_dir(dir);
    write_triangle_files(mesh, dir / "mesh.node", dir / "mesh.ele");
    write_mesh_json(mesh, dir / "mesh.json");
    write_json(quality, dir / "mesh_quality.json");
    write_manifest(dir, "mesh", ctx.argv, json::array({describe_input("template", rc.tmpl)}),
                   {{"mesh", mesh_settings_json(mcfg, budget)}}, rc.seed,
                   {"mesh.node", "mesh.ele", "mesh.json", "mesh_quality.json"});

    *ctx.out << quality.dump(2) << "\n";
    *ctx.out << "generated in " << std::fixed << std::setprecision(3) << elapsed << " s\n";
    return kExitOk;
}

int cmd_register(const Context& ctx) {
    const RunConfig& rc = ctx.rc;
    validate_solver(rc);
    validate_nodes(rc, ctx.given("nodes"));
    validate_mesh_settings(rc);
    validate_format(rc);
    require_file(rc.ref, "ref");
    require_file(rc.tmpl, "template");
    if (!rc.mesh.empty()) {
        std::error_code ec;
        if (!fs::exists(rc.mesh, ec) && !fs::exists(fs::path(rc.mesh).replace_extension(".node"), ec))
            throw IoError("mesh file not readable: " + rc.mesh);
    }
    const SolverConfig scfg = solver_config(rc);
    const MeshGenConfig mcfg = mesh_config(rc);

    const ImageGrid re = load_image(rc.ref);
    const ImageGrid te = load_image(rc.tmpl);
    if (!re.same_shape(te)) throw ConfigError("reference and template sizes differ");

    const fs::path dir = rc.out;
    const std::string ext = "." + rc.format;
    const std::vector<std::string> names = {"field.mrdf",  "warped" + ext, "difference" + ext,
                                            "nodes.csv",   "mesh.node",    "mesh.ele",
                                            "report.json", "manifest.json"};
    std::vector<fs::path> outputs;
    for (const auto& n : names) outputs.push_back(dir / n);
    guard_outputs(outputs, {rc.ref, rc.tmpl, rc.mesh});

    json inputs = json::array({describe_input("ref", rc.ref), describe_input("template", rc.tmpl)});
    json params;
    TriMesh mesh;
    if (!rc.mesh.empty()) {
        mesh = load_mesh(rc.mesh);
        fs::path mp = rc.mesh;
        if (mp.extension() == ".json") {
            inputs.push_back(describe_input("mesh", mp));
        } else {
            inputs.push_back(describe_input("mesh_nodes", fs::path(mp).replace_extension(".node")));
            inputs.push_back(describe_input("mesh_elements", fs::path(mp).replace_extension(".ele")));
        }
        params["mesh"] = "file";
    } else {
        NodeBudget budget;
        budget.target_nodes = ctx.given("nodes") ? rc.nodes : auto_nodes(te);
        budget.validate();
        mesh = generate_mesh(te, budget, mcfg);
        params["mesh"] = mesh_settings_json(mcfg, budget);
    }
    params["solver"] = to_json(scfg);
    params["format"] = rc.format;

    const RegistrationResult res = register_images(re, te, mesh, scfg);

    make_out_dir(dir);
    write_dense_field(res.field, dir / "field.mrdf");
    save_image(res.warped, dir / ("warped" + ext));
    save_image(difference_image(res.warped, re), dir / ("difference" + ext));
    write_node_csv(mesh, res.u, dir / "nodes.csv");
    write_triangle_files(mesh, dir / "mesh.node", dir / "mesh.ele");
    json report = to_json(res.report);
    report["n_nodes"] = mesh.n_vertices();
    report["n_triangles"] = mesh.n_triangles();
    write_json(report, dir / "report.json");
    write_manifest(dir, "register", ctx.argv, inputs, params, rc.seed, names);

    *ctx.out << std::setprecision(6) << "nodes " << mesh.n_vertices() << ", iterations "
             << res.report.iterations_run << "\nmsd_before " << res.report.msd_before
             << "\nmsd_after  " << res.report.msd_after << "\nwall_time  " << res.report.wall_time
             << " s\n";
    if (res.report.msd_after > res.report.msd_before)
        std::cerr << "warning: registration increased the MSD; a smaller --tau may help\n";
    return kExitOk;
}

int cmd_warp(const Context& ctx) {
    const RunConfig& rc = ctx.rc;
    validate_format(rc);
    require_file(rc.tmpl, "template");
    require_file(rc.field, "field");
    if (!rc.ref.empty()) require_file(rc.ref, "ref");

    const ImageGrid te = load_image(rc.tmpl);
    const DenseField field = read_dense_field(rc.field);
    if (field.width != te.width() || field.height != te.height())
        throw ConfigError("field size does not match the template");
    std::optional<ImageGrid> re;
    if (!rc.ref.empty()) {
        re = load_image(rc.ref);
        if (!re->same_shape(te)) throw ConfigError("reference and template sizes differ");
    }

    const fs::path dir = rc.out;
    const std::string ext = "." + rc.format;
    std::vector<std::string> names = {"warped" + ext};
    if (re) names.push_back("difference" + ext);
    names.push_back("manifest.json");
    std::vector<fs::path> outputs;
    for (const auto& n : names) outputs.push_back(dir / n);
    guard_outputs(outputs, {rc.tmpl, rc.field, rc.ref});

    json inputs = json::array({describe_input("template", rc.tmpl), describe_input("field", rc.field)});
    if (re) inputs.push_back(describe_input("ref", rc.ref));

    const ImageGrid warped = warp_image(te, field);
    make_out_dir(dir);
    save_image(warped, dir / ("warped" + ext));
    json params = {{"format", rc.format}};
    if (re) {
        save_image(difference_image(warped, *re), dir / ("difference" + ext));
        *ctx.out << "msd " << std::setprecision(6) << msd(warped, *re) << "\n";
    }
    names.pop_back();
    write_manifest(dir, "warp", ctx.argv, inputs, params, rc.seed, names);
    return kExitOk;
}

int cmd_metrics(const Context& ctx) {
    const RunConfig& rc = ctx.rc;
    require_file(rc.ref, "ref");
    require_file(rc.tmpl, "template");
    if (!rc.field.empty()) require_file(rc.field, "field");

    const ImageGrid re = load_image(rc.ref);
    const ImageGrid te = load_image(rc.tmpl);
    if (!re.same_shape(te)) throw ConfigError("reference and template sizes differ");

    const fs::path dir = rc.out;
    guard_outputs({dir / "metrics.json", dir / "manifest.json"}, {rc.ref, rc.tmpl, rc.field});

    auto stats = [&](const ImageGrid& a) {
        double max_abs = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i)
            max_abs = std::max(max_abs, std::abs(a.data()[i] - re.data()[i]));
        return json{{"msd", msd(a, re)}, {"max_abs_diff", max_abs}};
    };
    json metrics = {{"width", re.width()}, {"height", re.height()}, {"template", stats(te)}};
    json inputs = json::array({describe_input("ref", rc.ref), describe_input("template", rc.tmpl)});
    if (!rc.field.empty()) {
        const DenseField field = read_dense_field(rc.field);
        if (field.width != te.width() || field.height != te.height())
            throw ConfigError("field size does not match the template");
        metrics["warped"] = stats(warp_image(te, field));
        inputs.push_back(describe_input("field", rc.field));
    }

    make_out_dir(dir);
    write_json(metrics, dir / "metrics.json");
    write_manifest(dir, "metrics", ctx.argv, inputs, json::object(), rc.seed, {"metrics.json"});
    *ctx.out << metrics.dump(2) << "\n";
    return kExitOk;
}

std::vector<fs::path> list_images(const fs::path& dir) {
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) throw IoError("not a directory: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        std::string ext = entry.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
        if (ext == ".pgm" || ext == ".png") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    return files;
}

std::string fixed(double v, int prec) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(prec) << v;
    return s.str();
}

int cmd_bench(const Context& ctx) {
    const RunConfig& rc = ctx.rc;
    validate_solver(rc);
    validate_nodes(rc, ctx.given("nodes"));
    validate_mesh_settings(rc);
    if (rc.dir.empty()) throw ConfigError("missing image directory");
    const std::vector<fs::path> files = list_images(rc.dir);
    if (files.size() < 2) throw ConfigError("bench needs at least 2 images in " + rc.dir);
    const SolverConfig scfg = solver_config(rc);
    const MeshGenConfig mcfg = mesh_config(rc);

    std::vector<ImageGrid> images;
    json inputs = json::array();
    for (const auto& f : files) {
        images.push_back(load_image(f));
        inputs.push_back(describe_input("slice", f));
        if (!images.back().same_shape(images.front()))
            throw ConfigError("image size mismatch: " + f.string());
    }
    const fs::path dir = rc.out;
    guard_outputs({dir / "bench.json", dir / "bench.txt", dir / "manifest.json"}, {});

    NodeBudget budget;
    budget.target_nodes = ctx.given("nodes") ? rc.nodes : auto_nodes(images.front());
    budget.validate();

    json pairs = json::array();
    double sum_mesh_msd = 0, sum_pixel_msd = 0, sum_before = 0;
    double sum_mesh_time = 0, sum_gen_time = 0, sum_pixel_time = 0;
    std::size_t sum_mesh_iters = 0, sum_pixel_iters = 0;
    for (std::size_t k = 0; k + 1 < images.size(); ++k) {
        const ImageGrid& re = images[k];
        const ImageGrid& te = images[k + 1];

        const auto t0 = Clock::now();
        const TriMesh mesh = generate_mesh(te, budget, mcfg);
        const double gen_time = seconds_since(t0);
        const RegistrationResult m = register_images(re, te, mesh, scfg);

        SolverConfig pcfg = scfg;
        pcfg.smoothing_passes = rc.pixel_passes ? rc.pixel_passes : matched_pixel_passes(mesh);
        const PixelRegistrationResult p = register_pixelwise(re, te, pcfg);

        auto engine = [](const RegistrationReport& r) {
            return json{{"msd_after", r.msd_after},
                        {"wall_time", r.wall_time},
                        {"iterations", r.iterations_run},
                        {"time_per_iteration", r.iterations_run ? r.wall_time / r.iterations_run : 0.0},
                        {"unknowns", r.unknowns},
                        {"smoothing_passes", r.config.smoothing_passes}};
        };
        json mesh_j = engine(m.report);
        mesh_j["mesh_time"] = gen_time;
        mesh_j["total_time"] = gen_time + m.report.wall_time;
        mesh_j["n_nodes"] = mesh.n_vertices();
        pairs.push_back({{"ref", files[k].filename().string()},
                         {"template", files[k + 1].filename().string()},
                         {"msd_before", m.report.msd_before},
                         {"mesh", mesh_j},
                         {"pixel", engine(p.report)}});
        sum_before += m.report.msd_before;
        sum_mesh_msd += m.report.msd_after;
        sum_pixel_msd += p.report.msd_after;
        sum_mesh_time += m.report.wall_time;
        sum_gen_time += gen_time;
        sum_pixel_time += p.report.wall_time;
        sum_mesh_iters += m.report.iterations_run;
        sum_pixel_iters += p.report.iterations_run;
    }
    const double n = static_cast<double>(pairs.size());
    json summary = {
        {"pairs", pairs.size()},
        {"mean_msd_before", sum_before / n},
        {"mesh", {{"mean_msd", sum_mesh_msd / n},
                  {"solve_time", sum_mesh_time},
                  {"mesh_time", sum_gen_time},
                  {"total_time", sum_mesh_time + sum_gen_time},
                  {"time_per_iteration", sum_mesh_iters ? sum_mesh_time / sum_mesh_iters : 0.0}}},
        {"pixel", {{"mean_msd", sum_pixel_msd / n},
                   {"total_time", sum_pixel_time},
                   {"time_per_iteration", sum_pixel_iters ? sum_pixel_time / sum_pixel_iters : 0.0}}}};
    json result = {{"pairs", pairs}, {"summary", summary}};

    std::ostringstream table;
    std::size_t name_w = 4;
    for (const auto& p : pairs)
        name_w = std::max(name_w, p["ref"].get<std::string>().size() + 4 + p["template"].get<std::string>().size());
    table << std::left << std::setw(static_cast<int>(name_w)) << "pair" << std::right << std::setw(12)
          << "msd_before" << std::setw(12) << "mesh_msd" << std::setw(12) << "pixel_msd" << std::setw(10)
          << "mesh_s" << std::setw(10) << "pixel_s" << "\n";
    for (const auto& p : pairs) {
        table << std::left << std::setw(static_cast<int>(name_w))
              << (p["ref"].get<std::string>() + " -> " + p["template"].get<std::string>()).substr(0, name_w)
              << std::right << std::setw(12) << fixed(p["msd_before"], 3) << std::setw(12)
              << fixed(p["mesh"]["msd_after"], 3) << std::setw(12) << fixed(p["pixel"]["msd_after"], 3)
              << std::setw(10) << fixed(p["mesh"]["total_time"], 3) << std::setw(10)
              << fixed(p["pixel"]["wall_time"], 3) << "\n";
    }
    table << std::left << std::setw(static_cast<int>(name_w)) << "mean" << std::right << std::setw(12)
          << fixed(sum_before / n, 3) << std::setw(12) << fixed(sum_mesh_msd / n, 3) << std::setw(12)
          << fixed(sum_pixel_msd / n, 3) << std::setw(10) << fixed((sum_mesh_time + sum_gen_time) / n, 3)
          << std::setw(10) << fixed(sum_pixel_time / n, 3) << "\n";
    table << std::left << std::setw(static_cast<int>(name_w)) << "total" << std::right << std::setw(36) << ""
          << std::setw(10) << fixed(sum_mesh_time + sum_gen_time, 3) << std::setw(10)
          << fixed(sum_pixel_time, 3) << "\n";

    make_out_dir(dir);
    write_json(result, dir / "bench.json");
    {
        std::ofstream txt(dir / "bench.txt");
        txt << table.str();
        if (!txt) throw IoError("cannot write bench.txt");
    }
    json params = {{"solver", to_json(scfg)},
                   {"mesh", mesh_settings_json(mcfg, budget)},
                   {"pixel_passes", rc.pixel_passes ? json(rc.pixel_passes) : json("matched")}};
    write_manifest(dir, "bench", ctx.argv, inputs, params, rc.seed, {"bench.json", "bench.txt"});
    *ctx.out << table.str();
    return kExitOk;
}

void add_out(CLI::App* s, RunConfig& rc) {
    s->add_option("--out", rc.out, "Output directory")->capture_default_str();
}
void add_config(CLI::App* s, RunConfig& rc) {
    s->add_option("--config", rc.config, "key = value file; flags given on the command line win");
}
void add_seed(CLI::App* s, RunConfig& rc) {
    s->add_option("--seed", rc.seed, "Random seed")->capture_default_str();
}
void add_mesh_opts(CLI::App* s, RunConfig& rc) {
    s->add_option("--nodes", rc.nodes, "Target mesh node count (default: pixels/20, at most 3000)");
    s->add_option("--spacing", rc.spacing, "Minimum node spacing in pixels")->capture_default_str();
    s->add_option("--cvt", rc.cvt, "CVT smoothing iterations")->capture_default_str();
    s->add_option("--odt", rc.odt, "ODT smoothing iterations")->capture_default_str();
}
void add_solver_opts(CLI::App* s, RunConfig& rc) {
    s->add_option("--tau", rc.tau, "Gradient step size")->capture_default_str();
    s->add_option("--lambda", rc.lambda, "Smoothing weight in (0, 1)")->capture_default_str();
    s->add_option("--iters", rc.iters, "Maximum iterations")->capture_default_str();
    s->add_option("--smoothing-passes", rc.smoothing_passes, "Smoothing passes per iteration")
        ->capture_default_str();
    s->add_option("--gradient", rc.gradient, "Template gradient at the nodes: mesh or analytic")
        ->capture_default_str();
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    Context ctx;
    RunConfig& rc = ctx.rc;
    ctx.out = &out;
    for (int i = 0; i < argc; ++i) ctx.argv.emplace_back(argv[i]);

    CLI::App app{"Mesh-based deformable image registration"};
    app.require_subcommand(1);
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

    auto* mesh = app.add_subcommand("mesh", "Generate a content-adaptive mesh of an image");
    mesh->add_option("--template,--image", rc.tmpl, "Input image (PGM or PNG)");
    add_mesh_opts(mesh, rc);
    add_seed(mesh, rc);
    add_out(mesh, rc);
    add_config(mesh, rc);

    auto* reg = app.add_subcommand("register", "Register a template image onto a reference");
    reg->add_option("--ref", rc.ref, "Reference image");
    reg->add_option("--template", rc.tmpl, "Template image");
    reg->add_option("--mesh", rc.mesh, "Mesh (.json or .node/.ele); generated when omitted");
    add_mesh_opts(reg, rc);
    add_solver_opts(reg, rc);
    reg->add_option("--format", rc.format, "Image output format: pgm or png")->capture_default_str();
    add_seed(reg, rc);
    add_out(reg, rc);
    add_config(reg, rc);

    auto* warp = app.add_subcommand("warp", "Backward-warp an image with a dense field");
    warp->add_option("--template", rc.tmpl, "Image to warp");
    warp->add_option("--field", rc.field, "Dense field file written by register");
    warp->add_option("--ref", rc.ref, "Optional reference for a difference image");
    warp->add_option("--format", rc.format, "Image output format: pgm or png")->capture_default_str();
    add_seed(warp, rc);
    add_out(warp, rc);
    add_config(warp, rc);

    auto* bench = app.add_subcommand("bench", "Mesh vs pixel registration over consecutive slices");
    bench->add_option("dir,--dir", rc.dir, "Directory of same-size PGM/PNG slices");
    add_mesh_opts(bench, rc);
    add_solver_opts(bench, rc);
    bench->add_option("--pixel-passes", rc.pixel_passes,
                      "Pixel smoothing passes per iteration (0: matched to the mesh scale)")
        ->capture_default_str();
    add_seed(bench, rc);
    add_out(bench, rc);
    add_config(bench, rc);

    auto* metrics = app.add_subcommand("metrics", "MSD between two images, optionally after a warp");
    metrics->add_option("--ref", rc.ref, "Reference image");
    metrics->add_option("--template", rc.tmpl, "Template image");
    metrics->add_option("--field", rc.field, "Optional dense field applied to the template first");
    add_seed(metrics, rc);
    add_out(metrics, rc);
    add_config(metrics, rc);

    try {
        // Config file values are injected ahead of the command line so that
        // explicit flags, parsed later, take precedence.
        std::vector<std::string> args(ctx.argv.begin(), ctx.argv.end());
        if (args.size() >= 2) {
            CLI::App* chosen = nullptr;
            for (auto* s : app.get_subcommands({})) {
                if (s->get_name() == args[1]) chosen = s;
            }
            std::string config_path;
            for (std::size_t i = 2; i < args.size(); ++i) {
                if (args[i] == "--config" && i + 1 < args.size()) config_path = args[i + 1];
                else if (args[i].rfind("--config=", 0) == 0) config_path = args[i].substr(9);
            }
            if (chosen && !config_path.empty()) {
                std::vector<std::string> injected;
                for (const auto& [key, value] : read_config_file(config_path)) {
                    if (key == "dir" && chosen == bench) {
                        injected.push_back("--dir=" + value);
                    } else if (chosen->get_option_no_throw("--" + key)) {
                        injected.push_back("--" + key + "=" + value);
                    }
                }
                args.insert(args.begin() + 2, injected.begin(), injected.end());
            }
        }
        std::vector<const char*> cargs;
        for (const auto& a : args) cargs.push_back(a.c_str());
        try {
            app.parse(static_cast<int>(cargs.size()), cargs.data());
        } catch (const CLI::ParseError& e) {
            const int code = app.exit(e, out, err);
            return code == 0 ? kExitOk : kExitConfig;
        }

        if (mesh->parsed()) ctx.sub = mesh;
        if (reg->parsed()) ctx.sub = reg;
        if (warp->parsed()) ctx.sub = warp;
        if (bench->parsed()) ctx.sub = bench;
        if (metrics->parsed()) ctx.sub = metrics;

        if (ctx.sub == mesh) return cmd_mesh(ctx);
        if (ctx.sub == reg) return cmd_register(ctx);
        if (ctx.sub == warp) return cmd_warp(ctx);
        if (ctx.sub == bench) return cmd_bench(ctx);
        return cmd_metrics(ctx);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const GeometryError& e) {
        err << "invalid geometry: " << e.what() << "\n";
        return kExitConfig;
    } catch (const IoError& e) {
        err << "I/O error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "I/O error: " << e.what() << "\n";
        return kExitIo;
    } catch (const DivergenceError& e) {
        err << "solver diverged: " << e.what() << "\n";
        return kExitDivergence;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace meshreg::cli
