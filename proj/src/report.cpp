#include "meshreg/report.hpp"

#include <fstream>

#include "meshreg/errors.hpp"

namespace meshreg {

nlohmann::json to_json(const SolverConfig& cfg) {
    return {{"tau", cfg.tau},
            {"lambda", cfg.lambda},
            {"max_iterations", cfg.max_iterations},
            {"smoothing_passes", cfg.smoothing_passes},
            {"energy_tolerance", cfg.energy_tolerance},
            {"gradient", to_string(cfg.gradient)}};
}

SolverConfig solver_config_from_json(const nlohmann::json& j) {
    SolverConfig cfg;
    cfg.tau = j.value("tau", cfg.tau);
    cfg.lambda = j.value("lambda", cfg.lambda);
    cfg.max_iterations = j.value("max_iterations", cfg.max_iterations);
    cfg.smoothing_passes = j.value("smoothing_passes", cfg.smoothing_passes);
    cfg.energy_tolerance = j.value("energy_tolerance", cfg.energy_tolerance);
    cfg.gradient = gradient_source_from_string(j.value("gradient", std::string("mesh")));
    cfg.validate();
    return cfg;
}

nlohmann::json to_json(const RegistrationReport& report, bool include_timing) {
    nlohmann::json j = {{"engine", report.engine},
                        {"iterations_run", report.iterations_run},
                        {"energy_trace", report.energy_trace},
                        {"msd_before", report.msd_before},
                        {"msd_after", report.msd_after},
                        {"unknowns", report.unknowns},
                        {"converged", report.converged},
                        {"config", to_json(report.config)}};
    if (include_timing) j["wall_time"] = report.wall_time;
    return j;
}

RegistrationReport report_from_json(const nlohmann::json& j) {
    RegistrationReport r;
    r.engine = j.at("engine").get<std::string>();
    r.iterations_run = j.at("iterations_run").get<std::size_t>();
    r.energy_trace = j.at("energy_trace").get<std::vector<double>>();
    r.msd_before = j.at("msd_before").get<double>();
    r.msd_after = j.at("msd_after").get<double>();
    r.unknowns = j.value("unknowns", std::size_t{0});
    r.converged = j.value("converged", false);
    r.wall_time = j.value("wall_time", 0.0);
    if (j.contains("config")) r.config = solver_config_from_json(j.at("config"));
    return r;
}

void write_json(const nlohmann::json& j, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw IoError("write failed for " + path.string());
}

nlohmann::json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed JSON " + path.string() + ": " + e.what());
    }
}

}  // namespace meshreg
