// Synthetic fixtures: a textured reference with a bump-warped template, or a
// stack of consecutive slices.
#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include "meshreg/errors.hpp"
#include "meshreg/field.hpp"
#include "meshreg/image.hpp"
#include "meshreg/synthetic.hpp"

namespace fs = std::filesystem;
using namespace meshreg;

int main(int argc, char** argv) {
    CLI::App app{"Synthetic test data for meshreg"};
    app.require_subcommand(1);

    std::size_t size = 128, count = 10;
    std::uint64_t seed = 7;
    double peak = 3.0, gap = 2.0, max_shift = 1.5;
    std::string out = ".", format = "pgm";

    auto* pair = app.add_subcommand("pair", "Textured reference plus a template warped by a Gaussian bump");
    pair->add_option("--size", size)->capture_default_str();
    pair->add_option("--seed", seed)->capture_default_str();
    pair->add_option("--peak", peak, "Largest displacement in pixels")->capture_default_str();
    pair->add_option("--out", out)->capture_default_str();
    pair->add_option("--format", format)->capture_default_str();

    auto* stack = app.add_subcommand("stack", "Consecutive slices of a random volume");
    stack->add_option("--count", count)->capture_default_str();
    stack->add_option("--size", size)->capture_default_str();
    stack->add_option("--seed", seed)->capture_default_str();
    stack->add_option("--gap", gap, "Slice spacing in pixels")->capture_default_str();
    stack->add_option("--max-shift", max_shift, "Per-slice bump motion in pixels")->capture_default_str();
    stack->add_option("--out", out)->capture_default_str();
    stack->add_option("--format", format)->capture_default_str();

    CLI11_PARSE(app, argc, argv);
    if (format != "pgm" && format != "png") {
        std::cerr << "--format must be pgm or png\n";
        return 2;
    }
    try {
        fs::create_directories(out);
        const std::string ext = "." + format;
        if (pair->parsed()) {
            const ImageGrid ref = synthetic::textured_image(size, size, seed);
            const double s = static_cast<double>(size);
            // Peak magnitude `peak` along the (0.6, 0.8) direction.
            const DenseField truth = synthetic::gaussian_bump_field(
                size, size, {0.45 * s, 0.55 * s}, 0.16 * s, {0.6 * peak, 0.8 * peak});
            save_image(ref, fs::path(out) / ("ref" + ext));
            save_image(warp_image(ref, truth), fs::path(out) / ("template" + ext));
            write_dense_field(truth, fs::path(out) / "truth.mrdf");
        } else {
            const auto slices = synthetic::slice_stack(count, size, size, max_shift, seed, gap);
            for (std::size_t i = 0; i < slices.size(); ++i) {
                char name[32];
                std::snprintf(name, sizeof name, "slice_%03zu", i);
                save_image(slices[i], fs::path(out) / (name + ext));
            }
        }
    } catch (const IoError& e) {
        std::cerr << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return 1;
    }
    return 0;
}
