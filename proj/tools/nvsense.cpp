#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "nvsense/cli/commands.hpp"

using namespace nvsense;
using namespace nvsense::cli;

namespace {

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InvalidArgument("cannot open " + path + " for writing");
    f << text;
    if (!f) throw InvalidArgument("failed writing " + path);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Double-dressed NV magnetometry: spectra, sweeps, sensitivity, validation, calibration"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::string out_path;
    std::string svg_path;
    std::string input_path;
    unsigned threads = 1;
    std::uint64_t seed = 0;
    app.add_option("--config", config_path, "Run configuration (key = value)");
    app.add_option("--out", out_path, "CSV output path (default: stdout)");
    app.add_option("--svg", svg_path, "Optional SVG plot path");
    app.add_option("--threads", threads, "Worker threads (0 = hardware concurrency)");
    app.add_option("--seed", seed, "Seed for synthetic noise and random validation models");

    auto* spectrum = app.add_subcommand("spectrum", "Simulate an ODMR spectrum");
    auto* sweep = app.add_subcommand("sweep", "Dip centers vs RF amplitude and splitting slopes");
    auto* sense = app.add_subcommand("sense", "Sensitivity vs target frequency, bandwidths and hybrid map");
    auto* validate = app.add_subcommand("validate", "Check closed forms against the numerical oracles");
    auto* calibrate = app.add_subcommand("calibrate", "Fit D' and E'x from a measured bare spectrum");
    calibrate->add_option("--input", input_path, "Measured spectrum CSV (mw_frequency_hz,contrast)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitInput;
    }

    try {
        const RunConfig cfg = config_path.empty() ? parse_config_string("") : load_config(config_path);
        CommandContext ctx;
        ctx.threads = threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : threads;
        ctx.seed = seed;
        if (!svg_path.empty()) ctx.svg_path = svg_path;
        if (!input_path.empty()) ctx.input_path = input_path;

        CommandResult r;
        if (spectrum->parsed()) r = cmd_spectrum(cfg, ctx);
        else if (sweep->parsed()) r = cmd_sweep(cfg, ctx);
        else if (sense->parsed()) r = cmd_sense(cfg, ctx);
        else if (validate->parsed()) r = cmd_validate(cfg, ctx);
        else r = cmd_calibrate(cfg, ctx);

        if (out_path.empty()) std::cout << r.csv << std::flush;
        else write_text(out_path, r.csv);
        if (ctx.svg_path && r.plot) write_svg(*ctx.svg_path, *r.plot);
        return r.exit_code;
    } catch (const InvalidArgument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInput;
    } catch (const ComputationError& e) {
        std::cerr << "computation error: " << e.what() << '\n';
        return kExitComputation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitComputation;
    }
}
