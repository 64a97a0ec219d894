#include <iostream>
#include <map>
#include <string>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include <CLI11.hpp>

#include "lightweather/commands.hpp"

namespace lw = lightweather;

int main(int argc, char** argv) {
#if defined(__GLIBC__)
    // Training reallocates batch-sized buffers every step; keep them on the heap.
    mallopt(M_MMAP_THRESHOLD, 1 << 30);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif

    CLI::App app{"LightWeather station forecasting"};
    app.require_subcommand(1);

    std::string config_path;
    std::string seed;
    std::string out_dir;
    std::string timestamp;
    app.add_option("--config", config_path, "key = value run configuration");
    app.add_option("--seed", seed, "override the seed key");
    app.add_option("--out", out_dir, "override the out_dir key");

    const std::map<std::string, std::string> help = {
        {"ingest-check", "load the dataset and report its shape and splits"},
        {"synth", "write a synthetic dataset to out_dir"},
        {"train", "fit the model and save the checkpoint"},
        {"evaluate", "score the checkpoint and the HI baseline"},
        {"forecast", "forecast T_f steps from a timestamp"},
        {"ablate", "train the encoding variants over several seeds"},
        {"sweep", "train over the sweep_d x sweep_L grid"},
        {"param-count", "print enumerated and closed-form parameter counts"},
    };
    for (const auto& name : lw::command_names()) {
        auto* sub = app.add_subcommand(name, help.at(name));
        sub->fallthrough();
        if (name == "forecast") sub->add_option("--timestamp", timestamp, "first forecast timestamp");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << lw::error_line("usage error", e.what()) << '\n';
        return static_cast<int>(lw::ExitCode::config);
    }

    lw::RunConfig cfg;
    try {
        if (!config_path.empty()) cfg = lw::RunConfig::load(config_path);
        if (!seed.empty()) cfg.set("seed", seed);
        if (!out_dir.empty()) cfg.set("out_dir", out_dir);
        if (!timestamp.empty()) cfg.set("forecast_timestamp", timestamp);
    } catch (const lw::Error& e) {
        std::cerr << lw::error_line(e.category(), e.what()) << '\n';
        return static_cast<int>(lw::ExitCode::config);
    }

    const std::string command = app.get_subcommands().front()->get_name();
    return lw::run_command(command, cfg, std::cout, std::cerr);
}
