#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "config.hpp"
#include "stages.hpp"
#include "tables.hpp"
#include "velofilt/error.hpp"
#include "velofilt/parallel.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kDataError = 3;
constexpr int kNumericError = 4;

int exit_code(velofilt::ErrorKind k) {
    switch (k) {
        case velofilt::ErrorKind::InvalidArgument: return kConfigError;
        case velofilt::ErrorKind::InvalidState:
        case velofilt::ErrorKind::Io: return kDataError;
        case velofilt::ErrorKind::NumericFailure: return kNumericError;
    }
    return kDataError;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Velocity-filtered localization microscopy experiments"};
    app.set_version_flag("--version", VELOFILT_VERSION);
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path, out_dir, format;
    std::optional<std::uint64_t> seed;
    int threads = 0;
    app.add_option("--config", config_path, "experiment config (JSON)");
    app.add_option("--seed", seed, "overrides the config seed");
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--threads", threads, "worker threads (default: VELOFILT_THREADS or 1)")
        ->check(CLI::NonNegativeNumber);
    app.add_option("--format", format, "table format")->check(CLI::IsMember({"csv", "json"}));

    auto* synth = app.add_subcommand("synth", "simulate frames and ground truth");
    auto* filter = app.add_subcommand("filter", "apply the velocity filter bank");
    auto* localize = app.add_subcommand("localize", "matched-filter localization");
    auto* accumulate = app.add_subcommand("accumulate", "density, support and velocity maps");
    auto* metrics = app.add_subcommand("metrics", "IoU, FVE and LE against ground truth");
    auto* pipeline = app.add_subcommand("pipeline", "all stages");
    auto* theory = app.add_subcommand("theory", "closed-form curves and tables");

    cli::TheoryOptions to;
    theory->add_flag("--nrf", to.nrf, "noise reduction factor");
    theory->add_flag("--deltav", to.deltav, "velocity bandwidth against direction");
    theory->add_flag("--gamma", to.gamma, "attenuation over a velocity-mismatch grid");
    theory->add_flag("--density", to.density, "apparent and filtered densities");
    theory->add_flag("--to", to.to_compare, "attenuation with and without TO");
    theory->add_option("--sigma-r", to.sigma_r, "mm");
    theory->add_option("--lambda", to.lambda, "mm");
    theory->add_option("--sigma-t", to.sigma_t, "s");
    theory->add_option("--ratio", to.ratio, "sigma_r / sigma_t in mm/s (overrides --sigma-t)");
    theory->add_option("--mode", to.mode, "pre or post");
    theory->add_option("--step-deg", to.step_deg, "direction step for --deltav");
    theory->add_option("--points", to.points, "grid points per axis");
    theory->add_option("--dv-max", to.dv_max, "mm/s, grid half width");
    theory->add_option("--v0max", to.v0_max, "mm/s, fastest flow for --nrf");
    theory->add_option("--frame-rate", to.frame_rate, "Hz");
    theory->add_option("--radius", to.radius, "mm, vessel radius for --density");
    theory->add_option("--v0", to.v0, "mm/s, centerline speed for --density");
    theory->add_option("--cmb", to.c_mb, "bubbles per mm^3 for --density");
    theory->add_option("--vf", to.v_f, "mm/s, filter speed for --density");
    theory->add_option("--theta-deg", to.theta_deg, "passband direction for --density");
    theory->add_option("--lambda-x", to.lambda_x, "mm, TO lateral wavelength");
    theory->add_option("--sigma-x", to.sigma_x, "mm, TO lobe width");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kConfigError;
    }

    try {
        if (threads > 0) velofilt::set_thread_count(threads);
        const std::optional<cli::fs::path> out =
            out_dir.empty() ? std::nullopt : std::optional<cli::fs::path>(out_dir);

        if (theory->parsed()) {
            const cli::Format f = format == "json" ? cli::Format::Json : cli::Format::Csv;
            std::optional<cli::Manifest> m;
            if (out) {
                cli::fs::create_directories(*out);
                m.emplace(*out, nlohmann::json::object(), seed.value_or(0));
            }
            cli::cmd_theory(to, out, f, m ? &*m : nullptr);
            if (m) m->write();
            return kOk;
        }

        if (config_path.empty()) throw cli::ConfigError("--config: required");
        if (!out) throw cli::ConfigError("--out: required");
        cli::RunContext ctx;
        ctx.cfg = cli::load_config(config_path);
        if (seed) {
            ctx.cfg.seed = *seed;
            ctx.cfg.raw["seed"] = *seed;
        }
        ctx.out = *out;
        ctx.format = format == "csv" ? cli::Format::Csv : cli::Format::Json;
        cli::fs::create_directories(ctx.out);
        cli::Manifest manifest(ctx.out, ctx.cfg.raw, ctx.cfg.seed);

        try {
            if (synth->parsed()) cli::cmd_synth(ctx, manifest);
            if (filter->parsed()) cli::cmd_filter(ctx, manifest);
            if (localize->parsed()) cli::cmd_localize(ctx, manifest);
            if (accumulate->parsed()) cli::cmd_accumulate(ctx, manifest);
            if (metrics->parsed()) cli::cmd_metrics(ctx, manifest);
            if (pipeline->parsed()) cli::cmd_pipeline(ctx, manifest);
        } catch (...) {
            manifest.write();
            throw;
        }
        manifest.write();
        return kOk;
    } catch (const cli::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kConfigError;
    } catch (const cli::InputError& e) {
        std::fprintf(stderr, "input error: %s\n", e.what());
        return kConfigError;
    } catch (const velofilt::Error& e) {
        std::fprintf(stderr, "%s: %s\n", velofilt::to_string(e.kind()), e.what());
        return exit_code(e.kind());
    } catch (const nlohmann::json::exception& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return kDataError;
    } catch (const std::filesystem::filesystem_error& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return kDataError;
    }
}
