#pragma once

#include <string>

#include "artifacts.hpp"
#include "config.hpp"

namespace cli {

enum class Format { Csv, Json };

struct RunContext {
    ExperimentConfig cfg;
    fs::path out;
    Format format = Format::Json;
};

struct Synthesized {
    velofilt::phantom::SynthResult result;
    velofilt::Mask support_fine;       // truth support on the metrics grid
    velofilt::VelocityMap velocity;    // truth max-speed map on the frame grid
};

Synthesized synthesize(const ExperimentConfig& cfg);

void cmd_synth(const RunContext& ctx, Manifest& m);
void cmd_filter(const RunContext& ctx, Manifest& m);
void cmd_localize(const RunContext& ctx, Manifest& m);
void cmd_accumulate(const RunContext& ctx, Manifest& m);
void cmd_metrics(const RunContext& ctx, Manifest& m);
void cmd_pipeline(const RunContext& ctx, Manifest& m);

}  // namespace cli
