#pragma once

#include <optional>
#include <string>

#include "stages.hpp"

namespace cli {

struct TheoryOptions {
    bool nrf = false;
    bool deltav = false;
    bool gamma = false;
    bool density = false;
    bool to_compare = false;

    double sigma_r = 0.3;   // mm
    double lambda = 0.3;    // mm
    double sigma_t = 0.5;   // s
    std::optional<double> ratio;  // sigma_r / sigma_t, mm/s; overrides sigma_t
    std::string mode = "pre";
    double step_deg = 5.0;
    int points = 41;
    std::optional<double> dv_max;  // mm/s

    double v0_max = 10.0;      // mm/s
    double frame_rate = 100.0; // Hz

    double radius = 1.0;   // mm
    double v0 = 10.0;      // mm/s
    double c_mb = 1000.0;  // 1/mm^3
    double v_f = 5.0;      // mm/s
    double theta_deg = 45.0;

    double lambda_x = 0.6;  // mm
    double sigma_x = 0.3;   // mm
};

// Writes the requested tables to stdout, and to <out>/theory_*.csv when out is set.
void cmd_theory(const TheoryOptions& o, const std::optional<fs::path>& out, Format format,
                Manifest* manifest);

}  // namespace cli
