#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "velofilt/localize.hpp"
#include "velofilt/phantom.hpp"
#include "velofilt/psf.hpp"
#include "velofilt/vfilter.hpp"

namespace cli {

// Schema violation; the message starts with the offending field path.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct GridSection {
    int nx = 64;
    int nz = 64;
    double dx = 0.03;
    double dz = 0.03;
    int nt = 200;
    double dt = 0.01;
    velofilt::Grid2D grid() const { return velofilt::make_grid(nx, nz, dx, dz, true); }
};

enum class PhantomKind { GridBubbles, CrossingVessels, ParallelVessels, SingleVessel, Circular };

struct GridBubblesSection {
    int nx = 3;
    int nz = 3;
    double spacing = 0.6;
    double cx = 0.0;
    double cz = 0.0;
    double vx = 1.0;
    double vz = 0.0;
};

struct ParallelSection {
    velofilt::phantom::VesselSpec base;
    double gap = 0.3;  // wall-to-wall distance
};

struct PhantomSection {
    PhantomKind kind = PhantomKind::SingleVessel;
    GridBubblesSection grid_bubbles;
    std::vector<velofilt::phantom::VesselSpec> vessels;
    ParallelSection parallel;
    velofilt::phantom::RingVesselSpec ring;
};

struct BankSection {
    double sigma_t = 0.5;
    double trunc = 4.0;
    double to_max_angle_deg = 10.0;
    velofilt::vfilter::FilterBankSpec bank;
};

struct MetricsSection {
    int fine_factor = 4;
    int closing_radius = 2;
    double segment_min_count = 1.0;
    double fastest_fraction = 0.05;
    int fve_border_px = 0;  // frame-grid pixels excluded at each border
    std::vector<double> time_points;  // s
    std::optional<double> le_sigma_par;
    std::optional<double> le_sigma_perp;
    std::vector<double> gap_sweep;  // mm
    double le_time = -1.0;          // s; <= 0 means the last frame
    bool compare_baseline = true;
};

struct OutputsSection {
    bool preview_pgm = true;
    bool save_filtered = false;
};

struct ExperimentConfig {
    std::uint64_t seed = 1;
    velofilt::psf::PsfModel model;
    std::optional<velofilt::psf::ToParams> to;  // applied to near-lateral bank members
    GridSection grid;
    PhantomSection phantom;
    double noise_sigma = 0.0;
    std::optional<BankSection> filter_bank;
    velofilt::localize::DetectorConfig detector;
    MetricsSection metrics;
    OutputsSection outputs;
    nlohmann::json raw;

    // Vessels with lengths resolved against the grid (empty for the ring and grid phantoms).
    std::vector<velofilt::phantom::VesselSpec> resolved_vessels() const;
    velofilt::phantom::MotionSpec motion() const;
};

ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);

std::vector<velofilt::phantom::VesselSpec> parallel_vessels(const ParallelSection& p, double gap);

const char* kind_name(PhantomKind k);

}  // namespace cli
