#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "velofilt/grid.hpp"
#include "velofilt/localize.hpp"
#include "velofilt/phantom.hpp"

namespace cli {

namespace fs = std::filesystem;

// Missing or unreadable stage input.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::string fmt(double v);

void write_truth_points(const std::vector<velofilt::phantom::PointRecord>& pts, const fs::path& p);
std::vector<velofilt::phantom::PointRecord> read_truth_points(const fs::path& p);

void write_localizations(const velofilt::localize::LocalizationSet& locs, const fs::path& p);
velofilt::localize::LocalizationSet read_localizations(const fs::path& p);

// Masks and velocity maps are stored as single-frame stacks.
void write_mask(const velofilt::Mask& m, const fs::path& stem);
velofilt::Mask read_mask(const fs::path& stem);
void write_velocity(const velofilt::VelocityMap& v, const fs::path& stem);
velofilt::VelocityMap read_velocity(const fs::path& stem);

void require_input(const fs::path& p, const std::string& stage);

// Accumulates artifacts and stage timings into <out>/manifest.json. Entries
// from earlier subcommands in the same directory are kept.
class Manifest {
public:
    Manifest(fs::path out_dir, const nlohmann::json& config, std::uint64_t seed);
    void add(const std::string& name, const fs::path& file);
    void add_stack(const std::string& name, const fs::path& stem);
    void stage_time(const std::string& stage, double seconds);
    void write() const;
    const fs::path& dir() const { return dir_; }

private:
    fs::path dir_;
    nlohmann::json doc_;
};

class StageTimer {
public:
    StageTimer() : t0_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
    }

private:
    std::chrono::steady_clock::time_point t0_;
};

}  // namespace cli
