#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "velofilt/fft.hpp"
#include "velofilt/grid.hpp"
#include "velofilt/psf.hpp"
#include "velofilt/window.hpp"

namespace velofilt::vfilter {

struct VelocityFilterSpec {
    double vx = 0.0;  // mm/s
    double vz = 0.0;
    double sigma_t = 0.5;  // s
    double trunc = 4.0;    // window support in sigmas; also sets temporal padding

    double speed() const;
    // Angle of v_f to the lateral axis folded into [0, pi/2].
    double lateral_angle() const;
    void validate() const;
};

struct TransferFunction3D {
    Grid2D grid;
    int nt = 0;
    double dt = 1.0;
    VelocityFilterSpec spec;
    std::vector<double> gain;  // Spectrum3D layout
};

struct FilterBankSpec {
    std::vector<VelocityFilterSpec> specs;
    double to_max_angle_deg = 10.0;  // TO applies to members this close to lateral
};

// exp(-sigma_t^2 a^2 / 2) with a = Omega + k.v_f folded to the nearest
// temporal alias, a in [-pi/dt, pi/dt).
double filter_gain(double kx, double kz, double omega, const VelocityFilterSpec& s, double dt);
double to_gain(double kx, const psf::ToParams& t);

TransferFunction3D build_filter(const Grid2D& grid, int nt, double dt, const VelocityFilterSpec& spec);

// Temporal zero padding used by the FFT path (>= window half width).
int padded_length(int nt, const VelocityFilterSpec& spec, double dt);

FrameStack apply_filter_fft(const FrameStack& frames, const VelocityFilterSpec& spec);
FrameStack apply_filter_direct(const FrameStack& frames, const VelocityFilterSpec& spec);
FrameStack apply_to_filter(const FrameStack& frames, const psf::PsfParams& p,
                           const psf::ToParams& t);

// Holds one forward spectrum and applies many filters to it.
class FilterEngine {
public:
    FilterEngine(const FrameStack& frames, int padded_nt);

    const Grid2D& grid() const { return grid_; }
    int nt() const { return nt_; }
    int padded_nt() const { return spec_.nt; }

    FrameStack apply(const VelocityFilterSpec& spec, const psf::ToParams* to = nullptr) const;

private:
    Grid2D grid_;
    int nt_ = 0;
    Spectrum3D spec_;
};

bool uses_to(const VelocityFilterSpec& spec, const FilterBankSpec& bank);

using BankSink = std::function<void(std::size_t index, const VelocityFilterSpec&, FrameStack&&)>;

// Runs every member and hands results to the sink in bank order.
void run_filter_bank(const FrameStack& frames, const FilterBankSpec& bank,
                     const std::optional<psf::ToParams>& to, const BankSink& sink);

// Speeds along each direction spaced by 2*dv(theta) so neighbouring passbands touch.
FilterBankSpec tile_bank(const psf::PsfParams& p, double sigma_t, double v_max,
                         const std::vector<double>& directions_rad, double trunc = 4.0);

}  // namespace velofilt::vfilter
