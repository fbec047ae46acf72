#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "velofilt/grid.hpp"
#include "velofilt/psf.hpp"
#include "velofilt/theory.hpp"

namespace velofilt::phantom {

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
};

// Straight cylinder with parabolic flow. The axis lies in the plane y = y_center
// and points along (cos theta, sin theta) in (x, z).
struct VesselSpec {
    double radius = 0.15;      // mm
    double v0 = 5.0;           // mm/s, centerline speed
    double c_mb = 0.0;         // bubbles / mm^3
    double axis_angle = 0.0;   // rad
    double cx = 0.0;           // mm, a point on the axis
    double cz = 0.0;
    double length = 0.0;       // mm; <= 0 means "cover the grid"
    double y_center = 0.0;     // mm
    int flow_sign = 1;         // +1 along the axis direction, -1 against it

    theory::VesselProfile profile() const { return {radius, v0, c_mb}; }
    double dir_x() const;
    double dir_z() const;
    // Signed in-plane distance from the axis (positive to the left of the flow axis).
    double in_plane_offset(double x, double z) const;
    double along_axis(double x, double z) const;
    void validate() const;
};

// Torus centered on (cx, cz) in the image plane; flow circulates around it.
struct RingVesselSpec {
    double orbit_radius = 2.0;  // mm, radius of the tube centerline
    double radius = 0.45;       // mm, tube radius
    double v0 = 1.0;            // mm/s
    double c_mb = 0.0;
    double cx = 0.0;
    double cz = 0.0;
    double y_center = 0.0;
    int angular_sign = 1;       // +1: rotation from +x towards +z
    void validate() const;
};

struct Bubble {
    Vec3 pos;
    Vec3 vel;
    std::int64_t id = 0;
    int vessel = -1;  // index into the vessel list used for wrapping, -1 for free bubbles
};

using BubbleSet = std::vector<Bubble>;

struct MotionSpec {
    enum class Kind { Linear, Circular } kind = Kind::Linear;
    double cx = 0.0;  // circular motion center
    double cz = 0.0;
};

struct PointRecord {
    int t = 0;
    std::int64_t id = 0;
    double x = 0.0;
    double z = 0.0;
    double vx = 0.0;
    double vz = 0.0;
};

struct GroundTruth {
    std::vector<PointRecord> points;  // in-grid bubble centers, per frame
    Mask support;
    VelocityMap velocity;
    std::size_t n_bubbles = 0;  // distinct visible bubbles
};

struct SynthOptions {
    double noise_sigma = 0.0;
    std::uint64_t noise_seed = 0;
};

double flow_speed(const VesselSpec& v, double rho);

// Length that covers the grid diagonal with a margin of 4 sigma_r.
double default_length(const Grid2D& grid, const VesselSpec& v, double sigma_r);

BubbleSet sample_bubbles(const VesselSpec& v, std::mt19937_64& rng, std::int64_t first_id = 0);
BubbleSet sample_bubbles(const VesselSpec& v, std::uint64_t seed);
BubbleSet sample_ring_bubbles(const RingVesselSpec& v, std::mt19937_64& rng,
                              std::int64_t first_id = 0);

// Regular grid of bubbles in the image plane, all with the same velocity.
BubbleSet grid_bubbles(int nx, int nz, double spacing, double cx, double cz, double vx,
                       double vz);

// Bubbles evenly spaced on a circle, moving tangentially.
BubbleSet circle_bubbles(int count, double radius, double cx, double cz, double speed,
                         int angular_sign = 1);

Bubble advance(const Bubble& b, const MotionSpec& motion, double dt);
BubbleSet advance(const BubbleSet& bubbles, const MotionSpec& motion, double dt);

// Moves bubbles that left their vessel back by one vessel length along the axis.
void wrap_into_vessels(BubbleSet& bubbles, const std::vector<VesselSpec>& vessels);

struct SynthResult {
    FrameStack frames;
    GroundTruth truth;
};

SynthResult synthesize_frames(const BubbleSet& initial, const MotionSpec& motion,
                              const std::vector<VesselSpec>& wrap_vessels,
                              const psf::PsfModel& model, const Grid2D& grid, int nt, double dt,
                              const SynthOptions& opts = {});

Mask support_mask(const std::vector<VesselSpec>& vessels, const Grid2D& grid);
Mask ring_support_mask(const RingVesselSpec& v, const Grid2D& grid);

// Center-plane max-speed map; overlapping vessels keep the faster one.
VelocityMap ground_truth_velocity_map(const std::vector<VesselSpec>& vessels, const Grid2D& grid);
VelocityMap ground_truth_velocity_map(const VesselSpec& v, const Grid2D& grid);
VelocityMap ring_velocity_map(const RingVesselSpec& v, const Grid2D& grid);

}  // namespace velofilt::phantom
