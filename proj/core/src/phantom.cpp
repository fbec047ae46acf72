#include "velofilt/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "velofilt/error.hpp"
#include "velofilt/parallel.hpp"

namespace velofilt::phantom {

using std::numbers::pi;

double VesselSpec::dir_x() const { return std::cos(axis_angle); }
double VesselSpec::dir_z() const { return std::sin(axis_angle); }

double VesselSpec::in_plane_offset(double x, double z) const {
    return -(x - cx) * dir_z() + (z - cz) * dir_x();
}

double VesselSpec::along_axis(double x, double z) const {
    return (x - cx) * dir_x() + (z - cz) * dir_z();
}

void VesselSpec::validate() const {
    require(radius > 0 && std::isfinite(radius), "vessel: radius must be positive");
    require(v0 >= 0 && std::isfinite(v0), "vessel: v0 must be >= 0");
    require(c_mb >= 0 && std::isfinite(c_mb), "vessel: c_mb must be >= 0");
    require(flow_sign == 1 || flow_sign == -1, "vessel: flow_sign must be +1 or -1");
}

void RingVesselSpec::validate() const {
    require(radius > 0 && orbit_radius > radius, "ring vessel: need orbit_radius > radius > 0");
    require(v0 >= 0 && c_mb >= 0, "ring vessel: v0 and c_mb must be >= 0");
    require(angular_sign == 1 || angular_sign == -1, "ring vessel: angular_sign must be +-1");
}

double flow_speed(const VesselSpec& v, double rho) { return theory::flow_speed(v.profile(), rho); }

double default_length(const Grid2D& grid, const VesselSpec& v, double sigma_r) {
    // Farthest grid corner from the axis point, measured along the axis, on both sides.
    double reach = 0.0;
    for (double x : {grid.x0, grid.x_max()})
        for (double z : {grid.z0, grid.z_max()}) reach = std::max(reach, std::abs(v.along_axis(x, z)));
    return 2 * (reach + 4 * sigma_r + v.radius);
}

BubbleSet sample_bubbles(const VesselSpec& v, std::mt19937_64& rng, std::int64_t first_id) {
    v.validate();
    require(v.length > 0, "sample_bubbles: vessel length must be resolved before sampling");
    BubbleSet out;
    const double volume = pi * v.radius * v.radius * v.length;
    const double mean = v.c_mb * volume;
    if (mean <= 0) return out;
    std::poisson_distribution<long long> count_dist(mean);
    const long long n = count_dist(rng);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::uniform_real_distribution<double> along(-0.5 * v.length, 0.5 * v.length);
    out.reserve(std::size_t(n));
    const double ux = v.dir_x(), uz = v.dir_z();
    for (long long i = 0; i < n; ++i) {
        double a, b;
        do {
            a = unit(rng);
            b = unit(rng);
        } while (a * a + b * b > 1.0);
        a *= v.radius;
        b *= v.radius;
        const double s = along(rng);
        Bubble bb;
        bb.id = first_id + i;
        bb.pos.x = v.cx + s * ux - a * uz;
        bb.pos.z = v.cz + s * uz + a * ux;
        bb.pos.y = v.y_center + b;
        const double speed = flow_speed(v, std::hypot(a, b)) * v.flow_sign;
        bb.vel = {speed * ux, 0.0, speed * uz};
        out.push_back(bb);
    }
    return out;
}

BubbleSet sample_bubbles(const VesselSpec& v, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return sample_bubbles(v, rng);
}

BubbleSet sample_ring_bubbles(const RingVesselSpec& v, std::mt19937_64& rng,
                              std::int64_t first_id) {
    v.validate();
    BubbleSet out;
    const double volume = 2 * pi * v.orbit_radius * pi * v.radius * v.radius;
    const double mean = v.c_mb * volume;
    if (mean <= 0) return out;
    std::poisson_distribution<long long> count_dist(mean);
    const long long n = count_dist(rng);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::uniform_real_distribution<double> angle(0.0, 2 * pi);
    std::uniform_real_distribution<double> accept(0.0, 1.0);
    const double wmax = (v.orbit_radius + v.radius) / v.orbit_radius;
    for (long long i = 0; i < n; ++i) {
        double u, b;
        // Uniform in the torus: the cross-section point is weighted by its orbit radius.
        for (;;) {
            u = unit(rng) * v.radius;
            b = unit(rng) * v.radius;
            if (u * u + b * b > v.radius * v.radius) continue;
            if (accept(rng) * wmax <= (v.orbit_radius + u) / v.orbit_radius) break;
        }
        const double phi = angle(rng);
        const double rr = v.orbit_radius + u;
        Bubble bb;
        bb.id = first_id + i;
        bb.pos = {v.cx + rr * std::cos(phi), v.y_center + b, v.cz + rr * std::sin(phi)};
        const double speed = v.v0 * std::max(0.0, 1 - (u * u + b * b) / (v.radius * v.radius));
        const double s = speed * v.angular_sign;
        bb.vel = {-s * std::sin(phi), 0.0, s * std::cos(phi)};
        out.push_back(bb);
    }
    return out;
}

BubbleSet grid_bubbles(int nx, int nz, double spacing, double cx, double cz, double vx,
                       double vz) {
    require(nx >= 1 && nz >= 1, "grid_bubbles: counts must be >= 1");
    BubbleSet out;
    std::int64_t id = 0;
    for (int iz = 0; iz < nz; ++iz)
        for (int ix = 0; ix < nx; ++ix) {
            Bubble b;
            b.id = id++;
            b.pos = {cx + (ix - 0.5 * (nx - 1)) * spacing, 0.0, cz + (iz - 0.5 * (nz - 1)) * spacing};
            b.vel = {vx, 0.0, vz};
            out.push_back(b);
        }
    return out;
}

BubbleSet circle_bubbles(int count, double radius, double cx, double cz, double speed,
                         int angular_sign) {
    require(count >= 1 && radius > 0, "circle_bubbles: need count >= 1 and radius > 0");
    BubbleSet out;
    for (int i = 0; i < count; ++i) {
        const double phi = 2 * pi * i / count;
        Bubble b;
        b.id = i;
        b.pos = {cx + radius * std::cos(phi), 0.0, cz + radius * std::sin(phi)};
        const double s = speed * angular_sign;
        b.vel = {-s * std::sin(phi), 0.0, s * std::cos(phi)};
        out.push_back(b);
    }
    return out;
}

Bubble advance(const Bubble& b, const MotionSpec& motion, double dt) {
    Bubble out = b;
    if (motion.kind == MotionSpec::Kind::Linear) {
        out.pos.x += b.vel.x * dt;
        out.pos.y += b.vel.y * dt;
        out.pos.z += b.vel.z * dt;
        return out;
    }
    const double rx = b.pos.x - motion.cx;
    const double rz = b.pos.z - motion.cz;
    const double r2 = rx * rx + rz * rz;
    if (r2 <= 0.0) fail(ErrorKind::InvalidState, "advance: bubble at the circular motion center");
    // Angular rate from the in-plane velocity; y is carried along unchanged.
    const double omega = (rx * b.vel.z - rz * b.vel.x) / r2;
    const double c = std::cos(omega * dt), s = std::sin(omega * dt);
    out.pos.x = motion.cx + c * rx - s * rz;
    out.pos.z = motion.cz + s * rx + c * rz;
    out.vel.x = c * b.vel.x - s * b.vel.z;
    out.vel.z = s * b.vel.x + c * b.vel.z;
    return out;
}

BubbleSet advance(const BubbleSet& bubbles, const MotionSpec& motion, double dt) {
    require(dt > 0, "advance: dt must be positive");
    BubbleSet out;
    out.reserve(bubbles.size());
    for (const auto& b : bubbles) out.push_back(advance(b, motion, dt));
    return out;
}

void wrap_into_vessels(BubbleSet& bubbles, const std::vector<VesselSpec>& vessels) {
    for (auto& b : bubbles) {
        if (b.vessel < 0 || std::size_t(b.vessel) >= vessels.size()) continue;
        const VesselSpec& v = vessels[std::size_t(b.vessel)];
        if (v.length <= 0) continue;
        const double s = v.along_axis(b.pos.x, b.pos.z);
        const double shift = std::floor((s + 0.5 * v.length) / v.length) * v.length;
        if (shift != 0.0) {
            b.pos.x -= shift * v.dir_x();
            b.pos.z -= shift * v.dir_z();
        }
    }
}

namespace {

// Position at time t computed directly from the initial state, so frames are
// independent and there is no accumulated stepping error.
Bubble state_at(const Bubble& b0, const MotionSpec& motion, double t) {
    if (t == 0.0) return b0;
    return advance(b0, motion, t);
}

}  // namespace

SynthResult synthesize_frames(const BubbleSet& initial, const MotionSpec& motion,
                              const std::vector<VesselSpec>& wrap_vessels,
                              const psf::PsfModel& model, const Grid2D& grid, int nt, double dt,
                              const SynthOptions& opts) {
    model.validate();
    grid.validate();
    require(nt >= 1 && dt > 0, "synthesize_frames: need nt >= 1 and dt > 0");
    require(opts.noise_sigma >= 0, "synthesize_frames: noise sigma must be >= 0");

    FrameStack frames(grid, nt, dt);
    std::vector<std::vector<PointRecord>> per_frame(static_cast<std::size_t>(nt));

    parallel_for(std::size_t(nt), [&](std::size_t ti) {
        const int t = int(ti);
        BubbleSet now;
        now.reserve(initial.size());
        for (const auto& b : initial) now.push_back(state_at(b, motion, t * dt));
        wrap_into_vessels(now, wrap_vessels);
        auto frame = frames.frame(t);
        auto& recs = per_frame[ti];
        for (const auto& b : now) {
            add_psf(frame, grid, model, b.pos.x, b.pos.z);
            if (grid.contains(b.pos.x, b.pos.z))
                recs.push_back({t, b.id, b.pos.x, b.pos.z, b.vel.x, b.vel.z});
        }
    });

    if (opts.noise_sigma > 0) {
        std::mt19937_64 rng(opts.noise_seed);
        std::normal_distribution<double> n(0.0, opts.noise_sigma);
        for (double& v : frames.data()) v += n(rng);
    }

    SynthResult res{std::move(frames), {}};
    std::set<std::int64_t> seen;
    for (auto& recs : per_frame)
        for (auto& r : recs) {
            seen.insert(r.id);
            res.truth.points.push_back(r);
        }
    res.truth.n_bubbles = seen.size();
    res.truth.support = support_mask(wrap_vessels, grid);
    res.truth.velocity = ground_truth_velocity_map(wrap_vessels, grid);
    return res;
}

Mask support_mask(const std::vector<VesselSpec>& vessels, const Grid2D& grid) {
    Mask m(grid);
    for (const auto& v : vessels)
        for (int iz = 0; iz < grid.nz; ++iz)
            for (int ix = 0; ix < grid.nx; ++ix)
                if (std::abs(v.in_plane_offset(grid.x(ix), grid.z(iz))) <= v.radius)
                    m.data[grid.index(ix, iz)] = 1;
    return m;
}

Mask ring_support_mask(const RingVesselSpec& v, const Grid2D& grid) {
    Mask m(grid);
    for (int iz = 0; iz < grid.nz; ++iz)
        for (int ix = 0; ix < grid.nx; ++ix) {
            const double r = std::hypot(grid.x(ix) - v.cx, grid.z(iz) - v.cz);
            if (std::abs(r - v.orbit_radius) <= v.radius) m.data[grid.index(ix, iz)] = 1;
        }
    return m;
}

VelocityMap ground_truth_velocity_map(const std::vector<VesselSpec>& vessels, const Grid2D& grid) {
    VelocityMap vm(grid);
    for (const auto& v : vessels)
        for (int iz = 0; iz < grid.nz; ++iz)
            for (int ix = 0; ix < grid.nx; ++ix) {
                const double rho = v.in_plane_offset(grid.x(ix), grid.z(iz));
                if (std::abs(rho) > v.radius) continue;
                const double s = flow_speed(v, rho);
                const std::size_t i = grid.index(ix, iz);
                if (s > vm.speed(i) || (s == 0.0 && vm.speed(i) == 0.0)) {
                    vm.vx[i] = s * v.flow_sign * v.dir_x();
                    vm.vz[i] = s * v.flow_sign * v.dir_z();
                }
            }
    return vm;
}

VelocityMap ground_truth_velocity_map(const VesselSpec& v, const Grid2D& grid) {
    return ground_truth_velocity_map(std::vector<VesselSpec>{v}, grid);
}

VelocityMap ring_velocity_map(const RingVesselSpec& v, const Grid2D& grid) {
    VelocityMap vm(grid);
    for (int iz = 0; iz < grid.nz; ++iz)
        for (int ix = 0; ix < grid.nx; ++ix) {
            const double rx = grid.x(ix) - v.cx, rz = grid.z(iz) - v.cz;
            const double r = std::hypot(rx, rz);
            const double u = r - v.orbit_radius;
            if (std::abs(u) > v.radius || r == 0) continue;
            const double s = v.v0 * (1 - u * u / (v.radius * v.radius)) * v.angular_sign;
            const std::size_t i = grid.index(ix, iz);
            vm.vx[i] = -s * rz / r;
            vm.vz[i] = s * rx / r;
        }
    return vm;
}

}  // namespace velofilt::phantom
