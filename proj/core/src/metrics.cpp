#include "velofilt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "velofilt/error.hpp"

namespace velofilt::metrics {

using std::numbers::pi;

void LeParams::validate() const {
    require(sigma_perp > 0 && sigma_par >= sigma_perp, "LE: need sigma_par >= sigma_perp > 0");
    require(std::isfinite(theta), "LE: theta must be finite");
}

void LeParams::a_matrix(double a[2][2]) const {
    const double c = std::cos(theta), s = std::sin(theta);
    // R(-theta) = [[c, s], [-s, c]]
    a[0][0] = c / sigma_par;
    a[0][1] = s / sigma_par;
    a[1][0] = -s / sigma_perp;
    a[1][1] = c / sigma_perp;
}

LeParams default_le_params(double lambda, double theta, double n_bubbles) {
    return {0.3 * lambda, 0.15 * lambda, theta, n_bubbles};
}

double le_first_order(const LeParams& le, double dx, double dz) {
    double a[2][2];
    le.a_matrix(a);
    const double u = a[0][0] * dx + a[0][1] * dz;
    const double v = a[1][0] * dx + a[1][1] * dz;
    return u * u + v * v;
}

double localization_error(const std::vector<Point>& truth, const std::vector<Point>& est,
                          const LeParams& le, const Grid2D& g) {
    le.validate();
    g.validate();
    require(le.n_bubbles_T > 0, "LE: T must be positive");
    require(g.dx <= le.sigma_perp / 4 + 1e-15 && g.dz <= le.sigma_perp / 4 + 1e-15,
            "LE: evaluation grid must satisfy dx <= sigma_perp / 4");
    double a[2][2];
    le.a_matrix(a);
    // Blurred impulses are evaluated exactly at the grid points.
    std::vector<double> field(g.size(), 0.0);
    const double reach = 7 * le.sigma_par;
    auto deposit = [&](const Point& p, double sign) {
        const int ix0 = std::max(0, int(std::floor((p.x - reach - g.x0) / g.dx)));
        const int ix1 = std::min(g.nx - 1, int(std::ceil((p.x + reach - g.x0) / g.dx)));
        const int iz0 = std::max(0, int(std::floor((p.z - reach - g.z0) / g.dz)));
        const int iz1 = std::min(g.nz - 1, int(std::ceil((p.z + reach - g.z0) / g.dz)));
        for (int iz = iz0; iz <= iz1; ++iz)
            for (int ix = ix0; ix <= ix1; ++ix) {
                const double rx = g.x(ix) - p.x, rz = g.z(iz) - p.z;
                const double u = a[0][0] * rx + a[0][1] * rz;
                const double v = a[1][0] * rx + a[1][1] * rz;
                field[g.index(ix, iz)] += sign * std::exp(-0.5 * (u * u + v * v));
            }
    };
    for (const auto& p : est) deposit(p, 1.0);
    for (const auto& p : truth) deposit(p, -1.0);
    double sum = 0.0;
    for (double f : field) sum += f * f;
    return 2.0 / (le.sigma_par * le.sigma_perp * pi * le.n_bubbles_T) * sum * g.dx * g.dz;
}

double iou(const Mask& truth, const Mask& est) {
    require(truth.grid.same_shape(est.grid), "iou: mask shapes differ");
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < truth.data.size(); ++i) {
        const bool a = truth.data[i] != 0, b = est.data[i] != 0;
        inter += (a && b);
        uni += (a || b);
    }
    if (uni == 0) return 1.0;
    return double(inter) / double(uni);
}

double fve(const VelocityMap& truth, const VelocityMap& est, const FveOptions& opts) {
    require(truth.grid.same_shape(est.grid), "fve: map shapes differ");
    require(opts.fastest_fraction >= 0 && opts.fastest_fraction <= 1, "fve: fraction must be in [0,1]");
    const std::size_t n = truth.vx.size();
    auto err = [&](std::size_t i) {
        if (opts.speed_only) return std::abs(truth.speed(i) - est.speed(i));
        return std::abs(truth.vx[i] - est.vx[i]) + std::abs(truth.vz[i] - est.vz[i]);
    };
    std::vector<double> speeds;
    for (std::size_t i = 0; i < n; ++i)
        if (truth.speed(i) > 0) speeds.push_back(truth.speed(i));
    if (speeds.empty()) fail(ErrorKind::InvalidArgument, "fve: ground truth has no moving pixels");

    if (opts.fastest_fraction > 0) {
        std::vector<double> sorted = speeds;
        std::sort(sorted.begin(), sorted.end(), std::greater<>());
        const std::size_t k = std::max<std::size_t>(1, std::size_t(std::ceil(opts.fastest_fraction * double(sorted.size()))));
        const double cut = sorted[k - 1];
        double sum = 0.0;
        std::size_t cnt = 0;
        for (std::size_t i = 0; i < n; ++i)
            if (truth.speed(i) >= cut) {
                sum += err(i);
                ++cnt;
            }
        return sum / double(cnt);
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += err(i);
    return sum / double(speeds.size());
}

double window_peak(const FrameStack& frames, int t, double px, double pz, double radius) {
    const Grid2D& g = frames.grid();
    const int ix0 = std::max(0, int(std::floor((px - radius - g.x0) / g.dx)));
    const int ix1 = std::min(g.nx - 1, int(std::ceil((px + radius - g.x0) / g.dx)));
    const int iz0 = std::max(0, int(std::floor((pz - radius - g.z0) / g.dz)));
    const int iz1 = std::min(g.nz - 1, int(std::ceil((pz + radius - g.z0) / g.dz)));
    double m = 0.0;
    const double r2 = radius * radius;
    for (int iz = iz0; iz <= iz1; ++iz)
        for (int ix = ix0; ix <= ix1; ++ix) {
            const double rx = g.x(ix) - px, rz = g.z(iz) - pz;
            if (rx * rx + rz * rz > r2) continue;
            m = std::max(m, std::abs(frames.at(ix, iz, t)));
        }
    return m;
}

AttenuationMeasurement measure_attenuation(const FrameStack& before, const FrameStack& after,
                                           double px, double pz, double radius, int t0, int t1,
                                           double vx, double vz) {
    require(before.grid().same_as(after.grid()) && before.nt() == after.nt(),
            "measure_attenuation: stacks differ in shape");
    require(radius > 0, "measure_attenuation: radius must be positive");
    t0 = std::max(t0, 0);
    t1 = std::min(t1, before.nt());
    require(t1 > t0, "measure_attenuation: empty frame range");
    require(before.grid().contains(px, pz), "measure_attenuation: position outside grid");
    AttenuationMeasurement m;
    double sum = 0.0;
    for (int t = t0; t < t1; ++t) {
        const double cx = px + vx * t * before.dt(), cz = pz + vz * t * before.dt();
        const double b = window_peak(before, t, cx, cz, radius);
        const double a = window_peak(after, t, cx, cz, radius);
        if (a == 0.0) {
            m.infinite = true;
            m.ratio = std::numeric_limits<double>::infinity();
            m.frames_used = t1 - t0;
            return m;
        }
        sum += b / a;
    }
    m.frames_used = t1 - t0;
    m.ratio = sum / m.frames_used;
    return m;
}

}  // namespace velofilt::metrics
