#include "velofilt/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "velofilt/error.hpp"

namespace velofilt {

bool Grid2D::contains(double xx, double zz, double margin) const {
    return xx >= x0 - margin && xx <= x_max() + margin && zz >= z0 - margin &&
           zz <= z_max() + margin;
}

Grid2D Grid2D::refined(int factor) const {
    require(factor >= 1, "refinement factor must be >= 1");
    Grid2D g;
    g.nx = nx * factor;
    g.nz = nz * factor;
    g.dx = dx / factor;
    g.dz = dz / factor;
    g.x0 = x0 - 0.5 * (factor - 1) * g.dx;
    g.z0 = z0 - 0.5 * (factor - 1) * g.dz;
    return g;
}

bool Grid2D::same_as(const Grid2D& o, double tol) const {
    return same_shape(o) && std::abs(dx - o.dx) <= tol && std::abs(dz - o.dz) <= tol &&
           std::abs(x0 - o.x0) <= tol && std::abs(z0 - o.z0) <= tol;
}

void Grid2D::validate() const {
    require(nx >= 1 && nz >= 1, "grid dimensions must be >= 1");
    require(dx > 0 && dz > 0 && std::isfinite(dx) && std::isfinite(dz),
            "grid spacing must be positive");
    require(std::isfinite(x0) && std::isfinite(z0), "grid origin must be finite");
    require(std::size_t(nx) * std::size_t(nz) < (std::size_t(1) << 40), "grid too large");
}

Grid2D make_grid(int nx, int nz, double dx, double dz, bool center_origin) {
    Grid2D g;
    g.nx = nx;
    g.nz = nz;
    g.dx = dx;
    g.dz = dz;
    g.validate();
    if (center_origin) {
        g.x0 = -dx * (nx - 1) / 2.0;
        g.z0 = -dz * (nz - 1) / 2.0;
    }
    return g;
}

std::size_t Mask::count() const {
    return std::size_t(std::count_if(data.begin(), data.end(), [](auto v) { return v != 0; }));
}

double VelocityMap::speed(std::size_t i) const { return std::hypot(vx[i], vz[i]); }

Image VelocityMap::speed_image() const {
    Image img(grid);
    for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = speed(i);
    return img;
}

FrameStack::FrameStack(const Grid2D& grid, int nt, double dt)
    : FrameStack(grid, nt, dt, std::vector<double>(grid.size() * std::size_t(std::max(nt, 0)))) {}

FrameStack::FrameStack(const Grid2D& grid, int nt, double dt, std::vector<double> data)
    : grid_(grid), nt_(nt), dt_(dt), data_(std::move(data)) {
    grid_.validate();
    require(nt >= 1, "frame count must be >= 1");
    require(dt > 0 && std::isfinite(dt), "frame period must be positive");
    require(data_.size() == grid_.size() * std::size_t(nt),
            "frame data length does not match nx*nz*nt");
}

std::span<double> FrameStack::frame(int t) {
    return {data_.data() + std::size_t(t) * frame_size(), frame_size()};
}

std::span<const double> FrameStack::frame(int t) const {
    return {data_.data() + std::size_t(t) * frame_size(), frame_size()};
}

Image FrameStack::frame_image(int t) const {
    Image img(grid_);
    auto f = frame(t);
    std::copy(f.begin(), f.end(), img.data.begin());
    return img;
}

bool FrameStack::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double lattice_frequency(int i, int n, double d) {
    const int m = (i <= (n - 1) / 2) ? i : i - n;
    return 2.0 * std::numbers::pi * m / (n * d);
}

}  // namespace velofilt
