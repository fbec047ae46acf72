#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace velofilt {

// Uniform 2D sampling grid. Sample (ix, iz) sits at (x0 + ix*dx, z0 + iz*dz).
struct Grid2D {
    int nx = 1;
    int nz = 1;
    double dx = 1.0;
    double dz = 1.0;
    double x0 = 0.0;
    double z0 = 0.0;

    double x(int ix) const { return x0 + ix * dx; }
    double z(int iz) const { return z0 + iz * dz; }
    std::size_t size() const { return std::size_t(nx) * std::size_t(nz); }
    std::size_t index(int ix, int iz) const { return std::size_t(iz) * nx + ix; }

    double x_max() const { return x(nx - 1); }
    double z_max() const { return z(nz - 1); }
    bool contains(double xx, double zz, double margin = 0.0) const;

    // Finer grid covering the same area; pixel centers of the coarse grid
    // are split into factor x factor sub-pixels.
    Grid2D refined(int factor) const;

    bool same_shape(const Grid2D& o) const { return nx == o.nx && nz == o.nz; }
    bool same_as(const Grid2D& o, double tol = 1e-12) const;

    void validate() const;
};

Grid2D make_grid(int nx, int nz, double dx, double dz, bool center_origin);

// Real 2D image on a grid (x fastest).
struct Image {
    Grid2D grid;
    std::vector<double> data;

    Image() = default;
    explicit Image(const Grid2D& g) : grid(g), data(g.size(), 0.0) {}

    double& at(int ix, int iz) { return data[grid.index(ix, iz)]; }
    double at(int ix, int iz) const { return data[grid.index(ix, iz)]; }
};

struct Mask {
    Grid2D grid;
    std::vector<std::uint8_t> data;

    Mask() = default;
    explicit Mask(const Grid2D& g) : grid(g), data(g.size(), 0) {}

    bool at(int ix, int iz) const { return data[grid.index(ix, iz)] != 0; }
    std::size_t count() const;
};

// Per-pixel velocity (vx, vz); speed 0 means "no value".
struct VelocityMap {
    Grid2D grid;
    std::vector<double> vx;
    std::vector<double> vz;

    VelocityMap() = default;
    explicit VelocityMap(const Grid2D& g) : grid(g), vx(g.size(), 0.0), vz(g.size(), 0.0) {}

    double speed(std::size_t i) const;
    Image speed_image() const;
};

// Real spatiotemporal data b(x, z, t). Layout: t-major, then z rows, x fastest.
class FrameStack {
public:
    FrameStack() = default;
    FrameStack(const Grid2D& grid, int nt, double dt);
    FrameStack(const Grid2D& grid, int nt, double dt, std::vector<double> data);

    const Grid2D& grid() const { return grid_; }
    int nt() const { return nt_; }
    double dt() const { return dt_; }
    std::size_t frame_size() const { return grid_.size(); }
    std::size_t size() const { return data_.size(); }

    std::span<double> frame(int t);
    std::span<const double> frame(int t) const;
    Image frame_image(int t) const;

    double& at(int ix, int iz, int t) { return data_[index(ix, iz, t)]; }
    double at(int ix, int iz, int t) const { return data_[index(ix, iz, t)]; }
    std::size_t index(int ix, int iz, int t) const {
        return (std::size_t(t) * grid_.nz + iz) * grid_.nx + ix;
    }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool all_finite() const;

private:
    Grid2D grid_;
    int nt_ = 0;
    double dt_ = 1.0;
    std::vector<double> data_;
};

// Frequency of DFT bin i out of n for sample spacing d, in rad per unit.
// Bins above (n-1)/2 map to negative frequencies.
double lattice_frequency(int i, int n, double d);

}  // namespace velofilt
