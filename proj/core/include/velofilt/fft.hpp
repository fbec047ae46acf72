#pragma once

#include <complex>
#include <vector>

#include "velofilt/grid.hpp"

namespace velofilt {

using cplx = std::complex<double>;

// Forward transforms are unnormalized with kernel exp(-i k.r); inverse
// transforms carry the 1/N factor. FFTW runs single-threaded under a fixed
// plan (FFTW_ESTIMATE), so results are bit-identical across runs.
enum class FftDirection { Forward, Inverse };

// In-place complex transform over a row-major array of the given extents
// (slowest first). Inverse applies the 1/N scale.
void fft_inplace(cplx* data, const std::vector<int>& dims, FftDirection dir);

// Batched 2D transforms over consecutive nz x nx slices.
void fft2_batch(cplx* data, int nslices, int nz, int nx, FftDirection dir);

struct Spectrum3D {
    Grid2D grid;
    int nt = 0;
    double dt = 1.0;
    std::vector<cplx> data;  // same layout as FrameStack

    std::size_t index(int ikx, int ikz, int iw) const {
        return (std::size_t(iw) * grid.nz + ikz) * grid.nx + ikx;
    }
    double kx(int i) const { return lattice_frequency(i, grid.nx, grid.dx); }
    double kz(int i) const { return lattice_frequency(i, grid.nz, grid.dz); }
    double omega(int i) const { return lattice_frequency(i, nt, dt); }

    // Bin index in DFT order for a centered position c in [0, n).
    static int centered_to_dft(int c, int n) { return (c + n - n / 2) % n; }
};

Spectrum3D fft3(const FrameStack& frames);

// Inverse transform; returns the real part.
FrameStack ifft3(const Spectrum3D& spec);

double parseval_energy(const FrameStack& frames);
double parseval_energy(const Spectrum3D& spec);

}  // namespace velofilt
