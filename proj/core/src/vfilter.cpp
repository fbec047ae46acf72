#include "velofilt/vfilter.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "velofilt/error.hpp"
#include "velofilt/parallel.hpp"
#include "velofilt/theory.hpp"

namespace velofilt::vfilter {

using std::numbers::pi;

double VelocityFilterSpec::speed() const { return std::hypot(vx, vz); }

double VelocityFilterSpec::lateral_angle() const {
    if (speed() == 0.0) return 0.0;
    return std::atan2(std::abs(vz), std::abs(vx));
}

void VelocityFilterSpec::validate() const {
    require(sigma_t > 0 && std::isfinite(sigma_t), "velocity filter: sigma_t must be positive");
    require(std::isfinite(vx) && std::isfinite(vz), "velocity filter: v_f must be finite");
    require(trunc >= 3, "velocity filter: truncation must be >= 3 sigma");
}

double filter_gain(double kx, double kz, double omega, const VelocityFilterSpec& s, double dt) {
    const double period = 2 * pi / dt;
    double a = omega + kx * s.vx + kz * s.vz;
    a -= period * std::floor(a / period + 0.5);
    return std::exp(-0.5 * s.sigma_t * s.sigma_t * a * a);
}

double to_gain(double kx, const psf::ToParams& t) {
    const double k0 = t.k0x();
    const double s2 = t.sigma_x * t.sigma_x;
    return std::exp(-0.5 * s2 * (kx - k0) * (kx - k0)) + std::exp(-0.5 * s2 * (kx + k0) * (kx + k0));
}

TransferFunction3D build_filter(const Grid2D& grid, int nt, double dt, const VelocityFilterSpec& spec) {
    grid.validate();
    spec.validate();
    require(nt >= 1 && dt > 0, "build_filter: need nt >= 1 and dt > 0");
    TransferFunction3D h;
    h.grid = grid;
    h.nt = nt;
    h.dt = dt;
    h.spec = spec;
    h.gain.resize(grid.size() * std::size_t(nt));
    std::size_t i = 0;
    for (int iw = 0; iw < nt; ++iw) {
        const double om = lattice_frequency(iw, nt, dt);
        for (int iz = 0; iz < grid.nz; ++iz) {
            const double kz = lattice_frequency(iz, grid.nz, grid.dz);
            for (int ix = 0; ix < grid.nx; ++ix)
                h.gain[i++] = filter_gain(lattice_frequency(ix, grid.nx, grid.dx), kz, om, spec, dt);
        }
    }
    return h;
}

namespace {

bool smooth_size(int n) {
    for (int p : {2, 3, 5, 7})
        while (n % p == 0) n /= p;
    return n == 1;
}

}  // namespace

int padded_length(int nt, const VelocityFilterSpec& spec, double dt) {
    const int hw = int(std::ceil(spec.trunc * spec.sigma_t / dt - 1e-9));
    int n = nt + hw;
    while (!smooth_size(n)) ++n;
    return n;
}

FilterEngine::FilterEngine(const FrameStack& frames, int padded_nt)
    : grid_(frames.grid()), nt_(frames.nt()) {
    require(padded_nt >= frames.nt(), "filter engine: padded length shorter than input");
    require(frames.all_finite(), "filter engine: input contains non-finite samples");
    spec_.grid = grid_;
    spec_.nt = padded_nt;
    spec_.dt = frames.dt();
    spec_.data.assign(grid_.size() * std::size_t(padded_nt), cplx(0.0, 0.0));
    std::copy(frames.data().begin(), frames.data().end(), spec_.data.begin());
    fft_inplace(spec_.data.data(), {padded_nt, grid_.nz, grid_.nx}, FftDirection::Forward);
}

FrameStack FilterEngine::apply(const VelocityFilterSpec& spec, const psf::ToParams* to) const {
    spec.validate();
    const Grid2D& g = grid_;
    const int ntp = spec_.nt;
    std::vector<double> kx(std::size_t(g.nx)), kz(std::size_t(g.nz)), tg(std::size_t(g.nx), 1.0);
    for (int ix = 0; ix < g.nx; ++ix) {
        kx[std::size_t(ix)] = lattice_frequency(ix, g.nx, g.dx);
        if (to) tg[std::size_t(ix)] = to_gain(kx[std::size_t(ix)], *to);
    }
    for (int iz = 0; iz < g.nz; ++iz) kz[std::size_t(iz)] = lattice_frequency(iz, g.nz, g.dz);

    std::vector<cplx> buf(spec_.data.size());
    std::size_t i = 0;
    for (int iw = 0; iw < ntp; ++iw) {
        const double om = lattice_frequency(iw, ntp, spec_.dt);
        for (int iz = 0; iz < g.nz; ++iz)
            for (int ix = 0; ix < g.nx; ++ix, ++i) {
                const double h = filter_gain(kx[std::size_t(ix)], kz[std::size_t(iz)], om, spec, spec_.dt);
                buf[i] = spec_.data[i] * (h * tg[std::size_t(ix)]);
            }
    }
    fft_inplace(buf.data(), {ntp, g.nz, g.nx}, FftDirection::Inverse);
    std::vector<double> out(g.size() * std::size_t(nt_));
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = buf[j].real();
    return FrameStack(g, nt_, spec_.dt, std::move(out));
}

FrameStack apply_filter_fft(const FrameStack& frames, const VelocityFilterSpec& spec) {
    spec.validate();
    FilterEngine eng(frames, padded_length(frames.nt(), spec, frames.dt()));
    return eng.apply(spec);
}

FrameStack apply_filter_direct(const FrameStack& frames, const VelocityFilterSpec& spec) {
    spec.validate();
    require(frames.all_finite(), "apply_filter_direct: input contains non-finite samples");
    const Grid2D& g = frames.grid();
    const int nt = frames.nt();
    const double dt = frames.dt();
    const SampledWindow w = gaussian_window(spec.sigma_t, dt, spec.trunc);
    const std::size_t fs = g.size();

    std::vector<cplx> spectra(fs * std::size_t(nt));
    std::copy(frames.data().begin(), frames.data().end(), spectra.begin());
    fft2_batch(spectra.data(), nt, g.nz, g.nx, FftDirection::Forward);

    std::vector<double> kx(std::size_t(g.nx)), kz(std::size_t(g.nz));
    for (int ix = 0; ix < g.nx; ++ix) kx[std::size_t(ix)] = lattice_frequency(ix, g.nx, g.dx);
    for (int iz = 0; iz < g.nz; ++iz) kz[std::size_t(iz)] = lattice_frequency(iz, g.nz, g.dz);

    // Phase ramp per lag n: exp(-i k.v_f n dt) shifts a frame by +v_f n dt.
    std::vector<cplx> out(fs * std::size_t(nt), cplx(0.0, 0.0));
    std::vector<cplx> ramp(fs);
    for (int n = -w.half_width; n <= w.half_width; ++n) {
        const double tau = n * dt;
        const double wt = w.at(n) * dt;
        for (int iz = 0; iz < g.nz; ++iz)
            for (int ix = 0; ix < g.nx; ++ix) {
                const double ph = -(kx[std::size_t(ix)] * spec.vx + kz[std::size_t(iz)] * spec.vz) * tau;
                ramp[g.index(ix, iz)] = wt * cplx(std::cos(ph), std::sin(ph));
            }
        for (int t = 0; t < nt; ++t) {
            const int src = t - n;
            if (src < 0 || src >= nt) continue;  // zero extension
            const cplx* in = spectra.data() + std::size_t(src) * fs;
            cplx* o = out.data() + std::size_t(t) * fs;
            for (std::size_t j = 0; j < fs; ++j) o[j] += in[j] * ramp[j];
        }
    }
    fft2_batch(out.data(), nt, g.nz, g.nx, FftDirection::Inverse);
    std::vector<double> res(out.size());
    for (std::size_t j = 0; j < out.size(); ++j) res[j] = out[j].real();
    return FrameStack(g, nt, dt, std::move(res));
}

FrameStack apply_to_filter(const FrameStack& frames, const psf::PsfParams& p, const psf::ToParams& t) {
    p.validate();
    t.validate();
    const Grid2D& g = frames.grid();
    const std::size_t fs = g.size();
    std::vector<cplx> buf(frames.data().begin(), frames.data().end());
    fft2_batch(buf.data(), frames.nt(), g.nz, g.nx, FftDirection::Forward);
    std::vector<double> gain(std::size_t(g.nx));
    for (int ix = 0; ix < g.nx; ++ix) gain[std::size_t(ix)] = to_gain(lattice_frequency(ix, g.nx, g.dx), t);
    for (std::size_t j = 0; j < buf.size(); ++j) buf[j] *= gain[(j % fs) % std::size_t(g.nx)];
    fft2_batch(buf.data(), frames.nt(), g.nz, g.nx, FftDirection::Inverse);
    std::vector<double> res(buf.size());
    for (std::size_t j = 0; j < buf.size(); ++j) res[j] = buf[j].real();
    return FrameStack(g, frames.nt(), frames.dt(), std::move(res));
}

bool uses_to(const VelocityFilterSpec& spec, const FilterBankSpec& bank) {
    if (spec.speed() == 0.0) return false;
    return spec.lateral_angle() <= bank.to_max_angle_deg * pi / 180.0 + 1e-12;
}

void run_filter_bank(const FrameStack& frames, const FilterBankSpec& bank,
                     const std::optional<psf::ToParams>& to, const BankSink& sink) {
    require(!bank.specs.empty(), "filter bank is empty");
    int ntp = frames.nt();
    for (const auto& s : bank.specs) {
        s.validate();
        require(s.speed() >= 0, "filter bank: speeds must be >= 0");
        ntp = std::max(ntp, padded_length(frames.nt(), s, frames.dt()));
    }
    if (to) to->validate();
    FilterEngine eng(frames, ntp);

    const std::size_t n = bank.specs.size();
    const std::size_t batch = std::size_t(std::max(1, thread_count()));
    for (std::size_t start = 0; start < n; start += batch) {
        const std::size_t m = std::min(batch, n - start);
        std::vector<FrameStack> outs(m);
        parallel_for(m, [&](std::size_t j) {
            const auto& s = bank.specs[start + j];
            const psf::ToParams* tp = (to && uses_to(s, bank)) ? &*to : nullptr;
            outs[j] = eng.apply(s, tp);
        });
        for (std::size_t j = 0; j < m; ++j) {
            try {
                sink(start + j, bank.specs[start + j], std::move(outs[j]));
            } catch (const Error& e) {
                throw Error(e.kind(), "filter bank member " + std::to_string(start + j) + ": " + e.what());
            } catch (const std::exception& e) {
                throw Error(ErrorKind::Io, "filter bank member " + std::to_string(start + j) + ": " + e.what());
            }
        }
    }
}

FilterBankSpec tile_bank(const psf::PsfParams& p, double sigma_t, double v_max,
                         const std::vector<double>& directions_rad, double trunc) {
    require(v_max > 0, "tile_bank: v_max must be positive");
    require(!directions_rad.empty(), "tile_bank: need at least one direction");
    FilterBankSpec bank;
    for (double phi : directions_rad) {
        const double theta = std::atan2(std::abs(std::sin(phi)), std::abs(std::cos(phi)));
        const double dv = theory::velocity_bandwidth(p, sigma_t, theta, theory::BandMode::Pre).delta_v;
        for (double s = dv; s - dv < v_max; s += 2 * dv)
            bank.specs.push_back({s * std::cos(phi), s * std::sin(phi), sigma_t, trunc});
    }
    return bank;
}

}  // namespace velofilt::vfilter
