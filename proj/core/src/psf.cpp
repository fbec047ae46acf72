#include "velofilt/psf.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "velofilt/error.hpp"

namespace velofilt::psf {

using std::numbers::pi;

namespace {
constexpr double kSupportSigmas = 8.0;
}

void PsfParams::validate() const {
    require(sigma_r > 0 && std::isfinite(sigma_r), "psf: sigma_r must be positive");
    require(lambda > 0 && std::isfinite(lambda), "psf: lambda must be positive");
}

double ToParams::k0x() const { return 2 * pi / lambda_x; }

double ToParams::lambda_x_tilde(const PsfParams& p) const {
    return (1 + p.sigma_r * p.sigma_r / (sigma_x * sigma_x)) * lambda_x;
}

double ToParams::lateral_scale(const PsfParams& p) const {
    return 1.0 / std::sqrt(1 + sigma_x * sigma_x / (p.sigma_r * p.sigma_r));
}

double ToParams::c_to(const PsfParams& p) const {
    const double lt = lambda_x_tilde(p);
    const double sr2 = p.sigma_r * p.sigma_r;
    return 2 * lateral_scale(p) *
           std::exp(-2 * pi * pi * sr2 * (1 + sr2 / (sigma_x * sigma_x)) / (lt * lt));
}

void ToParams::validate() const {
    require(lambda_x > 0 && std::isfinite(lambda_x), "to: lambda_x must be positive");
    require(sigma_x > 0 && std::isfinite(sigma_x), "to: sigma_x must be positive");
}

double MatchedFilterTheory::autocorr(double x, double z, double lambda) const {
    const double s2 = sigma_r_hat * sigma_r_hat;
    const double gh = g_e_hat_peak * std::exp(-(x * x + z * z) / (2 * s2));
    return 0.5 * gh * std::cos(2 * pi * z / lambda) + c_g * gh;
}

const char* to_string(Mode m) {
    switch (m) {
        case Mode::Post: return "post";
        case Mode::Pre: return "pre";
        case Mode::To: return "to";
    }
    return "?";
}

Mode mode_from_string(const std::string& s) {
    if (s == "post") return Mode::Post;
    if (s == "pre") return Mode::Pre;
    if (s == "to") return Mode::To;
    fail(ErrorKind::InvalidArgument, "unknown psf mode '" + s + "'");
}

double eval_post_envelope(const PsfParams& p, double x, double z) {
    const double s2 = p.sigma_r * p.sigma_r;
    return std::exp(-(x * x + z * z) / (2 * s2)) / (2 * pi * s2);
}

double eval_pre_envelope(const PsfParams& p, double x, double z) {
    return eval_post_envelope(p, x, z) * std::cos(2 * pi * z / p.lambda);
}

double eval_to_envelope(const PsfParams& p, const ToParams& t, double x, double z) {
    return t.c_to(p) * eval_post_envelope(p, t.lateral_scale(p) * x, z);
}

double eval_to_psf(const PsfParams& p, const ToParams& t, double x, double z) {
    return eval_to_envelope(p, t, x, z) * std::cos(2 * pi * z / p.lambda) *
           std::cos(2 * pi * x / t.lambda_x_tilde(p));
}

double PsfModel::eval(double x, double z) const {
    switch (mode) {
        case Mode::Post: return eval_post_envelope(params, x, z);
        case Mode::Pre: return eval_pre_envelope(params, x, z);
        case Mode::To: return eval_to_psf(params, *to, x, z);
    }
    return 0.0;
}

double PsfModel::envelope_sigma_x() const {
    return mode == Mode::To ? params.sigma_r / to->lateral_scale(params) : params.sigma_r;
}

double PsfModel::support_x() const { return kSupportSigmas * envelope_sigma_x(); }

double PsfModel::support_z() const { return kSupportSigmas * params.sigma_r; }

void PsfModel::validate() const {
    params.validate();
    if (mode == Mode::To) {
        require(to.has_value(), "psf: TO mode requires TO parameters");
        to->validate();
    }
}

Image render_psf(const PsfModel& model, const Grid2D& grid, double cx, double cz) {
    model.validate();
    Image img(grid);
    for (int iz = 0; iz < grid.nz; ++iz)
        for (int ix = 0; ix < grid.nx; ++ix)
            img.at(ix, iz) = model.eval(grid.x(ix) - cx, grid.z(iz) - cz);
    return img;
}

void add_psf(std::span<double> frame, const Grid2D& grid, const PsfModel& model, double cx,
             double cz, double amplitude) {
    const PsfParams& p = model.params;
    const double sx = model.support_x();
    const double sz = model.support_z();
    const int ix0 = std::max(0, int(std::floor((cx - sx - grid.x0) / grid.dx)));
    const int ix1 = std::min(grid.nx - 1, int(std::ceil((cx + sx - grid.x0) / grid.dx)));
    const int iz0 = std::max(0, int(std::floor((cz - sz - grid.z0) / grid.dz)));
    const int iz1 = std::min(grid.nz - 1, int(std::ceil((cz + sz - grid.z0) / grid.dz)));
    if (ix0 > ix1 || iz0 > iz1) return;

    const double s2 = p.sigma_r * p.sigma_r;
    double lat_scale = 1.0, amp = amplitude / (2 * pi * s2), kx = 0.0;
    if (model.mode == Mode::To) {
        lat_scale = model.to->lateral_scale(p);
        amp *= model.to->c_to(p);
        kx = 2 * pi / model.to->lambda_x_tilde(p);
    }
    const double kz = 2 * pi / p.lambda;

    std::vector<double> fx(std::size_t(ix1 - ix0 + 1));
    for (int ix = ix0; ix <= ix1; ++ix) {
        const double u = grid.x(ix) - cx;
        const double us = lat_scale * u;
        double v = std::exp(-us * us / (2 * s2));
        if (model.mode == Mode::To) v *= std::cos(kx * u);
        fx[std::size_t(ix - ix0)] = v;
    }
    for (int iz = iz0; iz <= iz1; ++iz) {
        const double w = grid.z(iz) - cz;
        double fz = amp * std::exp(-w * w / (2 * s2));
        if (model.mode != Mode::Post) fz *= std::cos(kz * w);
        double* row = frame.data() + grid.index(0, iz);
        for (int ix = ix0; ix <= ix1; ++ix) row[ix] += fz * fx[std::size_t(ix - ix0)];
    }
}

MatchedFilterTheory autocorr_theory(const PsfParams& p) {
    p.validate();
    MatchedFilterTheory m;
    m.sigma_r_hat = std::sqrt(2.0) * p.sigma_r;
    m.c_g = 0.5 * std::exp(-4 * pi * pi * p.sigma_r * p.sigma_r / (p.lambda * p.lambda));
    m.g_e_peak = 1.0 / (2 * pi * p.sigma_r * p.sigma_r);
    m.g_e_hat_peak = 1.0 / (2 * pi * m.sigma_r_hat * m.sigma_r_hat);
    return m;
}

}  // namespace velofilt::psf
