#pragma once

#include <optional>
#include <span>
#include <string>

#include "velofilt/grid.hpp"

namespace velofilt::psf {

struct PsfParams {
    double sigma_r = 0.3;  // mm, envelope width
    double lambda = 0.3;   // mm, axial carrier wavelength
    void validate() const;
};

// Lateral modulation produced by the TO k-space filter.
struct ToParams {
    double lambda_x = 0.6;  // mm, 2*pi/k0x
    double sigma_x = 0.3;   // mm, filter lobe width

    double k0x() const;
    double lambda_x_tilde(const PsfParams& p) const;  // (1 + sr^2/sx^2) * lambda_x
    double lateral_scale(const PsfParams& p) const;   // (1 + sx^2/sr^2)^(-1/2)
    double c_to(const PsfParams& p) const;
    void validate() const;
};

struct MatchedFilterTheory {
    double sigma_r_hat = 0.0;  // sqrt(2) * sigma_r
    double c_g = 0.0;          // 0.5 * exp(-4 pi^2 sr^2 / lambda^2)
    double g_e_peak = 0.0;     // 1 / (2 pi sr^2)
    double g_e_hat_peak = 0.0; // 1 / (2 pi sr_hat^2)

    // R_g(r) = 0.5 * g_hat(r) cos(2 pi z / lambda) + C_g * g_hat(r)
    double autocorr(double x, double z, double lambda) const;
};

enum class Mode { Post, Pre, To };

const char* to_string(Mode m);
Mode mode_from_string(const std::string& s);

double eval_post_envelope(const PsfParams& p, double x, double z);
double eval_pre_envelope(const PsfParams& p, double x, double z);
double eval_to_psf(const PsfParams& p, const ToParams& t, double x, double z);
// TO envelope g_e^TO: C^TO * g_e(diag[scale, 1] r)
double eval_to_envelope(const PsfParams& p, const ToParams& t, double x, double z);

struct PsfModel {
    PsfParams params;
    Mode mode = Mode::Pre;
    std::optional<ToParams> to;

    double eval(double x, double z) const;
    // Extent beyond which the envelope is below ~1e-14 of its peak.
    double support_x() const;
    double support_z() const;
    // Envelope standard deviations along x and z.
    double envelope_sigma_x() const;
    double envelope_sigma_z() const { return params.sigma_r; }
    void validate() const;
};

// Samples the model, centered at (cx, cz), at every grid point.
Image render_psf(const PsfModel& model, const Grid2D& grid, double cx = 0.0, double cz = 0.0);

// Adds amplitude * g(r - c) to a frame on the grid. The model is separable in
// x and z, so this costs O(nx + nz) evaluations plus the outer product over
// the envelope support.
void add_psf(std::span<double> frame, const Grid2D& grid, const PsfModel& model, double cx,
             double cz, double amplitude = 1.0);

MatchedFilterTheory autocorr_theory(const PsfParams& p);

}  // namespace velofilt::psf
