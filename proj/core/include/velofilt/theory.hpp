#pragma once

#include "velofilt/psf.hpp"

namespace velofilt::theory {

struct Vec2 {
    double x = 0.0;
    double z = 0.0;
};

struct AttenuationReport {
    double kappa = 0.0;      // sigma_t |dv| / sigma_r
    double gamma = 1.0;      // peak attenuation
    double ratio_vrt = 0.0;  // sigma_r / sigma_t, mm/s
    double sigma_t = 0.0;
    double sigma_r = 0.0;
    Vec2 dv;

    // Envelope distortion for an evaluation direction at angle theta to dv.
    double eta(double cos_theta) const;
    // Carrier phase shift (mm) at r.
    double zeta(Vec2 r) const;
};

struct ToAttenuationReport {
    double gamma1 = 0.5;
    double gamma2 = 0.5;
    double gamma_bar = 1.0;
    double kappa_tilde_sq = 0.0;
    double xi[2][2] = {{1, 0}, {0, 1}};  // row-major, (x, z)
    double d_matrix[2] = {0, 0};         // diagonal of D
    // theta_j(r) = a_j z + b_j x + c_j (dv^T D r)
    double theta_a[2] = {0, 0};
    double theta_b[2] = {0, 0};
    double theta_c[2] = {0, 0};
};

enum class BandMode { Pre, Post };

struct VelocityPassband {
    double v_f = 0.0;
    double delta_v = 0.0;
    double lo = 0.0;
    double hi = 0.0;
    double kappa_delta_v = 0.0;
    double theta = 0.0;
};

// Cylindrical vessel seen by the density formulas.
struct VesselProfile {
    double radius = 1.0;  // mm
    double v0 = 10.0;     // mm/s
    double c_mb = 1e3;    // bubbles / mm^3
};

struct JointDensity {
    double value = 0.0;
    bool singular = false;  // evaluated on v = v_max(rho); value is +inf
};

struct NoiseSpec {
    double n0 = 1.0;
    double k_g = 0.0;      // rad/mm
    double v0_max = 0.0;   // mm/s
    double frame_rate_f = 0.0;  // Hz
    double omega_max() const { return k_g * v0_max; }
};

struct NrfBound {
    double nrf = 0.0;     // (2/sqrt(pi)) k_G v0max sigma_t
    double nrf_f = 0.0;   // 2 sqrt(pi) sigma_t F
    double db = 0.0;
    double db_f = 0.0;
    double output_power = 0.0;  // N0 k_G^2 / (8 pi^1.5 sigma_t), upper bound
    double input_power = 0.0;   // N0 Omega_max k_G^2 / (4 pi^2)
};

struct AcqBoundInput {
    double flow_rate_q = 0.0;  // mm^3/s
    double diameter_d = 0.0;   // mm
    double c_mb = 0.0;         // 1/mm^3
    double i_pix = 0.0;        // mm
};

AttenuationReport attenuation_pre(const psf::PsfParams& p, double sigma_t, Vec2 dv);
double attenuation_post(const psf::PsfParams& p, double sigma_t, Vec2 dv);

double q_pre(Vec2 r, Vec2 dv, const psf::PsfParams& p, double sigma_t);
double q_post(Vec2 r, Vec2 dv, const psf::PsfParams& p, double sigma_t);

// Matched filter peak psi(0, dv) for pre-envelope data, in units of the
// continuous correlation (ghat_e(0) = 1/(4 pi sr^2) scale).
double mf_peak(Vec2 dv, const psf::PsfParams& p, double sigma_t);
double mf_peak_post(Vec2 dv, const psf::PsfParams& p, double sigma_t);
double gamma_hat(Vec2 dv, const psf::PsfParams& p, double sigma_t);

VelocityPassband velocity_bandwidth(const psf::PsfParams& p, double sigma_t, double theta,
                                    BandMode mode, double v_f = 0.0);

double flow_speed(const VesselProfile& v, double rho);
double apparent_density(double rho, const VesselProfile& v);
JointDensity joint_density(double speed, double rho, const VesselProfile& v);
double filtered_density(double rho, double v_f, double delta_v, const VesselProfile& v);

ToAttenuationReport to_attenuation(Vec2 dv, const psf::PsfParams& p, const psf::ToParams& t,
                                   double sigma_t);
double to_q(Vec2 r, Vec2 dv, const psf::PsfParams& p, const psf::ToParams& t, double sigma_t);

NrfBound nrf_bound(const NoiseSpec& n, double sigma_t);

double acquisition_time_bound(const AcqBoundInput& a);
bool acquisition_pixel_warning(const AcqBoundInput& a);

double to_db(double ratio);

}  // namespace velofilt::theory
