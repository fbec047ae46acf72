#include "velofilt/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "velofilt/error.hpp"

namespace velofilt::theory {

using std::numbers::pi;

namespace {

double norm(Vec2 v) { return std::hypot(v.x, v.z); }
double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.z * b.z; }

void check_sigma_t(double sigma_t) {
    require(sigma_t > 0 && std::isfinite(sigma_t), "theory: sigma_t must be positive");
}

// Squared-norm factor of g_e(eta r): |r|^2 - kappa^2 (r.u)^2 / (1+kappa^2), u = dv/|dv|.
double distorted_r2(Vec2 r, Vec2 dv, double sigma_t, double sigma_r) {
    const double r2 = dot(r, r);
    const double k2 = sigma_t * sigma_t * dot(dv, dv) / (sigma_r * sigma_r);
    if (k2 == 0.0) return r2;
    const double rd = dot(r, dv);
    // kappa^2 cos^2 |r|^2 = sigma_t^2 (r.dv)^2 / sigma_r^2
    return r2 - (sigma_t * sigma_t * rd * rd / (sigma_r * sigma_r)) / (1 + k2);
}

double bisect(double (*f)(double, const void*), const void* ctx, double lo, double hi) {
    double flo = f(lo, ctx);
    double fhi = f(hi, ctx);
    int grow = 0;
    while (flo * fhi > 0 && grow < 60) {
        hi *= 2;
        fhi = f(hi, ctx);
        ++grow;
    }
    if (flo * fhi > 0) fail(ErrorKind::NumericFailure, "velocity_bandwidth: no root in bracket");
    for (int it = 0; it < 200 && hi - lo > 1e-14 * std::max(1.0, hi); ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = f(mid, ctx);
        if (fm == 0) return mid;
        if ((fm > 0) == (flo > 0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

struct BandCtx {
    double sin_theta;
    double sr_over_lambda;
    double c_g;
    bool reduced;
};

double pre_condition(double kappa, const void* vctx) {
    const auto& c = *static_cast<const BandCtx*>(vctx);
    const double k2 = kappa * kappa;
    const double a = kappa * c.sin_theta * c.sr_over_lambda;  // sigma_t dvz / lambda
    const double gh = std::exp(-4 * pi * pi * a * a / (2 + k2)) / std::sqrt(4 + 2 * k2);
    if (c.reduced) return gh - 0.25;
    return gh + 2 * c.c_g / std::sqrt(4 + 2 * k2) - (0.25 + 0.5 * c.c_g);
}

double post_condition(double kappa, const void*) {
    // psi_post(0, dv) / psi_post(0, 0) = (1 + kappa^2 / 2)^(-1/2)
    return 1.0 / std::sqrt(1 + kappa * kappa / 2) - 0.5;
}

}  // namespace

double AttenuationReport::eta(double cos_theta) const {
    const double k2 = kappa * kappa;
    return std::sqrt(1 - k2 * cos_theta * cos_theta / (1 + k2));
}

double AttenuationReport::zeta(Vec2 r) const {
    const double k2 = kappa * kappa;
    return sigma_t * sigma_t * dot(r, dv) * dv.z / (sigma_r * sigma_r * (1 + k2));
}

AttenuationReport attenuation_pre(const psf::PsfParams& p, double sigma_t, Vec2 dv) {
    p.validate();
    check_sigma_t(sigma_t);
    AttenuationReport a;
    a.sigma_t = sigma_t;
    a.sigma_r = p.sigma_r;
    a.dv = dv;
    a.kappa = sigma_t * norm(dv) / p.sigma_r;
    a.ratio_vrt = p.sigma_r / sigma_t;
    const double k2 = a.kappa * a.kappa;
    const double s = sigma_t * dv.z / p.lambda;
    a.gamma = std::exp(-2 * pi * pi * s * s / (1 + k2)) / std::sqrt(1 + k2);
    return a;
}

double attenuation_post(const psf::PsfParams& p, double sigma_t, Vec2 dv) {
    p.validate();
    check_sigma_t(sigma_t);
    const double kappa = sigma_t * norm(dv) / p.sigma_r;
    return 1.0 / std::sqrt(1 + kappa * kappa);
}

double q_pre(Vec2 r, Vec2 dv, const psf::PsfParams& p, double sigma_t) {
    const AttenuationReport a = attenuation_pre(p, sigma_t, dv);
    const double r2 = distorted_r2(r, dv, sigma_t, p.sigma_r);
    const double s2 = p.sigma_r * p.sigma_r;
    const double env = std::exp(-r2 / (2 * s2)) / (2 * pi * s2);
    return a.gamma * env * std::cos(2 * pi / p.lambda * (r.z - a.zeta(r)));
}

double q_post(Vec2 r, Vec2 dv, const psf::PsfParams& p, double sigma_t) {
    const double g = attenuation_post(p, sigma_t, dv);
    const double r2 = distorted_r2(r, dv, sigma_t, p.sigma_r);
    const double s2 = p.sigma_r * p.sigma_r;
    return g * std::exp(-r2 / (2 * s2)) / (2 * pi * s2);
}

double gamma_hat(Vec2 dv, const psf::PsfParams& p, double sigma_t) {
    p.validate();
    check_sigma_t(sigma_t);
    const double k2 = sigma_t * sigma_t * dot(dv, dv) / (p.sigma_r * p.sigma_r);
    const double s = sigma_t * dv.z / p.lambda;
    return std::exp(-4 * pi * pi * s * s / (2 + k2)) / std::sqrt(4 + 2 * k2);
}

double mf_peak(Vec2 dv, const psf::PsfParams& p, double sigma_t) {
    const psf::MatchedFilterTheory m = psf::autocorr_theory(p);
    const double k2 = sigma_t * sigma_t * dot(dv, dv) / (p.sigma_r * p.sigma_r);
    return (gamma_hat(dv, p, sigma_t) + 2 * m.c_g / std::sqrt(4 + 2 * k2)) * m.g_e_hat_peak;
}

double mf_peak_post(Vec2 dv, const psf::PsfParams& p, double sigma_t) {
    const psf::MatchedFilterTheory m = psf::autocorr_theory(p);
    check_sigma_t(sigma_t);
    const double k2 = sigma_t * sigma_t * dot(dv, dv) / (p.sigma_r * p.sigma_r);
    return m.g_e_hat_peak / std::sqrt(1 + k2 / 2);
}

VelocityPassband velocity_bandwidth(const psf::PsfParams& p, double sigma_t, double theta,
                                    BandMode mode, double v_f) {
    p.validate();
    check_sigma_t(sigma_t);
    require(theta >= -1e-12 && theta <= pi / 2 + 1e-12, "velocity_bandwidth: theta outside [0, pi/2]");
    VelocityPassband b;
    b.theta = theta;
    b.v_f = v_f;
    if (mode == BandMode::Pre) {
        BandCtx ctx{std::sin(theta), p.sigma_r / p.lambda, psf::autocorr_theory(p).c_g,
                    std::abs(p.sigma_r - p.lambda) <= 1e-12 * p.lambda};
        b.kappa_delta_v = bisect(&pre_condition, &ctx, 0.0, 4.0);
    } else {
        b.kappa_delta_v = bisect(&post_condition, nullptr, 0.0, 4.0);
    }
    b.delta_v = b.kappa_delta_v * p.sigma_r / sigma_t;
    b.lo = v_f - b.delta_v;
    b.hi = v_f + b.delta_v;
    return b;
}

double flow_speed(const VesselProfile& v, double rho) {
    const double u = rho / v.radius;
    return u * u >= 1 ? 0.0 : v.v0 * (1 - u * u);
}

double apparent_density(double rho, const VesselProfile& v) {
    const double d = v.radius * v.radius - rho * rho;
    return d <= 0 ? 0.0 : 2 * v.c_mb * std::sqrt(d);
}

JointDensity joint_density(double speed, double rho, const VesselProfile& v) {
    JointDensity out;
    const double vmax = flow_speed(v, rho);
    if (std::abs(rho) >= v.radius || speed < 0 || speed > vmax || vmax <= 0) return out;
    const double a = 1 - speed / vmax;
    if (a <= 0) {
        out.value = std::numeric_limits<double>::infinity();
        out.singular = true;
        return out;
    }
    const double u = rho / v.radius;
    out.value = (v.c_mb * v.radius / v.v0) / std::sqrt(a * (1 - u * u));
    return out;
}

double filtered_density(double rho, double v_f, double delta_v, const VesselProfile& v) {
    require(delta_v > 0, "filtered_density: delta_v must be positive");
    const double vmax = flow_speed(v, rho);
    if (std::abs(rho) >= v.radius || vmax <= 0) return 0.0;
    const double u2 = 1 - (rho / v.radius) * (rho / v.radius);
    // Antiderivative of d2(v, rho) over v, with the passband clipped to [0, vmax].
    auto term = [&](double edge) {
        const double e = std::clamp(edge / vmax, 0.0, 1.0);
        return std::sqrt((1 - e) * u2);
    };
    const double lo = v_f - delta_v;
    const double hi = v_f + delta_v;
    return 2 * v.c_mb * v.radius * (term(lo) - term(hi));
}

ToAttenuationReport to_attenuation(Vec2 dv, const psf::PsfParams& p, const psf::ToParams& t,
                                   double sigma_t) {
    p.validate();
    t.validate();
    check_sigma_t(sigma_t);
    ToAttenuationReport r;
    const double sr2 = p.sigma_r * p.sigma_r;
    const double sx2 = t.sigma_x * t.sigma_x;
    r.d_matrix[0] = 1.0 / (sr2 + sx2);
    r.d_matrix[1] = 1.0 / sr2;
    const double st2 = sigma_t * sigma_t;
    const double k2 = st2 * (dv.x * dv.x * r.d_matrix[0] + dv.z * dv.z * r.d_matrix[1]);
    r.kappa_tilde_sq = k2;
    const double s = std::sqrt(1 + k2);
    const double lt = t.lambda_x_tilde(p);

    for (int j = 0; j < 2; ++j) {
        // j index 0 is lobe j = 1, sign (-1)^j = -1
        const double sign = (j == 0) ? -1.0 : 1.0;
        const double f = dv.z / p.lambda - sign * dv.x / lt;
        const double g = 1.0 / (2 * s) * std::exp(-2 * pi * pi * st2 * f * f / (1 + k2));
        (j == 0 ? r.gamma1 : r.gamma2) = g;
        r.theta_a[j] = 2 * pi / p.lambda;
        r.theta_b[j] = -sign * 2 * pi / lt;
        r.theta_c[j] = -2 * pi * st2 / (1 + k2) * f;
    }
    r.gamma_bar = r.gamma1 + r.gamma2;

    // Xi = I - c dv dv^T D with c = sigma_t^2 / (s (1 + s)); equals I at dv = 0.
    const double c = st2 / (s * (1 + s));
    const double v[2] = {dv.x, dv.z};
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            r.xi[a][b] = (a == b ? 1.0 : 0.0) - c * v[a] * v[b] * r.d_matrix[b];
    return r;
}

double to_q(Vec2 r, Vec2 dv, const psf::PsfParams& p, const psf::ToParams& t, double sigma_t) {
    const ToAttenuationReport a = to_attenuation(dv, p, t, sigma_t);
    const double xr = a.xi[0][0] * r.x + a.xi[0][1] * r.z;
    const double zr = a.xi[1][0] * r.x + a.xi[1][1] * r.z;
    const double env = psf::eval_to_envelope(p, t, xr, zr);
    const double dDr = dv.x * a.d_matrix[0] * r.x + dv.z * a.d_matrix[1] * r.z;
    double sum = 0.0;
    for (int j = 0; j < 2; ++j) {
        const double th = a.theta_a[j] * r.z + a.theta_b[j] * r.x + a.theta_c[j] * dDr;
        sum += (j == 0 ? a.gamma1 : a.gamma2) * std::cos(th);
    }
    return env * sum;
}

NrfBound nrf_bound(const NoiseSpec& n, double sigma_t) {
    check_sigma_t(sigma_t);
    require(n.n0 > 0 && n.k_g > 0 && n.v0_max > 0, "nrf: noise parameters must be positive");
    NrfBound b;
    b.nrf = 2 / std::sqrt(pi) * n.k_g * n.v0_max * sigma_t;
    b.db = to_db(b.nrf);
    if (n.frame_rate_f > 0) {
        b.nrf_f = 2 * std::sqrt(pi) * sigma_t * n.frame_rate_f;
        b.db_f = to_db(b.nrf_f);
    }
    b.input_power = n.n0 * n.omega_max() * n.k_g * n.k_g / (4 * pi * pi);
    b.output_power = n.n0 * n.k_g * n.k_g / (8 * std::pow(pi, 1.5) * sigma_t);
    return b;
}

double acquisition_time_bound(const AcqBoundInput& a) {
    require(a.diameter_d > 0, "acquisition bound: diameter must be positive");
    const double denom = (a.flow_rate_q / a.diameter_d) * a.c_mb * a.i_pix;
    require(denom > 0 && std::isfinite(denom), "acquisition bound: zero denominator");
    return 1.0 / denom;
}

bool acquisition_pixel_warning(const AcqBoundInput& a) { return a.i_pix > a.diameter_d / 5; }

double to_db(double ratio) { return 10 * std::log10(ratio); }

}  // namespace velofilt::theory
