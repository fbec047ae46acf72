// End-to-end acceptance checks. One PASS/FAIL line per criterion.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "scenes.hpp"
#include "velofilt/fft.hpp"
#include "velofilt/localize.hpp"
#include "velofilt/metrics.hpp"
#include "velofilt/phantom.hpp"
#include "velofilt/psf.hpp"
#include "velofilt/theory.hpp"
#include "velofilt/vfilter.hpp"

using namespace velofilt;
using theory::Vec2;
namespace lz = velofilt::localize;
namespace ph = velofilt::phantom;
namespace vfl = velofilt::vfilter;

namespace {

constexpr double pi = std::numbers::pi;

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

FrameStack white_stack(const Grid2D& g, int nt, double dt, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0, 1);
    FrameStack fs(g, nt, dt);
    for (double& v : fs.data()) v = n(rng);
    return fs;
}

double interior_rel_rms(const FrameStack& a, const FrameStack& b, int t0, int t1) {
    double num = 0, den = 0;
    for (int t = t0; t < t1; ++t) {
        auto fa = a.frame(t), fb = b.frame(t);
        for (std::size_t i = 0; i < fa.size(); ++i) {
            num += (fa[i] - fb[i]) * (fa[i] - fb[i]);
            den += fb[i] * fb[i];
        }
    }
    return std::sqrt(num / den);
}

double interior_power(const FrameStack& a, int t0, int t1) {
    double s = 0;
    for (int t = t0; t < t1; ++t)
        for (double v : a.frame(t)) s += v * v;
    return s / (double(t1 - t0) * double(a.frame_size()));
}

double mean_peak(const FrameStack& fs, int t0, int t1, double px, double pz, double radius) {
    double s = 0;
    for (int t = t0; t < t1; ++t) s += metrics::window_peak(fs, t, px, pz, radius);
    return s / (t1 - t0);
}

// ---------------------------------------------------------------------------

Outcome closed_forms() {
    std::mt19937_64 rng(101);
    std::uniform_real_distribution<double> u(-1, 1), u01(0, 1);
    const std::vector<psf::PsfParams> psfs{{0.3, 0.3}, {0.15, 0.3}, {0.45, 0.3}, {0.2, 0.25}};
    const std::vector<double> sts{0.2, 0.5, 1.0};
    const std::vector<psf::ToParams> tos{{0.6, 0.3}, {1.0, 0.45}, {1.563, 0.6}};
    int n = 0, bad = 0;
    double worst = 0;
    auto check = [&](double got, double ref, double floor) {
        const double e = std::abs(got - ref) / std::max(std::abs(ref), floor);
        worst = std::max(worst, e);
        ++n;
        if (e > 1e-6) ++bad;
    };
    for (int i = 0; i < 80; ++i) {
        const psf::PsfParams p = psfs[std::size_t(i) % psfs.size()];
        const double st = sts[std::size_t(i / 4) % sts.size()];
        const psf::ToParams t = tos[std::size_t(i / 3) % tos.size()];
        const double ext = 2 * p.sigma_r;
        const Vec2 r{ext * u(rng), ext * u(rng)};
        const double vs = p.sigma_r / st;
        const Vec2 dv{1.5 * vs * u(rng), 0.5 * vs * u(rng)};

        auto g = [&](double x, double z) { return psf::eval_pre_envelope(p, x, z); };
        auto ge = [&](double x, double z) { return psf::eval_post_envelope(p, x, z); };
        auto gt = [&](double x, double z) { return psf::eval_to_psf(p, t, x, z); };
        const double peak = psf::eval_post_envelope(p, 0, 0);
        check(theory::q_pre(r, dv, p, st), oracle::motion_blur(g, r.x, r.z, dv.x, dv.z, st, 1e-10), 1e-6 * peak);
        check(theory::q_post(r, dv, p, st), oracle::motion_blur(ge, r.x, r.z, dv.x, dv.z, st, 1e-10), 0.0);
        check(theory::to_q(r, dv, p, t, st), oracle::motion_blur(gt, r.x, r.z, dv.x, dv.z, st, 1e-10),
              1e-6 * psf::eval_to_psf(p, t, 0, 0));
    }
    return {bad == 0 && n >= 200, fmt("%d points, %d above 1e-6, worst %.2e", n, bad, worst)};
}

Outcome dual_path() {
    Grid2D g = make_grid(32, 32, 0.03, 0.03, true);
    const double st = 0.05, dt = 0.01;
    const int hw = int(std::ceil(4 * st / dt));
    std::mt19937_64 rng(202);
    std::uniform_real_distribution<double> u(-2, 2);
    double worst = 0;
    for (std::uint64_t s = 0; s < 10; ++s) {
        FrameStack fs = white_stack(g, 64, dt, 1000 + s);
        vfl::VelocityFilterSpec spec{u(rng), u(rng), st};
        const double e = interior_rel_rms(vfl::apply_filter_fft(fs, spec), vfl::apply_filter_direct(fs, spec), hw, 64 - hw);
        worst = std::max(worst, e);
    }
    return {worst < 1e-3, fmt("10 stacks, worst interior rel RMS %.2e", worst)};
}

Outcome pass_through() {
    Grid2D g = make_grid(192, 48, 0.03, 0.03, true);
    const double st = 0.5, dt = 0.01, v = 1.0, x0 = -2.2;
    const int nt = 440, hw = int(std::ceil(4 * st / dt));
    FrameStack fs = scene::single_bubble(g, nt, dt, x0, 0.0, v, 0.0, scene::pre_model());
    FrameStack out = vfl::apply_filter_fft(fs, {v, 0.0, st});
    double worst = 0;
    for (int t = hw; t < nt - hw; ++t) {
        const double px = x0 + v * t * dt;
        const double pb = metrics::window_peak(fs, t, px, 0, 0.2);
        const double pa = metrics::window_peak(out, t, px, 0, 0.2);
        worst = std::max(worst, std::abs(pa / pb - 1));
    }
    return {worst < 0.02, fmt("frames %d..%d, worst peak deviation %.2e", hw, nt - hw - 1, worst)};
}

Outcome gamma_prediction() {
    Grid2D g = make_grid(192, 96, 0.03, 0.03, true);
    const psf::PsfParams p{0.3, 0.3};
    const double st = 0.1, dt = 0.01;
    const int nt = 140, hw = 40;
    const Vec2 v{0.5, 0.3};
    const double x0 = -0.35, z0 = -0.21;
    const double lx = g.nx * g.dx, lz = g.nz * g.dz, psf_extent = 3 * p.sigma_r;
    FrameStack fs = scene::single_bubble(g, nt, dt, x0, z0, v.x, v.z, scene::pre_model());
    vfl::FilterEngine eng(fs, vfl::padded_length(nt, {0, 0, st}, dt));

    int used = 0, skipped = 0, bad = 0;
    double worst = 0, gmin = 1;
    for (double deg : {0.0, 30.0, 60.0, 90.0, 135.0}) {
        const double c = std::cos(deg * pi / 180), s = std::sin(deg * pi / 180);
        auto gamma_at = [&](double m) { return theory::attenuation_pre(p, st, {m * c, m * s}).gamma; };
        for (double target : {0.9, 0.7, 0.5, 0.3, 0.15, 0.08, 0.05}) {
            double lo = 0, hi = 1;
            while (gamma_at(hi) > target && hi < 1e3) hi *= 2;
            if (gamma_at(hi) > target) { ++skipped; continue; }
            for (int i = 0; i < 100; ++i) {
                const double mid = 0.5 * (lo + hi);
                (gamma_at(mid) > target ? lo : hi) = mid;
            }
            const Vec2 dv{hi * c, hi * s};
            // Periodic k-space shifts bring a wrapped copy back within the window.
            if (std::abs(dv.x) * 4 * st + psf_extent > lx || std::abs(dv.z) * 4 * st + psf_extent > lz) {
                ++skipped;
                continue;
            }
            FrameStack out = eng.apply({v.x - dv.x, v.z - dv.z, st});
            const auto m = metrics::measure_attenuation(fs, out, x0, z0, 0.15, hw, nt - hw, v.x, v.z);
            const double gpred = gamma_at(hi);
            const double e = std::abs(1 / m.ratio / gpred - 1);
            worst = std::max(worst, e);
            gmin = std::min(gmin, gpred);
            ++used;
            if (e > 0.10) ++bad;
        }
    }
    return {bad == 0 && used >= 20 && gmin <= 0.06,
            fmt("%d cases (Gamma down to %.3f), %d skipped for wrap-around, worst rel error %.3f", used, gmin,
                skipped, worst)};
}

Outcome anisotropy() {
    const psf::PsfParams p{0.3, 0.3};
    // Ordering at sigma_t = 0.1 s where all three attenuations are measurable.
    double att[3];
    {
        Grid2D g = make_grid(96, 96, 0.03, 0.03, true);
        const double st = 0.1, dt = 0.01;
        const int nt = 120, hw = 40;
        FrameStack fs = scene::single_bubble(g, nt, dt, 0, 0, 0, 0, scene::pre_model());
        vfl::FilterEngine eng(fs, vfl::padded_length(nt, {0, 0, st}, dt));
        const double r = std::sqrt(0.5);
        const Vec2 dirs[3] = {{1, 0}, {r, r}, {0, 1}};
        for (int i = 0; i < 3; ++i) {
            FrameStack out = eng.apply({-dirs[i].x, -dirs[i].z, st});
            att[i] = metrics::measure_attenuation(fs, out, 0, 0, 0.15, hw, nt - hw).ratio;
        }
    }
    const bool order = att[0] < att[1] && att[1] < att[2];

    // TO: C^TO = 0.5 halves the co-moving peak.
    const psf::ToParams to{1.563, 0.6};
    const double st = 1.5, dt = 0.05;
    Grid2D g = make_grid(128, 64, 0.06, 0.06, true);
    const int nt = 280, hw = int(std::ceil(4 * st / dt));
    FrameStack fs = scene::single_bubble(g, nt, dt, 0, 0, 0, 0, scene::pre_model());
    vfl::FilterEngine eng(fs, vfl::padded_length(nt, {0, 0, st}, dt));
    const double raw = mean_peak(fs, hw, nt - hw, 0, 0, 0.3);
    const double sel = mean_peak(eng.apply({0, 0, st}), hw, nt - hw, 0, 0, 0.3);
    const double sel_to = mean_peak(eng.apply({0, 0, st}, &to), hw, nt - hw, 0, 0, 0.3);
    const double lat = mean_peak(eng.apply({-1, 0, st}), hw, nt - hw, 0, 0, 0.3);
    const double lat_to = mean_peak(eng.apply({-1, 0, st}, &to), hw, nt - hw, 0, 0, 0.3);
    const double gain = (raw / lat_to) / (raw / lat);
    const double drop = sel / sel_to;
    const bool to_ok = gain >= 5 && drop >= 1.6 && drop <= 2.5;
    return {order && to_ok,
            fmt("attenuation lateral %.2f < diagonal %.2f < axial %.2f; TO lateral gain %.2fx, co-moving peak drop %.2fx",
                att[0], att[1], att[2], gain, drop)};
}

Outcome delta_v() {
    const psf::PsfParams p{0.3, 0.3};
    double worst0 = 0, end90 = 0;
    bool mono = true;
    for (double st : {0.15, 0.3, 0.5, 1.0}) {
        const double scale = p.sigma_r / st;
        const double d0 = theory::velocity_bandwidth(p, st, 0, theory::BandMode::Pre).delta_v;
        worst0 = std::max(worst0, std::abs(d0 / (std::sqrt(6.0) * scale) - 1));
        double prev = d0;
        for (int k = 1; k <= 180; ++k) {
            const double d = theory::velocity_bandwidth(p, st, k * pi / 360, theory::BandMode::Pre).delta_v;
            if (!(d < prev)) mono = false;
            prev = d;
        }
        end90 = prev / scale;
    }
    const bool ok = worst0 <= 1e-9 && mono && std::abs(end90 - 0.19) < 0.005;
    return {ok, fmt("theta=0 rel error %.1e, strictly decreasing %s, delta_v(90)=%.4f sigma_r/sigma_t", worst0,
                    mono ? "yes" : "no", end90)};
}

Outcome nrf() {
    const double lambda = 0.3, kg = 2 * pi / lambda;
    const theory::NrfBound b = theory::nrf_bound({1.0, kg, 10.0, 100.0}, 0.5);
    const bool paper = std::lround(b.nrf) == 118 && std::lround(b.db) == 21;

    // Band-limited white noise: |k| <= k_G and |Omega| <= k_G v0max.
    const double st = 0.1, dt = 0.01, v0max = 10.0;
    const int n = 64, nt = 256, hw = int(std::ceil(4 * st / dt));
    Grid2D g = make_grid(n, n, 0.05, 0.05, true);
    FrameStack fs = white_stack(g, nt, dt, 77);
    std::vector<cplx> spec(fs.data().begin(), fs.data().end());
    fft_inplace(spec.data(), {nt, n, n}, FftDirection::Forward);
    const double om_max = kg * v0max;
    std::size_t i = 0;
    for (int iw = 0; iw < nt; ++iw) {
        const double om = lattice_frequency(iw, nt, dt);
        for (int iz = 0; iz < n; ++iz)
            for (int ix = 0; ix < n; ++ix, ++i) {
                const double k = std::hypot(lattice_frequency(ix, n, g.dx), lattice_frequency(iz, n, g.dz));
                if (k > kg || std::abs(om) > om_max) spec[i] = 0;
            }
    }
    fft_inplace(spec.data(), {nt, n, n}, FftDirection::Inverse);
    for (std::size_t j = 0; j < spec.size(); ++j) fs.data()[j] = spec[j].real();

    const double bound = theory::nrf_bound({1.0, kg, v0max, 1 / dt}, st).nrf;
    const double pin = interior_power(fs, hw, nt - hw);
    double worst = 1e300;
    for (Vec2 vf : {Vec2{0, 0}, Vec2{3, 1}}) {
        const double pout = interior_power(vfl::apply_filter_fft(fs, {vf.x, vf.z, st}), hw, nt - hw);
        worst = std::min(worst, pin / pout / bound);
    }
    return {paper && worst >= 0.95,
            fmt("NRF %.2f (%.2f dB); Monte-Carlo ratio / bound = %.3f (bound %.2f)", b.nrf, b.db, worst, bound)};
}

Outcome densities() {
    const theory::VesselProfile v{1.0, 10.0, 1e3};
    double w1 = 0, w2 = 0;
    for (int i = -40; i <= 40; ++i) {
        const double rho = 0.999 * i / 40.0;
        const double vmax = theory::flow_speed(v, rho);
        const double integ = oracle::integrate_singular(
            [&](double s) { return theory::joint_density(s, rho, v).value; }, 0, vmax);
        w1 = std::max(w1, std::abs(integ / theory::apparent_density(rho, v) - 1));
    }
    const psf::PsfParams p{0.3, 0.3};
    for (double st : {0.3, 0.5}) {
        for (double theta : {0.0, pi / 4, pi / 2}) {
            const double dv = theory::velocity_bandwidth(p, st, theta, theory::BandMode::Pre).delta_v;
            for (int i = -9; i <= 9; ++i) {
                const double rho = 0.1 * i;
                for (double vf : {0.5, 2.0, 5.0, 8.0, 9.8}) {
                    const double vmax = theory::flow_speed(v, rho);
                    const double lo = std::clamp(vf - dv, 0.0, vmax), hi = std::clamp(vf + dv, 0.0, vmax);
                    double expect = 0;
                    if (hi > lo)
                        expect = oracle::integrate_singular(
                            [&](double s) { return theory::joint_density(s, rho, v).value; }, lo, hi);
                    const double got = theory::filtered_density(rho, vf, dv, v);
                    const double floor = 1e-12 * theory::apparent_density(0, v);
                    w2 = std::max(w2, std::abs(got - expect) / std::max(expect, floor));
                }
            }
        }
    }
    const double d0 = theory::apparent_density(0, v);
    const bool ok = w1 <= 1e-4 && w2 <= 1e-6 && std::abs(d0 - 2000) < 1e-9;
    return {ok, fmt("int d2 dv worst %.1e, d_VF worst %.1e, d2(0) = %.6f /mm^2", w1, w2, d0)};
}

// ---------------------------------------------------------------------------

struct Scene {
    Grid2D grid;
    ph::SynthResult synth;
    Mask support_fine;
    VelocityMap velocity;
    std::vector<ph::VesselSpec> vessels;
};

Scene vessel_scene(std::vector<ph::VesselSpec> vessels, const psf::PsfModel& model, const Grid2D& g, int nt,
                   double dt, std::uint64_t seed, int fine) {
    Scene s;
    s.grid = g;
    std::mt19937_64 rng(seed);
    ph::BubbleSet bubbles;
    std::int64_t next = 0;
    for (std::size_t k = 0; k < vessels.size(); ++k) {
        auto& v = vessels[k];
        if (v.length <= 0) v.length = ph::default_length(g, v, model.params.sigma_r);
        auto bs = ph::sample_bubbles(v, rng, next);
        for (auto& b : bs) b.vessel = int(k);
        next += std::int64_t(bs.size());
        bubbles.insert(bubbles.end(), bs.begin(), bs.end());
    }
    s.vessels = vessels;
    s.synth = ph::synthesize_frames(bubbles, {}, vessels, model, g, nt, dt);
    s.support_fine = ph::support_mask(vessels, g.refined(fine));
    s.velocity = ph::ground_truth_velocity_map(vessels, g);
    return s;
}

double iou_of(const lz::LocalizationSet& locs, const Scene& s, int fine) {
    const auto acc = lz::accumulate(locs, s.grid.refined(fine));
    return metrics::iou(s.support_fine, lz::segment_support(acc, {1.0, 2}));
}

std::vector<double> directions(std::initializer_list<double> deg) {
    std::vector<double> out;
    for (double d : deg) out.push_back(d * pi / 180);
    return out;
}

Outcome iou_tradeoff() {
    const psf::PsfModel model = scene::pre_model();
    const Grid2D g = make_grid(64, 64, 0.03, 0.03, true);
    const int nt = 500, fine = 4;
    const double dt = 0.01, st = 0.5;
    auto crossing = [](double c) {
        ph::VesselSpec a;
        a.radius = 0.15;
        a.v0 = 5.0;
        a.c_mb = c;
        a.axis_angle = pi / 4;
        a.y_center = -0.5;
        ph::VesselSpec b = a;
        b.axis_angle = -pi / 4;
        b.y_center = 0.5;
        return std::vector<ph::VesselSpec>{a, b};
    };
    lz::PipelineConfig pc;
    pc.detector = lz::default_detector(model.params, 0.5);
    pc.fine_factor = fine;
    const auto bank = vfl::tile_bank(model.params, st, 5.0, directions({45, -45}), 4);

    const Scene high = vessel_scene(crossing(2500), model, g, nt, dt, 3, fine);
    const double iou_vf = iou_of(lz::run_pipeline(high.synth.frames, bank, model, pc).localizations, high, fine);
    const double iou_base = iou_of(lz::run_baseline(high.synth.frames, model, pc).localizations, high, fine);
    const Scene low = vessel_scene(crossing(2500.0 / 6), model, g, nt, dt, 3, fine);
    const double iou_low = iou_of(lz::run_baseline(low.synth.frames, model, pc).localizations, low, fine);
    const bool ok = iou_vf >= 2 * iou_base && iou_vf > iou_low;
    return {ok, fmt("at %.0f s: VF %.3f, no VF %.3f, no VF at C/6 %.3f", nt * dt, iou_vf, iou_base, iou_low)};
}

VelocityMap crop(const VelocityMap& m, int margin) {
    Grid2D g = m.grid;
    g.nx -= 2 * margin;
    g.nz -= 2 * margin;
    g.x0 = m.grid.x(margin);
    g.z0 = m.grid.z(margin);
    VelocityMap out(g);
    for (int iz = 0; iz < g.nz; ++iz)
        for (int ix = 0; ix < g.nx; ++ix) {
            const std::size_t src = m.grid.index(ix + margin, iz + margin);
            out.vx[g.index(ix, iz)] = m.vx[src];
            out.vz[g.index(ix, iz)] = m.vz[src];
        }
    return out;
}

// Least-squares quadratic s = a + b r + c r^2; returns {a, b, c, R^2}.
std::array<double, 4> fit_quadratic(const std::vector<double>& r, const std::vector<double>& s) {
    double m[3][4] = {};
    for (std::size_t i = 0; i < r.size(); ++i) {
        const double row[3] = {1, r[i], r[i] * r[i]};
        for (int a = 0; a < 3; ++a) {
            for (int b = 0; b < 3; ++b) m[a][b] += row[a] * row[b];
            m[a][3] += row[a] * s[i];
        }
    }
    for (int c = 0; c < 3; ++c) {
        int piv = c;
        for (int k = c + 1; k < 3; ++k)
            if (std::abs(m[k][c]) > std::abs(m[piv][c])) piv = k;
        std::swap(m[c], m[piv]);
        for (int k = 0; k < 3; ++k) {
            if (k == c) continue;
            const double f = m[k][c] / m[c][c];
            for (int j = c; j < 4; ++j) m[k][j] -= f * m[c][j];
        }
    }
    const double a = m[0][3] / m[0][0], b = m[1][3] / m[1][1], c = m[2][3] / m[2][2];
    const double mean = std::accumulate(s.begin(), s.end(), 0.0) / double(s.size());
    double ss_res = 0, ss_tot = 0;
    for (std::size_t i = 0; i < r.size(); ++i) {
        const double f = a + b * r[i] + c * r[i] * r[i];
        ss_res += (s[i] - f) * (s[i] - f);
        ss_tot += (s[i] - mean) * (s[i] - mean);
    }
    return {a, b, c, 1 - ss_res / ss_tot};
}

Outcome velocity_map() {
    const psf::PsfModel model = scene::pre_model();
    const Grid2D g = make_grid(64, 64, 0.03, 0.03, true);
    ph::VesselSpec v;
    v.radius = 0.6;
    v.v0 = 5.0;
    v.c_mb = 50;
    v.axis_angle = -pi / 4;
    const Scene s = vessel_scene({v}, model, g, 400, 0.01, 5, 4);
    lz::PipelineConfig pc;
    pc.detector = lz::default_detector(model.params, 0.5);
    const auto bank = vfl::tile_bank(model.params, 0.5, 5.5, directions({-45}), 4);
    const auto locs = lz::run_pipeline(s.synth.frames, bank, model, pc).localizations;
    // Pixels next to the frame border cannot hold a detected local maximum.
    const int margin = 4;
    const VelocityMap est = crop(lz::velocity_map(locs, g), margin);
    const VelocityMap truth = crop(s.velocity, margin);
    const Grid2D& cg = truth.grid;
    const double fve = metrics::fve(truth, est, {true, 0.05}) / v.v0;

    // Max-speed profile across the vessel, binned by normalized offset.
    const int nb = 12;
    std::vector<double> sum(nb, 0), cnt(nb, 0);
    for (int iz = 0; iz < cg.nz; ++iz)
        for (int ix = 0; ix < cg.nx; ++ix) {
            const std::size_t i = cg.index(ix, iz);
            if (truth.speed(i) <= 0 || est.speed(i) <= 0) continue;
            const double rho = s.vessels[0].in_plane_offset(cg.x(ix), cg.z(iz)) / v.radius;
            const int b = std::clamp(int((rho + 1) / 2 * nb), 0, nb - 1);
            sum[std::size_t(b)] += est.speed(i);
            cnt[std::size_t(b)] += 1;
        }
    std::vector<double> rr, ss;
    for (int b = 0; b < nb; ++b)
        if (cnt[std::size_t(b)] >= 3) {
            rr.push_back(-1 + (b + 0.5) * 2.0 / nb);
            ss.push_back(sum[std::size_t(b)] / cnt[std::size_t(b)]);
        }
    bool profile = false;
    std::string pdesc = "too few profile bins";
    if (rr.size() >= 6) {
        const auto [a, b, c, r2] = fit_quadratic(rr, ss);
        const double rv = -b / (2 * c), sv = a - b * b / (4 * c);
        profile = c < 0 && std::abs(sv / v.v0 - 1) <= 0.15 && std::abs(rv) <= 0.25 && r2 >= 0.8;
        pdesc = fmt("quadratic fit over %zu bins: vertex %.2f mm/s at rho %.2f, curvature %.2f, R^2 %.3f", rr.size(),
                    sv, rv, c, r2);
    }
    return {profile && fve <= 0.15, fmt("FVE fastest 5%% = %.3f v0; %s", fve, pdesc.c_str())};
}

Outcome le_law() {
    const metrics::LeParams le = metrics::default_le_params(0.3, 0.7, 1);
    const Grid2D g = make_grid(81, 81, le.sigma_perp / 4, le.sigma_perp / 4, true);
    const std::vector<metrics::Point> truth{{0.0, 0.0}};
    const double zero = metrics::localization_error(truth, truth, le, g);
    std::mt19937_64 rng(1111);
    std::uniform_real_distribution<double> ang(0, 2 * pi), mag(0.01, 1.0);
    double worst = 0;
    for (int i = 0; i < 100; ++i) {
        const double a = ang(rng), m = mag(rng) * 0.1 * le.sigma_perp;
        const std::vector<metrics::Point> est{{m * std::cos(a), m * std::sin(a)}};
        const double q = metrics::le_first_order(le, est[0].x, est[0].z);
        worst = std::max(worst, std::abs(metrics::localization_error(truth, est, le, g) / q - 1));
    }
    return {zero == 0.0 && worst <= 0.05, fmt("LE(perfect) = %g, 100 displacements worst rel error %.4f", zero, worst)};
}

Outcome to_closed_form() {
    const psf::PsfParams p{0.3, 0.3};
    double worst = 0;
    // The wider settings need a lateral field of several envelope widths to avoid periodic overlap.
    const std::pair<psf::ToParams, int> cases[] = {
        {{0.6, 0.3}, 64}, {{0.6, 0.3}, 128}, {{1.0, 0.45}, 128}, {{1.563, 0.6}, 128}};
    for (const auto& [t, nx] : cases) {
        const Grid2D g = make_grid(nx, 64, 0.06, 0.06, true);
        const Image pre = psf::render_psf({p, psf::Mode::Pre, std::nullopt}, g);
        const FrameStack filt = vfl::apply_to_filter(FrameStack(g, 1, 1.0, pre.data), p, t);
        const Image closed = psf::render_psf({p, psf::Mode::To, t}, g);
        double peak = 0, err = 0;
        for (std::size_t i = 0; i < closed.data.size(); ++i) {
            peak = std::max(peak, std::abs(closed.data[i]));
            err = std::max(err, std::abs(closed.data[i] - filt.data()[i]));
        }
        worst = std::max(worst, err / peak);
    }
    return {worst <= 1e-3, fmt("3 TO settings, worst max error %.2e of peak", worst)};
}

Outcome circular_flow() {
    const psf::PsfModel model{{0.15, 0.3}, psf::Mode::Pre, std::nullopt};
    const Grid2D g = make_grid(64, 64, 0.06, 0.06, true);
    const double dt = 0.01, st = 0.5;
    const int nt = 300, fine = 4;
    ph::RingVesselSpec ring;
    ring.orbit_radius = 1.28;
    ring.radius = 0.45;
    ring.v0 = 0.8;
    ring.c_mb = 20;
    std::mt19937_64 rng(6);
    const auto bubbles = ph::sample_ring_bubbles(ring, rng);
    ph::MotionSpec motion;
    motion.kind = ph::MotionSpec::Kind::Circular;
    const auto synth = ph::synthesize_frames(bubbles, motion, {}, model, g, nt, dt);
    std::vector<double> dirs;
    for (int d = 0; d < 360; d += 10) dirs.push_back(d * pi / 180);
    const auto bank = vfl::tile_bank(model.params, st, 0.9, dirs, 4);
    lz::PipelineConfig pc;
    pc.detector = lz::default_detector(model.params, 0.5);
    pc.fine_factor = fine;
    const auto locs = lz::run_pipeline(synth.frames, bank, model, pc).localizations;
    const int t_end = int(std::lround(3.0 / dt));
    const auto acc = lz::accumulate(lz::select_before(locs, t_end), g.refined(fine));
    const double iou = metrics::iou(ph::ring_support_mask(ring, g.refined(fine)), lz::segment_support(acc, {1.0, 2}));
    const double accel = ring.v0 * ring.v0 / ring.orbit_radius;
    return {iou >= 0.7, fmt("centripetal %.2f mm/s^2, IoU after 3 s = %.3f", accel, iou)};
}

}  // namespace

int main(int argc, char** argv) {
    std::vector<int> only;
    for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
    const std::vector<Criterion> all{
        {1, "closed forms vs quadrature", 10, closed_forms},
        {2, "FFT vs direct filter", 20, dual_path},
        {3, "co-moving pass-through", 10, pass_through},
        {4, "attenuation prediction", 30, gamma_prediction},
        {5, "anisotropy and TO", 60, anisotropy},
        {6, "velocity bandwidth", 1, delta_v},
        {7, "noise reduction factor", 60, nrf},
        {8, "density identities", 5, densities},
        {9, "IoU with and without filtering", 300, iou_tradeoff},
        {10, "velocity map", 180, velocity_map},
        {11, "localization error law", 10, le_law},
        {12, "TO closed form vs FFT", 10, to_closed_form},
        {13, "circular flow", 300, circular_flow},
    };
    int failed = 0;
    int ran = 0;
    for (const auto& c : all) {
        if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
        ++ran;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_time = sec <= c.budget_s;
        const bool pass = o.pass && in_time;
        if (!pass) ++failed;
        std::printf("%s  #%-2d %-32s %7.2fs (budget %gs)  %s%s\n", pass ? "PASS" : "FAIL", c.id, c.name, sec,
                    c.budget_s, o.detail.c_str(), in_time ? "" : "  [over time budget]");
        std::fflush(stdout);
    }
    std::printf("%d/%d criteria passed\n", ran - failed, ran);
    return failed == 0 ? 0 : 1;
}
