#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "scenes.hpp"
#include "velofilt/error.hpp"
#include "velofilt/phantom.hpp"
#include "velofilt/theory.hpp"

using namespace velofilt;
using namespace velofilt::phantom;

TEST_CASE("flow speed profile") {
    VesselSpec v;
    v.radius = 1;
    v.v0 = 10;
    CHECK(flow_speed(v, 0) == 10);
    CHECK(flow_speed(v, 1) == 0);
    CHECK(flow_speed(v, 0.5) == doctest::Approx(7.5));
    CHECK(flow_speed(v, 1.5) == 0);
}

TEST_CASE("sampling counts and speeds") {
    VesselSpec v;
    v.radius = 1;
    v.v0 = 10;
    v.length = 10;
    v.c_mb = 0;
    CHECK(sample_bubbles(v, 1u).empty());
    v.c_mb = 100;
    BubbleSet b = sample_bubbles(v, 42u);
    const double mean = 100 * M_PI * 10;
    CHECK(std::abs(double(b.size()) - mean) < 4 * std::sqrt(mean));
    double fastest = 0, fastest_rho = 1;
    for (const auto& x : b) {
        const double rho2d = v.in_plane_offset(x.pos.x, x.pos.z);
        const double rho = std::hypot(rho2d, x.pos.y - v.y_center);
        CHECK(rho <= v.radius);
        const double sp = std::hypot(x.vel.x, x.vel.z);
        CHECK(sp == doctest::Approx(v.v0 * (1 - rho * rho)).epsilon(1e-12));
        CHECK(sp <= v.v0);
        if (sp > fastest) {
            fastest = sp;
            fastest_rho = rho;
        }
    }
    CHECK(fastest_rho < 0.1);
    // Same seed, same bubbles.
    BubbleSet again = sample_bubbles(v, 42u);
    REQUIRE(again.size() == b.size());
    CHECK(again.front().pos.x == b.front().pos.x);
    CHECK(again.back().vel.z == b.back().vel.z);
}

TEST_CASE("projected positions follow the apparent density") {
    VesselSpec v;
    v.radius = 1;
    v.v0 = 10;
    v.length = 10;
    v.c_mb = 1e5 / (M_PI * 10);
    v.axis_angle = 0.3;
    BubbleSet b = sample_bubbles(v, 7u);
    const int bins = 20;
    std::vector<double> hist(bins, 0);
    for (const auto& x : b) {
        const double rho = v.in_plane_offset(x.pos.x, x.pos.z);
        const int i = std::min(bins - 1, int((rho + 1) / 2 * bins));
        hist[std::size_t(i)] += 1;
    }
    // Expected bin probabilities from the integral of sqrt(1 - rho^2).
    auto cdf = [](double r) { return (r * std::sqrt(1 - r * r) + std::asin(r)) / M_PI + 0.5; };
    double chi2 = 0;
    for (int i = 0; i < bins; ++i) {
        const double lo = -1 + 2.0 * i / bins, hi = lo + 2.0 / bins;
        const double e = (cdf(hi) - cdf(lo)) * double(b.size());
        chi2 += (hist[std::size_t(i)] - e) * (hist[std::size_t(i)] - e) / e;
    }
    // 19 degrees of freedom, 99.9% quantile is 43.8.
    CHECK(chi2 < 43.8);

    // Speed distribution within rho bins: F(u) = 1 - sqrt(1 - u), u = v / v_max(rho).
    std::vector<std::vector<double>> per_bin(10);
    for (const auto& x : b) {
        const double rho = v.in_plane_offset(x.pos.x, x.pos.z);
        const double vmax = theory::flow_speed(v.profile(), rho);
        if (vmax <= 0) continue;
        const int i = std::min(9, int((rho + 1) / 2 * 10));
        per_bin[std::size_t(i)].push_back(std::min(1.0, std::hypot(x.vel.x, x.vel.z) / vmax));
    }
    for (auto& u : per_bin) {
        std::sort(u.begin(), u.end());
        double ks = 0;
        const double n = double(u.size());
        for (std::size_t k = 0; k < u.size(); ++k) {
            const double f = 1 - std::sqrt(1 - u[k]);
            ks = std::max({ks, std::abs(f - double(k) / n), std::abs(f - double(k + 1) / n)});
        }
        CHECK(ks < 0.02);
    }
}

TEST_CASE("linear and circular advance") {
    Bubble b;
    b.pos = {0.5, 0, 0.2};
    b.vel = {1, 0, 0};
    Bubble n = advance(b, {}, 0.01);
    CHECK(n.pos.x - b.pos.x == doctest::Approx(0.01));
    CHECK(n.pos.z == b.pos.z);

    MotionSpec circ{MotionSpec::Kind::Circular, 0, 0};
    Bubble c;
    c.pos = {6.7, 0, 0};
    c.vel = {0, 0, 1};
    // Centripetal acceleration from the velocity change over a small step.
    const double h = 1e-3;
    Bubble c1 = advance(c, circ, h);
    const double acc = std::hypot(c1.vel.x - c.vel.x, c1.vel.z - c.vel.z) / h;
    CHECK(acc == doctest::Approx(1 / 6.7).epsilon(1e-6));
    CHECK(acc == doctest::Approx(0.149).epsilon(0.01));

    const int steps = 10000;
    const double period = 2 * M_PI * 6.7;
    Bubble s = c;
    for (int i = 0; i < steps; ++i) {
        s = advance(s, circ, period / steps);
        CHECK(std::abs(std::hypot(s.vel.x, s.vel.z) - 1) < 1e-9);
        CHECK(std::abs(std::hypot(s.pos.x, s.pos.z) - 6.7) < 1e-9);
    }
    CHECK(std::abs(s.pos.x - c.pos.x) < 1e-9);
    CHECK(std::abs(s.pos.z - c.pos.z) < 1e-9);

    Bubble center;
    center.vel = {1, 0, 0};
    try {
        advance(center, circ, 0.01);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::InvalidState);
    }
}

TEST_CASE("static bubble renders the PSF in every frame") {
    Grid2D g = make_grid(33, 33, 0.03, 0.03, true);
    psf::PsfModel post{{0.3, 0.3}, psf::Mode::Post, std::nullopt};
    FrameStack fs = scene::single_bubble(g, 5, 0.01, 0, 0, 0, 0, post);
    Image r = psf::render_psf(post, g);
    for (int t = 0; t < 5; ++t) {
        auto f = fs.frame(t);
        double err = 0;
        for (std::size_t i = 0; i < f.size(); ++i) err = std::max(err, std::abs(f[i] - r.data[i]));
        CHECK(err < 1e-12 * r.data[g.index(16, 16)]);
    }
}

TEST_CASE("moving bubble argmax advances one pixel every three frames") {
    Grid2D g = make_grid(65, 33, 0.03, 0.03, true);
    FrameStack fs = scene::single_bubble(g, 30, 0.01, 0, 0, 1.0, 0, scene::pre_model());
    for (int t = 0; t < 30; ++t) {
        auto [ix, iz] = oracle::argmax(fs.frame(t), g);
        CHECK(ix - 32 == std::lround(0.01 * t / 0.03 - 1e-9));
        CHECK(iz == 16);
    }
}

TEST_CASE("synthesis is linear") {
    Grid2D g = make_grid(40, 30, 0.03, 0.03, true);
    BubbleSet a = grid_bubbles(2, 2, 0.2, 0, 0, 0.5, 0.1);
    Bubble extra;
    extra.pos = {0.13, 0, -0.07};
    extra.vel = {-0.3, 0, 0.2};
    BubbleSet both = a;
    both.push_back(extra);
    auto m = scene::pre_model();
    FrameStack fa = synthesize_frames(a, {}, {}, m, g, 6, 0.01).frames;
    FrameStack fb = synthesize_frames({extra}, {}, {}, m, g, 6, 0.01).frames;
    FrameStack fab = synthesize_frames(both, {}, {}, m, g, 6, 0.01).frames;
    for (std::size_t i = 0; i < fab.size(); ++i) CHECK(fab.data()[i] == fa.data()[i] + fb.data()[i]);
}

TEST_CASE("synthesis noise is seeded") {
    Grid2D g = make_grid(16, 16, 0.03, 0.03, true);
    SynthOptions o{0.1, 99};
    auto m = scene::pre_model();
    FrameStack a = synthesize_frames({}, {}, {}, m, g, 4, 0.01, o).frames;
    FrameStack b = synthesize_frames({}, {}, {}, m, g, 4, 0.01, o).frames;
    CHECK(a.data() == b.data());
    double s2 = 0;
    for (double v : a.data()) s2 += v * v;
    CHECK(std::sqrt(s2 / double(a.size())) == doctest::Approx(0.1).epsilon(0.1));
}

TEST_CASE("ground truth support and velocity maps") {
    Grid2D g = make_grid(64, 64, 0.03, 0.03, true);
    VesselSpec v;
    v.radius = 0.3;
    v.v0 = 2;
    v.axis_angle = 0.4;
    v.cx = 0.1;
    Mask m = support_mask({v}, g);
    VelocityMap vm = ground_truth_velocity_map(v, g);
    for (int iz = 0; iz < g.nz; ++iz)
        for (int ix = 0; ix < g.nx; ++ix) {
            const double rho = v.in_plane_offset(g.x(ix), g.z(iz));
            CHECK(m.at(ix, iz) == (std::abs(rho) <= v.radius));
            const std::size_t i = g.index(ix, iz);
            const double expect = std::abs(rho) <= v.radius ? v.v0 * (1 - rho * rho / (v.radius * v.radius)) : 0.0;
            CHECK(vm.speed(i) == doctest::Approx(expect).epsilon(1e-12));
            if (expect > 0) {
                CHECK(vm.vx[i] / vm.speed(i) == doctest::Approx(std::cos(0.4)));
                CHECK(vm.vz[i] / vm.speed(i) == doctest::Approx(std::sin(0.4)));
            }
        }
    // Axis point has speed v0.
    VesselSpec h;
    h.radius = 0.3;
    h.v0 = 2;
    VelocityMap hm = ground_truth_velocity_map(h, make_grid(5, 21, 0.03, 0.03, true));
    CHECK(hm.speed(std::size_t(10 * 5 + 2)) == doctest::Approx(2.0));
    CHECK(hm.speed(std::size_t(0)) == doctest::Approx(0.0));
}

TEST_CASE("ring vessel") {
    RingVesselSpec r;
    r.orbit_radius = 2;
    r.radius = 0.45;
    r.v0 = 1;
    r.c_mb = 200;
    std::mt19937_64 rng(3);
    BubbleSet b = sample_ring_bubbles(r, rng);
    const double mean = 200 * 2 * M_PI * 2 * M_PI * 0.45 * 0.45;
    CHECK(std::abs(double(b.size()) - mean) < 4 * std::sqrt(mean));
    for (const auto& x : b) {
        const double u = std::hypot(x.pos.x, x.pos.z) - 2;
        const double rho = std::hypot(u, x.pos.y);
        CHECK(rho <= 0.45 + 1e-12);
        CHECK(std::hypot(x.vel.x, x.vel.z) == doctest::Approx(1 - rho * rho / 0.2025).epsilon(1e-9));
        // tangential
        CHECK(std::abs(x.vel.x * x.pos.x + x.vel.z * x.pos.z) < 1e-9);
    }
    Grid2D g = make_grid(64, 64, 0.08, 0.08, true);
    Mask m = ring_support_mask(r, g);
    for (int iz = 0; iz < g.nz; ++iz)
        for (int ix = 0; ix < g.nx; ++ix) CHECK(m.at(ix, iz) == (std::abs(std::hypot(g.x(ix), g.z(iz)) - 2) <= 0.45));
    RingVesselSpec bad = r;
    bad.orbit_radius = 0.3;
    CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("vessel wrapping keeps bubbles inside") {
    Grid2D g = make_grid(32, 32, 0.03, 0.03, true);
    VesselSpec v;
    v.radius = 0.1;
    v.v0 = 5;
    v.c_mb = 2000;
    v.length = default_length(g, v, 0.3);
    BubbleSet b = sample_bubbles(v, 5u);
    for (auto& x : b) x.vessel = 0;
    SynthResult res = synthesize_frames(b, {}, {v}, scene::pre_model(), g, 50, 0.05);
    CHECK(res.truth.n_bubbles > 0);
    for (const auto& p : res.truth.points) CHECK(std::abs(v.along_axis(p.x, p.z)) <= 0.5 * v.length + 1e-9);
    CHECK(res.frames.all_finite());
    // Every frame sees roughly the same number of bubbles.
    std::vector<int> per(50, 0);
    for (const auto& p : res.truth.points) per[std::size_t(p.t)]++;
    CHECK(*std::min_element(per.begin(), per.end()) > 0);
}
