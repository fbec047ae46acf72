#include "tables.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

#include "velofilt/error.hpp"
#include "velofilt/io.hpp"
#include "velofilt/theory.hpp"

namespace cli {

namespace vf = velofilt;
namespace th = velofilt::theory;
using nlohmann::json;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

struct Table {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
};

std::string render(const Table& t, Format f) {
    if (f == Format::Json) {
        json arr = json::array();
        for (const auto& r : t.rows) {
            json o;
            for (std::size_t i = 0; i < r.size(); ++i) o[t.columns[i]] = r[i];
            arr.push_back(o);
        }
        return arr.dump(2) + "\n";
    }
    std::string s;
    for (std::size_t i = 0; i < t.columns.size(); ++i) s += (i ? "," : "") + t.columns[i];
    s += "\n";
    for (const auto& r : t.rows) {
        for (std::size_t i = 0; i < r.size(); ++i) s += (i ? "," : "") + fmt(r[i]);
        s += "\n";
    }
    return s;
}

double sigma_t_of(const TheoryOptions& o) {
    if (o.ratio) {
        vf::require(*o.ratio > 0, "theory: --ratio must be > 0");
        return o.sigma_r / *o.ratio;
    }
    return o.sigma_t;
}

std::vector<double> symmetric_axis(double vmax, int n) {
    vf::require(n >= 2, "theory: --points must be >= 2");
    std::vector<double> v(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) v[std::size_t(i)] = -vmax + 2 * vmax * i / (n - 1);
    // Keep an exact zero on odd grids.
    if (n % 2 == 1) v[std::size_t(n / 2)] = 0.0;
    return v;
}

Table nrf_table(const TheoryOptions& o) {
    th::NoiseSpec n{1.0, 2 * std::numbers::pi / o.lambda, o.v0_max, o.frame_rate};
    const th::NrfBound b = th::nrf_bound(n, sigma_t_of(o));
    return {"nrf", {"nrf", "nrf_db", "nrf_frame_rate", "nrf_frame_rate_db"},
            {{b.nrf, b.db, b.nrf_f, b.db_f}}};
}

Table deltav_table(const TheoryOptions& o) {
    const vf::psf::PsfParams p{o.sigma_r, o.lambda};
    const double st = sigma_t_of(o);
    const th::BandMode mode = o.mode == "post" ? th::BandMode::Post : th::BandMode::Pre;
    vf::require(o.step_deg > 0, "theory: --step-deg must be > 0");
    Table t{"deltav", {"theta_deg", "delta_v_mm_s", "kappa_delta_v"}, {}};
    const int n = int(std::floor(90.0 / o.step_deg + 1e-9));
    for (int i = 0; i <= n; ++i) {
        const double deg = i * o.step_deg;
        const auto b = th::velocity_bandwidth(p, st, deg * kDeg, mode);
        t.rows.push_back({deg, b.delta_v, b.kappa_delta_v});
    }
    if (n * o.step_deg < 90.0 - 1e-9) {
        const auto b = th::velocity_bandwidth(p, st, std::numbers::pi / 2, mode);
        t.rows.push_back({90.0, b.delta_v, b.kappa_delta_v});
    }
    return t;
}

Table gamma_table(const TheoryOptions& o) {
    const vf::psf::PsfParams p{o.sigma_r, o.lambda};
    const double st = sigma_t_of(o);
    const double vmax = o.dv_max.value_or(3.0 * o.sigma_r / st);
    vf::require(vmax > 0, "theory: --dv-max must be > 0");
    const auto axis = symmetric_axis(vmax, o.points);
    Table t{"gamma", {"dvx_mm_s", "dvz_mm_s", "gamma", "gamma_post"}, {}};
    for (double vz : axis)
        for (double vx : axis)
            t.rows.push_back({vx, vz, th::attenuation_pre(p, st, {vx, vz}).gamma,
                              th::attenuation_post(p, st, {vx, vz})});
    return t;
}

Table density_table(const TheoryOptions& o) {
    const vf::psf::PsfParams p{o.sigma_r, o.lambda};
    const th::VesselProfile v{o.radius, o.v0, o.c_mb};
    vf::require(o.radius > 0 && o.v0 > 0 && o.c_mb > 0, "theory: vessel parameters must be > 0");
    const auto band = th::velocity_bandwidth(p, sigma_t_of(o), o.theta_deg * kDeg, th::BandMode::Pre, o.v_f);
    Table t{"density", {"rho_mm", "d2_per_mm2", "dvf_per_mm2", "v_lo_mm_s", "v_hi_mm_s"}, {}};
    const int n = std::max(o.points, 2);
    for (int i = 0; i < n; ++i) {
        const double rho = -o.radius + 2 * o.radius * i / (n - 1);
        t.rows.push_back({rho, th::apparent_density(rho, v),
                          th::filtered_density(rho, o.v_f, band.delta_v, v), band.lo, band.hi});
    }
    return t;
}

Table to_table(const TheoryOptions& o) {
    const vf::psf::PsfParams p{o.sigma_r, o.lambda};
    const vf::psf::ToParams tp{o.lambda_x, o.sigma_x};
    tp.validate();
    const double st = sigma_t_of(o);
    const double vmax = o.dv_max.value_or(3.0 * o.sigma_r / st);
    const auto axis = symmetric_axis(vmax, o.points);
    Table t{"to", {"dvx_mm_s", "dvz_mm_s", "gamma", "gamma_bar", "gamma1", "gamma2"}, {}};
    for (double vz : axis)
        for (double vx : axis) {
            const auto r = th::to_attenuation({vx, vz}, p, tp, st);
            t.rows.push_back({vx, vz, th::attenuation_pre(p, st, {vx, vz}).gamma, r.gamma_bar,
                              r.gamma1, r.gamma2});
        }
    return t;
}

}  // namespace

void cmd_theory(const TheoryOptions& o, const std::optional<fs::path>& out, Format format,
                Manifest* manifest) {
    if (o.mode != "pre" && o.mode != "post") throw ConfigError("--mode: must be pre or post");
    vf::psf::PsfParams{o.sigma_r, o.lambda}.validate();
    std::vector<Table> tables;
    if (o.nrf) tables.push_back(nrf_table(o));
    if (o.deltav) tables.push_back(deltav_table(o));
    if (o.gamma) tables.push_back(gamma_table(o));
    if (o.density) tables.push_back(density_table(o));
    if (o.to_compare) tables.push_back(to_table(o));
    if (tables.empty())
        throw ConfigError("theory: choose at least one of --nrf, --deltav, --gamma, --density, --to");
    StageTimer timer;
    for (const auto& t : tables) {
        const std::string text = render(t, format);
        std::fputs(text.c_str(), stdout);
        if (out) {
            const fs::path p = *out / ("theory_" + t.name + (format == Format::Json ? ".json" : ".csv"));
            vf::io::write_text_atomic(p, text);
            if (manifest) manifest->add("theory_" + t.name, p);
        }
    }
    if (manifest) manifest->stage_time("theory", timer.seconds());
}

}  // namespace cli
