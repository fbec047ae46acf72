#include "config.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <set>

#include "velofilt/error.hpp"

namespace cli {

namespace vf = velofilt;
using nlohmann::json;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

// Reads keys of one JSON object and rejects whatever was not consumed.
class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
    }

    bool has(const std::string& key) const { return j_.contains(key); }
    std::string child(const std::string& key) const {
        return path_.empty() ? key : path_ + "." + key;
    }

    const json& raw(const std::string& key) {
        used_.insert(key);
        return j_.at(key);
    }

    double num(const std::string& key, std::optional<double> def = std::nullopt) {
        if (!has(key)) return required(key, def);
        const json& v = raw(key);
        if (!v.is_number()) throw ConfigError(child(key) + ": expected a number");
        const double x = v.get<double>();
        if (!std::isfinite(x)) throw ConfigError(child(key) + ": must be finite");
        return x;
    }

    double positive(const std::string& key, std::optional<double> def = std::nullopt) {
        const double x = num(key, def);
        if (!(x > 0)) throw ConfigError(child(key) + ": must be > 0");
        return x;
    }

    double non_negative(const std::string& key, std::optional<double> def = std::nullopt) {
        const double x = num(key, def);
        if (x < 0) throw ConfigError(child(key) + ": must be >= 0");
        return x;
    }

    int integer(const std::string& key, std::optional<int> def = std::nullopt, int lo = 1) {
        int x;
        if (!has(key)) {
            x = int(required(key, def ? std::optional<double>(*def) : std::nullopt));
        } else {
            const json& v = raw(key);
            if (!v.is_number_integer()) throw ConfigError(child(key) + ": expected an integer");
            const auto y = v.get<long long>();
            if (y > 1'000'000'000LL || y < -1'000'000'000LL)
                throw ConfigError(child(key) + ": out of range");
            x = int(y);
        }
        if (x < lo) throw ConfigError(child(key) + ": must be >= " + std::to_string(lo));
        return x;
    }

    bool boolean(const std::string& key, bool def) {
        if (!has(key)) return def;
        const json& v = raw(key);
        if (!v.is_boolean()) throw ConfigError(child(key) + ": expected true or false");
        return v.get<bool>();
    }

    std::string str(const std::string& key, std::optional<std::string> def = std::nullopt) {
        if (!has(key)) {
            if (!def) throw ConfigError(child(key) + ": required");
            return *def;
        }
        const json& v = raw(key);
        if (!v.is_string()) throw ConfigError(child(key) + ": expected a string");
        return v.get<std::string>();
    }

    std::vector<double> numbers(const std::string& key) {
        std::vector<double> out;
        if (!has(key)) return out;
        const json& v = raw(key);
        if (!v.is_array()) throw ConfigError(child(key) + ": expected an array");
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_number())
                throw ConfigError(child(key) + "[" + std::to_string(i) + "]: expected a number");
            out.push_back(v[i].get<double>());
        }
        return out;
    }

    int sign(const std::string& key) {
        const int s = integer(key, 1, -1);
        if (s != 1 && s != -1) throw ConfigError(child(key) + ": must be 1 or -1");
        return s;
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!used_.count(it.key())) throw ConfigError(child(it.key()) + ": unknown key");
    }

private:
    double required(const std::string& key, std::optional<double> def) const {
        if (!def) throw ConfigError(child(key) + ": required");
        return *def;
    }

    const json& j_;
    std::string path_;
    std::set<std::string> used_;
};

vf::phantom::VesselSpec parse_vessel(const json& j, const std::string& path) {
    Section s(j, path);
    vf::phantom::VesselSpec v;
    v.radius = s.positive("radius_mm", 0.15);
    v.v0 = s.non_negative("v0_mm_s", 5.0);
    v.c_mb = s.non_negative("c_mb_per_mm3", 0.0);
    v.axis_angle = s.num("axis_angle_deg", 0.0) * kDeg;
    v.cx = s.num("center_x_mm", 0.0);
    v.cz = s.num("center_z_mm", 0.0);
    v.length = s.non_negative("length_mm", 0.0);
    v.y_center = s.num("y_center_mm", 0.0);
    v.flow_sign = s.sign("flow_sign");
    s.finish();
    return v;
}

void parse_psf(const json& j, ExperimentConfig& c) {
    Section s(j, "psf");
    c.model.params.sigma_r = s.positive("sigma_r_mm", 0.3);
    c.model.params.lambda = s.positive("lambda_mm", 0.3);
    const std::string mode = s.str("mode", "pre");
    if (mode != "pre" && mode != "post")
        throw ConfigError("psf.mode: must be \"pre\" or \"post\" (TO is enabled by the to section)");
    c.model.mode = mode == "pre" ? vf::psf::Mode::Pre : vf::psf::Mode::Post;
    s.finish();
}

void parse_grid(const json& j, GridSection& g) {
    Section s(j, "grid");
    g.nx = s.integer("nx", 64, 8);
    g.nz = s.integer("nz", 64, 8);
    g.dx = s.positive("dx_mm", 0.03);
    g.dz = s.positive("dz_mm", 0.03);
    g.nt = s.integer("nt", 200, 1);
    g.dt = s.positive("dt_s", 0.01);
    s.finish();
}

void parse_phantom(const json& j, PhantomSection& p) {
    Section s(j, "phantom");
    const std::string kind = s.str("kind");
    if (kind == "grid_bubbles") {
        p.kind = PhantomKind::GridBubbles;
        Section g(s.raw("grid_bubbles"), "phantom.grid_bubbles");
        auto& b = p.grid_bubbles;
        b.nx = g.integer("count_x", 3, 0);
        b.nz = g.integer("count_z", 3, 0);
        b.spacing = g.positive("spacing_mm", 0.6);
        b.cx = g.num("center_x_mm", 0.0);
        b.cz = g.num("center_z_mm", 0.0);
        b.vx = g.num("vx_mm_s", 1.0);
        b.vz = g.num("vz_mm_s", 0.0);
        g.finish();
    } else if (kind == "single_vessel") {
        p.kind = PhantomKind::SingleVessel;
        p.vessels = {parse_vessel(s.raw("vessel"), "phantom.vessel")};
    } else if (kind == "crossing_vessels") {
        p.kind = PhantomKind::CrossingVessels;
        const json& arr = s.raw("vessels");
        if (!arr.is_array() || arr.empty())
            throw ConfigError("phantom.vessels: expected a non-empty array");
        for (std::size_t i = 0; i < arr.size(); ++i)
            p.vessels.push_back(parse_vessel(arr[i], "phantom.vessels[" + std::to_string(i) + "]"));
    } else if (kind == "parallel_vessels") {
        p.kind = PhantomKind::ParallelVessels;
        Section q(s.raw("parallel"), "phantom.parallel");
        p.parallel.gap = q.non_negative("gap_mm", 0.3);
        p.parallel.base.radius = q.positive("radius_mm", 0.15);
        p.parallel.base.v0 = q.non_negative("v0_mm_s", 5.0);
        p.parallel.base.c_mb = q.non_negative("c_mb_per_mm3", 0.0);
        p.parallel.base.axis_angle = q.num("axis_angle_deg", 0.0) * kDeg;
        p.parallel.base.cx = q.num("center_x_mm", 0.0);
        p.parallel.base.cz = q.num("center_z_mm", 0.0);
        p.parallel.base.length = q.non_negative("length_mm", 0.0);
        q.finish();
        p.vessels = parallel_vessels(p.parallel, p.parallel.gap);
    } else if (kind == "circular") {
        p.kind = PhantomKind::Circular;
        Section r(s.raw("ring"), "phantom.ring");
        auto& ring = p.ring;
        ring.orbit_radius = r.positive("orbit_radius_mm", 2.0);
        ring.radius = r.positive("radius_mm", 0.45);
        ring.v0 = r.non_negative("v0_mm_s", 1.0);
        ring.c_mb = r.non_negative("c_mb_per_mm3", 0.0);
        ring.cx = r.num("center_x_mm", 0.0);
        ring.cz = r.num("center_z_mm", 0.0);
        ring.y_center = r.num("y_center_mm", 0.0);
        ring.angular_sign = r.sign("angular_sign");
        r.finish();
        if (ring.radius >= ring.orbit_radius)
            throw ConfigError("phantom.ring.radius_mm: must be below orbit_radius_mm");
    } else {
        throw ConfigError("phantom.kind: unknown kind \"" + kind + "\"");
    }
    s.finish();
}

void parse_bank(const json& j, const ExperimentConfig& c, BankSection& b) {
    Section s(j, "filter_bank");
    b.sigma_t = s.positive("sigma_t_s", 0.5);
    b.trunc = s.positive("trunc_sigmas", 4.0);
    b.to_max_angle_deg = s.non_negative("to_max_angle_deg", 10.0);
    b.bank.to_max_angle_deg = b.to_max_angle_deg;
    const bool has_members = s.has("members"), has_tile = s.has("tile");
    if (has_members == has_tile)
        throw ConfigError("filter_bank: exactly one of members or tile is required");
    if (has_members) {
        const json& arr = s.raw("members");
        if (!arr.is_array() || arr.empty())
            throw ConfigError("filter_bank.members: expected a non-empty array");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            Section m(arr[i], "filter_bank.members[" + std::to_string(i) + "]");
            const double speed = m.non_negative("speed_mm_s");
            const double ang = m.num("angle_deg", 0.0) * kDeg;
            m.finish();
            vf::vfilter::VelocityFilterSpec f;
            f.vx = speed * std::cos(ang);
            f.vz = speed * std::sin(ang);
            f.sigma_t = b.sigma_t;
            f.trunc = b.trunc;
            b.bank.specs.push_back(f);
        }
    } else {
        Section t(s.raw("tile"), "filter_bank.tile");
        const double vmax = t.positive("v_max_mm_s");
        std::vector<double> dirs = t.numbers("directions_deg");
        t.finish();
        if (dirs.empty()) throw ConfigError("filter_bank.tile.directions_deg: required");
        for (double& d : dirs) d *= kDeg;
        b.bank = vf::vfilter::tile_bank(c.model.params, b.sigma_t, vmax, dirs, b.trunc);
        b.bank.to_max_angle_deg = b.to_max_angle_deg;
    }
    s.finish();
}

void parse_metrics(const json& j, MetricsSection& m) {
    Section s(j, "metrics");
    m.fine_factor = s.integer("fine_factor", 4, 1);
    m.closing_radius = s.integer("closing_radius_px", 2, 0);
    m.segment_min_count = s.positive("segment_min_count", 1.0);
    m.fastest_fraction = s.num("fastest_fraction", 0.05);
    if (m.fastest_fraction < 0 || m.fastest_fraction > 1)
        throw ConfigError("metrics.fastest_fraction: must be in [0, 1]");
    m.fve_border_px = s.integer("fve_border_px", 0, 0);
    m.time_points = s.numbers("time_points_s");
    for (std::size_t i = 0; i < m.time_points.size(); ++i)
        if (!(m.time_points[i] > 0))
            throw ConfigError("metrics.time_points_s[" + std::to_string(i) + "]: must be > 0");
    if (s.has("le")) {
        Section le(s.raw("le"), "metrics.le");
        m.le_sigma_par = le.positive("sigma_par_mm");
        m.le_sigma_perp = le.positive("sigma_perp_mm");
        m.le_time = le.num("time_s", -1.0);
        le.finish();
        if (*m.le_sigma_par < *m.le_sigma_perp)
            throw ConfigError("metrics.le.sigma_par_mm: must be >= sigma_perp_mm");
    }
    m.gap_sweep = s.numbers("gap_sweep_mm");
    for (std::size_t i = 0; i < m.gap_sweep.size(); ++i)
        if (m.gap_sweep[i] < 0)
            throw ConfigError("metrics.gap_sweep_mm[" + std::to_string(i) + "]: must be >= 0");
    m.compare_baseline = s.boolean("compare_baseline", true);
    s.finish();
}

}  // namespace

const char* kind_name(PhantomKind k) {
    switch (k) {
        case PhantomKind::GridBubbles: return "grid_bubbles";
        case PhantomKind::CrossingVessels: return "crossing_vessels";
        case PhantomKind::ParallelVessels: return "parallel_vessels";
        case PhantomKind::SingleVessel: return "single_vessel";
        case PhantomKind::Circular: return "circular";
    }
    return "?";
}

std::vector<vf::phantom::VesselSpec> parallel_vessels(const ParallelSection& p, double gap) {
    vf::phantom::VesselSpec a = p.base, b = p.base;
    // Axes sit radius + gap/2 either side of the center, in the image plane normal.
    const double off = p.base.radius + 0.5 * gap;
    const double nx = -std::sin(p.base.axis_angle), nz = std::cos(p.base.axis_angle);
    a.cx += off * nx;
    a.cz += off * nz;
    b.cx -= off * nx;
    b.cz -= off * nz;
    b.flow_sign = -a.flow_sign;
    return {a, b};
}

std::vector<vf::phantom::VesselSpec> ExperimentConfig::resolved_vessels() const {
    std::vector<vf::phantom::VesselSpec> out = phantom.vessels;
    const vf::Grid2D g = grid.grid();
    for (auto& v : out)
        if (v.length <= 0) v.length = vf::phantom::default_length(g, v, model.params.sigma_r);
    return out;
}

vf::phantom::MotionSpec ExperimentConfig::motion() const {
    vf::phantom::MotionSpec m;
    if (phantom.kind == PhantomKind::Circular) {
        m.kind = vf::phantom::MotionSpec::Kind::Circular;
        m.cx = phantom.ring.cx;
        m.cz = phantom.ring.cz;
    }
    return m;
}

ExperimentConfig parse_config(const json& doc) {
    ExperimentConfig c;
    c.raw = doc;
    Section root(doc, "");
    if (root.has("seed")) {
        const json& v = root.raw("seed");
        if (!v.is_number_unsigned()) throw ConfigError("seed: expected an unsigned integer");
        c.seed = v.get<std::uint64_t>();
    }
    parse_psf(root.raw("psf"), c);
    if (root.has("to")) {
        Section t(root.raw("to"), "to");
        vf::psf::ToParams tp;
        tp.lambda_x = t.positive("lambda_x_mm");
        tp.sigma_x = t.positive("sigma_x_mm");
        t.finish();
        c.to = tp;
    }
    parse_grid(root.raw("grid"), c.grid);
    parse_phantom(root.raw("phantom"), c.phantom);
    if (root.has("motion")) {
        // The motion model follows the phantom kind; the section only confirms it.
        Section m(root.raw("motion"), "motion");
        const std::string kind = m.str("kind");
        m.finish();
        const std::string want = c.phantom.kind == PhantomKind::Circular ? "circular" : "linear";
        if (kind != want)
            throw ConfigError("motion.kind: phantom kind " + std::string(kind_name(c.phantom.kind)) +
                              " requires \"" + want + "\"");
    }
    if (root.has("noise")) {
        Section n(root.raw("noise"), "noise");
        c.noise_sigma = n.non_negative("sigma");
        n.finish();
    }
    if (root.has("filter_bank")) {
        BankSection b;
        parse_bank(root.raw("filter_bank"), c, b);
        c.filter_bank = b;
    }
    {
        const json empty = json::object();
        Section d(root.has("detector") ? root.raw("detector") : empty, "detector");
        const double thr = d.num("threshold_fraction", 0.5);
        if (!(thr > 0 && thr < 1)) throw ConfigError("detector.threshold_fraction: must be in (0, 1)");
        c.detector = vf::localize::default_detector(c.model.params, thr);
        if (d.has("min_separation_mm")) c.detector.min_separation = d.positive("min_separation_mm");
        if (d.has("merge_radius_mm")) c.detector.merge_radius = d.non_negative("merge_radius_mm");
        c.detector.subpixel = d.boolean("subpixel", true);
        d.finish();
    }
    if (root.has("metrics")) parse_metrics(root.raw("metrics"), c.metrics);
    if (root.has("outputs")) {
        Section o(root.raw("outputs"), "outputs");
        c.outputs.preview_pgm = o.boolean("preview_pgm", true);
        c.outputs.save_filtered = o.boolean("save_filtered", false);
        o.finish();
    }
    root.finish();

    try {
        c.model.validate();
        if (c.to) c.to->validate();
        c.grid.grid().validate();
        for (const auto& v : c.phantom.vessels) v.validate();
        if (c.phantom.kind == PhantomKind::Circular) c.phantom.ring.validate();
        if (c.filter_bank)
            for (const auto& s : c.filter_bank->bank.specs) s.validate();
    } catch (const vf::Error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("--config: cannot open " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("--config: invalid JSON: " + std::string(e.what()));
    }
    return parse_config(doc);
}

}  // namespace cli
