#include "stages.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "velofilt/error.hpp"
#include "velofilt/io.hpp"
#include "velofilt/metrics.hpp"

namespace cli {

namespace vf = velofilt;
namespace lz = velofilt::localize;
using nlohmann::json;

namespace {

constexpr std::uint64_t kNoiseSeedMix = 0x9e3779b97f4a7c15ULL;

fs::path stem(const RunContext& ctx, const std::string& name) { return ctx.out / name; }

vf::FrameStack load_frames(const RunContext& ctx, const std::string& stage) {
    const fs::path s = stem(ctx, "frames");
    require_input(fs::path(s.string() + ".json"), stage);
    require_input(fs::path(s.string() + ".f32"), stage);
    return vf::io::read_frame_stack(s);
}

const BankSection& need_bank(const RunContext& ctx, const std::string& stage) {
    if (!ctx.cfg.filter_bank) throw ConfigError("filter_bank: required by " + stage);
    return *ctx.cfg.filter_bank;
}

// Abs-max projection over time; a compact preview of where bubbles went.
vf::Image max_projection(const vf::FrameStack& f) {
    vf::Image img(f.grid());
    for (int t = 0; t < f.nt(); ++t) {
        auto fr = f.frame(t);
        for (std::size_t i = 0; i < img.data.size(); ++i)
            img.data[i] = std::max(img.data[i], std::abs(fr[i]));
    }
    return img;
}

vf::Image mask_image(const vf::Mask& m) {
    vf::Image img(m.grid);
    for (std::size_t i = 0; i < m.data.size(); ++i) img.data[i] = m.data[i] ? 1.0 : 0.0;
    return img;
}

lz::MatchedFilter to_matched_filter(const ExperimentConfig& cfg, const vf::Grid2D& g) {
    vf::psf::PsfModel tm = cfg.model;
    tm.mode = vf::psf::Mode::To;
    tm.to = cfg.to;
    return lz::MatchedFilter(tm, g);
}

lz::PipelineConfig pipeline_config(const ExperimentConfig& cfg) {
    lz::PipelineConfig pc;
    pc.detector = cfg.detector;
    pc.fine_factor = cfg.metrics.fine_factor;
    pc.to = cfg.to;
    return pc;
}

lz::LocalizationSet localize_vf(const ExperimentConfig& cfg, const vf::FrameStack& frames) {
    if (!cfg.filter_bank) throw ConfigError("filter_bank: required by localize");
    return lz::run_pipeline(frames, cfg.filter_bank->bank, cfg.model, pipeline_config(cfg))
        .localizations;
}

lz::LocalizationSet localize_plain(const ExperimentConfig& cfg, const vf::FrameStack& frames) {
    const lz::MatchedFilter mf(cfg.model, frames.grid());
    return lz::localize_frames(frames, mf, cfg.detector);
}

struct Maps {
    lz::AccumulatedMap acc;
    vf::Mask support;
    vf::VelocityMap velocity;
};

vf::VelocityMap crop(const vf::VelocityMap& m, int border) {
    if (border == 0) return m;
    vf::Grid2D g = m.grid;
    g.nx -= 2 * border;
    g.nz -= 2 * border;
    g.x0 = m.grid.x(border);
    g.z0 = m.grid.z(border);
    vf::VelocityMap out(g);
    for (int iz = 0; iz < g.nz; ++iz)
        for (int ix = 0; ix < g.nx; ++ix) {
            const std::size_t src = m.grid.index(ix + border, iz + border);
            out.vx[g.index(ix, iz)] = m.vx[src];
            out.vz[g.index(ix, iz)] = m.vz[src];
        }
    return out;
}

Maps build_maps(const ExperimentConfig& cfg, const lz::LocalizationSet& locs) {
    const vf::Grid2D g = cfg.grid.grid();
    Maps m;
    m.acc = lz::accumulate(locs, g.refined(cfg.metrics.fine_factor));
    m.support = lz::segment_support(m.acc, {cfg.metrics.segment_min_count, cfg.metrics.closing_radius});
    m.velocity = lz::velocity_map(locs, g);
    return m;
}

std::vector<double> time_points(const ExperimentConfig& cfg) {
    if (!cfg.metrics.time_points.empty()) return cfg.metrics.time_points;
    std::vector<double> t;
    const double total = cfg.grid.nt * cfg.grid.dt;
    for (int i = 1; i <= 10; ++i) t.push_back(total * i / 10.0);
    return t;
}

int frames_before(const ExperimentConfig& cfg, double t) {
    return std::clamp(int(std::ceil(t / cfg.grid.dt - 1e-9)), 0, cfg.grid.nt);
}

double flow_angle(const ExperimentConfig& cfg) {
    if (cfg.phantom.vessels.empty()) return 0.0;
    return cfg.phantom.vessels.front().axis_angle;
}

// LE of the snapshot at metrics.le.time_s (default: the middle frame).
double localization_error_at(const ExperimentConfig& cfg,
                             const std::vector<vf::phantom::PointRecord>& truth,
                             const lz::LocalizationSet& locs) {
    const int t = cfg.metrics.le_time > 0
        ? std::min(int(std::floor(cfg.metrics.le_time / cfg.grid.dt + 1e-9)), cfg.grid.nt - 1)
        : cfg.grid.nt / 2;
    std::vector<vf::metrics::Point> tp, ep;
    for (const auto& r : truth)
        if (r.t == t) tp.push_back({r.x, r.z});
    for (const auto& l : locs)
        if (l.t_index == t) ep.push_back({l.x, l.z});
    if (tp.empty()) vf::fail(vf::ErrorKind::InvalidState, "metrics: no ground-truth points in the LE frame");
    vf::metrics::LeParams le =
        vf::metrics::default_le_params(cfg.model.params.lambda, flow_angle(cfg), double(tp.size()));
    if (cfg.metrics.le_sigma_par) {
        le.sigma_par = *cfg.metrics.le_sigma_par;
        le.sigma_perp = *cfg.metrics.le_sigma_perp;
    }
    const vf::Grid2D g = cfg.grid.grid();
    const int f = std::max(1, int(std::ceil(std::max(g.dx, g.dz) / (le.sigma_perp / 4) - 1e-9)));
    return vf::metrics::localization_error(tp, ep, le, g.refined(f));
}

void write_table(const fs::path& p, const std::string& header,
                 const std::vector<std::vector<double>>& rows) {
    std::string s = header + "\n";
    for (const auto& r : rows) {
        for (std::size_t i = 0; i < r.size(); ++i) s += (i ? "," : "") + fmt(r[i]);
        s += "\n";
    }
    vf::io::write_text_atomic(p, s);
}

void write_report(const RunContext& ctx, Manifest& m, const json& report) {
    if (ctx.format == Format::Json) {
        const fs::path p = ctx.out / "metrics.json";
        vf::io::write_text_atomic(p, report.dump(2) + "\n");
        m.add("metrics", p);
    } else {
        std::string s = "metric,value\n";
        for (auto it = report.begin(); it != report.end(); ++it)
            if (it->is_number()) s += it.key() + "," + fmt(it->get<double>()) + "\n";
        const fs::path p = ctx.out / "metrics.csv";
        vf::io::write_text_atomic(p, s);
        m.add("metrics", p);
    }
}

}  // namespace

Synthesized synthesize(const ExperimentConfig& cfg) {
    const vf::Grid2D g = cfg.grid.grid();
    const vf::Grid2D fine = g.refined(cfg.metrics.fine_factor);
    std::mt19937_64 rng(cfg.seed);
    vf::phantom::BubbleSet bubbles;
    std::vector<vf::phantom::VesselSpec> wrap;
    Synthesized s;
    switch (cfg.phantom.kind) {
        case PhantomKind::GridBubbles: {
            const auto& b = cfg.phantom.grid_bubbles;
            bubbles = vf::phantom::grid_bubbles(b.nx, b.nz, b.spacing, b.cx, b.cz, b.vx, b.vz);
            s.support_fine = vf::Mask(fine);
            s.velocity = vf::VelocityMap(g);
            break;
        }
        case PhantomKind::Circular: {
            bubbles = vf::phantom::sample_ring_bubbles(cfg.phantom.ring, rng);
            s.support_fine = vf::phantom::ring_support_mask(cfg.phantom.ring, fine);
            s.velocity = vf::phantom::ring_velocity_map(cfg.phantom.ring, g);
            break;
        }
        default: {
            wrap = cfg.resolved_vessels();
            std::int64_t next = 0;
            for (std::size_t k = 0; k < wrap.size(); ++k) {
                auto bs = vf::phantom::sample_bubbles(wrap[k], rng, next);
                for (auto& b : bs) b.vessel = int(k);
                next += std::int64_t(bs.size());
                bubbles.insert(bubbles.end(), bs.begin(), bs.end());
            }
            s.support_fine = vf::phantom::support_mask(wrap, fine);
            s.velocity = vf::phantom::ground_truth_velocity_map(wrap, g);
        }
    }
    vf::phantom::SynthOptions opts;
    opts.noise_sigma = cfg.noise_sigma;
    opts.noise_seed = cfg.seed ^ kNoiseSeedMix;
    s.result = vf::phantom::synthesize_frames(bubbles, cfg.motion(), wrap, cfg.model, g,
                                              cfg.grid.nt, cfg.grid.dt, opts);
    return s;
}

void cmd_synth(const RunContext& ctx, Manifest& m) {
    StageTimer timer;
    const Synthesized s = synthesize(ctx.cfg);
    const fs::path fr = stem(ctx, "frames");
    vf::io::write_frame_stack(s.result.frames, fr);
    m.add_stack("frames", fr);
    write_truth_points(s.result.truth.points, ctx.out / "truth_points.csv");
    m.add("truth_points", ctx.out / "truth_points.csv");
    write_mask(s.support_fine, stem(ctx, "truth_support"));
    m.add_stack("truth_support", stem(ctx, "truth_support"));
    write_velocity(s.velocity, stem(ctx, "truth_velocity"));
    m.add_stack("truth_velocity", stem(ctx, "truth_velocity"));
    if (ctx.cfg.outputs.preview_pgm) {
        vf::io::write_pgm(max_projection(s.result.frames), ctx.out / "frames_preview.pgm");
        m.add("frames_preview", ctx.out / "frames_preview.pgm");
    }
    std::printf("synth: %d frames, %zu visible bubbles, %zu truth points\n", ctx.cfg.grid.nt,
                s.result.truth.n_bubbles, s.result.truth.points.size());
    m.stage_time("synth", timer.seconds());
}

void cmd_filter(const RunContext& ctx, Manifest& m) {
    const BankSection& bank = need_bank(ctx, "filter");
    const vf::FrameStack frames = load_frames(ctx, "filter");
    StageTimer timer;
    json members = json::array();
    vf::vfilter::run_filter_bank(frames, bank.bank, ctx.cfg.to,
        [&](std::size_t i, const vf::vfilter::VelocityFilterSpec& s, vf::FrameStack&& out) {
            const std::string name = "filtered_" + std::to_string(i);
            vf::io::write_frame_stack(out, stem(ctx, name));
            m.add_stack(name, stem(ctx, name));
            members.push_back({{"index", i},
                               {"stem", name},
                               {"vx_mm_s", s.vx},
                               {"vz_mm_s", s.vz},
                               {"sigma_t_s", s.sigma_t},
                               {"uses_to", ctx.cfg.to.has_value() && vf::vfilter::uses_to(s, bank.bank)}});
        });
    const fs::path p = ctx.out / "bank.json";
    vf::io::write_text_atomic(p, json{{"members", members}}.dump(2) + "\n");
    m.add("bank", p);
    std::printf("filter: %zu members\n", bank.bank.specs.size());
    m.stage_time("filter", timer.seconds());
}

void cmd_localize(const RunContext& ctx, Manifest& m) {
    const vf::FrameStack frames = load_frames(ctx, "localize");
    StageTimer timer;
    const ExperimentConfig& cfg = ctx.cfg;
    std::size_t n_vf = 0;
    if (cfg.filter_bank) {
        lz::LocalizationSet locs;
        const fs::path bank_path = ctx.out / "bank.json";
        if (fs::exists(bank_path)) {
            // Reuse the stacks written by the filter stage.
            std::ifstream in(bank_path);
            const json bank = json::parse(in);
            const lz::MatchedFilter plain(cfg.model, frames.grid());
            std::optional<lz::MatchedFilter> with_to;
            if (cfg.to) with_to.emplace(to_matched_filter(cfg, frames.grid()));
            for (const auto& mem : bank.at("members")) {
                const fs::path s = stem(ctx, mem.at("stem").get<std::string>());
                require_input(fs::path(s.string() + ".f32"), "localize");
                const vf::FrameStack f = vf::io::read_frame_stack(s);
                const bool to = mem.at("uses_to").get<bool>() && with_to;
                auto l = lz::localize_frames(f, to ? *with_to : plain, cfg.detector);
                for (auto& x : l) {
                    x.tagged = true;
                    x.vf_x = mem.at("vx_mm_s").get<double>();
                    x.vf_z = mem.at("vz_mm_s").get<double>();
                    x.member = mem.at("index").get<int>();
                }
                locs.insert(locs.end(), l.begin(), l.end());
            }
            locs = lz::merge_duplicates(std::move(locs), cfg.detector.merge_radius);
        } else {
            locs = localize_vf(cfg, frames);
        }
        n_vf = locs.size();
        write_localizations(locs, ctx.out / "localizations.csv");
        m.add("localizations", ctx.out / "localizations.csv");
    }
    std::size_t n_base = 0;
    if (!cfg.filter_bank || cfg.metrics.compare_baseline) {
        const auto base = localize_plain(cfg, frames);
        n_base = base.size();
        const fs::path p = ctx.out / (cfg.filter_bank ? "localizations_baseline.csv" : "localizations.csv");
        write_localizations(base, p);
        m.add(cfg.filter_bank ? "localizations_baseline" : "localizations", p);
    }
    std::printf("localize: %zu with filter bank, %zu baseline\n", n_vf, n_base);
    m.stage_time("localize", timer.seconds());
}

void cmd_accumulate(const RunContext& ctx, Manifest& m) {
    const fs::path main = ctx.out / "localizations.csv";
    require_input(main, "accumulate");
    StageTimer timer;
    auto one = [&](const fs::path& csv, const std::string& suffix) {
        const Maps maps = build_maps(ctx.cfg, read_localizations(csv));
        const vf::Image acc = maps.acc.image();
        vf::io::write_image(acc, stem(ctx, "accumulated" + suffix));
        m.add_stack("accumulated" + suffix, stem(ctx, "accumulated" + suffix));
        write_mask(maps.support, stem(ctx, "support" + suffix));
        m.add_stack("support" + suffix, stem(ctx, "support" + suffix));
        write_velocity(maps.velocity, stem(ctx, "velocity" + suffix));
        m.add_stack("velocity" + suffix, stem(ctx, "velocity" + suffix));
        if (ctx.cfg.outputs.preview_pgm) {
            vf::io::write_pgm(acc, ctx.out / ("accumulated" + suffix + ".pgm"));
            vf::io::write_pgm(mask_image(maps.support), ctx.out / ("support" + suffix + ".pgm"));
            vf::io::write_pgm(maps.velocity.speed_image(), ctx.out / ("velocity" + suffix + ".pgm"));
            m.add("accumulated" + suffix + "_preview", ctx.out / ("accumulated" + suffix + ".pgm"));
        }
    };
    one(main, "");
    const fs::path base = ctx.out / "localizations_baseline.csv";
    if (fs::exists(base)) one(base, "_baseline");
    m.stage_time("accumulate", timer.seconds());
}

void cmd_metrics(const RunContext& ctx, Manifest& m) {
    const ExperimentConfig& cfg = ctx.cfg;
    const fs::path loc_path = ctx.out / "localizations.csv";
    require_input(loc_path, "metrics");
    require_input(ctx.out / "truth_points.csv", "metrics");
    require_input(ctx.out / "truth_support.json", "metrics");
    require_input(ctx.out / "truth_velocity.json", "metrics");
    StageTimer timer;
    const auto locs = read_localizations(loc_path);
    if (locs.empty()) vf::fail(vf::ErrorKind::InvalidState, "metrics: localization input is empty");
    const auto truth = read_truth_points(ctx.out / "truth_points.csv");
    const vf::Mask support = read_mask(stem(ctx, "truth_support"));
    const vf::VelocityMap truth_v = read_velocity(stem(ctx, "truth_velocity"));
    const fs::path base_path = ctx.out / "localizations_baseline.csv";
    const bool has_base = cfg.filter_bank && fs::exists(base_path);
    const auto base = has_base ? read_localizations(base_path) : lz::LocalizationSet{};

    const Maps maps = build_maps(cfg, locs);
    if (!support.grid.same_shape(maps.support.grid))
        vf::fail(vf::ErrorKind::InvalidState, "metrics: truth support grid does not match fine_factor");

    json report;
    report["n_localizations"] = locs.size();
    report["n_truth_points"] = truth.size();
    report["iou"] = vf::metrics::iou(support, maps.support);
    std::optional<Maps> base_maps;
    if (has_base) {
        base_maps = build_maps(cfg, base);
        report["n_localizations_baseline"] = base.size();
        report["iou_baseline"] = vf::metrics::iou(support, base_maps->support);
    }

    // IoU against acquisition time.
    std::vector<std::vector<double>> rows;
    for (double t : time_points(cfg)) {
        const int te = frames_before(cfg, t);
        const double a = vf::metrics::iou(support, build_maps(cfg, lz::select_before(locs, te)).support);
        const double b = has_base
            ? vf::metrics::iou(support, build_maps(cfg, lz::select_before(base, te)).support)
            : std::nan("");
        rows.push_back({t, a, b});
    }
    write_table(ctx.out / "iou_vs_time.csv", "time_s,iou_vf,iou_baseline", rows);
    m.add("iou_vs_time", ctx.out / "iou_vs_time.csv");

    bool moving = false;
    for (std::size_t i = 0; i < truth_v.vx.size(); ++i) moving = moving || truth_v.speed(i) > 0;
    if (moving && cfg.filter_bank) {
        const int b = cfg.metrics.fve_border_px;
        if (2 * b >= truth_v.grid.nx || 2 * b >= truth_v.grid.nz)
            throw ConfigError("metrics.fve_border_px: leaves no pixels");
        const vf::VelocityMap tv = crop(truth_v, b), ev = crop(maps.velocity, b);
        vf::metrics::FveOptions o;
        report["fve"] = vf::metrics::fve(tv, ev, o);
        o.speed_only = true;
        report["fve_speed"] = vf::metrics::fve(tv, ev, o);
        o.fastest_fraction = cfg.metrics.fastest_fraction;
        report["fve_speed_fastest"] = vf::metrics::fve(tv, ev, o);
        double vmax = 0.0;
        for (std::size_t i = 0; i < tv.vx.size(); ++i) vmax = std::max(vmax, tv.speed(i));
        report["fve_speed_fastest_relative"] = report["fve_speed_fastest"].get<double>() / vmax;
    }
    if (cfg.metrics.le_sigma_par || cfg.phantom.kind == PhantomKind::ParallelVessels) {
        report["le"] = localization_error_at(cfg, truth, locs);
        if (has_base) report["le_baseline"] = localization_error_at(cfg, truth, base);
    }
    write_report(ctx, m, report);
    std::printf("metrics: iou %.4f", report["iou"].get<double>());
    if (has_base) std::printf(", baseline iou %.4f", report["iou_baseline"].get<double>());
    std::printf("\n");
    m.stage_time("metrics", timer.seconds());
}

void cmd_pipeline(const RunContext& ctx, Manifest& m) {
    cmd_synth(ctx, m);
    if (ctx.cfg.filter_bank && ctx.cfg.outputs.save_filtered) cmd_filter(ctx, m);
    cmd_localize(ctx, m);
    cmd_accumulate(ctx, m);
    cmd_metrics(ctx, m);

    const ExperimentConfig& cfg = ctx.cfg;
    if (cfg.phantom.kind == PhantomKind::ParallelVessels && !cfg.metrics.gap_sweep.empty()) {
        need_bank(ctx, "gap sweep");
        StageTimer timer;
        std::vector<std::vector<double>> rows;
        for (double gap : cfg.metrics.gap_sweep) {
            ExperimentConfig c = cfg;
            c.phantom.parallel.gap = gap;
            c.phantom.vessels = parallel_vessels(c.phantom.parallel, gap);
            const Synthesized s = synthesize(c);
            const auto& frames = s.result.frames;
            const double le_vf = localization_error_at(c, s.result.truth.points, localize_vf(c, frames));
            const double le_base =
                localization_error_at(c, s.result.truth.points, localize_plain(c, frames));
            rows.push_back({gap, le_vf, le_base});
            std::printf("gap %.4g mm: LE %.4f (filter bank) %.4f (baseline)\n", gap, le_vf, le_base);
        }
        write_table(ctx.out / "le_vs_gap.csv", "gap_mm,le_vf,le_baseline", rows);
        m.add("le_vs_gap", ctx.out / "le_vs_gap.csv");
        m.stage_time("gap_sweep", timer.seconds());
    }
}

}  // namespace cli
