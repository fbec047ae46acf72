#include "velofilt/localize.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>

#include "velofilt/error.hpp"
#include "velofilt/parallel.hpp"

namespace velofilt::localize {

namespace {

bool smooth_size(int n) {
    for (int p : {2, 3, 5, 7})
        while (n % p == 0) n /= p;
    return n == 1;
}

int next_smooth(int n) {
    while (!smooth_size(n)) ++n;
    return n;
}

bool loc_less(const Localization& a, const Localization& b) {
    if (a.t_index != b.t_index) return a.t_index < b.t_index;
    if (a.score != b.score) return a.score > b.score;
    if (a.x != b.x) return a.x < b.x;
    if (a.z != b.z) return a.z < b.z;
    return a.member < b.member;
}

}  // namespace

double Localization::tag_speed() const { return tagged ? std::hypot(vf_x, vf_z) : 0.0; }

void DetectorConfig::validate() const {
    require(threshold_fraction > 0 && threshold_fraction < 1, "detector: threshold_fraction must be in (0,1)");
    require(min_separation > 0, "detector: min_separation must be positive");
    require(merge_radius >= 0, "detector: merge_radius must be >= 0");
}

DetectorConfig default_detector(const psf::PsfParams& p, double threshold_fraction) {
    DetectorConfig c;
    c.threshold_fraction = threshold_fraction;
    // Carrier sidelobes of the autocorrelation sit near m*lambda with relative
    // height exp(-(m lambda)^2 / (4 sr^2)); suppress every one above threshold.
    const double reach = 2 * p.sigma_r * std::sqrt(std::log(1 / threshold_fraction));
    const int m = int(std::floor(reach / p.lambda));
    c.min_separation = m > 0 ? (m + 0.25) * p.lambda : p.lambda / 2;
    c.merge_radius = p.lambda / 4;
    return c;
}

MatchedFilter::MatchedFilter(const psf::PsfModel& model, const Grid2D& frame_grid) : grid_(frame_grid) {
    model.validate();
    frame_grid.validate();
    // Template covers +-3 envelope widths; beyond that g^2 holds ~1e-4 of its energy.
    const double sx = 3 * model.envelope_sigma_x(), sz = 3 * model.envelope_sigma_z();
    hx_ = int(std::ceil(sx / frame_grid.dx - 1e-9));
    hz_ = int(std::ceil(sz / frame_grid.dz - 1e-9));
    if (2 * hx_ + 1 > frame_grid.nx || 2 * hz_ + 1 > frame_grid.nz)
        fail(ErrorKind::InvalidArgument, "matched filter: template larger than frame");
    Grid2D tg;
    tg.nx = 2 * hx_ + 1;
    tg.nz = 2 * hz_ + 1;
    tg.dx = frame_grid.dx;
    tg.dz = frame_grid.dz;
    tg.x0 = -hx_ * tg.dx;
    tg.z0 = -hz_ * tg.dz;
    tmpl_ = psf::render_psf(model, tg);
    autocorr_peak_ = 0.0;
    for (double v : tmpl_.data) autocorr_peak_ += v * v;

    px_ = next_smooth(frame_grid.nx + hx_);
    pz_ = next_smooth(frame_grid.nz + hz_);
    tspec_.assign(std::size_t(px_) * std::size_t(pz_), cplx(0.0, 0.0));
    for (int jz = -hz_; jz <= hz_; ++jz)
        for (int jx = -hx_; jx <= hx_; ++jx) {
            const int ix = (jx + px_) % px_, iz = (jz + pz_) % pz_;
            tspec_[std::size_t(iz) * px_ + ix] = tmpl_.at(jx + hx_, jz + hz_);
        }
    fft_inplace(tspec_.data(), {pz_, px_}, FftDirection::Forward);
    for (auto& c : tspec_) c = std::conj(c);
}

Image MatchedFilter::correlate(std::span<const double> frame) const {
    require(frame.size() == grid_.size(), "matched filter: frame size mismatch");
    std::vector<cplx> buf(std::size_t(px_) * std::size_t(pz_), cplx(0.0, 0.0));
    for (int iz = 0; iz < grid_.nz; ++iz)
        for (int ix = 0; ix < grid_.nx; ++ix) buf[std::size_t(iz) * px_ + ix] = frame[grid_.index(ix, iz)];
    fft_inplace(buf.data(), {pz_, px_}, FftDirection::Forward);
    for (std::size_t i = 0; i < buf.size(); ++i) buf[i] *= tspec_[i];
    fft_inplace(buf.data(), {pz_, px_}, FftDirection::Inverse);
    Image out(grid_);
    for (int iz = 0; iz < grid_.nz; ++iz)
        for (int ix = 0; ix < grid_.nx; ++ix) out.at(ix, iz) = buf[std::size_t(iz) * px_ + ix].real();
    return out;
}

Image matched_filter_map(const Image& frame, const psf::PsfModel& model) {
    MatchedFilter mf(model, frame.grid);
    return mf.correlate(frame);
}

namespace {

// Offsets (in pixels) of the stationary point of a quadratic fitted to the 3x3
// neighbourhood, in the log domain when all nine values are positive (exact for
// a Gaussian peak). Falls back to independent 1D parabolas when the 2D fit is
// not a proper maximum.
void subpixel_offset(const Image& c, int ix, int iz, double& ox, double& oz) {
    bool positive = true;
    for (int dz = -1; dz <= 1; ++dz)
        for (int dx = -1; dx <= 1; ++dx) positive = positive && c.at(ix + dx, iz + dz) > 0;
    auto v = [&](int dx, int dz) {
        const double raw = c.at(ix + dx, iz + dz);
        return positive ? std::log(raw) : raw;
    };
    // Least squares on the 9 points for f = a + b x + c z + d x^2 + e x z + f z^2.
    double sx = 0, sz = 0, sxx = 0, szz = 0, sxz = 0;
    for (int dz = -1; dz <= 1; ++dz)
        for (int dx = -1; dx <= 1; ++dx) {
            const double f = v(dx, dz);
            sx += dx * f;
            sz += dz * f;
            sxx += dx * dx * f;
            szz += dz * dz * f;
            sxz += dx * dz * f;
        }
    double s0 = 0;
    for (int dz = -1; dz <= 1; ++dz)
        for (int dx = -1; dx <= 1; ++dx) s0 += v(dx, dz);
    const double b = sx / 6.0;
    const double cc = sz / 6.0;
    const double e = sxz / 4.0;
    // Normal equations for the pure quadratic terms reduce to these on a 3x3 stencil.
    const double d = sxx / 2.0 - s0 / 3.0;
    const double f = szz / 2.0 - s0 / 3.0;
    const double det = 4 * d * f - e * e;
    ox = oz = 0.0;
    if (d < 0 && f < 0 && det > 0) {
        ox = (-2 * f * b + e * cc) / det;
        oz = (-2 * d * cc + e * b) / det;
        if (std::abs(ox) <= 1.0 && std::abs(oz) <= 1.0) return;
    }
    const double cx = v(-1, 0) - 2 * v(0, 0) + v(1, 0);
    const double cz = v(0, -1) - 2 * v(0, 0) + v(0, 1);
    ox = cx < 0 ? std::clamp(0.5 * (v(-1, 0) - v(1, 0)) / cx, -0.5, 0.5) : 0.0;
    oz = cz < 0 ? std::clamp(0.5 * (v(0, -1) - v(0, 1)) / cz, -0.5, 0.5) : 0.0;
}

}  // namespace

std::vector<Localization> detect(const Image& corr, const DetectorConfig& cfg, double autocorr_peak,
                                 int t_index) {
    cfg.validate();
    require(autocorr_peak > 0, "detect: autocorrelation peak must be positive");
    const Grid2D& g = corr.grid;
    const double thr = cfg.threshold_fraction * autocorr_peak;
    std::vector<Localization> cand;
    for (int iz = 1; iz + 1 < g.nz; ++iz)
        for (int ix = 1; ix + 1 < g.nx; ++ix) {
            const double c = corr.at(ix, iz);
            if (c < thr) continue;
            bool is_max = true;
            for (int dz = -1; dz <= 1 && is_max; ++dz)
                for (int dx = -1; dx <= 1; ++dx) {
                    if (dx == 0 && dz == 0) continue;
                    const double n = corr.at(ix + dx, iz + dz);
                    // Ties are broken towards the later pixel in scan order.
                    const bool later = dz > 0 || (dz == 0 && dx > 0);
                    if (n > c || (later && n == c)) {
                        is_max = false;
                        break;
                    }
                }
            if (!is_max) continue;
            double ox = 0, oz = 0;
            if (cfg.subpixel) subpixel_offset(corr, ix, iz, ox, oz);
            Localization l;
            l.t_index = t_index;
            l.x = g.x(ix) + ox * g.dx;
            l.z = g.z(iz) + oz * g.dz;
            l.score = c / autocorr_peak;
            cand.push_back(l);
        }
    std::sort(cand.begin(), cand.end(), loc_less);
    std::vector<Localization> kept;
    const double r2 = cfg.min_separation * cfg.min_separation;
    for (const auto& l : cand) {
        bool ok = true;
        for (const auto& k : kept)
            if ((k.x - l.x) * (k.x - l.x) + (k.z - l.z) * (k.z - l.z) < r2) {
                ok = false;
                break;
            }
        if (ok) kept.push_back(l);
    }
    return kept;
}

LocalizationSet merge_duplicates(LocalizationSet locs, double radius) {
    std::sort(locs.begin(), locs.end(), loc_less);
    LocalizationSet out;
    const double r2 = radius * radius;
    std::size_t frame_start = 0;
    bool first = true;
    int cur_t = 0;
    for (const auto& l : locs) {
        if (first || l.t_index != cur_t) {
            first = false;
            cur_t = l.t_index;
            frame_start = out.size();
        }
        bool dup = false;
        for (std::size_t k = frame_start; k < out.size(); ++k) {
            const auto& o = out[k];
            if (o.t_index == l.t_index && (o.x - l.x) * (o.x - l.x) + (o.z - l.z) * (o.z - l.z) <= r2) {
                dup = true;
                break;
            }
        }
        if (!dup) out.push_back(l);
    }
    return out;
}

Image AccumulatedMap::image() const {
    Image img(grid);
    img.data = counts;
    return img;
}

AccumulatedMap accumulate(const LocalizationSet& locs, const Grid2D& fine_grid) {
    fine_grid.validate();
    AccumulatedMap m;
    m.grid = fine_grid;
    m.counts.assign(fine_grid.size(), 0.0);
    for (const auto& l : locs) {
        const long ix = std::lround((l.x - fine_grid.x0) / fine_grid.dx);
        const long iz = std::lround((l.z - fine_grid.z0) / fine_grid.dz);
        if (ix < 0 || iz < 0 || ix >= fine_grid.nx || iz >= fine_grid.nz) continue;
        m.counts[fine_grid.index(int(ix), int(iz))] += 1.0;
        m.total += 1.0;
    }
    return m;
}

VelocityMap velocity_map(const LocalizationSet& locs, const Grid2D& grid) {
    VelocityMap vm(grid);
    for (const auto& l : locs) {
        if (!l.tagged) continue;
        const long ix = std::lround((l.x - grid.x0) / grid.dx);
        const long iz = std::lround((l.z - grid.z0) / grid.dz);
        if (ix < 0 || iz < 0 || ix >= grid.nx || iz >= grid.nz) continue;
        const std::size_t i = grid.index(int(ix), int(iz));
        const double s = l.tag_speed();
        const double cur = vm.speed(i);
        // Ties resolve to the lexicographically larger tag so the map is order-independent.
        if (s > cur || (s == cur && (l.vf_x > vm.vx[i] || (l.vf_x == vm.vx[i] && l.vf_z > vm.vz[i])))) {
            vm.vx[i] = l.vf_x;
            vm.vz[i] = l.vf_z;
        }
    }
    return vm;
}

Mask morphological_close(const Mask& m, int radius) {
    if (radius <= 0) return m;
    const Grid2D& g = m.grid;
    std::vector<std::pair<int, int>> disk;
    for (int dz = -radius; dz <= radius; ++dz)
        for (int dx = -radius; dx <= radius; ++dx)
            if (dx * dx + dz * dz <= radius * radius) disk.emplace_back(dx, dz);
    Mask dil(g);
    for (int iz = 0; iz < g.nz; ++iz)
        for (int ix = 0; ix < g.nx; ++ix) {
            if (!m.at(ix, iz)) continue;
            for (auto [dx, dz] : disk) {
                const int x = ix + dx, z = iz + dz;
                if (x >= 0 && z >= 0 && x < g.nx && z < g.nz) dil.data[g.index(x, z)] = 1;
            }
        }
    // Erosion treats outside-the-grid as set, so closing never shrinks at borders.
    Mask ero(g);
    for (int iz = 0; iz < g.nz; ++iz)
        for (int ix = 0; ix < g.nx; ++ix) {
            bool all = true;
            for (auto [dx, dz] : disk) {
                const int x = ix + dx, z = iz + dz;
                if (x < 0 || z < 0 || x >= g.nx || z >= g.nz) continue;
                if (!dil.at(x, z)) {
                    all = false;
                    break;
                }
            }
            ero.data[g.index(ix, iz)] = all ? 1 : 0;
        }
    return ero;
}

Mask segment_support(const AccumulatedMap& map, const SegmentationRule& rule) {
    Mask seed(map.grid);
    for (std::size_t i = 0; i < map.counts.size(); ++i) seed.data[i] = map.counts[i] >= rule.min_count && map.counts[i] > 0;
    return morphological_close(seed, rule.closing_radius);
}

LocalizationSet localize_frames(const FrameStack& frames, const MatchedFilter& mf,
                                const DetectorConfig& cfg) {
    std::vector<LocalizationSet> per(std::size_t(frames.nt()));
    parallel_for(std::size_t(frames.nt()), [&](std::size_t t) {
        const Image c = mf.correlate(frames.frame(int(t)));
        per[t] = detect(c, cfg, mf.autocorr_peak(), int(t));
    });
    LocalizationSet out;
    for (auto& p : per) out.insert(out.end(), p.begin(), p.end());
    return out;
}

LocalizationSet select_before(const LocalizationSet& locs, int t_end) {
    LocalizationSet out;
    for (const auto& l : locs)
        if (l.t_index < t_end) out.push_back(l);
    return out;
}

namespace {

FrameStack truncate_time(const FrameStack& frames, double max_time) {
    if (max_time <= 0) return frames;
    const int nt = std::clamp(int(std::ceil(max_time / frames.dt() - 1e-9)), 1, frames.nt());
    if (nt == frames.nt()) return frames;
    std::vector<double> d(frames.data().begin(), frames.data().begin() + std::ptrdiff_t(frames.frame_size() * nt));
    return FrameStack(frames.grid(), nt, frames.dt(), std::move(d));
}

PipelineResult finish(LocalizationSet locs, const FrameStack& frames, const PipelineConfig& cfg) {
    PipelineResult r;
    r.localizations = merge_duplicates(std::move(locs), cfg.detector.merge_radius);
    r.accumulated = accumulate(r.localizations, frames.grid().refined(cfg.fine_factor));
    r.velocity = velocity_map(r.localizations, frames.grid());
    return r;
}

}  // namespace

PipelineResult run_pipeline(const FrameStack& frames_in, const vfilter::FilterBankSpec& bank,
                            const psf::PsfModel& model, const PipelineConfig& cfg) {
    cfg.detector.validate();
    require(cfg.fine_factor >= 1, "pipeline: fine_factor must be >= 1");
    const FrameStack frames = truncate_time(frames_in, cfg.max_time);
    const MatchedFilter plain(model, frames.grid());
    std::optional<MatchedFilter> with_to;
    if (cfg.to) {
        psf::PsfModel tm = model;
        tm.mode = psf::Mode::To;
        tm.to = cfg.to;
        with_to.emplace(tm, frames.grid());
    }

    LocalizationSet all;
    std::vector<std::size_t> counts(bank.specs.size(), 0);
    vfilter::run_filter_bank(frames, bank, cfg.to, [&](std::size_t i, const vfilter::VelocityFilterSpec& s, FrameStack&& out) {
        const MatchedFilter& mf = (cfg.to && vfilter::uses_to(s, bank)) ? *with_to : plain;
        LocalizationSet locs;
        try {
            locs = localize_frames(out, mf, cfg.detector);
        } catch (const Error& e) {
            throw Error(e.kind(), std::string("localize stage: ") + e.what());
        }
        for (auto& l : locs) {
            l.tagged = true;
            l.vf_x = s.vx;
            l.vf_z = s.vz;
            l.member = int(i);
        }
        counts[i] = locs.size();
        all.insert(all.end(), locs.begin(), locs.end());
    });
    PipelineResult r = finish(std::move(all), frames, cfg);
    r.per_member_counts = std::move(counts);
    return r;
}

PipelineResult run_baseline(const FrameStack& frames_in, const psf::PsfModel& model,
                            const PipelineConfig& cfg) {
    cfg.detector.validate();
    const FrameStack frames = truncate_time(frames_in, cfg.max_time);
    const MatchedFilter mf(model, frames.grid());
    LocalizationSet locs = localize_frames(frames, mf, cfg.detector);
    PipelineResult r = finish(std::move(locs), frames, cfg);
    r.per_member_counts = {r.localizations.size()};
    return r;
}

}  // namespace velofilt::localize
