#pragma once

#include <optional>
#include <vector>

#include "velofilt/fft.hpp"
#include "velofilt/grid.hpp"
#include "velofilt/psf.hpp"
#include "velofilt/vfilter.hpp"

namespace velofilt::localize {

struct Localization {
    int t_index = 0;
    double x = 0.0;  // mm
    double z = 0.0;
    double score = 0.0;  // correlation / template autocorrelation peak
    bool tagged = false;
    double vf_x = 0.0;  // selecting v_f, mm/s
    double vf_z = 0.0;
    int member = -1;

    double tag_speed() const;
};

using LocalizationSet = std::vector<Localization>;

struct DetectorConfig {
    double threshold_fraction = 0.5;
    double min_separation = 0.375;  // mm, 1.25 lambda at the default sigma_r = lambda = 0.3
    bool subpixel = true;
    double merge_radius = 0.075;   // mm, lambda/4
    void validate() const;
};

// Suppression radius grows past the carrier sidelobes that exceed the threshold.
DetectorConfig default_detector(const psf::PsfParams& p, double threshold_fraction = 0.5);

// Cross-correlation with a PSF template by FFT. Frame borders are zero padded.
class MatchedFilter {
public:
    MatchedFilter(const psf::PsfModel& model, const Grid2D& frame_grid);

    double autocorr_peak() const { return autocorr_peak_; }
    const Image& template_image() const { return tmpl_; }

    Image correlate(std::span<const double> frame) const;
    Image correlate(const Image& frame) const { return correlate(std::span<const double>(frame.data)); }

private:
    Grid2D grid_;
    Image tmpl_;
    int hx_ = 0, hz_ = 0;
    int px_ = 0, pz_ = 0;  // padded FFT size
    std::vector<cplx> tspec_;
    double autocorr_peak_ = 0.0;
};

Image matched_filter_map(const Image& frame, const psf::PsfModel& model);

std::vector<Localization> detect(const Image& corr, const DetectorConfig& cfg, double autocorr_peak,
                                 int t_index = 0);

// Keeps the highest score among detections of the same frame closer than radius.
LocalizationSet merge_duplicates(LocalizationSet locs, double radius);

struct AccumulatedMap {
    Grid2D grid;
    std::vector<double> counts;
    double total = 0.0;

    Image image() const;
};

AccumulatedMap accumulate(const LocalizationSet& locs, const Grid2D& fine_grid);

// Max-speed rule: each pixel keeps the fastest tag among its localizations.
VelocityMap velocity_map(const LocalizationSet& locs, const Grid2D& grid);

struct SegmentationRule {
    double min_count = 1.0;  // pixels with counts >= min_count seed the mask
    int closing_radius = 2;  // disk radius in pixels
};

Mask segment_support(const AccumulatedMap& map, const SegmentationRule& rule = {});
Mask morphological_close(const Mask& m, int radius);

struct PipelineConfig {
    DetectorConfig detector;
    int fine_factor = 4;
    std::optional<psf::ToParams> to;
    double max_time = -1.0;  // only use frames with t*dt < max_time when positive
};

struct PipelineResult {
    LocalizationSet localizations;
    AccumulatedMap accumulated;
    VelocityMap velocity;
    std::vector<std::size_t> per_member_counts;
};

// Filter bank -> matched filter -> detect -> tag -> merge -> accumulate.
PipelineResult run_pipeline(const FrameStack& frames, const vfilter::FilterBankSpec& bank,
                            const psf::PsfModel& model, const PipelineConfig& cfg);

// Same localization chain on the unfiltered frames.
PipelineResult run_baseline(const FrameStack& frames, const psf::PsfModel& model,
                            const PipelineConfig& cfg);

LocalizationSet localize_frames(const FrameStack& frames, const MatchedFilter& mf,
                                const DetectorConfig& cfg);

LocalizationSet select_before(const LocalizationSet& locs, int t_end);

}  // namespace velofilt::localize
