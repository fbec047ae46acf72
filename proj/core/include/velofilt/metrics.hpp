#pragma once

#include <vector>

#include "velofilt/grid.hpp"

namespace velofilt::metrics {

struct Point {
    double x = 0.0;
    double z = 0.0;
};

struct LeParams {
    double sigma_par = 0.09;    // mm
    double sigma_perp = 0.045;  // mm
    double theta = 0.0;         // rad, flow direction; the kernel is stretched along it
    double n_bubbles_T = 1.0;
    void validate() const;
    // A = Sigma^(-1/2) R, with R mapping the flow direction onto the first axis.
    void a_matrix(double a[2][2]) const;
};

LeParams default_le_params(double lambda, double theta, double n_bubbles);

// ||A d||^2
double le_first_order(const LeParams& le, double dx, double dz);

double localization_error(const std::vector<Point>& truth, const std::vector<Point>& est,
                          const LeParams& le, const Grid2D& eval_grid);

double iou(const Mask& truth, const Mask& est);

struct FveOptions {
    bool speed_only = false;
    double fastest_fraction = 0.0;  // > 0 restricts to the fastest truth pixels
};

double fve(const VelocityMap& truth, const VelocityMap& est, const FveOptions& opts = {});

struct AttenuationMeasurement {
    double ratio = 0.0;
    bool infinite = false;
    int frames_used = 0;
};

// max|before| / max|after| in a disk around the bubble, averaged over frames
// [t0, t1). The disk center follows pos + vel * t * dt.
AttenuationMeasurement measure_attenuation(const FrameStack& before, const FrameStack& after,
                                           double px, double pz, double radius, int t0, int t1,
                                           double vx = 0.0, double vz = 0.0);

double window_peak(const FrameStack& frames, int t, double px, double pz, double radius);

}  // namespace velofilt::metrics
