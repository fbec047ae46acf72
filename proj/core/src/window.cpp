#include "velofilt/window.hpp"

#include <cmath>

#include "velofilt/error.hpp"

namespace velofilt {

SampledWindow gaussian_window(double sigma_t, double dt, double trunc_sigmas) {
    require(sigma_t > 0 && std::isfinite(sigma_t), "window: sigma_t must be positive");
    require(dt > 0 && std::isfinite(dt), "window: dt must be positive");
    require(trunc_sigmas >= 3, "window: truncation must be >= 3 sigma");

    SampledWindow w;
    w.sigma_t = sigma_t;
    w.dt = dt;
    w.half_width = int(std::ceil(trunc_sigmas * sigma_t / dt - 1e-9));
    w.weights.resize(std::size_t(w.length()));
    double sum = 0.0;
    for (int n = -w.half_width; n <= w.half_width; ++n) {
        const double t = n * dt;
        const double v = std::exp(-t * t / (2 * sigma_t * sigma_t));
        w.weights[std::size_t(n + w.half_width)] = v;
        sum += v;
    }
    // Mirror to make the symmetry exact, then normalize so sum(w)*dt = 1.
    const double scale = 1.0 / (sum * dt);
    for (int n = 0; n <= w.half_width; ++n) {
        const double v = w.weights[std::size_t(w.half_width + n)] * scale;
        w.weights[std::size_t(w.half_width + n)] = v;
        w.weights[std::size_t(w.half_width - n)] = v;
    }
    return w;
}

}  // namespace velofilt
