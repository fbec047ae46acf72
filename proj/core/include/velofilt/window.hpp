#pragma once

#include <vector>

namespace velofilt {

// Symmetric sampled window w[n], n = -half_width..half_width, with sum(w)*dt = 1.
struct SampledWindow {
    double sigma_t = 0.0;
    double dt = 0.0;
    int half_width = 0;
    std::vector<double> weights;  // size 2*half_width+1, weights[half_width] is n=0

    double at(int n) const { return weights[std::size_t(n + half_width)]; }
    int length() const { return 2 * half_width + 1; }
};

SampledWindow gaussian_window(double sigma_t, double dt, double trunc_sigmas = 4.0);

}  // namespace velofilt
