#include "velofilt/fft.hpp"

#include <fftw3.h>

#include <limits>
#include <map>
#include <mutex>
#include <tuple>

#include "velofilt/error.hpp"

namespace velofilt {

namespace {

struct PlanKey {
    std::vector<int> dims;
    int howmany;
    int sign;
    bool operator<(const PlanKey& o) const {
        return std::tie(dims, howmany, sign) < std::tie(o.dims, o.howmany, o.sign);
    }
};

class PlanCache {
public:
    ~PlanCache() {
        for (auto& [k, p] : plans_) fftw_destroy_plan(p);
    }

    fftw_plan get(const std::vector<int>& dims, int howmany, int sign) {
        std::lock_guard<std::mutex> lock(mu_);
        PlanKey key{dims, howmany, sign};
        if (auto it = plans_.find(key); it != plans_.end()) return it->second;

        std::size_t per = 1;
        for (int d : dims) per *= std::size_t(d);
        // FFTW_ESTIMATE never touches the buffer, and plans are executed with
        // fftw_execute_dft on caller arrays, so a scratch buffer suffices here.
        fftw_complex* scratch = fftw_alloc_complex(per * std::size_t(howmany));
        if (!scratch) fail(ErrorKind::NumericFailure, "fft: allocation failed");
        fftw_plan p = fftw_plan_many_dft(int(dims.size()), dims.data(), howmany, scratch,
                                         nullptr, 1, int(per), scratch, nullptr, 1, int(per),
                                         sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
        fftw_free(scratch);
        if (!p) fail(ErrorKind::NumericFailure, "fft: planning failed");
        plans_.emplace(std::move(key), p);
        return p;
    }

private:
    std::mutex mu_;
    std::map<PlanKey, fftw_plan> plans_;
};

PlanCache& cache() {
    static PlanCache c;
    return c;
}

void run(cplx* data, const std::vector<int>& dims, int howmany, FftDirection dir) {
    std::size_t per = 1;
    for (int d : dims) {
        require(d >= 1, "fft: dimensions must be >= 1");
        per *= std::size_t(d);
    }
    require(per * std::size_t(howmany) < std::size_t(std::numeric_limits<int>::max()),
            "fft: dimension overflow");
    if (per == 0 || howmany == 0) return;
    const int sign = dir == FftDirection::Forward ? FFTW_FORWARD : FFTW_BACKWARD;
    fftw_plan p = cache().get(dims, howmany, sign);
    auto* buf = reinterpret_cast<fftw_complex*>(data);
    fftw_execute_dft(p, buf, buf);
    if (dir == FftDirection::Inverse) {
        const double s = 1.0 / double(per);
        const std::size_t n = per * std::size_t(howmany);
        for (std::size_t i = 0; i < n; ++i) data[i] *= s;
    }
}

}  // namespace

void fft_inplace(cplx* data, const std::vector<int>& dims, FftDirection dir) {
    run(data, dims, 1, dir);
}

void fft2_batch(cplx* data, int nslices, int nz, int nx, FftDirection dir) {
    run(data, {nz, nx}, nslices, dir);
}

Spectrum3D fft3(const FrameStack& frames) {
    Spectrum3D s;
    s.grid = frames.grid();
    s.nt = frames.nt();
    s.dt = frames.dt();
    s.data.assign(frames.data().begin(), frames.data().end());
    fft_inplace(s.data.data(), {s.nt, s.grid.nz, s.grid.nx}, FftDirection::Forward);
    return s;
}

FrameStack ifft3(const Spectrum3D& spec) {
    std::vector<cplx> buf(spec.data);
    fft_inplace(buf.data(), {spec.nt, spec.grid.nz, spec.grid.nx}, FftDirection::Inverse);
    std::vector<double> out(buf.size());
    for (std::size_t i = 0; i < buf.size(); ++i) out[i] = buf[i].real();
    return FrameStack(spec.grid, spec.nt, spec.dt, std::move(out));
}

double parseval_energy(const FrameStack& frames) {
    double e = 0.0;
    for (double v : frames.data()) e += v * v;
    return e;
}

double parseval_energy(const Spectrum3D& spec) {
    double e = 0.0;
    for (const auto& c : spec.data) e += std::norm(c);
    return e / double(spec.data.size());
}

}  // namespace velofilt
