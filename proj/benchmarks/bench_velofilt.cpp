#include <benchmark/benchmark.h>

#include <cmath>
#include <numbers>
#include <random>

#include "velofilt/localize.hpp"
#include "velofilt/phantom.hpp"
#include "velofilt/theory.hpp"
#include "velofilt/vfilter.hpp"

using namespace velofilt;

namespace {

constexpr double pi = std::numbers::pi;

const psf::PsfModel kModel{{0.3, 0.3}, psf::Mode::Pre, std::nullopt};

FrameStack noise_stack(int n, int nt) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> d(0, 1);
    FrameStack fs(make_grid(n, n, 0.03, 0.03, true), nt, 0.01);
    for (double& v : fs.data()) v = d(rng);
    return fs;
}

void BM_FilterFft(benchmark::State& st) {
    const FrameStack fs = noise_stack(int(st.range(0)), int(st.range(1)));
    for (auto _ : st) benchmark::DoNotOptimize(vfilter::apply_filter_fft(fs, {1.0, 0.5, 0.1}));
    st.SetItemsProcessed(st.iterations() * std::int64_t(fs.size()));
}
BENCHMARK(BM_FilterFft)->Args({64, 128})->Args({64, 512})->Args({128, 256})->Unit(benchmark::kMillisecond);

void BM_FilterDirect(benchmark::State& st) {
    const FrameStack fs = noise_stack(int(st.range(0)), int(st.range(1)));
    for (auto _ : st) benchmark::DoNotOptimize(vfilter::apply_filter_direct(fs, {1.0, 0.5, 0.1}));
    st.SetItemsProcessed(st.iterations() * std::int64_t(fs.size()));
}
BENCHMARK(BM_FilterDirect)->Args({64, 128})->Unit(benchmark::kMillisecond);

void BM_FilterBankMember(benchmark::State& st) {
    const FrameStack fs = noise_stack(64, 400);
    vfilter::FilterEngine eng(fs, vfilter::padded_length(400, {0, 0, 0.5}, 0.01));
    for (auto _ : st) benchmark::DoNotOptimize(eng.apply({2.0, -2.0, 0.5}));
}
BENCHMARK(BM_FilterBankMember)->Unit(benchmark::kMillisecond);

void BM_MatchedFilterFrame(benchmark::State& st) {
    const FrameStack fs = noise_stack(int(st.range(0)), 1);
    const localize::MatchedFilter mf(kModel, fs.grid());
    for (auto _ : st) benchmark::DoNotOptimize(mf.correlate(fs.frame(0)));
}
BENCHMARK(BM_MatchedFilterFrame)->Arg(64)->Arg(128)->Unit(benchmark::kMicrosecond);

void BM_LocalizeFrames(benchmark::State& st) {
    const Grid2D g = make_grid(64, 64, 0.03, 0.03, true);
    phantom::VesselSpec v;
    v.radius = 0.15;
    v.v0 = 5;
    v.c_mb = 2500;
    v.axis_angle = pi / 4;
    v.length = phantom::default_length(g, v, 0.3);
    std::mt19937_64 rng(2);
    auto bs = phantom::sample_bubbles(v, rng);
    for (auto& b : bs) b.vessel = 0;
    const FrameStack fs = phantom::synthesize_frames(bs, {}, {v}, kModel, g, 50, 0.01).frames;
    const localize::MatchedFilter mf(kModel, g);
    const auto det = localize::default_detector(kModel.params);
    for (auto _ : st) benchmark::DoNotOptimize(localize::localize_frames(fs, mf, det));
    st.SetItemsProcessed(st.iterations() * 50);
}
BENCHMARK(BM_LocalizeFrames)->Unit(benchmark::kMillisecond);

void BM_Synthesize(benchmark::State& st) {
    const Grid2D g = make_grid(64, 64, 0.03, 0.03, true);
    phantom::VesselSpec v;
    v.radius = 0.6;
    v.v0 = 5;
    v.c_mb = double(st.range(0));
    v.axis_angle = -pi / 4;
    v.length = phantom::default_length(g, v, 0.3);
    std::mt19937_64 rng(3);
    auto bs = phantom::sample_bubbles(v, rng);
    for (auto& b : bs) b.vessel = 0;
    for (auto _ : st) benchmark::DoNotOptimize(phantom::synthesize_frames(bs, {}, {v}, kModel, g, 50, 0.01));
    st.counters["bubbles"] = double(bs.size());
}
BENCHMARK(BM_Synthesize)->Arg(50)->Arg(225)->Unit(benchmark::kMillisecond);

void BM_VelocityBandwidth(benchmark::State& st) {
    double theta = 0;
    for (auto _ : st) {
        benchmark::DoNotOptimize(theory::velocity_bandwidth(kModel.params, 0.5, theta, theory::BandMode::Pre));
        theta = std::fmod(theta + 0.01, pi / 2);
    }
}
BENCHMARK(BM_VelocityBandwidth);

void BM_QPre(benchmark::State& st) {
    double x = 0;
    for (auto _ : st) {
        benchmark::DoNotOptimize(theory::q_pre({x, 0.1}, {0.7, 0.4}, kModel.params, 0.5));
        x = x > 0.5 ? -0.5 : x + 0.001;
    }
}
BENCHMARK(BM_QPre);

}  // namespace

BENCHMARK_MAIN();
