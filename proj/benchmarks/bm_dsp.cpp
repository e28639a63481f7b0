#include <benchmark/benchmark.h>

#include <cmath>
#include <numbers>

#include "pulseox/dsp.hpp"

namespace {

using pulseox::dsp::FilterKind;
using pulseox::dsp::FilterSpec;
using pulseox::dsp::RawSignal;

RawSignal test_signal(std::size_t n, double fs) {
  RawSignal s;
  s.fs = fs;
  s.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / fs;
    s.samples[i] = 1.0 + 0.03 * std::sin(2.0 * std::numbers::pi * 1.3 * t) +
                   0.01 * std::sin(2.0 * std::numbers::pi * 2.6 * t + 0.8);
  }
  return s;
}

void BM_DesignBandpass(benchmark::State& state) {
  const FilterSpec spec{0.5, 12.0, 4, FilterKind::BandPass};
  for (auto _ : state) {
    benchmark::DoNotOptimize(pulseox::dsp::design_bandpass(spec, 86.0));
  }
}
BENCHMARK(BM_DesignBandpass);

void BM_Filtfilt(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const RawSignal x = test_signal(n, 86.0);
  const auto coeffs = pulseox::dsp::design_bandpass(
      {0.5, 12.0, 4, FilterKind::BandPass}, 86.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(pulseox::dsp::filtfilt(coeffs, x));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(n));
}
BENCHMARK(BM_Filtfilt)->Range(1 << 10, 1 << 16);

void BM_FourierResample(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const RawSignal x = test_signal(n, 86.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(pulseox::dsp::fourier_resample(x, 25.0));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(n));
}
BENCHMARK(BM_FourierResample)->Range(1 << 10, 1 << 16);

void BM_MovingAverage(benchmark::State& state) {
  const RawSignal x = test_signal(4096, 25.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(pulseox::dsp::moving_average(x.samples, 5));
  }
}
BENCHMARK(BM_MovingAverage);

}  // namespace

BENCHMARK_MAIN();
