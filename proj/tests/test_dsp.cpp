#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "pulseox/dsp.hpp"
#include "pulseox/rng.hpp"

using namespace pulseox;
using dsp::FilterKind;
using dsp::FilterSpec;
using dsp::RawSignal;

namespace {

RawSignal make_sine(double freq, double fs, double duration_s,
                    double amplitude = 1.0, double offset = 0.0) {
  RawSignal s;
  s.fs = fs;
  const auto n = static_cast<std::size_t>(std::llround(duration_s * fs));
  s.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / fs;
    s.samples[i] = offset + amplitude * std::sin(2.0 * std::numbers::pi *
                                                 freq * t);
  }
  return s;
}

// Peak amplitude over the interior (skips edge_s seconds at each end).
double interior_peak(const std::vector<double>& x, double fs, double edge_s) {
  const auto edge = static_cast<std::size_t>(edge_s * fs);
  double peak = 0.0;
  for (std::size_t i = edge; i + edge < x.size(); ++i) {
    peak = std::max(peak, std::abs(x[i]));
  }
  return peak;
}

double interior_rms_error(const std::vector<double>& a,
                          const std::vector<double>& b, double fs,
                          double edge_s) {
  const auto edge = static_cast<std::size_t>(edge_s * fs);
  double s = 0.0;
  std::size_t n = 0;
  for (std::size_t i = edge; i + edge < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
    ++n;
  }
  return std::sqrt(s / static_cast<double>(n));
}

}  // namespace

TEST_CASE("bandpass design: passband and stopband via sine probes") {
  const FilterSpec spec{0.5, 12.0, 4, FilterKind::BandPass};
  const auto coeffs = dsp::design_bandpass(spec, 25.0);

  // 3 Hz probe passes within 1 dB (single forward pass, steady state).
  {
    const RawSignal probe = make_sine(3.0, 25.0, 60.0);
    const auto filtered = dsp::sosfilt(coeffs, probe.samples);
    const double amp = interior_peak(filtered, 25.0, 20.0);
    CHECK(amp == doctest::Approx(1.0).epsilon(0.12));  // 1 dB ~ 12%
    CHECK(20.0 * std::log10(amp) > -1.0);
    CHECK(20.0 * std::log10(amp) < 1.0);
  }
  // 0.05 Hz probe attenuated by at least 20 dB.
  {
    const RawSignal probe = make_sine(0.05, 25.0, 200.0);
    const auto filtered = dsp::sosfilt(coeffs, probe.samples);
    const double amp = interior_peak(filtered, 25.0, 60.0);
    CHECK(20.0 * std::log10(amp) < -20.0);
  }
}

TEST_CASE("bandpass design: degenerate and invalid bands") {
  CHECK_THROWS_AS(
      dsp::design_bandpass({5.0, 5.0, 4, FilterKind::BandPass}, 25.0),
      InvalidSpecError);
  CHECK_THROWS_AS(
      dsp::design_bandpass({0.5, 13.0, 4, FilterKind::BandPass}, 25.0),
      InvalidSpecError);
  CHECK_THROWS_AS(
      dsp::design_bandpass({0.0, 12.0, 4, FilterKind::BandPass}, 25.0),
      InvalidSpecError);
  CHECK_THROWS_AS(
      dsp::design_bandpass({0.5, 12.0, 0, FilterKind::BandPass}, 25.0),
      InvalidSpecError);
}

TEST_CASE("designed filters are stable across bands and rates") {
  for (double fs : {25.0, 86.0, 100.0}) {
    for (int order : {2, 4, 6}) {
      const auto bp =
          dsp::design_bandpass({0.5, 12.0, order, FilterKind::BandPass}, fs);
      CHECK(dsp::max_pole_magnitude(bp) < 1.0);
      const auto lp = dsp::design_lowpass(0.5, order, fs);
      CHECK(dsp::max_pole_magnitude(lp) < 1.0);
    }
  }
}

TEST_CASE("filtfilt: zero signal stays zero") {
  const auto coeffs =
      dsp::design_bandpass({0.5, 12.0, 4, FilterKind::BandPass}, 25.0);
  RawSignal zero;
  zero.fs = 25.0;
  zero.samples.assign(500, 0.0);
  const RawSignal out = dsp::filtfilt(coeffs, zero);
  for (double v : out.samples) CHECK(v == 0.0);
}

TEST_CASE("filtfilt: passband sine passes with zero lag") {
  const auto coeffs =
      dsp::design_bandpass({0.5, 12.0, 4, FilterKind::BandPass}, 25.0);
  const RawSignal probe = make_sine(3.0, 25.0, 20.0);
  const RawSignal out = dsp::filtfilt(coeffs, probe);

  // Amplitude error < 0.12 on the interior.
  const auto edge = static_cast<std::size_t>(2.0 * 25.0);
  double max_err = 0.0;
  for (std::size_t i = edge; i + edge < out.samples.size(); ++i) {
    max_err = std::max(max_err, std::abs(out.samples[i] - probe.samples[i]));
  }
  CHECK(max_err < 0.12);

  // Cross-correlation peak at zero lag.
  const int max_lag = 8;
  double best = -1e300;
  int best_lag = -100;
  for (int lag = -max_lag; lag <= max_lag; ++lag) {
    double acc = 0.0;
    for (std::size_t i = edge; i + edge < probe.samples.size(); ++i) {
      const auto j = static_cast<std::ptrdiff_t>(i) + lag;
      acc += probe.samples[i] *
             out.samples[static_cast<std::size_t>(j)];
    }
    if (acc > best) {
      best = acc;
      best_lag = lag;
    }
  }
  CHECK(best_lag == 0);
}

TEST_CASE("filtfilt: constant input is suppressed by the band-pass") {
  const auto coeffs =
      dsp::design_bandpass({0.5, 12.0, 4, FilterKind::BandPass}, 25.0);
  RawSignal c;
  c.fs = 25.0;
  c.samples.assign(1000, 5.0);
  const RawSignal out = dsp::filtfilt(coeffs, c);
  CHECK(interior_peak(out.samples, 25.0, 5.0) < 0.01 * 5.0);
}

TEST_CASE("filtfilt: too-short input") {
  const auto coeffs =
      dsp::design_bandpass({0.5, 12.0, 4, FilterKind::BandPass}, 25.0);
  RawSignal shorty;
  shorty.fs = 25.0;
  shorty.samples.assign(static_cast<std::size_t>(coeffs.pad_len()), 1.0);
  CHECK_THROWS_AS(dsp::filtfilt(coeffs, shorty), InsufficientDataError);
}

TEST_CASE("decompose_ac_dc: constructed baseline plus tone") {
  const FilterSpec band{0.5, 12.0, 4, FilterKind::BandPass};
  RawSignal x = make_sine(1.2, 25.0, 40.0, 1.0, 100.0);
  const dsp::AcDc parts = dsp::decompose_ac_dc(x, band);

  const RawSignal tone = make_sine(1.2, 25.0, 40.0, 1.0, 0.0);
  const auto edge = static_cast<std::size_t>(4.0 * 25.0);
  double dc_err = 0.0;
  for (std::size_t i = edge; i + edge < x.samples.size(); ++i) {
    dc_err = std::max(dc_err, std::abs(parts.dc.samples[i] - 100.0));
  }
  CHECK(dc_err < 1.0);
  CHECK(interior_rms_error(parts.ac.samples, tone.samples, 25.0, 4.0) < 0.05);
}

TEST_CASE("decompose_ac_dc: constant input") {
  const FilterSpec band{0.5, 12.0, 4, FilterKind::BandPass};
  RawSignal x;
  x.fs = 25.0;
  x.samples.assign(1000, 42.0);
  const dsp::AcDc parts = dsp::decompose_ac_dc(x, band);
  CHECK(interior_peak(parts.ac.samples, 25.0, 5.0) < 0.01 * 42.0);
  for (std::size_t i = 100; i + 100 < parts.dc.samples.size(); ++i) {
    CHECK(parts.dc.samples[i] == doctest::Approx(42.0).epsilon(0.01));
  }
}

TEST_CASE("decompose_ac_dc: out-of-band tone lands in neither component") {
  const FilterSpec band{0.5, 12.0, 4, FilterKind::BandPass};
  const RawSignal x = make_sine(20.0, 86.0, 30.0);
  const dsp::AcDc parts = dsp::decompose_ac_dc(x, band);
  double rms_in = 0.0, rms_ac = 0.0, rms_dc = 0.0;
  const auto edge = static_cast<std::size_t>(3.0 * 86.0);
  std::size_t n = 0;
  for (std::size_t i = edge; i + edge < x.samples.size(); ++i) {
    rms_in += x.samples[i] * x.samples[i];
    rms_ac += parts.ac.samples[i] * parts.ac.samples[i];
    rms_dc += parts.dc.samples[i] * parts.dc.samples[i];
    ++n;
  }
  rms_in = std::sqrt(rms_in / n);
  rms_ac = std::sqrt(rms_ac / n);
  rms_dc = std::sqrt(rms_dc / n);
  CHECK(rms_ac < 0.05 * rms_in);
  CHECK(rms_dc < 0.05 * rms_in);
}

TEST_CASE("normalize_ratio basics") {
  RawSignal ac, dc;
  ac.fs = dc.fs = 25.0;

  SUBCASE("zero ac gives zeros") {
    ac.samples.assign(10, 0.0);
    dc.samples.assign(10, 3.0);
    const auto r = dsp::normalize_ratio(ac, dc);
    for (double v : r.signal.samples) CHECK(v == 0.0);
    CHECK(r.degenerate_count == 0);
  }
  SUBCASE("elementwise division") {
    ac.samples = {1.0, 2.0};
    dc.samples = {2.0, 4.0};
    const auto r = dsp::normalize_ratio(ac, dc);
    CHECK(r.signal.samples[0] == doctest::Approx(0.5));
    CHECK(r.signal.samples[1] == doctest::Approx(0.5));
  }
  SUBCASE("zero dc sample is zeroed and counted") {
    ac.samples = {1.0, 1.0, 1.0};
    dc.samples = {2.0, 0.0, 2.0};
    const auto r = dsp::normalize_ratio(ac, dc);
    CHECK(r.signal.samples[1] == 0.0);
    CHECK(r.degenerate_count == 1);
  }
  SUBCASE("length mismatch") {
    ac.samples.assign(5, 1.0);
    dc.samples.assign(6, 1.0);
    CHECK_THROWS_AS(dsp::normalize_ratio(ac, dc), ShapeError);
  }
}

TEST_CASE("normalize_ratio is scale invariant") {
  Rng rng(11);
  RawSignal ac, dc;
  ac.fs = dc.fs = 25.0;
  for (int i = 0; i < 200; ++i) {
    ac.samples.push_back(rng.uniform(-1.0, 1.0));
    dc.samples.push_back(rng.uniform(0.5, 2.0));
  }
  const auto base = dsp::normalize_ratio(ac, dc);
  for (double k : {3.0, -0.25, 1e6}) {
    RawSignal ac2 = ac, dc2 = dc;
    for (auto& v : ac2.samples) v *= k;
    for (auto& v : dc2.samples) v *= k;
    const auto scaled = dsp::normalize_ratio(ac2, dc2);
    for (std::size_t i = 0; i < base.signal.samples.size(); ++i) {
      CHECK(scaled.signal.samples[i] ==
            doctest::Approx(base.signal.samples[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("fourier_resample: identity at equal rates") {
  Rng rng(5);
  RawSignal x;
  x.fs = 86.0;
  for (int i = 0; i < 860; ++i) x.samples.push_back(rng.uniform(-1.0, 1.0));
  const RawSignal y = dsp::fourier_resample(x, 86.0);
  REQUIRE(y.samples.size() == x.samples.size());
  double rms = 0.0;
  for (std::size_t i = 0; i < x.samples.size(); ++i) {
    const double d = y.samples[i] - x.samples[i];
    rms += d * d;
  }
  CHECK(std::sqrt(rms / x.samples.size()) < 1e-9);
}

TEST_CASE("fourier_resample: constant stays constant") {
  RawSignal x;
  x.fs = 86.0;
  x.samples.assign(860, 7.25);
  const RawSignal y = dsp::fourier_resample(x, 25.0);
  REQUIRE(y.samples.size() ==
          static_cast<std::size_t>(std::llround(860.0 * 25.0 / 86.0)));
  for (double v : y.samples) CHECK(std::abs(v - 7.25) < 1e-9);
}

TEST_CASE("fourier_resample: 1 Hz sine from 86 to 25 Hz") {
  const RawSignal x = make_sine(1.0, 86.0, 10.0);
  const RawSignal y = dsp::fourier_resample(x, 25.0);
  CHECK(y.fs == 25.0);
  const RawSignal want = make_sine(1.0, 25.0, 10.0);
  REQUIRE(y.samples.size() == want.samples.size());
  CHECK(interior_rms_error(y.samples, want.samples, 25.0, 0.5) < 1e-6);
}

TEST_CASE("fourier_resample: band-limited energy is preserved") {
  Rng rng(17);
  for (int trial = 0; trial < 5; ++trial) {
    RawSignal x;
    x.fs = 86.0;
    const std::size_t n = 860;
    x.samples.assign(n, 0.0);
    for (int tone = 0; tone < 4; ++tone) {
      const double f = rng.uniform(0.5, 10.0);
      const double a = rng.uniform(0.2, 1.0);
      const double ph = rng.uniform(0.0, 2.0 * std::numbers::pi);
      for (std::size_t i = 0; i < n; ++i) {
        x.samples[i] += a * std::sin(2.0 * std::numbers::pi * f * i / x.fs +
                                     ph);
      }
    }
    const RawSignal y = dsp::fourier_resample(x, 25.0);
    auto rms_of = [](const std::vector<double>& v, std::size_t edge) {
      double s = 0.0;
      std::size_t n2 = 0;
      for (std::size_t i = edge; i + edge < v.size(); ++i) {
        s += v[i] * v[i];
        ++n2;
      }
      return std::sqrt(s / static_cast<double>(n2));
    };
    const double rin = rms_of(x.samples, 86);
    const double rout = rms_of(y.samples, 25);
    CHECK(rout == doctest::Approx(rin).epsilon(0.01));
  }
}

TEST_CASE("fourier_resample: invalid target rate") {
  RawSignal x;
  x.fs = 86.0;
  x.samples.assign(100, 1.0);
  CHECK_THROWS_AS(dsp::fourier_resample(x, 0.0), InvalidSpecError);
  CHECK_THROWS_AS(dsp::fourier_resample(x, -25.0), InvalidSpecError);
}

TEST_CASE("moving_average") {
  SUBCASE("constant is a fixed point") {
    const std::vector<double> y(20, 4.0);
    const auto out = dsp::moving_average(y, 5);
    for (double v : out) CHECK(v == doctest::Approx(4.0));
  }
  SUBCASE("prefix means") {
    const std::vector<double> y = {90, 92, 94, 96, 98};
    const auto out = dsp::moving_average(y, 5);
    const std::vector<double> want = {90, 91, 92, 93, 94};
    for (std::size_t i = 0; i < y.size(); ++i) {
      CHECK(out[i] == doctest::Approx(want[i]));
    }
  }
  SUBCASE("single element") {
    const std::vector<double> y = {97.0};
    const auto out = dsp::moving_average(y, 5);
    REQUIRE(out.size() == 1);
    CHECK(out[0] == doctest::Approx(97.0));
  }
  SUBCASE("zero window is invalid") {
    const std::vector<double> y = {1.0};
    CHECK_THROWS_AS(dsp::moving_average(y, 0), InvalidSpecError);
  }
  SUBCASE("bounded by input range") {
    Rng rng(3);
    std::vector<double> y;
    for (int i = 0; i < 100; ++i) y.push_back(rng.uniform(70.0, 100.0));
    const auto out = dsp::moving_average(y, 5);
    const double lo = *std::min_element(y.begin(), y.end());
    const double hi = *std::max_element(y.begin(), y.end());
    for (double v : out) {
      CHECK(v >= lo);
      CHECK(v <= hi);
    }
  }
}
