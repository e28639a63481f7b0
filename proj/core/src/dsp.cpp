#include "pulseox/dsp.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>
#include <string>

namespace pulseox::dsp {

namespace {

using cplx = std::complex<double>;

constexpr double kPairTol = 1e-9;

// Butterworth prototype poles on the unit circle, left half plane.
std::vector<cplx> prototype_poles(int order) {
  std::vector<cplx> poles;
  poles.reserve(order);
  for (int k = 0; k < order; ++k) {
    const double theta =
        std::numbers::pi * (2.0 * k + order + 1.0) / (2.0 * order);
    poles.emplace_back(std::cos(theta), std::sin(theta));
  }
  return poles;
}

double prewarp(double f_hz, double fs) {
  return 2.0 * fs * std::tan(std::numbers::pi * f_hz / fs);
}

cplx bilinear(cplx s, double fs) { return (2.0 * fs + s) / (2.0 * fs - s); }

// Groups z-plane poles into biquad denominators. Conjugate pairs are taken
// directly; leftover real poles are paired among themselves, with a single
// remaining real pole becoming a first-order section (a2 == 0).
std::vector<Biquad> pair_poles(const std::vector<cplx>& zpoles) {
  std::vector<Biquad> sections;
  std::vector<double> reals;
  for (const cplx& p : zpoles) {
    if (p.imag() > kPairTol) {
      sections.push_back({1.0, 0.0, 0.0, -2.0 * p.real(), std::norm(p)});
    } else if (std::abs(p.imag()) <= kPairTol) {
      reals.push_back(p.real());
    }
    // Poles with imag < -tol are the conjugates of those already taken.
  }
  std::sort(reals.begin(), reals.end());
  std::size_t i = 0;
  for (; i + 1 < reals.size(); i += 2) {
    sections.push_back(
        {1.0, 0.0, 0.0, -(reals[i] + reals[i + 1]), reals[i] * reals[i + 1]});
  }
  if (i < reals.size()) {
    sections.push_back({1.0, 0.0, 0.0, -reals[i], 0.0});
  }
  return sections;
}

// Distributes zeros pinned at z = +1 (n_plus of them) and z = -1 (n_minus)
// over the section numerators.
void assign_zeros(std::vector<Biquad>& sections, int n_plus, int n_minus) {
  for (Biquad& s : sections) {
    const int capacity = s.a2 == 0.0 ? 1 : 2;  // first-order section holds one zero
    if (capacity == 2 && n_plus > 0 && n_minus > 0) {
      s.b0 = 1.0;
      s.b1 = 0.0;
      s.b2 = -1.0;  // (z-1)(z+1)
      --n_plus;
      --n_minus;
    } else if (capacity == 2 && n_minus >= 2) {
      s.b0 = 1.0;
      s.b1 = 2.0;
      s.b2 = 1.0;  // (z+1)^2
      n_minus -= 2;
    } else if (capacity == 2 && n_plus >= 2) {
      s.b0 = 1.0;
      s.b1 = -2.0;
      s.b2 = 1.0;  // (z-1)^2
      n_plus -= 2;
    } else if (n_minus > 0) {
      s.b0 = 1.0;
      s.b1 = 1.0;
      s.b2 = 0.0;
      --n_minus;
    } else if (n_plus > 0) {
      s.b0 = 1.0;
      s.b1 = -1.0;
      s.b2 = 0.0;
      --n_plus;
    } else {
      s.b0 = 1.0;
      s.b1 = 0.0;
      s.b2 = 0.0;
    }
  }
}

cplx section_response(const Biquad& s, double theta) {
  const cplx z1 = std::polar(1.0, -theta);
  const cplx z2 = z1 * z1;
  return (s.b0 + s.b1 * z1 + s.b2 * z2) / (1.0 + s.a1 * z1 + s.a2 * z2);
}

void normalize_gain(std::vector<Biquad>& sections, double theta_ref) {
  cplx h{1.0, 0.0};
  for (const Biquad& s : sections) h *= section_response(s, theta_ref);
  const double mag = std::abs(h);
  if (!(mag > 0.0) || !std::isfinite(mag)) {
    throw NumericError("filter gain normalization failed");
  }
  const double g = std::pow(1.0 / mag, 1.0 / sections.size());
  for (Biquad& s : sections) {
    s.b0 *= g;
    s.b1 *= g;
    s.b2 *= g;
  }
}

void check_stable(const FilterCoefficients& coeffs) {
  if (max_pole_magnitude(coeffs) >= 1.0) {
    throw NumericError("designed filter is unstable");
  }
}

// Steady-state DF2T section state for a unit-step input.
struct SectionZi {
  double z1, z2;
  double dc_gain;
};

SectionZi steady_state(const Biquad& s) {
  const double denom = 1.0 + s.a1 + s.a2;
  const double g = (s.b0 + s.b1 + s.b2) / denom;
  return {g - s.b0, s.b2 - s.a2 * g, g};
}

// DF2T cascade with optional steady-state initial conditions scaled to x0.
void sosfilt_inplace(const FilterCoefficients& coeffs, std::vector<double>& x,
                     bool steady_init) {
  double level = steady_init && !x.empty() ? x.front() : 0.0;
  for (const Biquad& s : coeffs.sections) {
    double z1 = 0.0, z2 = 0.0;
    if (steady_init) {
      const SectionZi zi = steady_state(s);
      z1 = zi.z1 * level;
      z2 = zi.z2 * level;
      level *= zi.dc_gain;
    }
    for (double& v : x) {
      const double xn = v;
      const double yn = s.b0 * xn + z1;
      z1 = s.b1 * xn - s.a1 * yn + z2;
      z2 = s.b2 * xn - s.a2 * yn;
      v = yn;
    }
  }
}

std::mutex& fftw_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

double max_pole_magnitude(const FilterCoefficients& coeffs) {
  double worst = 0.0;
  for (const Biquad& s : coeffs.sections) {
    // Roots of z^2 + a1 z + a2.
    const cplx disc = std::sqrt(cplx(s.a1 * s.a1 - 4.0 * s.a2, 0.0));
    const cplx r1 = (-s.a1 + disc) / 2.0;
    const cplx r2 = (-s.a1 - disc) / 2.0;
    worst = std::max({worst, std::abs(r1), std::abs(r2)});
  }
  return worst;
}

FilterCoefficients design_bandpass(const FilterSpec& spec, double fs) {
  if (!(fs > 0.0)) throw InvalidSpecError("sampling rate must be positive");
  if (spec.order < 1) throw InvalidSpecError("filter order must be >= 1");
  if (!(spec.low_hz > 0.0) || !(spec.low_hz < spec.high_hz) ||
      !(spec.high_hz < fs / 2.0)) {
    throw InvalidSpecError("band edges must satisfy 0 < low < high < fs/2");
  }

  const double w1 = prewarp(spec.low_hz, fs);
  const double w2 = prewarp(spec.high_hz, fs);
  const double bw = w2 - w1;
  const double w0 = std::sqrt(w1 * w2);

  // Low-pass prototype -> band-pass: each prototype pole p yields the two
  // roots of s^2 - (bw*p) s + w0^2.
  std::vector<cplx> zpoles;
  for (const cplx& p : prototype_poles(spec.order)) {
    const cplx bp = bw * p;
    const cplx disc = std::sqrt(bp * bp - 4.0 * w0 * w0);
    zpoles.push_back(bilinear((bp + disc) / 2.0, fs));
    zpoles.push_back(bilinear((bp - disc) / 2.0, fs));
  }

  FilterCoefficients coeffs;
  coeffs.sections = pair_poles(zpoles);
  coeffs.n_poles = 2 * spec.order;
  assign_zeros(coeffs.sections, spec.order, spec.order);

  const double f_center = std::sqrt(spec.low_hz * spec.high_hz);
  normalize_gain(coeffs.sections,
                 2.0 * std::numbers::pi * f_center / fs);
  check_stable(coeffs);
  return coeffs;
}

FilterCoefficients design_lowpass(double cutoff_hz, int order, double fs) {
  if (!(fs > 0.0)) throw InvalidSpecError("sampling rate must be positive");
  if (order < 1) throw InvalidSpecError("filter order must be >= 1");
  if (!(cutoff_hz > 0.0) || !(cutoff_hz < fs / 2.0)) {
    throw InvalidSpecError("low-pass cutoff must satisfy 0 < fc < fs/2");
  }

  const double wc = prewarp(cutoff_hz, fs);
  std::vector<cplx> zpoles;
  for (const cplx& p : prototype_poles(order)) {
    zpoles.push_back(bilinear(wc * p, fs));
  }

  FilterCoefficients coeffs;
  coeffs.sections = pair_poles(zpoles);
  coeffs.n_poles = order;
  assign_zeros(coeffs.sections, 0, order);
  normalize_gain(coeffs.sections, 0.0);
  check_stable(coeffs);
  return coeffs;
}

FilterCoefficients design_filter(const FilterSpec& spec, double fs) {
  if (spec.kind == FilterKind::BandPass) return design_bandpass(spec, fs);
  return design_lowpass(spec.high_hz, spec.order, fs);
}

std::vector<double> sosfilt(const FilterCoefficients& coeffs,
                            std::span<const double> x) {
  std::vector<double> y(x.begin(), x.end());
  sosfilt_inplace(coeffs, y, /*steady_init=*/false);
  return y;
}

RawSignal filtfilt(const FilterCoefficients& coeffs, const RawSignal& x) {
  const std::size_t n = x.samples.size();
  const std::size_t pad = static_cast<std::size_t>(coeffs.pad_len());
  if (n <= pad || n < 2) {
    throw InsufficientDataError(
        "filtfilt needs more than " + std::to_string(pad) + " samples, got " +
        std::to_string(n));
  }

  // Odd reflection about the end points.
  std::vector<double> ext;
  ext.reserve(n + 2 * pad);
  for (std::size_t i = 0; i < pad; ++i) {
    ext.push_back(2.0 * x.samples.front() - x.samples[pad - i]);
  }
  ext.insert(ext.end(), x.samples.begin(), x.samples.end());
  for (std::size_t i = 0; i < pad; ++i) {
    ext.push_back(2.0 * x.samples.back() - x.samples[n - 2 - i]);
  }

  sosfilt_inplace(coeffs, ext, /*steady_init=*/true);
  std::reverse(ext.begin(), ext.end());
  sosfilt_inplace(coeffs, ext, /*steady_init=*/true);
  std::reverse(ext.begin(), ext.end());

  RawSignal out;
  out.fs = x.fs;
  out.channel = x.channel;
  out.samples.assign(ext.begin() + pad, ext.begin() + pad + n);
  return out;
}

AcDc decompose_ac_dc(const RawSignal& x, const FilterSpec& band) {
  AcDc out;
  out.ac = filtfilt(design_bandpass(band, x.fs), x);
  out.dc = filtfilt(design_lowpass(band.low_hz, band.order, x.fs), x);
  return out;
}

RatioResult normalize_ratio(const RawSignal& ac, const RawSignal& dc) {
  if (ac.samples.size() != dc.samples.size()) {
    throw ShapeError("normalize_ratio: ac and dc lengths differ");
  }
  if (ac.fs != dc.fs) {
    throw ShapeError("normalize_ratio: ac and dc sampling rates differ");
  }

  // Guard threshold is relative to the typical baseline magnitude.
  std::vector<double> mags(dc.samples.size());
  for (std::size_t i = 0; i < mags.size(); ++i) {
    mags[i] = std::abs(dc.samples[i]);
  }
  std::vector<double> sorted = mags;
  std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2,
                   sorted.end());
  const double median = sorted.empty() ? 0.0 : sorted[sorted.size() / 2];
  const double eps_dc = 1e-6 * median;

  RatioResult out;
  out.signal.fs = ac.fs;
  out.signal.samples.resize(ac.samples.size());
  for (std::size_t i = 0; i < ac.samples.size(); ++i) {
    if (mags[i] <= eps_dc) {
      out.signal.samples[i] = 0.0;
      ++out.degenerate_count;
    } else {
      out.signal.samples[i] = ac.samples[i] / dc.samples[i];
    }
  }
  return out;
}

RawSignal fourier_resample(const RawSignal& x, double fs_out) {
  if (!(fs_out > 0.0)) throw InvalidSpecError("fs_out must be positive");
  if (!(x.fs > 0.0)) throw InvalidSpecError("input sampling rate must be positive");

  const std::size_t n_in = x.samples.size();
  RawSignal out;
  out.fs = fs_out;
  out.channel = x.channel;
  if (n_in == 0) return out;

  const auto n_out = static_cast<std::size_t>(
      std::llround(static_cast<double>(n_in) * fs_out / x.fs));
  if (n_out < 1) {
    throw InvalidSpecError("fourier_resample: output would be empty");
  }

  const std::size_t half_in = n_in / 2 + 1;
  const std::size_t half_out = n_out / 2 + 1;

  auto* in = static_cast<double*>(fftw_malloc(sizeof(double) * n_in));
  auto* spec_in =
      static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * half_in));
  auto* spec_out =
      static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * half_out));
  auto* res = static_cast<double*>(fftw_malloc(sizeof(double) * n_out));

  fftw_plan fwd, bwd;
  {
    std::lock_guard<std::mutex> lock(fftw_mutex());
    fwd = fftw_plan_dft_r2c_1d(static_cast<int>(n_in), in, spec_in,
                               FFTW_ESTIMATE);
    bwd = fftw_plan_dft_c2r_1d(static_cast<int>(n_out), spec_out, res,
                               FFTW_ESTIMATE);
  }

  std::copy(x.samples.begin(), x.samples.end(), in);
  fftw_execute(fwd);

  for (std::size_t k = 0; k < half_out; ++k) {
    spec_out[k][0] = 0.0;
    spec_out[k][1] = 0.0;
  }
  const std::size_t n_min = std::min(n_in, n_out);
  const std::size_t keep = n_min / 2 + 1;
  for (std::size_t k = 0; k < keep; ++k) {
    spec_out[k][0] = spec_in[k][0];
    spec_out[k][1] = spec_in[k][1];
  }
  if (n_min % 2 == 0) {
    const std::size_t nyq = n_min / 2;
    if (n_out < n_in) {
      // The old interior bin becomes the new Nyquist bin: fold in its
      // mirror image.
      spec_out[nyq][0] = 2.0 * spec_in[nyq][0];
      spec_out[nyq][1] = 0.0;
    } else if (n_out > n_in) {
      // The old Nyquist bin becomes an interior bin: split it.
      spec_out[nyq][0] *= 0.5;
      spec_out[nyq][1] *= 0.5;
    }
  }

  fftw_execute(bwd);
  const double scale = 1.0 / static_cast<double>(n_in);
  out.samples.resize(n_out);
  for (std::size_t i = 0; i < n_out; ++i) out.samples[i] = res[i] * scale;

  {
    std::lock_guard<std::mutex> lock(fftw_mutex());
    fftw_destroy_plan(fwd);
    fftw_destroy_plan(bwd);
  }
  fftw_free(in);
  fftw_free(spec_in);
  fftw_free(spec_out);
  fftw_free(res);
  return out;
}

std::vector<double> moving_average(std::span<const double> y,
                                   std::size_t window) {
  if (window == 0) throw InvalidSpecError("moving_average: window must be > 0");
  std::vector<double> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const std::size_t begin = i + 1 >= window ? i + 1 - window : 0;
    double sum = 0.0;
    for (std::size_t j = begin; j <= i; ++j) sum += y[j];
    out[i] = sum / static_cast<double>(i - begin + 1);
  }
  return out;
}

}  // namespace pulseox::dsp
