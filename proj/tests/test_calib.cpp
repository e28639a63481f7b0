#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "pulseox/calib.hpp"
#include "pulseox/rng.hpp"

using namespace pulseox;

namespace {

std::vector<double> sine(double amp, double offset, std::size_t n,
                         double freq = 1.5, double fs = 25.0,
                         double phase = 0.0) {
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = offset + amp * std::sin(2.0 * std::numbers::pi * freq * i / fs +
                                     phase);
  }
  return out;
}

}  // namespace

TEST_CASE("compute_r_ratio: identical channels give R = 1") {
  const auto ac = sine(0.02, 0.0, 125);
  const auto dc = std::vector<double>(125, 1.0);
  CHECK(calib::compute_r_ratio(ac, dc, ac, dc) == doctest::Approx(1.0));
}

TEST_CASE("compute_r_ratio: doubling red AC doubles R") {
  const auto ac_ir = sine(0.02, 0.0, 125);
  auto ac_red = ac_ir;
  for (auto& v : ac_red) v *= 2.0;
  const auto dc = std::vector<double>(125, 1.0);
  CHECK(calib::compute_r_ratio(ac_red, dc, ac_ir, dc) ==
        doctest::Approx(2.0));
}

TEST_CASE("compute_r_ratio: closed form on synthetic sines") {
  // red: amp 0.02 on DC 1.0; ir: amp 0.04 on DC 2.0 -> R = 1.
  const auto red_ac = sine(0.02, 0.0, 125);
  const auto ir_ac = sine(0.04, 0.0, 125);
  const auto red_dc = std::vector<double>(125, 1.0);
  const auto ir_dc = std::vector<double>(125, 2.0);
  CHECK(calib::compute_r_ratio(red_ac, red_dc, ir_ac, ir_dc) ==
        doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("compute_r_ratio: gain invariance per channel") {
  Rng rng(2);
  std::vector<double> red_ac = sine(0.03, 0.0, 125, 1.3);
  std::vector<double> ir_ac = sine(0.05, 0.0, 125, 1.3, 25.0, 0.4);
  std::vector<double> red_dc(125), ir_dc(125);
  for (std::size_t i = 0; i < 125; ++i) {
    red_dc[i] = 1.0 + 0.01 * rng.uniform();
    ir_dc[i] = 2.0 + 0.01 * rng.uniform();
  }
  const double base = calib::compute_r_ratio(red_ac, red_dc, ir_ac, ir_dc);
  for (double gain : {0.25, 3.0, 1e4}) {
    auto sr_ac = red_ac, sr_dc = red_dc;
    for (auto& v : sr_ac) v *= gain;
    for (auto& v : sr_dc) v *= gain;
    CHECK(calib::compute_r_ratio(sr_ac, sr_dc, ir_ac, ir_dc) ==
          doctest::Approx(base).epsilon(1e-12));
  }
}

TEST_CASE("compute_r_ratio: degenerate windows") {
  const auto ac = sine(0.02, 0.0, 125);
  const std::vector<double> zeros(125, 0.0);
  const std::vector<double> dc(125, 1.0);
  CHECK_THROWS_AS(calib::compute_r_ratio(ac, zeros, ac, dc), NumericError);
  CHECK_THROWS_AS(calib::compute_r_ratio(ac, dc, zeros, dc), NumericError);
}

TEST_CASE("fit_quadratic: exact interpolation") {
  const calib::QuadCalib truth{110.0, -25.0, 0.0};
  std::vector<std::pair<double, double>> pairs;
  for (double r : {0.4, 0.9, 1.3, 1.8}) pairs.emplace_back(r, truth(r));
  const auto fit = calib::fit_quadratic(pairs);
  CHECK(fit.c0 == doctest::Approx(110.0).epsilon(1e-9));
  CHECK(fit.c1 == doctest::Approx(-25.0).epsilon(1e-9));
  CHECK(std::abs(fit.c2) < 1e-9);
}

TEST_CASE("fit_quadratic: recovers the synthetic ground-truth law") {
  const calib::QuadCalib truth{104.0, -17.0, -2.0};
  Rng rng(9);
  std::vector<std::pair<double, double>> pairs;
  for (int i = 0; i < 50; ++i) {
    const double r = rng.uniform(0.3, 1.5);
    pairs.emplace_back(r, truth(r));
  }
  const auto fit = calib::fit_quadratic(pairs);
  CHECK(fit.c0 == doctest::Approx(104.0).epsilon(1e-8));
  CHECK(fit.c1 == doctest::Approx(-17.0).epsilon(1e-8));
  CHECK(fit.c2 == doctest::Approx(-2.0).epsilon(1e-8));
}

TEST_CASE("fit_quadratic: degenerate inputs") {
  std::vector<std::pair<double, double>> two = {{1.0, 90.0}, {2.0, 80.0}};
  CHECK_THROWS_AS(calib::fit_quadratic(two), NumericError);

  std::vector<std::pair<double, double>> dup = {
      {1.0, 90.0}, {1.0, 90.0}, {2.0, 80.0}};
  CHECK_THROWS_AS(calib::fit_quadratic(dup), NumericError);
}

TEST_CASE("fit residual beats any constant predictor") {
  Rng rng(33);
  std::vector<std::pair<double, double>> pairs;
  for (int i = 0; i < 40; ++i) {
    const double r = rng.uniform(0.3, 1.5);
    pairs.emplace_back(r, 104.0 - 17.0 * r - 2.0 * r * r + rng.normal(0, 1.0));
  }
  const auto fit = calib::fit_quadratic(pairs);

  double fit_sq = 0.0, mean = 0.0;
  for (const auto& [r, s] : pairs) mean += s;
  mean /= static_cast<double>(pairs.size());
  double const_sq = 0.0;
  for (const auto& [r, s] : pairs) {
    fit_sq += (fit(r) - s) * (fit(r) - s);
    const_sq += (mean - s) * (mean - s);
  }
  CHECK(fit_sq <= const_sq + 1e-12);
}

TEST_CASE("predict_traditional clamps to the display range") {
  const calib::QuadCalib c{110.0, -25.0, 0.0};
  CHECK(calib::predict_traditional(c, 0.4) == doctest::Approx(100.0));
  CHECK(calib::predict_traditional(c, 1.0) == doctest::Approx(85.0));
  CHECK(calib::predict_traditional(c, 2.0) == doctest::Approx(70.0));
  Rng rng(4);
  for (int i = 0; i < 100; ++i) {
    const double v = calib::predict_traditional(c, rng.uniform(-5.0, 5.0));
    CHECK(v >= 70.0);
    CHECK(v <= 100.0);
  }
}
