#include "pulseox/eval.hpp"

#include <cmath>
#include <cstdio>

#include <json.hpp>

namespace pulseox::eval {

namespace {

void check_pair(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("metric inputs differ in length");
  if (a.empty()) throw InsufficientDataError("metric inputs are empty");
}

}  // namespace

void PredictionTrace::validate() const {
  if (t.size() != y_ref.size() || t.size() != y_pred.size()) {
    throw ShapeError("trace columns differ in length");
  }
  for (std::size_t i = 1; i < t.size(); ++i) {
    const double dt = t[i] - t[i - 1];
    if (std::abs(dt - 1.0) > 1e-6) {
      throw Error("trace must be sampled at 1 Hz without gaps");
    }
  }
}

double mae(std::span<const double> y_ref, std::span<const double> y_pred) {
  check_pair(y_ref, y_pred);
  double s = 0.0;
  for (std::size_t i = 0; i < y_ref.size(); ++i) {
    s += std::abs(y_pred[i] - y_ref[i]);
  }
  return s / static_cast<double>(y_ref.size());
}

double rmse(std::span<const double> y_ref, std::span<const double> y_pred) {
  check_pair(y_ref, y_pred);
  double s = 0.0;
  for (std::size_t i = 0; i < y_ref.size(); ++i) {
    const double d = y_pred[i] - y_ref[i];
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(y_ref.size()));
}

double total_variation(std::span<const double> y, std::size_t i,
                       std::size_t window) {
  if (y.size() < 2 || i + window + 1 > y.size() - 1) {
    throw InsufficientDataError("total_variation window exceeds sequence");
  }
  double tv = 0.0;
  for (std::size_t j = i; j <= i + window; ++j) {
    tv += std::abs(y[j + 1] - y[j]);
  }
  return tv;
}

std::vector<InstantZone> detect_instant_zones(std::span<const double> y_ref,
                                              double threshold,
                                              std::size_t window) {
  std::vector<InstantZone> zones;
  if (y_ref.size() < window + 2) return zones;
  const std::size_t last_start = y_ref.size() - window - 2;
  for (std::size_t i = 0; i <= last_start; ++i) {
    if (total_variation(y_ref, i, window) >= threshold) {
      zones.push_back({i, i + window + 1});
    }
  }
  return zones;
}

std::vector<bool> instant_coverage(std::size_t len,
                                   std::span<const InstantZone> zones) {
  std::vector<bool> covered(len, false);
  for (const InstantZone& z : zones) {
    for (std::size_t i = z.start_idx; i <= z.end_idx && i < len; ++i) {
      covered[i] = true;
    }
  }
  return covered;
}

EvalReport evaluate(const PredictionTrace& trace, double threshold,
                    std::size_t window) {
  trace.validate();
  EvalReport report;
  report.n_points = trace.t.size();
  report.mae = mae(trace.y_ref, trace.y_pred);
  report.rmse = rmse(trace.y_ref, trace.y_pred);
  report.zones = detect_instant_zones(trace.y_ref, threshold, window);

  const auto covered = instant_coverage(trace.t.size(), report.zones);
  std::vector<double> ref_ins, pred_ins;
  for (std::size_t i = 0; i < covered.size(); ++i) {
    if (covered[i]) {
      ref_ins.push_back(trace.y_ref[i]);
      pred_ins.push_back(trace.y_pred[i]);
    }
  }
  report.n_instant_points = ref_ins.size();
  if (!ref_ins.empty()) {
    report.mae_ins = mae(ref_ins, pred_ins);
    report.rmse_ins = rmse(ref_ins, pred_ins);
  }
  return report;
}

std::string report_to_json(const EvalReport& report) {
  nlohmann::json j;
  j["mae"] = report.mae;
  j["rmse"] = report.rmse;
  if (report.mae_ins.has_value()) {
    j["mae_ins"] = *report.mae_ins;
    j["rmse_ins"] = *report.rmse_ins;
  } else {
    j["mae_ins"] = nullptr;
    j["rmse_ins"] = nullptr;
  }
  j["n_points"] = report.n_points;
  j["n_instant_points"] = report.n_instant_points;
  auto zones = nlohmann::json::array();
  for (const InstantZone& z : report.zones) {
    zones.push_back({z.start_idx, z.end_idx});
  }
  j["zones"] = zones;
  return j.dump(2);
}

EvalReport report_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad report JSON: ") + e.what());
  }
  EvalReport report;
  report.mae = j.at("mae").get<double>();
  report.rmse = j.at("rmse").get<double>();
  if (!j.at("mae_ins").is_null()) {
    report.mae_ins = j.at("mae_ins").get<double>();
    report.rmse_ins = j.at("rmse_ins").get<double>();
  }
  report.n_points = j.at("n_points").get<std::size_t>();
  report.n_instant_points = j.at("n_instant_points").get<std::size_t>();
  for (const auto& z : j.at("zones")) {
    report.zones.push_back({z.at(0).get<std::size_t>(),
                            z.at(1).get<std::size_t>()});
  }
  return report;
}

std::string trace_to_csv(const PredictionTrace& trace,
                         std::span<const InstantZone> zones) {
  const auto covered = instant_coverage(trace.t.size(), zones);
  std::string out = "t_s,y_ref,y_pred,is_instant\n";
  char buf[128];
  for (std::size_t i = 0; i < trace.t.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%d\n", trace.t[i],
                  trace.y_ref[i], trace.y_pred[i], covered[i] ? 1 : 0);
    out += buf;
  }
  return out;
}

}  // namespace pulseox::eval
