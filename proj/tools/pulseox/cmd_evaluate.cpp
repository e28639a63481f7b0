#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "commands.hpp"
#include "pulseox/eval.hpp"
#include "util.hpp"

namespace pulseox::cli {

int run_evaluate(const EvaluateOptions& opts) {
  const auto files = collect_files_with_extension(opts.inputs, ".csv");
  ensure_out_dir(opts.out_dir);

  nlohmann::json per_trace;
  double abs_sum = 0.0, sq_sum = 0.0;
  double abs_ins = 0.0, sq_ins = 0.0;
  std::size_t n = 0, n_ins = 0;

  for (const auto& file : files) {
    const eval::PredictionTrace trace = read_trace_csv(file);
    const eval::EvalReport report = eval::evaluate(trace);

    std::string stem = file.stem().string();  // strips .csv
    if (stem.size() > 6 && stem.ends_with(".trace")) {
      stem.resize(stem.size() - 6);
    }
    per_trace[stem] = nlohmann::json::parse(eval::report_to_json(report));

    std::ofstream annotated(std::filesystem::path(opts.out_dir) /
                            (stem + ".eval.csv"));
    annotated << eval::trace_to_csv(trace, report.zones);

    const auto covered = eval::instant_coverage(trace.t.size(), report.zones);
    for (std::size_t i = 0; i < trace.t.size(); ++i) {
      const double d = trace.y_pred[i] - trace.y_ref[i];
      abs_sum += std::abs(d);
      sq_sum += d * d;
      ++n;
      if (covered[i]) {
        abs_ins += std::abs(d);
        sq_ins += d * d;
        ++n_ins;
      }
    }
  }

  nlohmann::json pooled;
  pooled["n_points"] = n;
  pooled["n_instant_points"] = n_ins;
  pooled["mae"] = n > 0 ? abs_sum / static_cast<double>(n) : 0.0;
  pooled["rmse"] = n > 0 ? std::sqrt(sq_sum / static_cast<double>(n)) : 0.0;
  if (n_ins > 0) {
    pooled["mae_ins"] = abs_ins / static_cast<double>(n_ins);
    pooled["rmse_ins"] = std::sqrt(sq_ins / static_cast<double>(n_ins));
  } else {
    pooled["mae_ins"] = nullptr;
    pooled["rmse_ins"] = nullptr;
  }

  nlohmann::json top;
  top["traces"] = per_trace;
  top["pooled"] = pooled;
  const auto report_path = std::filesystem::path(opts.out_dir) / "report.json";
  std::ofstream out(report_path);
  out << top.dump(2) << "\n";

  std::fprintf(stderr, "evaluate: MAE %.4f RMSE %.4f over %zu points -> %s\n",
               pooled["mae"].get<double>(), pooled["rmse"].get<double>(), n,
               report_path.string().c_str());
  return 0;
}

}  // namespace pulseox::cli
