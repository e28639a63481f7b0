#include <cstdio>

#include "commands.hpp"
#include "pulseox/checkpoint.hpp"
#include "pulseox/pipeline.hpp"
#include "pulseox/session_io.hpp"
#include "util.hpp"

namespace pulseox::cli {

int run_predict(const PredictOptions& opts) {
  const io::Checkpoint ckpt = io::load_checkpoint(opts.checkpoint);

  std::string use = opts.use;
  if (use == "auto") {
    use = ckpt.model.has_value() ? "model" : "calib";
  }
  if (use == "model" && !ckpt.model.has_value()) {
    throw Error(opts.checkpoint + ": no model section in checkpoint");
  }
  if (use == "calib" && !ckpt.quad.has_value()) {
    throw Error(opts.checkpoint + ": no calibration section in checkpoint");
  }

  const auto files = collect_session_files(opts.inputs);
  ensure_out_dir(opts.out_dir);

  for (const auto& file : files) {
    const seg::PpgSession session = io::read_session(file);
    eval::PredictionTrace trace;
    if (use == "model") {
      if (session.normalized) {
        trace = pipe::predict_model_trace(session, *ckpt.model);
      } else {
        const pipe::PreprocessResult pre = pipe::preprocess_session(session);
        trace = pipe::predict_model_trace(pre.normalized, *ckpt.model);
      }
    } else {
      if (session.normalized) {
        throw Error(file.string() +
                    ": traditional prediction needs raw sessions (the R "
                    "ratio uses separate AC and DC components)");
      }
      const pipe::PreprocessResult pre = pipe::preprocess_session(session);
      trace = pipe::predict_traditional_trace(pre, *ckpt.quad);
    }

    auto out_path = std::filesystem::path(opts.out_dir) / file.filename();
    out_path.replace_extension(".trace.csv");
    write_trace_csv(out_path, trace);
  }
  std::fprintf(stderr, "predict: wrote %zu traces to %s\n", files.size(),
               opts.out_dir.c_str());
  return 0;
}

}  // namespace pulseox::cli
