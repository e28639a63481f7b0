#include <cstdio>
#include <fstream>
#include <set>

#include <json.hpp>

#include "commands.hpp"
#include "pulseox/checkpoint.hpp"
#include "pulseox/experiment.hpp"
#include "pulseox/pipeline.hpp"
#include "pulseox/session_io.hpp"
#include "pulseox/training.hpp"
#include "util.hpp"

namespace pulseox::cli {

int run_calib(const CalibOptions& opts) {
  io::ExperimentConfig cfg = io::ExperimentConfig::load(opts.config_path);
  if (!opts.out_dir.empty()) cfg.out_dir = opts.out_dir;
  if (opts.seed.has_value()) cfg.split.seed = *opts.seed;
  cfg.validate_paths();
  ensure_out_dir(cfg.out_dir);

  const auto files = collect_session_files({cfg.sessions_dir.string()});
  std::vector<seg::PpgSession> sessions;
  for (const auto& f : files) sessions.push_back(io::read_session(f));

  std::set<std::string> subject_set;
  for (const auto& s : sessions) subject_set.insert(s.subject_id);
  const std::vector<std::string> subjects(subject_set.begin(),
                                          subject_set.end());
  const train::SplitPlan plan =
      train::subject_split(subjects, cfg.split.seed, cfg.split.test_fraction);
  const std::set<std::string> train_set(plan.train_subjects.begin(),
                                        plan.train_subjects.end());

  // Calibration is fitted on the training subjects only.
  std::vector<pipe::PreprocessResult> train_pre;
  std::size_t n_windows = 0;
  for (const auto& s : sessions) {
    if (train_set.count(s.subject_id) == 0) continue;
    train_pre.push_back(pipe::preprocess_session(s));
    n_windows += pipe::r_windows(train_pre.back()).size();
  }
  const calib::QuadCalib quad = pipe::fit_calibration(train_pre);

  io::Checkpoint ckpt;
  ckpt.quad = quad;
  const auto ckpt_path = cfg.out_dir / "calib.ckpt";
  io::save_checkpoint(ckpt_path, ckpt);

  nlohmann::json split_json = {{"train_subjects", plan.train_subjects},
                               {"test_subjects", plan.test_subjects}};
  std::ofstream split_out(cfg.out_dir / "split.json");
  split_out << split_json.dump(2) << "\n";

  std::fprintf(stderr,
               "calib: fit on %zu windows from %zu train sessions; "
               "c = (%.6g, %.6g, %.6g); wrote %s\n",
               n_windows, train_pre.size(), quad.c0, quad.c1, quad.c2,
               ckpt_path.string().c_str());
  return 0;
}

}  // namespace pulseox::cli
