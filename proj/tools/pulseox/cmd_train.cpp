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

namespace {

struct LoadedCorpus {
  std::vector<seg::PpgSession> sessions;
  std::vector<seg::SegmentSet> segment_sets;  // parallel to sessions
  std::vector<std::string> subjects;          // unique, sorted
};

LoadedCorpus load_normalized(const io::ExperimentConfig& cfg) {
  LoadedCorpus corpus;
  const auto files = collect_session_files({cfg.sessions_dir.string()});
  std::set<std::string> subjects;
  for (const auto& f : files) {
    seg::PpgSession s = io::read_session(f);
    if (!s.normalized) {
      throw Error(f.string() + ": expected a normalized session (run "
                               "`pulseox preprocess` first)");
    }
    corpus.segment_sets.push_back(seg::segment_session(s));
    subjects.insert(s.subject_id);
    corpus.sessions.push_back(std::move(s));
  }
  corpus.subjects.assign(subjects.begin(), subjects.end());
  return corpus;
}

train::Dataset dataset_for(const LoadedCorpus& corpus,
                           const std::set<std::string>& keep) {
  std::vector<seg::SegmentSet> sets;
  for (std::size_t i = 0; i < corpus.sessions.size(); ++i) {
    if (keep.count(corpus.sessions[i].subject_id) > 0) {
      sets.push_back(corpus.segment_sets[i]);
    }
  }
  return train::Dataset::from_segments(sets);
}

struct PooledEval {
  double mae = 0.0;
  double rmse = 0.0;
  std::size_t n = 0;
};

// Pooled prediction error over every session of the given subjects, through
// the full inference path (moving average + clamp).
PooledEval eval_subjects(const LoadedCorpus& corpus,
                         const nn::ModelParams& params,
                         const std::set<std::string>& keep) {
  double abs_sum = 0.0, sq_sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < corpus.sessions.size(); ++i) {
    if (keep.count(corpus.sessions[i].subject_id) == 0) continue;
    const eval::PredictionTrace trace =
        pipe::predict_model_trace(corpus.sessions[i], params);
    for (std::size_t j = 0; j < trace.t.size(); ++j) {
      const double d = trace.y_pred[j] - trace.y_ref[j];
      abs_sum += std::abs(d);
      sq_sum += d * d;
      ++n;
    }
  }
  PooledEval out;
  out.n = n;
  if (n > 0) {
    out.mae = abs_sum / static_cast<double>(n);
    out.rmse = std::sqrt(sq_sum / static_cast<double>(n));
  }
  return out;
}

void write_split_json(const std::filesystem::path& path,
                      const train::SplitPlan& plan) {
  nlohmann::json j = {{"train_subjects", plan.train_subjects},
                      {"test_subjects", plan.test_subjects}};
  std::ofstream out(path);
  out << j.dump(2) << "\n";
}

io::ExperimentConfig load_cfg(const TrainOptions& opts) {
  io::ExperimentConfig cfg = io::ExperimentConfig::load(opts.config_path);
  if (!opts.out_dir.empty()) cfg.out_dir = opts.out_dir;
  if (opts.seed.has_value()) {
    cfg.train.seed = *opts.seed;
    cfg.model.seed = *opts.seed;
    cfg.split.seed = *opts.seed;
  }
  cfg.validate_paths();
  ensure_out_dir(cfg.out_dir);
  return cfg;
}

}  // namespace

int run_pretrain(const TrainOptions& opts) {
  const io::ExperimentConfig cfg = load_cfg(opts);
  const LoadedCorpus corpus = load_normalized(cfg);

  const train::SplitPlan plan = train::subject_split(
      corpus.subjects, cfg.split.seed, cfg.split.test_fraction);
  const std::set<std::string> train_set(plan.train_subjects.begin(),
                                        plan.train_subjects.end());
  const std::set<std::string> test_set(plan.test_subjects.begin(),
                                       plan.test_subjects.end());
  write_split_json(cfg.out_dir / "split.json", plan);

  nlohmann::json summary;

  // Optional subject-level cross-validation inside the training split.
  if (cfg.split.kind == "kfold") {
    const auto folds =
        train::kfold(plan.train_subjects, cfg.split.k, cfg.split.seed);
    auto cv = nlohmann::json::array();
    for (std::size_t i = 0; i < folds.size(); ++i) {
      std::set<std::string> val_set(folds[i].begin(), folds[i].end());
      std::set<std::string> fit_set;
      for (const auto& s : plan.train_subjects) {
        if (val_set.count(s) == 0) fit_set.insert(s);
      }
      const train::Dataset fit_data = dataset_for(corpus, fit_set);
      const train::Dataset val_data = dataset_for(corpus, val_set);
      train::TrainConfig fold_cfg = cfg.train;
      fold_cfg.seed = mix_seed(cfg.train.seed, 100 + i);
      const train::TrainResult r =
          train::pretrain(fit_data, &val_data, fold_cfg, cfg.model);
      const PooledEval ve = eval_subjects(corpus, r.params, val_set);
      cv.push_back({{"fold", i},
                    {"val_subjects", folds[i]},
                    {"val_mae", ve.mae},
                    {"val_rmse", ve.rmse},
                    {"best_epoch", r.best_epoch}});
      std::fprintf(stderr, "pretrain: fold %zu val MAE %.4f\n", i, ve.mae);
    }
    summary["cv"] = cv;
  } else if (cfg.split.kind == "loso") {
    throw InvalidSpecError("pretrain does not support loso; use subject or kfold");
  }

  const train::Dataset train_data = dataset_for(corpus, train_set);
  const train::TrainResult result =
      train::pretrain(train_data, nullptr, cfg.train, cfg.model);
  train::write_history_csv(cfg.out_dir / "history.csv", result.history);

  io::Checkpoint ckpt;
  ckpt.model = result.params;
  io::save_checkpoint(cfg.out_dir / "checkpoint.ckpt", ckpt);

  const PooledEval test = eval_subjects(corpus, result.params, test_set);
  summary["train_subjects"] = plan.train_subjects;
  summary["test_subjects"] = plan.test_subjects;
  summary["test_mae"] = test.mae;
  summary["test_rmse"] = test.rmse;
  summary["test_points"] = test.n;
  std::ofstream sum_out(cfg.out_dir / "summary.json");
  sum_out << summary.dump(2) << "\n";

  std::fprintf(stderr, "pretrain: done; held-out MAE %.4f RMSE %.4f (%zu pts)\n",
               test.mae, test.rmse, test.n);
  return 0;
}

int run_finetune(const TrainOptions& opts) {
  const io::ExperimentConfig cfg = load_cfg(opts);
  if (opts.init_checkpoint.empty()) {
    throw InvalidSpecError("finetune requires --init <pretrained checkpoint>");
  }
  const io::Checkpoint init = io::load_checkpoint(opts.init_checkpoint);
  if (!init.model.has_value()) {
    throw Error(opts.init_checkpoint + ": checkpoint has no model section");
  }
  if (!(init.model->config == cfg.model)) {
    throw Error("checkpoint/config mismatch: model configuration in " +
                opts.init_checkpoint +
                " differs from the experiment's model section");
  }

  const LoadedCorpus corpus = load_normalized(cfg);
  nlohmann::json summary;

  if (cfg.split.kind == "loso") {
    const auto plans = train::loso(corpus.subjects);
    auto legs = nlohmann::json::array();
    double abs_sum = 0.0, sq_sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < plans.size(); ++i) {
      const std::set<std::string> fit_set(plans[i].train_subjects.begin(),
                                          plans[i].train_subjects.end());
      const std::set<std::string> test_set(plans[i].test_subjects.begin(),
                                           plans[i].test_subjects.end());
      train::TrainConfig leg_cfg = cfg.train;
      leg_cfg.seed = mix_seed(cfg.train.seed, 200 + i);
      const train::TrainResult r = train::finetune(
          *init.model, dataset_for(corpus, fit_set), nullptr, leg_cfg);
      const PooledEval e = eval_subjects(corpus, r.params, test_set);
      abs_sum += e.mae * static_cast<double>(e.n);
      sq_sum += e.rmse * e.rmse * static_cast<double>(e.n);
      n += e.n;
      legs.push_back({{"test_subject", plans[i].test_subjects.front()},
                      {"mae", e.mae},
                      {"rmse", e.rmse},
                      {"points", e.n}});
      std::fprintf(stderr, "finetune: leg %s MAE %.4f\n",
                   plans[i].test_subjects.front().c_str(), e.mae);
    }
    summary["loso_legs"] = legs;
    summary["loso_mae"] = n > 0 ? abs_sum / static_cast<double>(n) : 0.0;
    summary["loso_rmse"] =
        n > 0 ? std::sqrt(sq_sum / static_cast<double>(n)) : 0.0;
    std::ofstream sum_out(cfg.out_dir / "summary.json");
    sum_out << summary.dump(2) << "\n";
    std::fprintf(stderr, "finetune: LOSO MAE %.4f over %zu points\n",
                 summary["loso_mae"].get<double>(), n);
    return 0;
  }

  const train::SplitPlan plan = train::subject_split(
      corpus.subjects, cfg.split.seed, cfg.split.test_fraction);
  const std::set<std::string> train_set(plan.train_subjects.begin(),
                                        plan.train_subjects.end());
  const std::set<std::string> test_set(plan.test_subjects.begin(),
                                       plan.test_subjects.end());
  write_split_json(cfg.out_dir / "split.json", plan);

  const train::TrainResult result = train::finetune(
      *init.model, dataset_for(corpus, train_set), nullptr, cfg.train);
  train::write_history_csv(cfg.out_dir / "history.csv", result.history);

  io::Checkpoint ckpt;
  ckpt.model = result.params;
  io::save_checkpoint(cfg.out_dir / "checkpoint.ckpt", ckpt);

  const PooledEval test = eval_subjects(corpus, result.params, test_set);
  summary["train_subjects"] = plan.train_subjects;
  summary["test_subjects"] = plan.test_subjects;
  summary["test_mae"] = test.mae;
  summary["test_rmse"] = test.rmse;
  summary["test_points"] = test.n;
  std::ofstream sum_out(cfg.out_dir / "summary.json");
  sum_out << summary.dump(2) << "\n";

  std::fprintf(stderr, "finetune: done; held-out MAE %.4f RMSE %.4f (%zu pts)\n",
               test.mae, test.rmse, test.n);
  return 0;
}

}  // namespace pulseox::cli
