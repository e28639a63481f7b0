// pulseox: SpO2-from-PPG experiment driver.
//
// Subcommands cover the full pipeline: synth -> preprocess -> calib /
// pretrain -> finetune -> predict -> evaluate. Exit codes: 0 success,
// 2 usage/config error, 3 data error, 4 numeric failure.

#include <cstdio>
#include <exception>

#include <CLI11.hpp>

#include "commands.hpp"
#include "pulseox/errors.hpp"

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SpO2 estimation from dual-channel PPG"};
  app.require_subcommand(1);

  pulseox::cli::SynthOptions synth_opts;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus");
  synth->add_option("--config", synth_opts.config_path,
                    "Corpus spec JSON (defaults used when omitted)");
  synth->add_option("--out", synth_opts.out_dir, "Output directory")
      ->required();
  synth->add_option("--seed", synth_opts.seed, "Override the corpus seed");

  pulseox::cli::PreprocessOptions pre_opts;
  auto* pre = app.add_subcommand(
      "preprocess", "Band-pass, resample and AC/DC-normalize raw sessions");
  pre->add_option("--in", pre_opts.inputs, "Session files or directories")
      ->required();
  pre->add_option("--out", pre_opts.out_dir, "Output directory")->required();
  pre->add_option("--fs-target", pre_opts.fs_target, "Target sampling rate");

  pulseox::cli::CalibOptions calib_opts;
  auto* calib = app.add_subcommand(
      "calib", "Fit the quadratic R-ratio calibration on raw sessions");
  calib->add_option("--config", calib_opts.config_path, "Experiment JSON")
      ->required();
  calib->add_option("--out", calib_opts.out_dir, "Override output directory");
  calib->add_option("--seed", calib_opts.seed, "Override the split seed");

  pulseox::cli::TrainOptions pretrain_opts;
  auto* pretrain =
      app.add_subcommand("pretrain", "Train the regressor from scratch");
  pretrain->add_option("--config", pretrain_opts.config_path,
                       "Experiment JSON")->required();
  pretrain->add_option("--out", pretrain_opts.out_dir,
                       "Override output directory");
  pretrain->add_option("--seed", pretrain_opts.seed,
                       "Override model/train/split seeds");

  pulseox::cli::TrainOptions finetune_opts;
  auto* finetune = app.add_subcommand(
      "finetune", "Two-stage transfer fine-tuning from a checkpoint");
  finetune->add_option("--config", finetune_opts.config_path,
                       "Experiment JSON")->required();
  finetune->add_option("--init", finetune_opts.init_checkpoint,
                       "Pretrained checkpoint")->required();
  finetune->add_option("--out", finetune_opts.out_dir,
                       "Override output directory");
  finetune->add_option("--seed", finetune_opts.seed,
                       "Override model/train/split seeds");

  pulseox::cli::PredictOptions predict_opts;
  auto* predict =
      app.add_subcommand("predict", "Emit SpO2 prediction traces");
  predict->add_option("--ckpt", predict_opts.checkpoint, "Checkpoint file")
      ->required();
  predict->add_option("--in", predict_opts.inputs,
                      "Session files or directories")->required();
  predict->add_option("--out", predict_opts.out_dir, "Output directory")
      ->required();
  predict->add_option("--use", predict_opts.use,
                      "Predictor: auto, model or calib")
      ->check(CLI::IsMember({"auto", "model", "calib"}));

  pulseox::cli::EvaluateOptions eval_opts;
  auto* evaluate = app.add_subcommand(
      "evaluate", "Score prediction traces (overall + instant zones)");
  evaluate->add_option("--in", eval_opts.inputs,
                       "Trace CSV files or directories")->required();
  evaluate->add_option("--out", eval_opts.out_dir, "Output directory")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help / --version
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (synth->parsed()) return pulseox::cli::run_synth(synth_opts);
    if (pre->parsed()) return pulseox::cli::run_preprocess(pre_opts);
    if (calib->parsed()) return pulseox::cli::run_calib(calib_opts);
    if (pretrain->parsed()) return pulseox::cli::run_pretrain(pretrain_opts);
    if (finetune->parsed()) return pulseox::cli::run_finetune(finetune_opts);
    if (predict->parsed()) return pulseox::cli::run_predict(predict_opts);
    if (evaluate->parsed()) return pulseox::cli::run_evaluate(eval_opts);
  } catch (const pulseox::InvalidSpecError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const pulseox::NumericError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitNumeric;
  } catch (const pulseox::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  }
  return 0;
}
