// Acceptance suite: runs every release gate end to end on synthetic oracle
// data and prints one PASS/FAIL line per criterion. Exit code = number of
// failed criteria.
//
// The heavy training gates (5 and 6) parallelize across seeds; every
// training run owns its data and parameters, so results do not depend on
// scheduling.

#include <unistd.h>

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "oracle/model_oracle.hpp"
#include "pulseox/calib.hpp"
#include "pulseox/checkpoint.hpp"
#include "pulseox/dsp.hpp"
#include "pulseox/eval.hpp"
#include "pulseox/hash.hpp"
#include "pulseox/model.hpp"
#include "pulseox/optim.hpp"
#include "pulseox/pipeline.hpp"
#include "pulseox/rng.hpp"
#include "pulseox/session_io.hpp"
#include "pulseox/synth.hpp"
#include "pulseox/training.hpp"

using namespace pulseox;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

// ---------------------------------------------------------------------------
// shared helpers

struct Corpus {
  std::vector<seg::PpgSession> raw;
  std::vector<pipe::PreprocessResult> pre;  // aligned with raw
};

Corpus build_corpus(const synth::SynthConfig& base, std::size_t subjects,
                    std::size_t sessions_per_subject) {
  Corpus corpus;
  corpus.raw = synth::generate_corpus(base, subjects, sessions_per_subject);
  corpus.pre.reserve(corpus.raw.size());
  for (const auto& session : corpus.raw) {
    corpus.pre.push_back(pipe::preprocess_session(session));
  }
  return corpus;
}

std::vector<std::string> corpus_subjects(const Corpus& corpus) {
  std::set<std::string> s;
  for (const auto& session : corpus.raw) s.insert(session.subject_id);
  return {s.begin(), s.end()};
}

train::Dataset dataset_of(const Corpus& corpus,
                          const std::set<std::string>& keep) {
  std::vector<seg::SegmentSet> sets;
  for (const auto& pre : corpus.pre) {
    if (keep.count(pre.normalized.subject_id) > 0) {
      sets.push_back(seg::segment_session(pre.normalized));
    }
  }
  return train::Dataset::from_segments(sets);
}

struct Pooled {
  double abs_sum = 0.0;
  double sq_sum = 0.0;
  std::size_t n = 0;

  void add(const eval::PredictionTrace& trace) {
    for (std::size_t i = 0; i < trace.t.size(); ++i) {
      const double d = trace.y_pred[i] - trace.y_ref[i];
      abs_sum += std::abs(d);
      sq_sum += d * d;
      ++n;
    }
  }
  double mae() const { return n > 0 ? abs_sum / static_cast<double>(n) : 0.0; }
};

double pooled_model_mae(const Corpus& corpus, const nn::ModelParams& params,
                        const std::set<std::string>& subjects) {
  Pooled pooled;
  for (const auto& pre : corpus.pre) {
    if (subjects.count(pre.normalized.subject_id) == 0) continue;
    pooled.add(pipe::predict_model_trace(pre.normalized, params));
  }
  return pooled.mae();
}

double pooled_traditional_mae(const Corpus& corpus,
                              const calib::QuadCalib& quad,
                              const std::set<std::string>& subjects) {
  Pooled pooled;
  for (const auto& pre : corpus.pre) {
    if (subjects.count(pre.normalized.subject_id) == 0) continue;
    pooled.add(pipe::predict_traditional_trace(pre, quad));
  }
  return pooled.mae();
}

// Runs jobs 0..n-1 on up to `workers` threads.
void parallel_for(std::size_t n, std::size_t workers,
                  const std::function<void(std::size_t)>& job) {
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  const std::size_t count = std::min(workers, n);
  for (std::size_t w = 0; w < count; ++w) {
    pool.emplace_back([&]() {
      while (true) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        job(i);
      }
    });
  }
  for (auto& t : pool) t.join();
}

std::string fmt(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof(buf), format, args);
  va_end(args);
  return buf;
}

// The experiment scale used by the training gates. The library defaults
// (hidden 64, batch 256) target full-size corpora; desk-scale corpora have
// ~1e3 windows, so width and batch shrink to keep step counts comparable.
nn::ModelConfig desk_model(std::uint64_t seed) {
  nn::ModelConfig cfg;
  cfg.hidden = 16;
  cfg.seed = seed;
  return cfg;
}

// ---------------------------------------------------------------------------
// criterion 1: gradient correctness

Outcome criterion_gradients() {
  nn::ModelConfig cfg;
  cfg.hidden = 4;
  cfg.layers = 2;
  cfg.seq_len = 10;
  cfg.use_attention = true;
  cfg.seed = 97;
  const std::size_t batch = 3;

  nn::ModelParams p = nn::ModelParams::init(cfg);
  // Generic parameter point: at Xavier init the attention is nearly uniform
  // and its true gradients sit below the finite-difference noise floor.
  p.visit([&](const std::string& name, Tensor& t, nn::ParamGroup g) {
    if (g == nn::ParamGroup::Attention) {
      for (std::size_t i = 0; i < t.size(); ++i) t[i] *= 4.0;
    }
    if (name.find(".U") != std::string::npos) {
      for (std::size_t i = 0; i < t.size(); ++i) t[i] *= 2.0;
    }
  });

  Rng rng(1001);
  Tensor x({batch, cfg.seq_len, cfg.input_dim});
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(-2.0, 2.0);
  Tensor target({batch, 1});
  for (std::size_t i = 0; i < batch; ++i) target[i] = rng.uniform(85.0, 95.0);

  nn::ForwardCache cache;
  const Tensor pred = nn::model_forward(x, p, &cache);
  const auto mse = nn::mse_loss(pred, target);
  nn::ModelParams grads = nn::backward(p, cache, mse.grad);

  auto loss_at = [&]() {
    return nn::mse_loss(nn::model_forward(x, p), target).loss;
  };

  std::vector<Tensor*> param_slots, grad_slots;
  p.visit([&](const std::string&, Tensor& t, nn::ParamGroup) {
    param_slots.push_back(&t);
  });
  grads.visit([&](const std::string&, Tensor& t, nn::ParamGroup) {
    grad_slots.push_back(&t);
  });

  const double eps = 1e-4;
  double worst = 0.0;
  std::size_t checked = 0;
  for (std::size_t s = 0; s < param_slots.size(); ++s) {
    Tensor& param = *param_slots[s];
    const Tensor& grad = *grad_slots[s];
    for (std::size_t i = 0; i < param.size(); ++i) {
      const double saved = param[i];
      param[i] = saved + eps;
      const double up = loss_at();
      param[i] = saved - eps;
      const double down = loss_at();
      param[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double analytic = grad[i];
      if (std::abs(numeric) < 1e-8 && std::abs(analytic) < 1e-8) continue;
      worst = std::max(worst, std::abs(numeric - analytic) /
                                  std::max(std::abs(numeric),
                                           std::abs(analytic)));
      ++checked;
    }
  }

  return {worst <= 1e-4,
          fmt("max rel err %.3g over %zu params (tol 1e-4)", worst, checked)};
}

// ---------------------------------------------------------------------------
// criterion 2: scalar-oracle equivalence

Outcome criterion_oracle_equivalence() {
  double worst = 0.0;
  for (const bool attention : {true, false}) {
    nn::ModelConfig cfg;
    cfg.hidden = 8;
    cfg.seq_len = 16;
    cfg.use_attention = attention;
    cfg.seed = 1234;
    const nn::ModelParams p = nn::ModelParams::init(cfg);

    const std::size_t batch = 8;
    Rng rng(555);
    Tensor x({batch, cfg.seq_len, cfg.input_dim});
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(-1.0, 1.0);

    const Tensor got = nn::model_forward(x, p);
    const std::vector<double> xv(x.data(), x.data() + x.size());
    const auto want = oracle::model_forward(p, xv, batch);
    for (std::size_t b = 0; b < batch; ++b) {
      worst = std::max(worst, std::abs(got[b] - want[b]));
    }
  }
  return {worst < 1e-9, fmt("max abs diff %.3g (tol 1e-9)", worst)};
}

// ---------------------------------------------------------------------------
// criterion 3: DSP fidelity

Outcome criterion_dsp() {
  std::ostringstream detail;
  bool pass = true;

  // Resampling: 1 Hz sine, 10 s, 86 -> 25 Hz.
  {
    dsp::RawSignal x;
    x.fs = 86.0;
    for (int i = 0; i < 860; ++i) {
      x.samples.push_back(
          std::sin(2.0 * std::numbers::pi * 1.0 * i / 86.0));
    }
    const dsp::RawSignal y = dsp::fourier_resample(x, 25.0);
    double err = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 13; i + 13 < y.samples.size(); ++i) {
      const double want =
          std::sin(2.0 * std::numbers::pi * 1.0 * i / 25.0);
      err += (y.samples[i] - want) * (y.samples[i] - want);
      ++n;
    }
    const double rms = std::sqrt(err / static_cast<double>(n));
    pass = pass && rms < 1e-6;
    detail << fmt("resample rms %.2g (tol 1e-6)", rms);
  }

  // Band-pass probes at the native 86 Hz rate.
  {
    const auto coeffs = dsp::design_bandpass(
        {0.5, 12.0, 4, dsp::FilterKind::BandPass}, 86.0);
    auto probe_gain = [&](double freq, double duration, double edge) {
      std::vector<double> p;
      const auto n = static_cast<std::size_t>(duration * 86.0);
      for (std::size_t i = 0; i < n; ++i) {
        p.push_back(std::sin(2.0 * std::numbers::pi * freq * i / 86.0));
      }
      const auto y = dsp::sosfilt(coeffs, p);
      double peak = 0.0;
      const auto skip = static_cast<std::size_t>(edge * 86.0);
      for (std::size_t i = skip; i + skip < y.size(); ++i) {
        peak = std::max(peak, std::abs(y[i]));
      }
      return 20.0 * std::log10(peak);
    };
    const double low_db = probe_gain(0.05, 200.0, 60.0);
    const double high_db = probe_gain(20.0, 30.0, 5.0);
    const double mid_db = probe_gain(3.0, 60.0, 20.0);
    pass = pass && low_db <= -20.0 && high_db <= -20.0 &&
           std::abs(mid_db) <= 1.0;
    detail << fmt("; gains dB: 0.05Hz %.1f, 20Hz %.1f (<=-20), 3Hz %+.2f "
                  "(within 1)",
                  low_db, high_db, mid_db);
  }
  return {pass, detail.str()};
}

// ---------------------------------------------------------------------------
// criterion 4: oracle closure of the traditional path

Outcome criterion_oracle_closure() {
  synth::SynthConfig base;
  base.duration_s = 300.0;
  base.noise_sd = 0.0;
  base.baseline_wander_amp = 0.0;
  base.holds.depth_lo = 4.0;
  base.holds.depth_hi = 8.0;
  base.holds.duration_lo_s = 25.0;
  base.holds.duration_hi_s = 40.0;
  base.seed = 777;
  const Corpus corpus = build_corpus(base, 9, 1);

  const auto plan = train::subject_split(corpus_subjects(corpus), 42);
  const std::set<std::string> train_set(plan.train_subjects.begin(),
                                        plan.train_subjects.end());
  const std::set<std::string> test_set(plan.test_subjects.begin(),
                                       plan.test_subjects.end());

  std::vector<pipe::PreprocessResult> train_pre;
  for (const auto& pre : corpus.pre) {
    if (train_set.count(pre.normalized.subject_id) > 0) {
      train_pre.push_back(pre);
    }
  }
  const calib::QuadCalib quad = pipe::fit_calibration(train_pre);

  // Window-level predictions against window labels on held-out subjects.
  double abs_sum = 0.0;
  std::size_t n = 0;
  for (const auto& pre : corpus.pre) {
    if (test_set.count(pre.normalized.subject_id) == 0) continue;
    for (const auto& w : pipe::r_windows(pre)) {
      abs_sum += std::abs(calib::predict_traditional(quad, w.r) - w.spo2);
      ++n;
    }
  }
  const double mae = abs_sum / static_cast<double>(n);
  return {mae < 0.5,
          fmt("held-out MAE %.4f over %zu windows (tol 0.5); law (%.3g, "
              "%.3g, %.3g)",
              mae, n, quad.c0, quad.c1, quad.c2)};
}

// ---------------------------------------------------------------------------
// criterion 5: learned model beats the traditional baseline

Outcome criterion_learned_competence() {
  synth::SynthConfig base;  // noise_sd and wander stay at their defaults
  base.duration_s = 150.0;
  base.holds.depth_lo = 4.0;
  base.holds.depth_hi = 10.0;
  base.holds.duration_lo_s = 20.0;
  base.holds.duration_hi_s = 35.0;
  base.seed = 11;
  const Corpus corpus = build_corpus(base, 9, 1);

  const auto plan = train::subject_split(corpus_subjects(corpus), 3);
  const std::set<std::string> train_set(plan.train_subjects.begin(),
                                        plan.train_subjects.end());
  const std::set<std::string> test_set(plan.test_subjects.begin(),
                                       plan.test_subjects.end());
  const train::Dataset train_data = dataset_of(corpus, train_set);

  // Traditional baseline, fitted on the same training subjects and scored
  // through the same trace pipeline.
  std::vector<pipe::PreprocessResult> train_pre;
  for (const auto& pre : corpus.pre) {
    if (train_set.count(pre.normalized.subject_id) > 0) {
      train_pre.push_back(pre);
    }
  }
  const calib::QuadCalib quad = pipe::fit_calibration(train_pre);
  const double traditional_mae =
      pooled_traditional_mae(corpus, quad, test_set);

  const std::uint64_t seeds[3] = {1, 2, 3};
  double model_mae[3] = {0, 0, 0};
  parallel_for(3, 2, [&](std::size_t i) {
    train::TrainConfig cfg;
    cfg.batch = 32;
    cfg.pretrain_epochs = 100;
    cfg.seed = seeds[i];
    const auto result =
        train::pretrain(train_data, nullptr, cfg, desk_model(seeds[i]));
    model_mae[i] = pooled_model_mae(corpus, result.params, test_set);
  });

  const double mean_mae = (model_mae[0] + model_mae[1] + model_mae[2]) / 3.0;
  return {mean_mae <= traditional_mae,
          fmt("model MAE %.4f (seeds: %.4f/%.4f/%.4f) vs traditional %.4f",
              mean_mae, model_mae[0], model_mae[1], model_mae[2],
              traditional_mae)};
}

// ---------------------------------------------------------------------------
// criterion 6: transfer learning beats the non-transferred model

Outcome criterion_transfer() {
  // Domain A: clinical-like, unit gains, low noise.
  synth::SynthConfig domain_a;
  domain_a.duration_s = 120.0;
  domain_a.noise_sd = 0.004;
  domain_a.baseline_wander_amp = 0.01;
  domain_a.holds.depth_lo = 4.0;
  domain_a.holds.depth_hi = 10.0;
  domain_a.seed = 101;
  const Corpus corpus_a = build_corpus(domain_a, 6, 1);
  const auto subjects_a = corpus_subjects(corpus_a);
  const train::Dataset data_a = dataset_of(
      corpus_a, {subjects_a.begin(), subjects_a.end()});

  // Domain B: wearable-like at native 25 Hz with shifted channel gains and
  // higher sensor noise; the additive noise is post-gain, so the gain shift
  // changes the per-channel SNR of the normalized ratios. Two sessions per
  // subject, mirroring multi-session wearable collection.
  synth::SynthConfig domain_b;
  domain_b.fs = 25.0;
  domain_b.duration_s = 100.0;
  domain_b.gain_red = 2.5;
  domain_b.gain_ir = 0.6;
  domain_b.noise_sd = 0.012;
  domain_b.baseline_wander_amp = 0.035;
  domain_b.holds.depth_lo = 4.0;
  domain_b.holds.depth_hi = 10.0;
  domain_b.holds.duration_lo_s = 18.0;
  domain_b.holds.duration_hi_s = 28.0;
  domain_b.device = "wearable";
  domain_b.seed = 201;
  const Corpus corpus_b = build_corpus(domain_b, 4, 2);
  const auto plans = train::loso(corpus_subjects(corpus_b));

  const std::uint64_t seeds[3] = {1, 2, 3};
  nn::ModelConfig model_cfg = desk_model(0);
  model_cfg.hidden = 12;

  // Phase 1: pretrain once per seed.
  std::vector<nn::ModelParams> pretrained;
  pretrained.reserve(3);
  for (int i = 0; i < 3; ++i) {
    pretrained.push_back(nn::ModelParams::shaped(model_cfg));
  }
  parallel_for(3, 2, [&](std::size_t i) {
    train::TrainConfig pre_cfg;
    pre_cfg.batch = 32;
    pre_cfg.pretrain_epochs = 100;
    pre_cfg.seed = seeds[i];
    nn::ModelConfig mc = model_cfg;
    mc.seed = seeds[i];
    pretrained[i] = train::pretrain(data_a, nullptr, pre_cfg, mc).params;
  });

  // Phase 2: every (seed, LOSO leg) fine-tune is an independent job.
  const std::size_t legs = plans.size();
  std::vector<Pooled> pre_pooled(3 * legs), ft_pooled(3 * legs);
  parallel_for(3 * legs, 2, [&](std::size_t job) {
    const std::size_t i = job / legs;
    const std::size_t leg = job % legs;
    const std::set<std::string> fit_set(plans[leg].train_subjects.begin(),
                                        plans[leg].train_subjects.end());
    const std::string& held_out = plans[leg].test_subjects.front();

    train::TrainConfig ft_cfg;
    ft_cfg.batch = 32;
    ft_cfg.finetune_epochs = 150;
    ft_cfg.finetune_stage1_epochs = 50;
    ft_cfg.seed = mix_seed(seeds[i], 900 + leg);
    const auto tuned = train::finetune(
        pretrained[i], dataset_of(corpus_b, fit_set), nullptr, ft_cfg);

    for (const auto& pre : corpus_b.pre) {
      if (pre.normalized.subject_id != held_out) continue;
      pre_pooled[job].add(
          pipe::predict_model_trace(pre.normalized, pretrained[i]));
      ft_pooled[job].add(
          pipe::predict_model_trace(pre.normalized, tuned.params));
    }
  });

  bool pass = true;
  std::ostringstream detail;
  for (std::size_t i = 0; i < 3; ++i) {
    Pooled pre_all, ft_all;
    for (std::size_t leg = 0; leg < legs; ++leg) {
      pre_all.abs_sum += pre_pooled[i * legs + leg].abs_sum;
      pre_all.n += pre_pooled[i * legs + leg].n;
      ft_all.abs_sum += ft_pooled[i * legs + leg].abs_sum;
      ft_all.n += ft_pooled[i * legs + leg].n;
    }
    pass = pass && ft_all.mae() < pre_all.mae();
    detail << fmt("%sseed %d: transfer %.4f vs pretrained %.4f",
                  i == 0 ? "" : "; ", static_cast<int>(seeds[i]),
                  ft_all.mae(), pre_all.mae());
  }
  return {pass, detail.str()};
}

// ---------------------------------------------------------------------------
// criterion 7: instant-zone detector vs brute force

Outcome criterion_zone_detector() {
  Rng rng(31337);
  std::size_t traces = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 5 + rng.uniform_index(196);
    std::vector<double> y(n);
    double level = rng.uniform(80.0, 99.0);
    for (std::size_t i = 0; i < n; ++i) {
      if (rng.uniform() < 0.15) level += rng.uniform(-4.0, 4.0);
      level = std::clamp(level + rng.uniform(-0.4, 0.4), 70.0, 100.0);
      y[i] = level;
    }

    const auto zones = eval::detect_instant_zones(y);
    const auto covered = eval::instant_coverage(n, zones);

    std::vector<bool> want(n, false);
    if (n >= 12) {
      for (std::size_t i = 0; i + 11 <= n - 1; ++i) {
        double tv = 0.0;
        for (std::size_t j = i; j <= i + 10; ++j) {
          tv += std::abs(y[j + 1] - y[j]);
        }
        if (tv >= 3.0) {
          for (std::size_t k = i; k <= i + 11; ++k) want[k] = true;
        }
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (covered[i] != want[i]) {
        return {false, fmt("mismatch on trace %d at index %zu", trial, i)};
      }
    }
    ++traces;
  }

  // Boundary: TV exactly 3 is flagged.
  std::vector<double> y(30, 97.0);
  for (std::size_t i = 15; i < y.size(); ++i) y[i] = 94.0;
  const bool boundary = !eval::detect_instant_zones(y, 3.0, 10).empty();
  return {boundary, fmt("%zu random traces exact; TV==3 flagged: %s", traces,
                        boundary ? "yes" : "no")};
}

// ---------------------------------------------------------------------------
// criterion 8: freezing contract across the two fine-tuning stages

Outcome criterion_freezing() {
  synth::SynthConfig base;
  base.duration_s = 90.0;
  base.holds.count = 2;
  base.holds.duration_lo_s = 15.0;
  base.holds.duration_hi_s = 25.0;
  base.seed = 88;
  const Corpus corpus = build_corpus(base, 3, 1);
  const auto subjects = corpus_subjects(corpus);
  const train::Dataset data =
      dataset_of(corpus, {subjects.begin(), subjects.end()});

  train::TrainConfig pre_cfg;
  pre_cfg.batch = 32;
  pre_cfg.pretrain_epochs = 2;
  pre_cfg.seed = 5;
  nn::ModelConfig mc = desk_model(5);
  mc.hidden = 8;
  const auto pretrained = train::pretrain(data, nullptr, pre_cfg, mc);

  const auto h_bilstm = pretrained.params.group_hash(nn::ParamGroup::Bilstm);
  const auto h_attn = pretrained.params.group_hash(nn::ParamGroup::Attention);

  train::TrainConfig ft_cfg;
  ft_cfg.batch = 32;
  ft_cfg.finetune_epochs = 6;
  ft_cfg.finetune_stage1_epochs = 3;
  ft_cfg.seed = 6;
  const auto tuned = train::finetune(pretrained.params, data, nullptr, ft_cfg);

  const bool stage1_ok =
      tuned.stage1_params.has_value() &&
      tuned.stage1_params->group_hash(nn::ParamGroup::Bilstm) == h_bilstm &&
      tuned.stage1_params->group_hash(nn::ParamGroup::Attention) == h_attn;
  const bool stage2_ok =
      tuned.params.group_hash(nn::ParamGroup::Attention) == h_attn &&
      tuned.params.group_hash(nn::ParamGroup::Bilstm) != h_bilstm;

  return {stage1_ok && stage2_ok,
          fmt("stage 1 froze bilstm+attention: %s; stage 2 moved bilstm, "
              "kept attention: %s",
              stage1_ok ? "yes" : "NO", stage2_ok ? "yes" : "NO")};
}

// ---------------------------------------------------------------------------
// criterion 9: weighted sampler marginals

Outcome criterion_sampler() {
  std::vector<double> labels;
  for (int i = 0; i < 90; ++i) labels.push_back(98.0);
  for (int i = 0; i < 10; ++i) labels.push_back(76.0);
  train::WeightedSampler sampler(labels, 10, 7);

  std::size_t minority = 0;
  const std::size_t draws = 100000;
  for (std::size_t i = 0; i < draws; ++i) {
    if (labels[sampler.draw()] < 90.0) ++minority;
  }
  const double share = static_cast<double>(minority) / draws;
  return {share > 0.47 && share < 0.53,
          fmt("minority-bin share %.4f (want 0.50 +/- 0.03)", share)};
}

// ---------------------------------------------------------------------------
// criterion 10: bitwise reproducibility

Outcome criterion_reproducibility() {
  const fs::path tmp =
      fs::temp_directory_path() /
      ("pulseox_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(tmp);
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)),
                       std::istreambuf_iterator<char>());
  };

  bool pass = true;
  std::ostringstream detail;

  // Session generation.
  synth::SynthConfig base;
  base.duration_s = 90.0;
  base.holds.count = 2;
  base.holds.duration_lo_s = 15.0;
  base.holds.duration_hi_s = 25.0;
  base.seed = 99;
  io::write_session(tmp / "a.session", synth::generate_session(base));
  io::write_session(tmp / "b.session", synth::generate_session(base));
  const bool synth_ok = slurp(tmp / "a.session") == slurp(tmp / "b.session");
  pass = pass && synth_ok;
  detail << "session bytes " << (synth_ok ? "identical" : "DIFFER");

  // Training: full pipeline twice with one seed.
  const Corpus corpus = build_corpus(base, 3, 1);
  const auto subjects = corpus_subjects(corpus);
  const train::Dataset data =
      dataset_of(corpus, {subjects.begin(), subjects.end()});
  for (int round = 0; round < 2; ++round) {
    train::TrainConfig cfg;
    cfg.batch = 32;
    cfg.pretrain_epochs = 3;
    cfg.finetune_epochs = 4;
    cfg.finetune_stage1_epochs = 2;
    cfg.seed = 17;
    nn::ModelConfig mc = desk_model(17);
    mc.hidden = 8;
    const auto pre = train::pretrain(data, nullptr, cfg, mc);
    const auto tuned = train::finetune(pre.params, data, nullptr, cfg);
    io::Checkpoint ckpt;
    ckpt.model = tuned.params;
    io::save_checkpoint(tmp / ("ckpt" + std::to_string(round) + ".bin"),
                        ckpt);

    const auto trace =
        pipe::predict_model_trace(corpus.pre[0].normalized, tuned.params);
    const auto report = eval::evaluate(trace);
    std::ofstream(tmp / ("report" + std::to_string(round) + ".json"))
        << eval::report_to_json(report);
  }
  const bool ckpt_ok = slurp(tmp / "ckpt0.bin") == slurp(tmp / "ckpt1.bin");
  const bool report_ok =
      slurp(tmp / "report0.json") == slurp(tmp / "report1.json");
  pass = pass && ckpt_ok && report_ok;
  detail << "; checkpoints " << (ckpt_ok ? "identical" : "DIFFER");
  detail << "; reports " << (report_ok ? "identical" : "DIFFER");

  fs::remove_all(tmp);
  return {pass, detail.str()};
}

// ---------------------------------------------------------------------------

struct Criterion {
  int id;
  const char* name;
  double time_limit_s;  // 0 = no stated limit
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  if (argc > 1) only = std::atoi(argv[1]);

  const std::vector<Criterion> criteria = {
      {1, "gradient-correctness", 30.0, criterion_gradients},
      {2, "scalar-oracle-equivalence", 0.0, criterion_oracle_equivalence},
      {3, "dsp-fidelity", 10.0, criterion_dsp},
      {4, "oracle-closure-traditional", 60.0, criterion_oracle_closure},
      {5, "learned-model-competence", 1200.0, criterion_learned_competence},
      {6, "transfer-learning-ordering", 1800.0, criterion_transfer},
      {7, "instant-zone-detector", 10.0, criterion_zone_detector},
      {8, "freezing-contract", 0.0, criterion_freezing},
      {9, "weighted-sampler", 0.0, criterion_sampler},
      {10, "reproducibility", 0.0, criterion_reproducibility},
  };

  int failures = 0;
  for (const auto& criterion : criteria) {
    if (only != 0 && criterion.id != only) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = criterion.run();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                      start)
            .count();
    bool pass = outcome.pass;
    std::string note = outcome.detail;
    if (criterion.time_limit_s > 0.0 && seconds > criterion.time_limit_s) {
      pass = false;
      note += fmt(" [runtime %.1fs exceeds %.0fs limit]", seconds,
                  criterion.time_limit_s);
    }
    std::printf("[%s] %02d %-28s %7.1fs  %s\n", pass ? "PASS" : "FAIL",
                criterion.id, criterion.name, seconds, note.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
  }
  return failures;
}
