#include "pulseox/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <memory>
#include <numeric>

namespace pulseox::train {

namespace {

// Fixed stream ids for deriving independent RNG streams from one seed.
constexpr std::uint64_t kStreamOrder = 1;
constexpr std::uint64_t kStreamSampler = 2;

void gather_rows(const Dataset& data, std::span<const std::size_t> idx,
                 Tensor& xb, Tensor& yb) {
  const std::size_t row = data.x.dim(1) * data.x.dim(2);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    std::memcpy(xb.data() + i * row, data.x.data() + idx[i] * row,
                row * sizeof(double));
    yb[i] = data.y[idx[i]];
  }
}

struct EvalOut {
  double loss = 0.0;
  double mae = 0.0;
};

EvalOut eval_on(const nn::ModelParams& params, const Dataset& data,
                std::size_t batch) {
  const std::vector<double> preds = predict_raw(params, data, batch);
  EvalOut out;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const double d = preds[i] - data.y[i];
    out.loss += d * d;
    out.mae += std::abs(d);
  }
  const double n = static_cast<double>(preds.size());
  out.loss /= n;
  out.mae /= n;
  return out;
}

// Epoch index order: either a seeded shuffle of 0..N-1 or N weighted draws.
std::vector<std::size_t> epoch_order(std::size_t n, bool weighted,
                                     WeightedSampler* sampler, Rng& order_rng,
                                     bool shuffle) {
  std::vector<std::size_t> order(n);
  if (weighted) {
    for (std::size_t i = 0; i < n; ++i) order[i] = sampler->draw();
    return order;
  }
  std::iota(order.begin(), order.end(), 0);
  if (shuffle) order_rng.shuffle(order);
  return order;
}

// Runs `epochs` epochs of minibatch MSE + Adam on the given trainable set.
// History epochs are numbered starting at epoch_base + 1.
void run_phase(nn::ModelParams& params, const Dataset& data,
               const Dataset* val, std::size_t epochs, std::size_t epoch_base,
               bool weighted, const TrainConfig& cfg, Rng& order_rng,
               WeightedSampler* sampler, std::vector<EpochStats>& history,
               std::size_t& adam_steps) {
  if (data.size() == 0) throw InsufficientDataError("empty training set");
  const std::size_t n = data.size();
  const std::size_t batch = std::min(cfg.batch, n);

  nn::AdamState adam = nn::AdamState::init(params);
  const nn::AdamConfig adam_cfg{cfg.lr, 0.9, 0.999, 1e-8};

  // With only the FC layer trainable everything below it is constant, so
  // the pooled features can be computed once and reused every epoch. The
  // per-row arithmetic is identical to the full forward pass.
  const bool fc_only = params.trainable.fc && !params.trainable.bilstm &&
                       !params.trainable.attention;
  Tensor pooled_all;
  const std::size_t feat = params.config.feature_dim();
  if (fc_only) {
    pooled_all = Tensor({n, feat});
    const std::size_t row = data.x.dim(1) * data.x.dim(2);
    for (std::size_t at = 0; at < n; at += batch) {
      const std::size_t b = std::min(batch, n - at);
      Tensor xcur({b, data.x.dim(1), data.x.dim(2)});
      std::memcpy(xcur.data(), data.x.data() + at * row,
                  b * row * sizeof(double));
      const Tensor hseq = nn::bilstm_forward(xcur, params);
      const Tensor pooled = nn::attention_pool(hseq, params);
      std::memcpy(pooled_all.data() + at * feat, pooled.data(),
                  b * feat * sizeof(double));
    }
  }

  for (std::size_t e = 0; e < epochs; ++e) {
    const auto order =
        epoch_order(n, weighted, sampler, order_rng, cfg.shuffle);
    double loss_sum = 0.0;
    double mae_sum = 0.0;

    for (std::size_t at = 0; at < n; at += batch) {
      const std::size_t b = std::min(batch, n - at);
      const std::span<const std::size_t> idx(order.data() + at, b);

      Tensor pred({b, 1});
      Tensor yb({b, 1});
      if (fc_only) {
        Tensor pb({b, feat});
        for (std::size_t i = 0; i < b; ++i) {
          std::memcpy(pb.data() + i * feat, pooled_all.data() + idx[i] * feat,
                      feat * sizeof(double));
          yb[i] = data.y[idx[i]];
        }
        matmul_nn(pb.data(), params.Wfc.data(), pred.data(), b, feat, 1);
        for (std::size_t i = 0; i < b; ++i) pred[i] += params.bfc[0];

        const nn::MseResult mse = nn::mse_loss(pred, yb);
        nn::ModelParams grads = nn::ModelParams::zeros_like(params);
        matmul_tn(pb.data(), mse.grad.data(), grads.Wfc.data(), feat, b, 1,
                  true);
        for (std::size_t i = 0; i < b; ++i) grads.bfc[0] += mse.grad[i];
        nn::adam_step(params, grads, adam, adam_cfg);
        ++adam_steps;

        loss_sum += mse.loss * static_cast<double>(b);
        for (std::size_t i = 0; i < b; ++i) mae_sum += std::abs(pred[i] - yb[i]);
        continue;
      }

      Tensor xbf({b, data.x.dim(1), data.x.dim(2)});
      gather_rows(data, idx, xbf, yb);
      nn::ForwardCache cache;
      pred = nn::model_forward(xbf, params, &cache);
      const nn::MseResult mse = nn::mse_loss(pred, yb);
      const nn::ModelParams grads = nn::backward(params, cache, mse.grad);
      nn::adam_step(params, grads, adam, adam_cfg);
      ++adam_steps;

      loss_sum += mse.loss * static_cast<double>(b);
      for (std::size_t i = 0; i < b; ++i) mae_sum += std::abs(pred[i] - yb[i]);
    }

    EpochStats row;
    row.epoch = epoch_base + e + 1;
    row.split = "train";
    row.loss = loss_sum / static_cast<double>(n);
    row.mae = mae_sum / static_cast<double>(n);
    history.push_back(row);

    if (val != nullptr && val->size() > 0) {
      const EvalOut v = eval_on(params, *val, cfg.batch);
      history.push_back({row.epoch, "val", v.loss, v.mae});
    }
  }
}

std::size_t best_val_epoch(std::span<const EpochStats> history) {
  std::size_t best = 0;
  double best_mae = std::numeric_limits<double>::infinity();
  for (const EpochStats& row : history) {
    if (row.split == "val" && row.mae < best_mae) {
      best_mae = row.mae;
      best = row.epoch;
    }
  }
  return best;
}

}  // namespace

void TrainConfig::validate() const {
  if (batch < 1) throw InvalidSpecError("batch size must be >= 1");
  if (finetune_stage1_epochs >= finetune_epochs) {
    throw InvalidSpecError(
        "finetune_stage1_epochs must be < finetune_epochs");
  }
  if (bins < 1) throw InvalidSpecError("bins must be >= 1");
}

SplitPlan subject_split(std::vector<std::string> subjects, std::uint64_t seed,
                        double test_fraction) {
  if (subjects.size() < 5) {
    throw InsufficientDataError("subject_split needs at least 5 subjects");
  }
  Rng rng(mix_seed(seed, 0x511257));
  rng.shuffle(subjects);
  const std::size_t n = subjects.size();
  const std::size_t test_n = std::max<std::size_t>(
      1, static_cast<std::size_t>(
             std::llround(static_cast<double>(n) * test_fraction)));

  SplitPlan plan;
  plan.test_subjects.assign(subjects.begin(), subjects.begin() + test_n);
  plan.train_subjects.assign(subjects.begin() + test_n, subjects.end());
  std::sort(plan.test_subjects.begin(), plan.test_subjects.end());
  std::sort(plan.train_subjects.begin(), plan.train_subjects.end());
  return plan;
}

std::vector<std::vector<std::string>> kfold(std::vector<std::string> subjects,
                                            std::size_t k,
                                            std::uint64_t seed) {
  if (k < 2) throw InvalidSpecError("kfold needs k >= 2");
  if (subjects.size() < k) {
    throw InsufficientDataError("kfold needs at least k subjects");
  }
  Rng rng(mix_seed(seed, 0xf01d5));
  rng.shuffle(subjects);
  std::vector<std::vector<std::string>> folds(k);
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    folds[i % k].push_back(subjects[i]);
  }
  for (auto& fold : folds) std::sort(fold.begin(), fold.end());
  return folds;
}

std::vector<SplitPlan> loso(std::vector<std::string> subjects) {
  if (subjects.size() < 2) {
    throw InsufficientDataError("loso needs at least 2 subjects");
  }
  std::sort(subjects.begin(), subjects.end());
  std::vector<SplitPlan> plans;
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    SplitPlan plan;
    plan.test_subjects = {subjects[i]};
    for (std::size_t j = 0; j < subjects.size(); ++j) {
      if (j != i) plan.train_subjects.push_back(subjects[j]);
    }
    plans.push_back(std::move(plan));
  }
  return plans;
}

WeightedSampler::WeightedSampler(std::span<const double> labels,
                                 std::size_t bins, std::uint64_t seed,
                                 double lo, double hi)
    : rng_(mix_seed(seed, kStreamSampler)) {
  if (labels.empty()) {
    throw InsufficientDataError("weighted_sampler: no labels");
  }
  if (bins < 1) throw InvalidSpecError("weighted_sampler: bins must be >= 1");

  const double width = (hi - lo) / static_cast<double>(bins);
  auto bin_of = [&](double label) {
    const auto raw = static_cast<long long>(std::floor((label - lo) / width));
    return static_cast<std::size_t>(
        std::clamp<long long>(raw, 0, static_cast<long long>(bins) - 1));
  };

  std::vector<std::size_t> counts(bins, 0);
  for (double label : labels) counts[bin_of(label)]++;

  weights_.resize(labels.size());
  cumulative_.resize(labels.size());
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    weights_[i] = 1.0 / static_cast<double>(counts[bin_of(labels[i])]);
    total += weights_[i];
    cumulative_[i] = total;
  }
}

std::size_t WeightedSampler::draw() {
  const double u = rng_.uniform() * cumulative_.back();
  const auto it =
      std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  const std::size_t i =
      static_cast<std::size_t>(std::distance(cumulative_.begin(), it));
  return std::min(i, cumulative_.size() - 1);
}

std::vector<double> Dataset::labels() const {
  std::vector<double> out(size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = y[i];
  return out;
}

std::vector<std::string> Dataset::unique_subjects() const {
  std::vector<std::string> out(subject);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

Dataset Dataset::from_segments(std::span<const seg::SegmentSet> sets) {
  std::size_t n = 0;
  for (const auto& s : sets) n += s.segments.size();
  if (n == 0) throw InsufficientDataError("no segments");

  std::size_t t_len = 0, chans = 0;
  for (const auto& s : sets) {
    if (!s.segments.empty()) {
      t_len = s.segments.front().window.dim(0);
      chans = s.segments.front().window.dim(1);
      break;
    }
  }

  Dataset out;
  out.x = Tensor({n, t_len, chans});
  out.y = Tensor({n, 1});
  out.subject.reserve(n);
  out.t_end.reserve(n);
  std::size_t at = 0;
  for (const auto& s : sets) {
    for (const auto& segment : s.segments) {
      if (segment.window.dim(0) != t_len || segment.window.dim(1) != chans) {
        throw ShapeError("segments have inconsistent window shapes");
      }
      std::memcpy(out.x.data() + at * t_len * chans, segment.window.data(),
                  t_len * chans * sizeof(double));
      out.y[at] = segment.label;
      out.subject.push_back(segment.subject_id);
      out.t_end.push_back(segment.t_end);
      ++at;
    }
  }
  return out;
}

Dataset Dataset::subset_by_subjects(const std::set<std::string>& keep) const {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < size(); ++i) {
    if (keep.count(subject[i]) > 0) idx.push_back(i);
  }
  Dataset out;
  const std::size_t t_len = x.dim(1), chans = x.dim(2);
  out.x = Tensor({idx.size(), t_len, chans});
  out.y = Tensor({idx.size(), 1});
  for (std::size_t i = 0; i < idx.size(); ++i) {
    std::memcpy(out.x.data() + i * t_len * chans,
                x.data() + idx[i] * t_len * chans,
                t_len * chans * sizeof(double));
    out.y[i] = y[idx[i]];
    out.subject.push_back(subject[idx[i]]);
    out.t_end.push_back(t_end[idx[i]]);
  }
  return out;
}

TrainResult pretrain(const Dataset& train_data, const Dataset* val,
                     const TrainConfig& cfg,
                     const nn::ModelConfig& model_cfg) {
  cfg.validate();
  TrainResult out;
  out.params = nn::ModelParams::init(model_cfg);
  out.params.trainable = nn::TrainableFlags::all();

  Rng order_rng(mix_seed(cfg.seed, kStreamOrder));
  std::unique_ptr<WeightedSampler> sampler;
  if (cfg.weighted_pretrain) {
    sampler = std::make_unique<WeightedSampler>(train_data.labels(), cfg.bins,
                                                cfg.seed);
  }
  run_phase(out.params, train_data, val, cfg.pretrain_epochs, 0,
            cfg.weighted_pretrain, cfg, order_rng, sampler.get(),
            out.history, out.adam_steps);
  out.best_epoch = best_val_epoch(out.history);
  return out;
}

TrainResult finetune(const nn::ModelParams& pretrained,
                     const Dataset& train_data, const Dataset* val,
                     const TrainConfig& cfg) {
  cfg.validate();
  TrainResult out;
  out.params = pretrained;

  Rng order_rng(mix_seed(cfg.seed, kStreamOrder));
  WeightedSampler sampler(train_data.labels(), cfg.bins, cfg.seed);

  // Stage 1: FC only.
  out.params.trainable = nn::TrainableFlags::fc_only();
  run_phase(out.params, train_data, val, cfg.finetune_stage1_epochs, 0,
            /*weighted=*/true, cfg, order_rng, &sampler, out.history,
            out.adam_steps);
  out.stage1_params = out.params;

  // Stage 2: unfreeze the BiLSTM; attention stays frozen.
  out.params.trainable = nn::TrainableFlags::bilstm_and_fc();
  run_phase(out.params, train_data, val,
            cfg.finetune_epochs - cfg.finetune_stage1_epochs,
            cfg.finetune_stage1_epochs, /*weighted=*/true, cfg, order_rng,
            &sampler, out.history, out.adam_steps);

  out.best_epoch = best_val_epoch(out.history);
  return out;
}

std::vector<double> predict_raw(const nn::ModelParams& params,
                                const Dataset& data, std::size_t batch) {
  const std::size_t n = data.size();
  std::vector<double> preds(n);
  if (n == 0) return preds;
  const std::size_t t_len = data.x.dim(1), chans = data.x.dim(2);
  for (std::size_t at = 0; at < n; at += batch) {
    const std::size_t b = std::min(batch, n - at);
    Tensor xb({b, t_len, chans});
    std::memcpy(xb.data(), data.x.data() + at * t_len * chans,
                b * t_len * chans * sizeof(double));
    const Tensor pred = nn::model_forward(xb, params);
    for (std::size_t i = 0; i < b; ++i) preds[at + i] = pred[i];
  }
  return preds;
}

void write_history_csv(const std::filesystem::path& path,
                       std::span<const EpochStats> history) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open history file: " + path.string());
  out << "epoch,split,loss,mae\n";
  char buf[160];
  for (const EpochStats& row : history) {
    std::snprintf(buf, sizeof(buf), "%zu,%s,%.17g,%.17g\n", row.epoch,
                  row.split.c_str(), row.loss, row.mae);
    out << buf;
  }
}

}  // namespace pulseox::train
