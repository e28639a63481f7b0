#include "pulseox/optim.hpp"

#include <cmath>
#include <vector>

namespace pulseox::nn {

namespace {

struct Slot {
  Tensor* t;
  ParamGroup group;
};

std::vector<Slot> collect(ModelParams& p) {
  std::vector<Slot> out;
  p.visit([&](const std::string&, Tensor& t, ParamGroup g) {
    out.push_back({&t, g});
  });
  return out;
}

}  // namespace

MseResult mse_loss(const Tensor& pred, const Tensor& target) {
  if (!pred.same_shape(target) || pred.empty()) {
    throw ShapeError("mse_loss: shapes must match and be non-empty");
  }
  const double inv_n = 1.0 / static_cast<double>(pred.size());
  MseResult out;
  out.grad = Tensor(pred.shape());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    out.loss += d * d * inv_n;
    out.grad[i] = 2.0 * d * inv_n;
  }
  return out;
}

AdamState AdamState::init(const ModelParams& params) {
  return {ModelParams::zeros_like(params), ModelParams::zeros_like(params), 0};
}

void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state,
               const AdamConfig& cfg) {
  auto ps = collect(params);
  auto gs = collect(const_cast<ModelParams&>(grads));
  auto ms = collect(state.m);
  auto vs = collect(state.v);
  if (ps.size() != gs.size() || ps.size() != ms.size() ||
      ps.size() != vs.size()) {
    throw ShapeError("adam_step: parameter/gradient layouts differ");
  }

  state.step += 1;
  const double bc1 =
      1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 =
      1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));

  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (!params.trainable.enabled(ps[i].group)) continue;
    Tensor& p = *ps[i].t;
    const Tensor& g = *gs[i].t;
    Tensor& m = *ms[i].t;
    Tensor& v = *vs[i].t;
    if (!p.same_shape(g) || !p.same_shape(m) || !p.same_shape(v)) {
      throw ShapeError("adam_step: tensor shape mismatch");
    }
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g[j];
      v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      p[j] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

}  // namespace pulseox::nn
