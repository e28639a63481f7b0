#include "pulseox/model.hpp"

#include <cmath>
#include <cstring>

#include "pulseox/hash.hpp"
#include "pulseox/rng.hpp"

namespace pulseox::nn {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// (B,T,C) <-> (T,B,C): swap the first two axes.
Tensor swap01(const Tensor& x) {
  const std::size_t d0 = x.dim(0), d1 = x.dim(1), d2 = x.dim(2);
  Tensor out({d1, d0, d2});
  for (std::size_t i = 0; i < d0; ++i) {
    for (std::size_t j = 0; j < d1; ++j) {
      std::memcpy(&out.data()[(j * d0 + i) * d2], &x.data()[(i * d1 + j) * d2],
                  d2 * sizeof(double));
    }
  }
  return out;
}

// x·W + b over all rows at once.
Tensor project_with_bias(const double* x, std::size_t rows, std::size_t in,
                         const Tensor& w, const Tensor& b) {
  Tensor out({rows, w.dim(1)});
  matmul_nn(x, w.data(), out.data(), rows, in, w.dim(1));
  const std::size_t h = w.dim(1);
  for (std::size_t r = 0; r < rows; ++r) {
    double* row = out.data() + r * h;
    for (std::size_t j = 0; j < h; ++j) row[j] += b[j];
  }
  return out;
}

// Shared elementwise LSTM cell body. pre_* hold full pre-activations and are
// overwritten with the post-activation gate values.
void cell_body(double* pre_i, double* pre_f, double* pre_g, double* pre_o,
               const double* c_prev, double* c_out, double* h_out,
               std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) {
    const double ig = sigmoid(pre_i[j]);
    const double fg = sigmoid(pre_f[j]);
    const double gg = std::tanh(pre_g[j]);
    const double og = sigmoid(pre_o[j]);
    const double c = fg * (c_prev ? c_prev[j] : 0.0) + ig * gg;
    pre_i[j] = ig;
    pre_f[j] = fg;
    pre_g[j] = gg;
    pre_o[j] = og;
    c_out[j] = c;
    h_out[j] = og * std::tanh(c);
  }
}

struct StepScratch {
  Tensor pre_i, pre_f, pre_g, pre_o;  // (B, H)
  void resize(std::size_t b, std::size_t h) {
    pre_i = Tensor({b, h});
    pre_f = Tensor({b, h});
    pre_g = Tensor({b, h});
    pre_o = Tensor({b, h});
  }
};

// One direction of one layer over the whole sequence. input is (T,B,in);
// gate/state caches land at their original time indices.
void lstm_dir_forward(const Tensor& input, const GateWeights& w, bool reverse,
                      DirCache& dc, StepScratch& scratch) {
  const std::size_t t_len = input.dim(0);
  const std::size_t batch = input.dim(1);
  const std::size_t in_dim = input.dim(2);
  const std::size_t hidden = w.Ui.dim(0);
  const std::size_t rows = t_len * batch;

  const Tensor xw_i = project_with_bias(input.data(), rows, in_dim, w.Wi, w.bi);
  const Tensor xw_f = project_with_bias(input.data(), rows, in_dim, w.Wf, w.bf);
  const Tensor xw_g = project_with_bias(input.data(), rows, in_dim, w.Wg, w.bg);
  const Tensor xw_o = project_with_bias(input.data(), rows, in_dim, w.Wo, w.bo);

  dc.gate_i = Tensor({t_len, batch, hidden});
  dc.gate_f = Tensor({t_len, batch, hidden});
  dc.gate_g = Tensor({t_len, batch, hidden});
  dc.gate_o = Tensor({t_len, batch, hidden});
  dc.c = Tensor({t_len, batch, hidden});
  dc.h = Tensor({t_len, batch, hidden});
  scratch.resize(batch, hidden);

  const std::size_t slab = batch * hidden;
  for (std::size_t s = 0; s < t_len; ++s) {
    const std::size_t t = reverse ? t_len - 1 - s : s;
    const double* h_prev = nullptr;
    const double* c_prev = nullptr;
    if (s > 0) {
      const std::size_t t_prev = reverse ? t + 1 : t - 1;
      h_prev = dc.h.data() + t_prev * slab;
      c_prev = dc.c.data() + t_prev * slab;
    }

    std::memcpy(scratch.pre_i.data(), xw_i.data() + t * slab,
                slab * sizeof(double));
    std::memcpy(scratch.pre_f.data(), xw_f.data() + t * slab,
                slab * sizeof(double));
    std::memcpy(scratch.pre_g.data(), xw_g.data() + t * slab,
                slab * sizeof(double));
    std::memcpy(scratch.pre_o.data(), xw_o.data() + t * slab,
                slab * sizeof(double));
    if (h_prev) {
      matmul_nn(h_prev, w.Ui.data(), scratch.pre_i.data(), batch, hidden,
                hidden, true);
      matmul_nn(h_prev, w.Uf.data(), scratch.pre_f.data(), batch, hidden,
                hidden, true);
      matmul_nn(h_prev, w.Ug.data(), scratch.pre_g.data(), batch, hidden,
                hidden, true);
      matmul_nn(h_prev, w.Uo.data(), scratch.pre_o.data(), batch, hidden,
                hidden, true);
    }

    cell_body(scratch.pre_i.data(), scratch.pre_f.data(),
              scratch.pre_g.data(), scratch.pre_o.data(), c_prev,
              dc.c.data() + t * slab, dc.h.data() + t * slab, slab);
    std::memcpy(dc.gate_i.data() + t * slab, scratch.pre_i.data(),
                slab * sizeof(double));
    std::memcpy(dc.gate_f.data() + t * slab, scratch.pre_f.data(),
                slab * sizeof(double));
    std::memcpy(dc.gate_g.data() + t * slab, scratch.pre_g.data(),
                slab * sizeof(double));
    std::memcpy(dc.gate_o.data() + t * slab, scratch.pre_o.data(),
                slab * sizeof(double));
  }
}

struct DirGrads {
  Tensor da_i, da_f, da_g, da_o;  // (T, B, H)
  Tensor dh_carry, dc_carry, dh_sum;  // (B, H)
  void resize(std::size_t t, std::size_t b, std::size_t h) {
    da_i = Tensor({t, b, h});
    da_f = Tensor({t, b, h});
    da_g = Tensor({t, b, h});
    da_o = Tensor({t, b, h});
    dh_carry = Tensor({b, h});
    dc_carry = Tensor({b, h});
    dh_sum = Tensor({b, h});
  }
};

// Backward through one direction. dout is the (T,B,2H) gradient of the
// concatenated layer output; dir_offset selects this direction's half.
// Accumulates weight gradients into gw_grad; adds input gradients into
// dinput when it is non-null.
void lstm_dir_backward(const Tensor& input, const GateWeights& w,
                       const DirCache& dc, bool reverse, const Tensor& dout,
                       std::size_t dir_offset, GateWeights& gw_grad,
                       Tensor* dinput, DirGrads& g) {
  const std::size_t t_len = input.dim(0);
  const std::size_t batch = input.dim(1);
  const std::size_t in_dim = input.dim(2);
  const std::size_t hidden = w.Ui.dim(0);
  const std::size_t slab = batch * hidden;
  const std::size_t out_width = dout.dim(2);

  g.resize(t_len, batch, hidden);
  g.dh_carry.zero();
  g.dc_carry.zero();

  for (std::size_t s = t_len; s-- > 0;) {
    const std::size_t t = reverse ? t_len - 1 - s : s;
    const std::size_t t_prev = reverse ? t + 1 : t - 1;  // valid when s > 0
    const double* c_prev = s > 0 ? dc.c.data() + t_prev * slab : nullptr;

    const double* gi = dc.gate_i.data() + t * slab;
    const double* gf = dc.gate_f.data() + t * slab;
    const double* gg = dc.gate_g.data() + t * slab;
    const double* go = dc.gate_o.data() + t * slab;
    const double* ct = dc.c.data() + t * slab;
    double* dai = g.da_i.data() + t * slab;
    double* daf = g.da_f.data() + t * slab;
    double* dag = g.da_g.data() + t * slab;
    double* dao = g.da_o.data() + t * slab;
    double* dhc = g.dh_carry.data();
    double* dcc = g.dc_carry.data();

    for (std::size_t b = 0; b < batch; ++b) {
      const double* dout_row = dout.data() + (t * batch + b) * out_width +
                               dir_offset;
      for (std::size_t j = 0; j < hidden; ++j) {
        const std::size_t idx = b * hidden + j;
        const double dh = dout_row[j] + dhc[idx];
        const double tc = std::tanh(ct[idx]);
        // dL/dc = dh·o·(1 - tanh²c) + carried cell gradient
        const double dcell = dh * go[idx] * (1.0 - tc * tc) + dcc[idx];
        const double di = dcell * gg[idx];
        const double dg = dcell * gi[idx];
        const double df = dcell * (c_prev ? c_prev[idx] : 0.0);
        const double dov = dh * tc;
        dcc[idx] = dcell * gf[idx];
        dai[idx] = di * gi[idx] * (1.0 - gi[idx]);
        daf[idx] = df * gf[idx] * (1.0 - gf[idx]);
        dag[idx] = dg * (1.0 - gg[idx] * gg[idx]);
        dao[idx] = dov * go[idx] * (1.0 - go[idx]);
      }
    }

    if (s > 0) {
      const double* h_prev = dc.h.data() + t_prev * slab;
      matmul_tn(h_prev, dai, gw_grad.Ui.data(), hidden, batch, hidden, true);
      matmul_tn(h_prev, daf, gw_grad.Uf.data(), hidden, batch, hidden, true);
      matmul_tn(h_prev, dag, gw_grad.Ug.data(), hidden, batch, hidden, true);
      matmul_tn(h_prev, dao, gw_grad.Uo.data(), hidden, batch, hidden, true);
    }

    matmul_nt(dai, w.Ui.data(), g.dh_carry.data(), batch, hidden, hidden);
    matmul_nt(daf, w.Uf.data(), g.dh_sum.data(), batch, hidden, hidden);
    for (std::size_t i = 0; i < slab; ++i) g.dh_carry[i] += g.dh_sum[i];
    matmul_nt(dag, w.Ug.data(), g.dh_sum.data(), batch, hidden, hidden);
    for (std::size_t i = 0; i < slab; ++i) g.dh_carry[i] += g.dh_sum[i];
    matmul_nt(dao, w.Uo.data(), g.dh_sum.data(), batch, hidden, hidden);
    for (std::size_t i = 0; i < slab; ++i) g.dh_carry[i] += g.dh_sum[i];
  }

  const std::size_t rows = t_len * batch;
  matmul_tn(input.data(), g.da_i.data(), gw_grad.Wi.data(), in_dim, rows,
            hidden, true);
  matmul_tn(input.data(), g.da_f.data(), gw_grad.Wf.data(), in_dim, rows,
            hidden, true);
  matmul_tn(input.data(), g.da_g.data(), gw_grad.Wg.data(), in_dim, rows,
            hidden, true);
  matmul_tn(input.data(), g.da_o.data(), gw_grad.Wo.data(), in_dim, rows,
            hidden, true);

  auto bias_acc = [&](const Tensor& da, Tensor& db) {
    for (std::size_t r = 0; r < rows; ++r) {
      const double* row = da.data() + r * hidden;
      for (std::size_t j = 0; j < hidden; ++j) db[j] += row[j];
    }
  };
  bias_acc(g.da_i, gw_grad.bi);
  bias_acc(g.da_f, gw_grad.bf);
  bias_acc(g.da_g, gw_grad.bg);
  bias_acc(g.da_o, gw_grad.bo);

  if (dinput != nullptr) {
    matmul_nt(g.da_i.data(), w.Wi.data(), dinput->data(), rows, hidden, in_dim,
              true);
    matmul_nt(g.da_f.data(), w.Wf.data(), dinput->data(), rows, hidden, in_dim,
              true);
    matmul_nt(g.da_g.data(), w.Wg.data(), dinput->data(), rows, hidden, in_dim,
              true);
    matmul_nt(g.da_o.data(), w.Wo.data(), dinput->data(), rows, hidden, in_dim,
              true);
  }
}

void softmax_row(double* row, std::size_t n) {
  double mx = row[0];
  for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
  double sum = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    row[j] = std::exp(row[j] - mx);
    sum += row[j];
  }
  const double inv = 1.0 / sum;
  for (std::size_t j = 0; j < n; ++j) row[j] *= inv;
}

void check_input_shape(const Tensor& x, const ModelConfig& cfg) {
  if (x.rank() != 3 || x.dim(1) != cfg.seq_len || x.dim(2) != cfg.input_dim) {
    throw ShapeError("model input must be (B, seq_len, input_dim)");
  }
}

template <typename Self, typename F>
void visit_impl(Self& self, F&& f) {
  for (std::size_t l = 0; l < self.lstm.size(); ++l) {
    auto dir = [&](const char* dname, auto& gw) {
      const std::string base =
          "l" + std::to_string(l + 1) + "." + dname + ".";
      f(base + "Wi", gw.Wi, ParamGroup::Bilstm);
      f(base + "Wf", gw.Wf, ParamGroup::Bilstm);
      f(base + "Wg", gw.Wg, ParamGroup::Bilstm);
      f(base + "Wo", gw.Wo, ParamGroup::Bilstm);
      f(base + "Ui", gw.Ui, ParamGroup::Bilstm);
      f(base + "Uf", gw.Uf, ParamGroup::Bilstm);
      f(base + "Ug", gw.Ug, ParamGroup::Bilstm);
      f(base + "Uo", gw.Uo, ParamGroup::Bilstm);
      f(base + "bi", gw.bi, ParamGroup::Bilstm);
      f(base + "bf", gw.bf, ParamGroup::Bilstm);
      f(base + "bg", gw.bg, ParamGroup::Bilstm);
      f(base + "bo", gw.bo, ParamGroup::Bilstm);
    };
    dir("fwd", self.lstm[l].fwd);
    dir("bwd", self.lstm[l].bwd);
  }
  f("attn.Wq", self.Wq, ParamGroup::Attention);
  f("attn.Wk", self.Wk, ParamGroup::Attention);
  f("attn.Wv", self.Wv, ParamGroup::Attention);
  f("fc.W", self.Wfc, ParamGroup::Fc);
  f("fc.b", self.bfc, ParamGroup::Fc);
}

}  // namespace

ModelParams ModelParams::shaped(const ModelConfig& config) {
  if (config.layers < 1) throw InvalidSpecError("model needs >= 1 LSTM layer");
  if (config.hidden < 1) throw InvalidSpecError("hidden size must be >= 1");

  ModelParams p;
  p.config = config;
  const std::size_t h = config.hidden;
  const std::size_t f = config.feature_dim();
  p.lstm.resize(config.layers);
  for (std::size_t l = 0; l < config.layers; ++l) {
    const std::size_t in = l == 0 ? config.input_dim : f;
    for (GateWeights* gw : {&p.lstm[l].fwd, &p.lstm[l].bwd}) {
      gw->Wi = Tensor({in, h});
      gw->Wf = Tensor({in, h});
      gw->Wg = Tensor({in, h});
      gw->Wo = Tensor({in, h});
      gw->Ui = Tensor({h, h});
      gw->Uf = Tensor({h, h});
      gw->Ug = Tensor({h, h});
      gw->Uo = Tensor({h, h});
      gw->bi = Tensor({h});
      gw->bf = Tensor({h});
      gw->bg = Tensor({h});
      gw->bo = Tensor({h});
    }
  }
  p.Wq = Tensor({f, f});
  p.Wk = Tensor({f, f});
  p.Wv = Tensor({f, f});
  p.Wfc = Tensor({f, 1});
  p.bfc = Tensor({1});
  return p;
}

ModelParams ModelParams::init(const ModelConfig& config) {
  ModelParams p = shaped(config);

  Rng rng(config.seed);
  p.visit([&](const std::string& name, Tensor& t, ParamGroup) {
    if (t.rank() == 1) {
      // Forget-gate bias starts at 1 for stable early training. The output
      // bias starts mid-range: Adam moves a coordinate by roughly lr per
      // step, so a zero-initialized bias could not reach the SpO2 label
      // range within a fixed epoch budget on small corpora.
      double v = 0.0;
      if (name.ends_with(".bf")) v = 1.0;
      if (name == "fc.b") v = 90.0;
      t.fill(v);
      return;
    }
    const double limit =
        std::sqrt(6.0 / static_cast<double>(t.dim(0) + t.dim(1)));
    for (std::size_t i = 0; i < t.size(); ++i) {
      t[i] = rng.uniform(-limit, limit);
    }
  });
  return p;
}

ModelParams ModelParams::zeros_like(const ModelParams& other) {
  ModelParams p;
  p.config = other.config;
  p.trainable = other.trainable;
  p.lstm.resize(other.lstm.size());
  auto z = [](const Tensor& t) { return Tensor(t.shape()); };
  for (std::size_t l = 0; l < other.lstm.size(); ++l) {
    for (auto [dst, src] :
         {std::pair{&p.lstm[l].fwd, &other.lstm[l].fwd},
          std::pair{&p.lstm[l].bwd, &other.lstm[l].bwd}}) {
      dst->Wi = z(src->Wi);
      dst->Wf = z(src->Wf);
      dst->Wg = z(src->Wg);
      dst->Wo = z(src->Wo);
      dst->Ui = z(src->Ui);
      dst->Uf = z(src->Uf);
      dst->Ug = z(src->Ug);
      dst->Uo = z(src->Uo);
      dst->bi = z(src->bi);
      dst->bf = z(src->bf);
      dst->bg = z(src->bg);
      dst->bo = z(src->bo);
    }
  }
  p.Wq = z(other.Wq);
  p.Wk = z(other.Wk);
  p.Wv = z(other.Wv);
  p.Wfc = z(other.Wfc);
  p.bfc = z(other.bfc);
  return p;
}

void ModelParams::visit(
    const std::function<void(const std::string&, Tensor&, ParamGroup)>& f) {
  visit_impl(*this, f);
}

void ModelParams::visit(
    const std::function<void(const std::string&, const Tensor&, ParamGroup)>&
        f) const {
  visit_impl(*this, f);
}

std::uint64_t ModelParams::group_hash(ParamGroup g) const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  visit([&](const std::string&, const Tensor& t, ParamGroup tg) {
    if (tg == g) h = fnv1a(t.data(), t.size() * sizeof(double), h);
  });
  return h;
}

CellResult lstm_cell_forward(const Tensor& x_t, const Tensor& h_prev,
                             const Tensor& c_prev, const GateWeights& w,
                             CellCache* cache) {
  const std::size_t batch = x_t.dim(0);
  const std::size_t in_dim = x_t.dim(1);
  const std::size_t hidden = w.Ui.dim(0);
  if (w.Wi.dim(0) != in_dim || h_prev.dim(0) != batch ||
      h_prev.dim(1) != hidden || !c_prev.same_shape(h_prev)) {
    throw ShapeError("lstm_cell_forward: inconsistent shapes");
  }

  Tensor pre_i = project_with_bias(x_t.data(), batch, in_dim, w.Wi, w.bi);
  Tensor pre_f = project_with_bias(x_t.data(), batch, in_dim, w.Wf, w.bf);
  Tensor pre_g = project_with_bias(x_t.data(), batch, in_dim, w.Wg, w.bg);
  Tensor pre_o = project_with_bias(x_t.data(), batch, in_dim, w.Wo, w.bo);
  matmul_nn(h_prev.data(), w.Ui.data(), pre_i.data(), batch, hidden, hidden,
            true);
  matmul_nn(h_prev.data(), w.Uf.data(), pre_f.data(), batch, hidden, hidden,
            true);
  matmul_nn(h_prev.data(), w.Ug.data(), pre_g.data(), batch, hidden, hidden,
            true);
  matmul_nn(h_prev.data(), w.Uo.data(), pre_o.data(), batch, hidden, hidden,
            true);

  CellResult out{Tensor({batch, hidden}), Tensor({batch, hidden})};
  cell_body(pre_i.data(), pre_f.data(), pre_g.data(), pre_o.data(),
            c_prev.data(), out.c.data(), out.h.data(), batch * hidden);
  if (cache != nullptr) {
    cache->gate_i = std::move(pre_i);
    cache->gate_f = std::move(pre_f);
    cache->gate_g = std::move(pre_g);
    cache->gate_o = std::move(pre_o);
    cache->c = out.c;
  }
  PULSEOX_GUARD_FINITE(out.h, "lstm_cell_forward output");
  return out;
}

Tensor bilstm_forward(const Tensor& x, const ModelParams& params,
                      ForwardCache* cache) {
  check_input_shape(x, params.config);
  const std::size_t batch = x.dim(0);
  const std::size_t t_len = x.dim(1);
  const std::size_t hidden = params.config.hidden;
  const std::size_t feat = params.config.feature_dim();

  ForwardCache local;
  ForwardCache& fc = cache != nullptr ? *cache : local;
  fc.layers.assign(params.lstm.size(), LayerCache{});

  StepScratch scratch;
  Tensor input = swap01(x);  // (T, B, in)
  const std::size_t slab = batch * hidden;
  for (std::size_t l = 0; l < params.lstm.size(); ++l) {
    LayerCache& lc = fc.layers[l];
    lc.input = std::move(input);
    lstm_dir_forward(lc.input, params.lstm[l].fwd, false, lc.fwd, scratch);
    lstm_dir_forward(lc.input, params.lstm[l].bwd, true, lc.bwd, scratch);

    lc.output = Tensor({t_len, batch, feat});
    for (std::size_t t = 0; t < t_len; ++t) {
      for (std::size_t b = 0; b < batch; ++b) {
        double* dst = lc.output.data() + (t * batch + b) * feat;
        std::memcpy(dst, lc.fwd.h.data() + t * slab + b * hidden,
                    hidden * sizeof(double));
        std::memcpy(dst + hidden, lc.bwd.h.data() + t * slab + b * hidden,
                    hidden * sizeof(double));
      }
    }
    input = lc.output;  // consumed by the next layer
  }

  return swap01(fc.layers.back().output);  // (B, T, F)
}

Tensor attention_pool(const Tensor& hseq, const ModelParams& params,
                      AttentionCache* cache) {
  const std::size_t batch = hseq.dim(0);
  const std::size_t t_len = hseq.dim(1);
  const std::size_t feat = hseq.dim(2);
  if (feat != params.config.feature_dim()) {
    throw ShapeError("attention_pool: feature width mismatch");
  }

  Tensor pooled({batch, feat});
  if (!params.config.use_attention) {
    // BiLSTM baseline: plain mean over time.
    for (std::size_t b = 0; b < batch; ++b) {
      double* out = pooled.data() + b * feat;
      for (std::size_t t = 0; t < t_len; ++t) {
        const double* row = hseq.data() + (b * t_len + t) * feat;
        for (std::size_t j = 0; j < feat; ++j) out[j] += row[j];
      }
      for (std::size_t j = 0; j < feat; ++j) {
        out[j] /= static_cast<double>(t_len);
      }
    }
    return pooled;
  }

  const std::size_t rows = batch * t_len;
  Tensor q({batch, t_len, feat});
  Tensor k({batch, t_len, feat});
  Tensor v({batch, t_len, feat});
  matmul_nn(hseq.data(), params.Wq.data(), q.data(), rows, feat, feat);
  matmul_nn(hseq.data(), params.Wk.data(), k.data(), rows, feat, feat);
  matmul_nn(hseq.data(), params.Wv.data(), v.data(), rows, feat, feat);

  Tensor attn({batch, t_len, t_len});
  const double scale = 1.0 / std::sqrt(static_cast<double>(feat));
  for (std::size_t b = 0; b < batch; ++b) {
    double* scores = attn.data() + b * t_len * t_len;
    matmul_nt(q.data() + b * t_len * feat, k.data() + b * t_len * feat,
              scores, t_len, feat, t_len);
    for (std::size_t i = 0; i < t_len * t_len; ++i) scores[i] *= scale;
    for (std::size_t t = 0; t < t_len; ++t) {
      softmax_row(scores + t * t_len, t_len);
    }
    // Mean over time of attn·V collapses to (column means of attn)·V.
    std::vector<double> abar(t_len, 0.0);
    for (std::size_t t = 0; t < t_len; ++t) {
      const double* row = scores + t * t_len;
      for (std::size_t j = 0; j < t_len; ++j) abar[j] += row[j];
    }
    const double inv_t = 1.0 / static_cast<double>(t_len);
    for (std::size_t j = 0; j < t_len; ++j) abar[j] *= inv_t;
    matmul_nn(abar.data(), v.data() + b * t_len * feat,
              pooled.data() + b * feat, 1, t_len, feat);
  }

  if (cache != nullptr) {
    cache->hseq = hseq;
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->attn = std::move(attn);
  }
  PULSEOX_GUARD_FINITE(pooled, "attention_pool output");
  return pooled;
}

Tensor model_forward(const Tensor& x, const ModelParams& params,
                     ForwardCache* cache) {
  ForwardCache local;
  ForwardCache& fc = cache != nullptr ? *cache : local;

  const Tensor hseq = bilstm_forward(x, params, &fc);
  fc.pooled = attention_pool(hseq, params, &fc.attn);
  if (!params.config.use_attention) {
    fc.attn.hseq = hseq;  // mean-pool backward still needs the shape
  }

  const std::size_t batch = x.dim(0);
  Tensor pred({batch, 1});
  matmul_nn(fc.pooled.data(), params.Wfc.data(), pred.data(), batch,
            params.config.feature_dim(), 1);
  for (std::size_t b = 0; b < batch; ++b) pred[b] += params.bfc[0];

  fc.batch = batch;
  fc.valid = true;
  PULSEOX_GUARD_FINITE(pred, "model_forward output");
  return pred;
}

ModelParams backward(const ModelParams& params, ForwardCache& cache,
                     const Tensor& dpred) {
  if (!cache.valid) {
    throw Error("backward: stale graph (no forward cache)");
  }
  cache.valid = false;

  const std::size_t batch = cache.batch;
  if (dpred.rank() != 2 || dpred.dim(0) != batch || dpred.dim(1) != 1) {
    throw ShapeError("backward: dpred must be (B, 1)");
  }

  const std::size_t feat = params.config.feature_dim();
  const std::size_t t_len = params.config.seq_len;
  const std::size_t hidden = params.config.hidden;
  const TrainableFlags& flags = params.trainable;

  ModelParams grads = ModelParams::zeros_like(params);

  // FC layer.
  if (flags.fc) {
    matmul_tn(cache.pooled.data(), dpred.data(), grads.Wfc.data(), feat,
              batch, 1, true);
    for (std::size_t b = 0; b < batch; ++b) grads.bfc[0] += dpred[b];
  }
  const bool need_deeper = flags.bilstm || flags.attention;
  if (!need_deeper) return grads;

  Tensor dpooled({batch, feat});
  matmul_nt(dpred.data(), params.Wfc.data(), dpooled.data(), batch, 1, feat);

  // Pooling / attention.
  Tensor dhseq({batch, t_len, feat});
  const double inv_t = 1.0 / static_cast<double>(t_len);
  if (!params.config.use_attention) {
    for (std::size_t b = 0; b < batch; ++b) {
      const double* dp = dpooled.data() + b * feat;
      for (std::size_t t = 0; t < t_len; ++t) {
        double* row = dhseq.data() + (b * t_len + t) * feat;
        for (std::size_t j = 0; j < feat; ++j) row[j] = dp[j] * inv_t;
      }
    }
  } else {
    const AttentionCache& ac = cache.attn;
    Tensor dq({batch, t_len, feat});
    Tensor dk({batch, t_len, feat});
    Tensor dv({batch, t_len, feat});
    std::vector<double> abar(t_len), dabar(t_len), ds(t_len * t_len);
    const double scale = 1.0 / std::sqrt(static_cast<double>(feat));

    for (std::size_t b = 0; b < batch; ++b) {
      const double* attn = ac.attn.data() + b * t_len * t_len;
      const double* vb = ac.v.data() + b * t_len * feat;
      const double* dp = dpooled.data() + b * feat;

      // pooled_b = abar·V with abar the column means of the softmax matrix.
      std::fill(abar.begin(), abar.end(), 0.0);
      for (std::size_t t = 0; t < t_len; ++t) {
        const double* row = attn + t * t_len;
        for (std::size_t j = 0; j < t_len; ++j) abar[j] += row[j];
      }
      for (std::size_t j = 0; j < t_len; ++j) abar[j] *= inv_t;

      // dV = abarᵀ ⊗ dpooled ; dabar = V·dpooledᵀ.
      double* dvb = dv.data() + b * t_len * feat;
      for (std::size_t t = 0; t < t_len; ++t) {
        const double a = abar[t];
        double* row = dvb + t * feat;
        for (std::size_t j = 0; j < feat; ++j) row[j] = a * dp[j];
      }
      matmul_nt(vb, dp, dabar.data(), t_len, feat, 1);

      // dA[t][j] = dabar[j]/T, then softmax backward row by row, with the
      // score scale folded in.
      for (std::size_t t = 0; t < t_len; ++t) {
        const double* arow = attn + t * t_len;
        double dot = 0.0;
        for (std::size_t j = 0; j < t_len; ++j) {
          dot += dabar[j] * inv_t * arow[j];
        }
        double* srow = ds.data() + t * t_len;
        for (std::size_t j = 0; j < t_len; ++j) {
          srow[j] = arow[j] * (dabar[j] * inv_t - dot) * scale;
        }
      }

      matmul_nn(ds.data(), ac.k.data() + b * t_len * feat,
                dq.data() + b * t_len * feat, t_len, t_len, feat);
      matmul_tn(ds.data(), ac.q.data() + b * t_len * feat,
                dk.data() + b * t_len * feat, t_len, t_len, feat);
    }

    const std::size_t rows = batch * t_len;
    if (flags.attention) {
      matmul_tn(ac.hseq.data(), dq.data(), grads.Wq.data(), feat, rows, feat,
                true);
      matmul_tn(ac.hseq.data(), dk.data(), grads.Wk.data(), feat, rows, feat,
                true);
      matmul_tn(ac.hseq.data(), dv.data(), grads.Wv.data(), feat, rows, feat,
                true);
    }
    if (flags.bilstm) {
      matmul_nt(dq.data(), params.Wq.data(), dhseq.data(), rows, feat, feat);
      matmul_nt(dk.data(), params.Wk.data(), dhseq.data(), rows, feat, feat,
                true);
      matmul_nt(dv.data(), params.Wv.data(), dhseq.data(), rows, feat, feat,
                true);
    }
  }

  if (!flags.bilstm) return grads;

  // BiLSTM layers, deepest first. dhseq -> time-major.
  Tensor dout = swap01(dhseq);  // (T, B, F)
  DirGrads dg;
  for (std::size_t l = params.lstm.size(); l-- > 0;) {
    LayerCache& lc = cache.layers[l];
    Tensor dinput;
    Tensor* dinput_ptr = nullptr;
    if (l > 0) {
      dinput = Tensor(lc.input.shape());
      dinput_ptr = &dinput;
    }
    lstm_dir_backward(lc.input, params.lstm[l].fwd, lc.fwd, false, dout, 0,
                      grads.lstm[l].fwd, dinput_ptr, dg);
    lstm_dir_backward(lc.input, params.lstm[l].bwd, lc.bwd, true, dout,
                      hidden, grads.lstm[l].bwd, dinput_ptr, dg);
    if (l > 0) dout = std::move(dinput);
  }

  return grads;
}

}  // namespace pulseox::nn
