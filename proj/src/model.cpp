#include "crl/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "crl/errors.hpp"
#include "crl/rng.hpp"
#include "crl/vocab.hpp"

namespace crl {
namespace {

// y += M x  with M row-major (rows x cols)
void matvec_add(const double* m, const double* x, double* y, int rows,
                int cols) {
  for (int r = 0; r < rows; ++r) {
    const double* row = m + static_cast<std::size_t>(r) * cols;
    double acc = 0.0;
    for (int c = 0; c < cols; ++c) acc += row[c] * x[c];
    y[r] += acc;
  }
}

// y += M^T x  with M row-major (rows x cols); y has cols entries.
void matvec_t_add(const double* m, const double* x, double* y, int rows,
                  int cols) {
  for (int r = 0; r < rows; ++r) {
    const double* row = m + static_cast<std::size_t>(r) * cols;
    const double xr = x[r];
    if (xr == 0.0) continue;
    for (int c = 0; c < cols; ++c) y[c] += xr * row[c];
  }
}

// M += a b^T  (rows = len(a), cols = len(b))
void outer_add(double* m, const double* a, const double* b, int rows,
               int cols) {
  for (int r = 0; r < rows; ++r) {
    double* row = m + static_cast<std::size_t>(r) * cols;
    const double ar = a[r];
    if (ar == 0.0) continue;
    for (int c = 0; c < cols; ++c) row[c] += ar * b[c];
  }
}

void check_token(TokenId tok, int vocab_size) {
  if (tok < 0 || tok >= vocab_size) {
    throw DataError("token id out of range: " + std::to_string(tok));
  }
}

}  // namespace

SeqModel::SeqModel(const ModelConfig& config) : config_(config) {
  if (config.vocab_size < 3) {
    throw DataError("model vocab_size must cover the reserved tokens");
  }
  if (config.hidden_size < 1 || config.context_window < 1) {
    throw DataError("model hidden_size and context_window must be >= 1");
  }
  if (config.temperature <= 0.0) {
    throw DataError("model temperature must be > 0");
  }
  build_layout();
  std::size_t total = 0;
  for (const auto& s : layout_) total += s.size;
  params_.assign(total, 0.0);
}

void SeqModel::build_layout() {
  const auto v = static_cast<std::size_t>(config_.vocab_size);
  const auto h = static_cast<std::size_t>(config_.hidden_size);
  layout_.clear();
  std::size_t off = 0;
  auto push = [&](const std::string& name, std::size_t size) {
    layout_.push_back({name, off, size});
    off += size;
  };
  push("embed", v * h);
  push("enc_in", h * h);
  push("enc_rec", h * h);
  push("enc_bias", h);
  push("dec_in", h * h);
  push("dec_rec", h * h);
  push("dec_bias", h);
  push("comb", h * 2 * h);
  push("comb_bias", h);
  push("out", v * h);
  push("out_bias", v);
}

SeqModel SeqModel::zeros(const ModelConfig& config) { return SeqModel(config); }

SeqModel SeqModel::random(const ModelConfig& config, std::uint64_t seed,
                          double scale) {
  SeqModel model(config);
  Rng rng(seed);
  for (double& p : model.params_) p = rng.next_gaussian() * scale;
  return model;
}

std::span<double> SeqModel::slice(const std::string& name) {
  for (const auto& s : layout_) {
    if (s.name == name) return std::span<double>(params_).subspan(s.offset, s.size);
  }
  throw std::invalid_argument("unknown parameter slice: " + name);
}

namespace {

// Offsets mirror SeqModel::build_layout; kept in one struct so forward and
// backward index the flat vector identically.
struct Views {
  const double *embed, *enc_in, *enc_rec, *enc_bias;
  const double *dec_in, *dec_rec, *dec_bias;
  const double *comb, *comb_bias, *out, *out_bias;
};

Views make_views(const SeqModel& m) {
  const double* p = m.params().data();
  Views w{};
  auto get = [&](std::size_t i) { return p + m.layout()[i].offset; };
  w.embed = get(0);
  w.enc_in = get(1);
  w.enc_rec = get(2);
  w.enc_bias = get(3);
  w.dec_in = get(4);
  w.dec_rec = get(5);
  w.dec_bias = get(6);
  w.comb = get(7);
  w.comb_bias = get(8);
  w.out = get(9);
  w.out_bias = get(10);
  return w;
}

struct GradViews {
  double *embed, *enc_in, *enc_rec, *enc_bias;
  double *dec_in, *dec_rec, *dec_bias;
  double *comb, *comb_bias, *out, *out_bias;
};

GradViews make_grad_views(const SeqModel& m, double* g) {
  GradViews w{};
  auto get = [&](std::size_t i) { return g + m.layout()[i].offset; };
  w.embed = get(0);
  w.enc_in = get(1);
  w.enc_rec = get(2);
  w.enc_bias = get(3);
  w.dec_in = get(4);
  w.dec_rec = get(5);
  w.dec_bias = get(6);
  w.comb = get(7);
  w.comb_bias = get(8);
  w.out = get(9);
  w.out_bias = get(10);
  return w;
}

// log-softmax of logits / temperature; returns log Z shift pieces applied.
void log_softmax_scaled(const double* logits, double inv_temp, double* logp,
                        int n) {
  double mx = -1e300;
  for (int i = 0; i < n; ++i) mx = std::max(mx, logits[i] * inv_temp);
  double z = 0.0;
  for (int i = 0; i < n; ++i) z += std::exp(logits[i] * inv_temp - mx);
  const double log_z = std::log(z);
  for (int i = 0; i < n; ++i) logp[i] = logits[i] * inv_temp - mx - log_z;
}

}  // namespace

EncCache SeqModel::encode(const TokenSeq& document) const {
  if (document.empty()) throw DataError("encode: empty document");
  const int h = config_.hidden_size;
  const int n = std::min<int>(static_cast<int>(document.size()),
                              config_.context_window);
  const Views w = make_views(*this);

  EncCache cache;
  cache.length = n;
  cache.states.assign(static_cast<std::size_t>(n) * h, 0.0);
  std::vector<double> pre(static_cast<std::size_t>(h));
  for (int i = 0; i < n; ++i) {
    check_token(document[static_cast<std::size_t>(i)], config_.vocab_size);
    const double* emb =
        w.embed + static_cast<std::size_t>(document[static_cast<std::size_t>(i)]) * h;
    std::copy(w.enc_bias, w.enc_bias + h, pre.begin());
    matvec_add(w.enc_in, emb, pre.data(), h, h);
    if (i > 0) {
      matvec_add(w.enc_rec, cache.states.data() + static_cast<std::size_t>(i - 1) * h,
                 pre.data(), h, h);
    }
    double* hi = cache.states.data() + static_cast<std::size_t>(i) * h;
    for (int k = 0; k < h; ++k) hi[k] = std::tanh(pre[static_cast<std::size_t>(k)]);
  }
  return cache;
}

std::vector<double> SeqModel::decode_start(const EncCache& enc) const {
  const int h = config_.hidden_size;
  const double* last = enc.states.data() + static_cast<std::size_t>(enc.length - 1) * h;
  return std::vector<double>(last, last + h);
}

void SeqModel::decode_step(const EncCache& enc, std::span<const double> prev_state,
                           TokenId prev_token, std::span<double> log_probs_out,
                           std::span<double> next_state_out) const {
  const int h = config_.hidden_size;
  const int v = config_.vocab_size;
  const int n = enc.length;
  check_token(prev_token, v);
  const Views w = make_views(*this);
  const double inv_sqrt_h = 1.0 / std::sqrt(static_cast<double>(h));

  // z = tanh(Wd e(prev) + Ud s_prev + bd)
  std::vector<double> z(static_cast<std::size_t>(h));
  {
    std::vector<double> pre(w.dec_bias, w.dec_bias + h);
    matvec_add(w.dec_in, w.embed + static_cast<std::size_t>(prev_token) * h,
               pre.data(), h, h);
    matvec_add(w.dec_rec, prev_state.data(), pre.data(), h, h);
    for (int k = 0; k < h; ++k) z[static_cast<std::size_t>(k)] = std::tanh(pre[static_cast<std::size_t>(k)]);
  }

  // attention over encoder states
  std::vector<double> att(static_cast<std::size_t>(n));
  double mx = -1e300;
  for (int i = 0; i < n; ++i) {
    const double* hi = enc.states.data() + static_cast<std::size_t>(i) * h;
    double e = 0.0;
    for (int k = 0; k < h; ++k) e += z[static_cast<std::size_t>(k)] * hi[k];
    e *= inv_sqrt_h;
    att[static_cast<std::size_t>(i)] = e;
    mx = std::max(mx, e);
  }
  double zsum = 0.0;
  for (int i = 0; i < n; ++i) {
    att[static_cast<std::size_t>(i)] = std::exp(att[static_cast<std::size_t>(i)] - mx);
    zsum += att[static_cast<std::size_t>(i)];
  }
  for (int i = 0; i < n; ++i) att[static_cast<std::size_t>(i)] /= zsum;

  std::vector<double> ctx(static_cast<std::size_t>(h), 0.0);
  for (int i = 0; i < n; ++i) {
    const double a = att[static_cast<std::size_t>(i)];
    const double* hi = enc.states.data() + static_cast<std::size_t>(i) * h;
    for (int k = 0; k < h; ++k) ctx[static_cast<std::size_t>(k)] += a * hi[k];
  }

  // o = tanh(Wc [z; ctx] + bc); this is also the next recurrent state
  std::vector<double> zc(static_cast<std::size_t>(2 * h));
  std::copy(z.begin(), z.end(), zc.begin());
  std::copy(ctx.begin(), ctx.end(), zc.begin() + h);
  std::vector<double> o_pre(w.comb_bias, w.comb_bias + h);
  matvec_add(w.comb, zc.data(), o_pre.data(), h, 2 * h);
  for (int k = 0; k < h; ++k) {
    next_state_out[static_cast<std::size_t>(k)] = std::tanh(o_pre[static_cast<std::size_t>(k)]);
  }

  // logits and log-softmax
  std::vector<double> logits(w.out_bias, w.out_bias + v);
  matvec_add(w.out, next_state_out.data(), logits.data(), v, h);
  log_softmax_scaled(logits.data(), 1.0 / config_.temperature, log_probs_out.data(), v);
}

namespace {

// Everything backward() needs from one teacher-forced pass.
struct StepTrace {
  TokenId prev_token = 0;
  TokenId target = 0;
  std::vector<double> z;      // h
  std::vector<double> att;    // n
  std::vector<double> ctx;    // h
  std::vector<double> o;      // h
  std::vector<double> probs;  // v (temperature-scaled softmax)
};

struct ForwardTrace {
  EncCache enc;
  std::vector<StepTrace> steps;
  std::vector<double> token_log_probs;
};

ForwardTrace teacher_force(const SeqModel& model, const TokenSeq& document,
                           const TokenSeq& target, bool keep_trace) {
  if (target.empty()) throw DataError("teacher forcing: empty target");
  const ModelConfig& cfg = model.config();
  const int h = cfg.hidden_size;
  const int v = cfg.vocab_size;
  const double inv_sqrt_h = 1.0 / std::sqrt(static_cast<double>(h));
  const double inv_temp = 1.0 / cfg.temperature;
  const Views w = make_views(model);

  ForwardTrace trace;
  trace.enc = model.encode(document);
  const int n = trace.enc.length;

  std::vector<double> state = model.decode_start(trace.enc);
  TokenId prev = Vocabulary::kBos;
  std::vector<double> z(static_cast<std::size_t>(h));
  std::vector<double> att(static_cast<std::size_t>(n));
  std::vector<double> ctx(static_cast<std::size_t>(h));
  std::vector<double> zc(static_cast<std::size_t>(2 * h));
  std::vector<double> logits(static_cast<std::size_t>(v));
  std::vector<double> logp(static_cast<std::size_t>(v));

  trace.token_log_probs.reserve(target.size());
  if (keep_trace) trace.steps.reserve(target.size());

  for (std::size_t t = 0; t < target.size(); ++t) {
    check_token(target[t], v);
    check_token(prev, v);

    std::vector<double> pre(w.dec_bias, w.dec_bias + h);
    matvec_add(w.dec_in, w.embed + static_cast<std::size_t>(prev) * h, pre.data(), h, h);
    matvec_add(w.dec_rec, state.data(), pre.data(), h, h);
    for (int k = 0; k < h; ++k) z[static_cast<std::size_t>(k)] = std::tanh(pre[static_cast<std::size_t>(k)]);

    double mx = -1e300;
    for (int i = 0; i < n; ++i) {
      const double* hi = trace.enc.states.data() + static_cast<std::size_t>(i) * h;
      double e = 0.0;
      for (int k = 0; k < h; ++k) e += z[static_cast<std::size_t>(k)] * hi[k];
      e *= inv_sqrt_h;
      att[static_cast<std::size_t>(i)] = e;
      mx = std::max(mx, e);
    }
    double zsum = 0.0;
    for (int i = 0; i < n; ++i) {
      att[static_cast<std::size_t>(i)] = std::exp(att[static_cast<std::size_t>(i)] - mx);
      zsum += att[static_cast<std::size_t>(i)];
    }
    for (int i = 0; i < n; ++i) att[static_cast<std::size_t>(i)] /= zsum;

    std::fill(ctx.begin(), ctx.end(), 0.0);
    for (int i = 0; i < n; ++i) {
      const double a = att[static_cast<std::size_t>(i)];
      const double* hi = trace.enc.states.data() + static_cast<std::size_t>(i) * h;
      for (int k = 0; k < h; ++k) ctx[static_cast<std::size_t>(k)] += a * hi[k];
    }

    std::copy(z.begin(), z.end(), zc.begin());
    std::copy(ctx.begin(), ctx.end(), zc.begin() + h);
    std::vector<double> o_pre(w.comb_bias, w.comb_bias + h);
    matvec_add(w.comb, zc.data(), o_pre.data(), h, 2 * h);
    std::vector<double> o(static_cast<std::size_t>(h));
    for (int k = 0; k < h; ++k) o[static_cast<std::size_t>(k)] = std::tanh(o_pre[static_cast<std::size_t>(k)]);

    std::copy(w.out_bias, w.out_bias + v, logits.begin());
    matvec_add(w.out, o.data(), logits.data(), v, h);
    log_softmax_scaled(logits.data(), inv_temp, logp.data(), v);

    trace.token_log_probs.push_back(logp[static_cast<std::size_t>(target[t])]);

    if (keep_trace) {
      StepTrace st;
      st.prev_token = prev;
      st.target = target[t];
      st.z = z;
      st.att = att;
      st.ctx = ctx;
      st.o = o;
      st.probs.resize(static_cast<std::size_t>(v));
      for (int k = 0; k < v; ++k) {
        st.probs[static_cast<std::size_t>(k)] = std::exp(logp[static_cast<std::size_t>(k)]);
      }
      trace.steps.push_back(std::move(st));
    }

    state = o;
    prev = target[t];
  }
  return trace;
}

}  // namespace

std::vector<double> next_token_dist(const SeqModel& model,
                                    const TokenSeq& document,
                                    const TokenSeq& prefix) {
  const int v = model.config().vocab_size;
  const int h = model.config().hidden_size;
  const EncCache enc = model.encode(document);
  std::vector<double> state = model.decode_start(enc);
  std::vector<double> next_state(static_cast<std::size_t>(h));
  std::vector<double> logp(static_cast<std::size_t>(v));
  TokenId prev = Vocabulary::kBos;
  for (TokenId tok : prefix) {
    model.decode_step(enc, state, prev, logp, next_state);
    state = next_state;
    prev = tok;
  }
  model.decode_step(enc, state, prev, logp, next_state);
  std::vector<double> probs(static_cast<std::size_t>(v));
  for (int k = 0; k < v; ++k) probs[static_cast<std::size_t>(k)] = std::exp(logp[static_cast<std::size_t>(k)]);
  return probs;
}

std::vector<double> sequence_log_probs(const SeqModel& model,
                                       const TokenSeq& document,
                                       const TokenSeq& target) {
  if (target.empty()) throw DataError("sequence_log_probs: empty target");
  return teacher_force(model, document, target, false).token_log_probs;
}

double mle_loss(const SeqModel& model, std::span<const ExamplePair> batch,
                MleNorm norm) {
  if (batch.empty()) throw DataError("mle_loss: empty batch");
  double total = 0.0;
  std::size_t tokens = 0;
  for (const auto& pair : batch) {
    const auto logps = sequence_log_probs(model, pair.document, pair.reference);
    for (double lp : logps) total -= lp;
    tokens += logps.size();
  }
  if (norm == MleNorm::SequenceMean) {
    return total / static_cast<double>(batch.size());
  }
  return total / static_cast<double>(tokens);
}

void add_sequence_grad(const SeqModel& model, const TokenSeq& document,
                       const TokenSeq& target, double weight,
                       std::span<double> grad) {
  if (grad.size() != model.param_count()) {
    throw std::invalid_argument("gradient buffer size mismatch");
  }
  if (weight == 0.0) return;

  const ModelConfig& cfg = model.config();
  const int h = cfg.hidden_size;
  const int v = cfg.vocab_size;
  const double inv_sqrt_h = 1.0 / std::sqrt(static_cast<double>(h));
  const double inv_temp = 1.0 / cfg.temperature;
  const Views w = make_views(model);
  GradViews g = make_grad_views(model, grad.data());

  ForwardTrace trace = teacher_force(model, document, target, true);
  const int n = trace.enc.length;
  const int steps = static_cast<int>(trace.steps.size());

  std::vector<double> d_enc(static_cast<std::size_t>(n) * h, 0.0);
  std::vector<double> d_state(static_cast<std::size_t>(h), 0.0);  // wrt o_{t-1}

  std::vector<double> d_logits(static_cast<std::size_t>(v));
  std::vector<double> d_o(static_cast<std::size_t>(h));
  std::vector<double> d_opre(static_cast<std::size_t>(h));
  std::vector<double> d_zc(static_cast<std::size_t>(2 * h));
  std::vector<double> d_att(static_cast<std::size_t>(n));
  std::vector<double> d_z(static_cast<std::size_t>(h));
  std::vector<double> d_zpre(static_cast<std::size_t>(h));
  std::vector<double> zc(static_cast<std::size_t>(2 * h));

  for (int t = steps - 1; t >= 0; --t) {
    const StepTrace& st = trace.steps[static_cast<std::size_t>(t)];

    // d(weight * logp[target]) / dlogits = weight/temp * (onehot - probs)
    for (int k = 0; k < v; ++k) {
      d_logits[static_cast<std::size_t>(k)] =
          -weight * inv_temp * st.probs[static_cast<std::size_t>(k)];
    }
    d_logits[static_cast<std::size_t>(st.target)] += weight * inv_temp;

    outer_add(g.out, d_logits.data(), st.o.data(), v, h);
    for (int k = 0; k < v; ++k) g.out_bias[k] += d_logits[static_cast<std::size_t>(k)];

    std::fill(d_o.begin(), d_o.end(), 0.0);
    matvec_t_add(w.out, d_logits.data(), d_o.data(), v, h);
    for (int k = 0; k < h; ++k) d_o[static_cast<std::size_t>(k)] += d_state[static_cast<std::size_t>(k)];

    for (int k = 0; k < h; ++k) {
      const double ok = st.o[static_cast<std::size_t>(k)];
      d_opre[static_cast<std::size_t>(k)] = d_o[static_cast<std::size_t>(k)] * (1.0 - ok * ok);
    }

    std::copy(st.z.begin(), st.z.end(), zc.begin());
    std::copy(st.ctx.begin(), st.ctx.end(), zc.begin() + h);
    outer_add(g.comb, d_opre.data(), zc.data(), h, 2 * h);
    for (int k = 0; k < h; ++k) g.comb_bias[k] += d_opre[static_cast<std::size_t>(k)];

    std::fill(d_zc.begin(), d_zc.end(), 0.0);
    matvec_t_add(w.comb, d_opre.data(), d_zc.data(), h, 2 * h);

    // attention backward: ctx = sum_i att_i * h_i
    double dot_a_da = 0.0;
    for (int i = 0; i < n; ++i) {
      const double* hi = trace.enc.states.data() + static_cast<std::size_t>(i) * h;
      double da = 0.0;
      for (int k = 0; k < h; ++k) da += d_zc[static_cast<std::size_t>(h + k)] * hi[k];
      d_att[static_cast<std::size_t>(i)] = da;
      dot_a_da += st.att[static_cast<std::size_t>(i)] * da;
      const double a = st.att[static_cast<std::size_t>(i)];
      double* dhi = d_enc.data() + static_cast<std::size_t>(i) * h;
      for (int k = 0; k < h; ++k) dhi[k] += a * d_zc[static_cast<std::size_t>(h + k)];
    }
    std::copy(d_zc.begin(), d_zc.begin() + h, d_z.begin());
    for (int i = 0; i < n; ++i) {
      const double de =
          st.att[static_cast<std::size_t>(i)] *
          (d_att[static_cast<std::size_t>(i)] - dot_a_da) * inv_sqrt_h;
      if (de == 0.0) continue;
      const double* hi = trace.enc.states.data() + static_cast<std::size_t>(i) * h;
      double* dhi = d_enc.data() + static_cast<std::size_t>(i) * h;
      for (int k = 0; k < h; ++k) {
        d_z[static_cast<std::size_t>(k)] += de * hi[k];
        dhi[k] += de * st.z[static_cast<std::size_t>(k)];
      }
    }

    for (int k = 0; k < h; ++k) {
      const double zk = st.z[static_cast<std::size_t>(k)];
      d_zpre[static_cast<std::size_t>(k)] = d_z[static_cast<std::size_t>(k)] * (1.0 - zk * zk);
    }

    const double* prev_state =
        t == 0 ? trace.enc.states.data() + static_cast<std::size_t>(n - 1) * h
               : trace.steps[static_cast<std::size_t>(t - 1)].o.data();
    const double* prev_emb = w.embed + static_cast<std::size_t>(st.prev_token) * h;

    outer_add(g.dec_in, d_zpre.data(), prev_emb, h, h);
    outer_add(g.dec_rec, d_zpre.data(), prev_state, h, h);
    for (int k = 0; k < h; ++k) g.dec_bias[k] += d_zpre[static_cast<std::size_t>(k)];
    matvec_t_add(w.dec_in, d_zpre.data(),
                 g.embed + static_cast<std::size_t>(st.prev_token) * h, h, h);

    std::fill(d_state.begin(), d_state.end(), 0.0);
    matvec_t_add(w.dec_rec, d_zpre.data(), d_state.data(), h, h);
  }

  // the initial decoder state is the last encoder state
  for (int k = 0; k < h; ++k) {
    d_enc[static_cast<std::size_t>(n - 1) * h + static_cast<std::size_t>(k)] +=
        d_state[static_cast<std::size_t>(k)];
  }

  // encoder backward
  std::vector<double> d_hpre(static_cast<std::size_t>(h));
  for (int i = n - 1; i >= 0; --i) {
    const double* hi = trace.enc.states.data() + static_cast<std::size_t>(i) * h;
    const double* dhi = d_enc.data() + static_cast<std::size_t>(i) * h;
    for (int k = 0; k < h; ++k) {
      d_hpre[static_cast<std::size_t>(k)] = dhi[k] * (1.0 - hi[k] * hi[k]);
    }
    const TokenId tok = document[static_cast<std::size_t>(i)];
    outer_add(g.enc_in, d_hpre.data(), w.embed + static_cast<std::size_t>(tok) * h, h, h);
    for (int k = 0; k < h; ++k) g.enc_bias[k] += d_hpre[static_cast<std::size_t>(k)];
    matvec_t_add(w.enc_in, d_hpre.data(),
                 g.embed + static_cast<std::size_t>(tok) * h, h, h);
    if (i > 0) {
      const double* hprev = trace.enc.states.data() + static_cast<std::size_t>(i - 1) * h;
      outer_add(g.enc_rec, d_hpre.data(), hprev, h, h);
      double* dhprev = d_enc.data() + static_cast<std::size_t>(i - 1) * h;
      matvec_t_add(w.enc_rec, d_hpre.data(), dhprev, h, h);
    }
  }
}

}  // namespace crl
