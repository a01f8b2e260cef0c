// Copyright 2026 The NRM Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "nrm/training.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <thread>

#include "nrm/error.h"
#include "nrm/reference.h"

namespace nrm {
namespace {

void attention_backward(const ModelParams& p, const EncodedPost& enc, const StepTrace& tr,
                        std::span<const double> d_context, Gradients& g, Matrix& d_keys,
                        Matrix& d_projected, std::span<double> d_s_prev) {
  const auto& alpha = tr.attention.alpha;
  const std::size_t T = enc.length();
  const std::size_t da = p.dims.attention;
  const auto v = p.attention.v_a.data();

  Vector d_alpha(T);
  double weighted = 0.0;
  for (std::size_t j = 0; j < T; ++j) {
    d_alpha[j] = dot(d_context, enc.keys.row(j));
    axpy(alpha[j], d_context, d_keys.row(j));
    weighted += alpha[j] * d_alpha[j];
  }
  Vector d_query(da, 0.0);
  auto dv = g.attention.v_a.data();
  for (std::size_t j = 0; j < T; ++j) {
    const double d_score = alpha[j] * (d_alpha[j] - weighted);
    if (d_score == 0.0) continue;
    const auto m = tr.attention.activation.row(j);
    auto dp = d_projected.row(j);
    for (std::size_t k = 0; k < da; ++k) {
      dv[k] += d_score * m[k];
      const double d_pre = d_score * v[k] * (1.0 - m[k] * m[k]);
      d_query[k] += d_pre;
      dp[k] += d_pre;
    }
  }
  add_outer(g.attention.w_a, d_query, tr.s_prev);
  axpy(1.0, d_query, g.attention.b_a.data());
  matvec_transposed_add(p.attention.w_a, d_query, d_s_prev);
}

void encoder_backward(const GruParams& gru, const std::vector<GruTrace>& traces,
                      std::span<const TokenId> post, const Matrix* d_states,
                      std::span<const double> d_last, GruParams& g_gru, Matrix& g_embedding) {
  const std::size_t n = gru.hidden();
  const std::size_t T = post.size();
  Vector carry(n, 0.0);
  Vector dh(n);
  Vector dx(gru.input());
  for (std::size_t jj = T; jj-- > 0;) {
    dh = carry;
    if (d_states) axpy(1.0, d_states->row(jj), dh);
    if (jj == T - 1 && !d_last.empty()) axpy(1.0, d_last, dh);
    std::fill(carry.begin(), carry.end(), 0.0);
    std::fill(dx.begin(), dx.end(), 0.0);
    gru_step_backward(gru, traces[jj], dh, g_gru, dx, carry);
    axpy(1.0, dx, g_embedding.row(static_cast<std::size_t>(post[jj])));
  }
}

std::string tensor_norms(const ModelParams& params) {
  std::ostringstream os;
  bool first = true;
  for (const auto& t : tensors(params)) {
    if (!first) os << ", ";
    first = false;
    os << t.name << "=" << std::sqrt(squared_norm(t.tensor->data()));
  }
  return os.str();
}

void check_batch(const Batch& batch) {
  if (batch.target_tokens() == 0) throw Error("batch_loss: batch has no unmasked response tokens");
  for (std::size_t i = 0; i < batch.rows; ++i) {
    const auto resp = batch.response(i);
    if (resp.size() < 2 || resp.front() != kBosId) {
      throw Error("batch_loss: row " + std::to_string(i) + " response must be BOS-framed");
    }
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw Error("train config: learning rate must be finite and non-negative");
  }
  if (batch_size < 1) throw Error("train config: batch size must be at least 1");
  if (!(clip_norm > 0.0)) throw Error("train config: clip norm must be positive");
  if (!(init_lo < init_hi)) throw Error("train config: init range requires lo < hi");
  if (precision_bytes != 4 && precision_bytes != 8) {
    throw Error("train config: precision must be 4 or 8 bytes");
  }
  if (threads < 1) throw Error("train config: threads must be at least 1");
}

double accumulate_row_gradient(const ModelParams& p, std::span<const TokenId> post,
                               std::span<const TokenId> response, double scale, Gradients& g) {
  if (response.size() < 2) throw Error("backward: response must contain BOS and a target");
  EncoderTrace enc_trace;
  const EncodedPost enc = encode(p, post, &enc_trace);
  const Vector c_init = init_context(p, enc);
  DecoderState st = decoder_init(p, enc);
  const Vector s0 = st.s;

  const std::size_t steps = response.size() - 1;
  std::vector<StepTrace> traces(steps);
  std::vector<Vector> probs(steps);
  double nll = 0.0;
  for (std::size_t t = 0; t < steps; ++t) {
    const TokenId target = response[t + 1];
    if (target < 0 || static_cast<std::size_t>(target) >= p.dims.response_vocab) {
      throw Error("backward: target id " + std::to_string(target) + " out of range");
    }
    StepOutput out = decoder_step(p, st, response[t], enc, &traces[t]);
    nll -= out.log_probs[static_cast<std::size_t>(target)];
    probs[t] = std::move(out.probs);
    st = std::move(out.state);
  }

  const std::size_t T = enc.length();
  const std::size_t dh = p.dims.hidden;
  const std::size_t demb = p.dims.embed;
  const std::size_t ctx = p.dims.context(p.scheme);
  const bool hybrid = p.scheme == Scheme::kHybrid;
  Matrix d_states(T, dh);
  Vector d_global(hybrid ? dh : 0, 0.0);
  Matrix d_keys, d_projected;
  if (p.has_attention()) {
    d_keys = Matrix(T, ctx);
    d_projected = Matrix(T, p.dims.attention);
  }

  const auto& ro = p.readout;
  Vector ds(dh, 0.0);
  for (std::size_t t = steps; t-- > 0;) {
    const StepTrace& tr = traces[t];
    Vector d_logits = probs[t];
    for (auto& x : d_logits) x *= scale;
    d_logits[static_cast<std::size_t>(response[t + 1])] -= scale;

    add_outer(g.readout.w_o, d_logits, tr.readout);
    axpy(1.0, d_logits, g.readout.b_o.data());
    Vector d_hidden(p.dims.readout(), 0.0);
    matvec_transposed_add(ro.w_o, d_logits, d_hidden);
    for (std::size_t i = 0; i < d_hidden.size(); ++i) {
      d_hidden[i] *= 1.0 - tr.readout[i] * tr.readout[i];
    }

    add_outer(g.readout.w_s, d_hidden, tr.gru.h_new);
    matvec_transposed_add(ro.w_s, d_hidden, ds);
    Vector d_emb(demb, 0.0);
    add_outer(g.readout.w_y, d_hidden, tr.embedding);
    matvec_transposed_add(ro.w_y, d_hidden, d_emb);
    Vector d_ctx(ctx, 0.0);
    add_outer(g.readout.w_c, d_hidden, tr.context);
    matvec_transposed_add(ro.w_c, d_hidden, d_ctx);
    axpy(1.0, d_hidden, g.readout.b_r.data());

    Vector d_input(demb + p.dims.stimulus, 0.0);
    Vector ds_prev(dh, 0.0);
    gru_step_backward(p.decoder, tr.gru, ds, g.decoder, d_input, ds_prev);
    const std::span<const double> d_input_view(d_input);
    axpy(1.0, d_input_view.first(demb), d_emb);
    const auto d_stim = d_input_view.subspan(demb);
    add_outer(g.stimulus, d_stim, tr.context);
    matvec_transposed_add(p.stimulus, d_stim, d_ctx);

    axpy(1.0, d_emb, g.response_embedding.row(static_cast<std::size_t>(response[t])));

    if (p.scheme == Scheme::kGlobal) {
      axpy(1.0, d_ctx, d_states.row(T - 1));
    } else {
      attention_backward(p, enc, tr, d_ctx, g, d_keys, d_projected, ds_prev);
    }
    ds = std::move(ds_prev);
  }

  // s_0 = tanh(W_0 c_init)
  Vector d_pre0(dh);
  for (std::size_t i = 0; i < dh; ++i) d_pre0[i] = ds[i] * (1.0 - s0[i] * s0[i]);
  add_outer(g.init_transform, d_pre0, c_init);
  Vector d_cinit(ctx, 0.0);
  matvec_transposed_add(p.init_transform, d_pre0, d_cinit);
  const std::span<const double> d_cinit_view(d_cinit);
  axpy(1.0, d_cinit_view.first(dh), d_states.row(T - 1));
  if (hybrid) axpy(1.0, d_cinit_view.subspan(dh), d_global);

  if (p.has_attention()) {
    for (std::size_t j = 0; j < T; ++j) {
      add_outer(g.attention.u_a, d_projected.row(j), enc.keys.row(j));
      matvec_transposed_add(p.attention.u_a, d_projected.row(j), d_keys.row(j));
      const std::span<const double> dk = d_keys.row(j);
      axpy(1.0, dk.first(dh), d_states.row(j));
      if (hybrid) axpy(1.0, dk.subspan(dh), d_global);
    }
  }

  encoder_backward(p.encoder, enc_trace.local, post, &d_states, {}, g.encoder, g.post_embedding);
  if (hybrid) {
    encoder_backward(p.global_encoder, enc_trace.global, post, nullptr, d_global,
                     g.global_encoder, g.global_post_embedding);
  }
  return nll;
}

LossResult batch_loss(const ModelParams& params, const Batch& batch) {
  check_batch(batch);
  double total = 0.0;
  for (std::size_t i = 0; i < batch.rows; ++i) {
    total -= sequence_log_likelihood(params, batch.post(i), batch.response(i).subspan(1));
  }
  const std::size_t tokens = batch.target_tokens();
  return {total / static_cast<double>(tokens), tokens};
}

BackwardResult backward(const ModelParams& params, const Batch& batch, std::size_t threads) {
  check_batch(batch);
  const std::size_t tokens = batch.target_tokens();
  const double scale = 1.0 / static_cast<double>(tokens);

  std::vector<Gradients> row_grads(batch.rows);
  std::vector<double> row_nll(batch.rows, 0.0);
  auto work = [&](std::size_t i) {
    row_grads[i] = ModelParams::zeros(params.scheme, params.dims);
    row_nll[i] = accumulate_row_gradient(params, batch.post(i), batch.response(i), scale,
                                         row_grads[i]);
  };

  const std::size_t workers = std::min(std::max<std::size_t>(threads, 1), batch.rows);
  if (workers <= 1) {
    for (std::size_t i = 0; i < batch.rows; ++i) work(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(workers);
    {
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
          try {
            for (std::size_t i = next++; i < batch.rows; i = next++) work(i);
          } catch (...) {
            errors[w] = std::current_exception();
          }
        });
      }
    }
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  BackwardResult result;
  result.tokens = tokens;
  result.grads = std::move(row_grads[0]);
  double total = row_nll[0];
  auto dst = tensors(result.grads);
  for (std::size_t i = 1; i < batch.rows; ++i) {
    total += row_nll[i];
    const auto src = tensors(std::as_const(row_grads[i]));
    for (std::size_t k = 0; k < dst.size(); ++k) axpy(1.0, src[k].tensor->data(), dst[k].tensor->data());
  }
  result.mean_nll = total / static_cast<double>(tokens);
  return result;
}

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport compare_gradients(const ModelParams& params, const Batch& batch,
                                  const Gradients& analytic, double tolerance, double epsilon,
                                  FiniteDifferencePrecision precision) {
  GradCheckReport report;
  report.tolerance = tolerance;
  const auto loss = [&](const ModelParams& p) -> long double {
    if (precision == FiniteDifferencePrecision::kExtended) {
      return reference::batch_nll<long double>(p, batch);
    }
    return batch_loss(p, batch).mean_nll;
  };
  ModelParams probe = params;
  auto probe_tensors = tensors(probe);
  const auto grad_tensors = tensors(analytic);
  for (std::size_t k = 0; k < probe_tensors.size(); ++k) {
    TensorCheck check;
    check.name = probe_tensors[k].name;
    auto values = probe_tensors[k].tensor->data();
    const auto grads = grad_tensors[k].tensor->data();
    check.elements = values.size();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      // Use the step actually representable around `saved`.
      values[i] = saved + epsilon;
      const long double step_up = static_cast<long double>(values[i]) - saved;
      const long double up = loss(probe);
      values[i] = saved - epsilon;
      const long double step_down = saved - static_cast<long double>(values[i]);
      const long double down = loss(probe);
      values[i] = saved;
      const double numeric = static_cast<double>((up - down) / (step_up + step_down));
      const double err = relative_error(grads[i], numeric);
      if (err > check.max_rel_error || i == 0) {
        check.max_rel_error = err;
        check.worst_index = i;
        check.analytic = grads[i];
        check.numeric = numeric;
      }
    }
    // NaN errors fail as well.
    check.pass = check.max_rel_error <= tolerance;
    report.pass = report.pass && check.pass;
    report.tensors.push_back(std::move(check));
  }
  return report;
}

GradCheckReport grad_check(Scheme scheme, std::uint64_t seed, double tolerance,
                           const GradCheckOptions& options) {
  Rng rng(seed);
  const ModelParams params = init_params(scheme, options.dims, rng);
  std::vector<IdSeq> posts, responses;
  const auto content_id = [&](std::size_t vocab) {
    return static_cast<TokenId>(kNumReserved + rng.below(vocab - kNumReserved));
  };
  for (std::size_t i = 0; i < options.rows; ++i) {
    IdSeq post(2 + rng.below(3));
    for (auto& id : post) id = content_id(options.dims.post_vocab);
    IdSeq resp{kBosId};
    const std::size_t len = 1 + rng.below(3);
    for (std::size_t t = 0; t < len; ++t) resp.push_back(content_id(options.dims.response_vocab));
    resp.push_back(kEosId);
    posts.push_back(std::move(post));
    responses.push_back(std::move(resp));
  }
  const Batch batch = make_batch(posts, responses);
  BackwardResult analytic = backward(params, batch);
  if (options.tamper) options.tamper(analytic.grads);
  return compare_gradients(params, batch, analytic.grads, tolerance, options.epsilon,
                           options.precision);
}

double sgd_step(ModelParams& params, Gradients& grads, double lr, double clip_norm,
                const std::set<std::string>& frozen) {
  auto p = tensors(params);
  auto g = tensors(grads);
  if (p.size() != g.size()) throw Error("sgd_step: gradient layout does not match parameters");
  std::vector<Matrix*> active;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (p[k].tensor->rows() != g[k].tensor->rows() || p[k].tensor->cols() != g[k].tensor->cols()) {
      throw Error("sgd_step: shape mismatch for " + p[k].name);
    }
    if (frozen.contains(p[k].name)) {
      g[k].tensor->fill(0.0);
    } else {
      active.push_back(g[k].tensor);
    }
  }
  const double factor = clip_global_norm(active, clip_norm);
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (frozen.contains(p[k].name)) continue;
    axpy(-lr, g[k].tensor->data(), p[k].tensor->data());
  }
  return factor;
}

ModelParams init_params(Scheme scheme, const Dims& dims, Rng& rng, double lo, double hi) {
  ModelParams params = ModelParams::zeros(scheme, dims);
  for (auto& t : tensors(params)) {
    *t.tensor = uniform_init(rng, t.tensor->rows(), t.tensor->cols(), lo, hi);
  }
  return params;
}

std::string_view provenance_name(Provenance p) {
  switch (p) {
    case Provenance::kFromLocal:
      return "from-loc";
    case Provenance::kFromGlobal:
      return "from-glo";
    case Provenance::kFresh:
      return "fresh";
  }
  return "?";
}

std::set<std::string> hybrid_encoder_tensors() {
  std::set<std::string> names{"emb.post", "emb.post_global"};
  for (const char* prefix : {"enc.", "enc_global."}) {
    for (const char* suffix : {"w_z", "u_z", "b_z", "w_r", "u_r", "b_r", "w_h", "u_h", "b_h"}) {
      names.insert(std::string(prefix) + suffix);
    }
  }
  return names;
}

HybridInit init_hybrid_from_pretrained(const ModelParams& local, const ModelParams& global,
                                       Rng& rng, double lo, double hi) {
  if (local.scheme != Scheme::kLocal) throw Error("hybrid init: first checkpoint must be loc");
  if (global.scheme != Scheme::kGlobal) throw Error("hybrid init: second checkpoint must be glo");
  const Dims& dl = local.dims;
  const Dims& dg = global.dims;
  if (dl.hidden != dg.hidden || dl.embed != dg.embed) {
    throw Error("hybrid init: loc/glo dims differ (d_h " + std::to_string(dl.hidden) + " vs " +
                std::to_string(dg.hidden) + ", d_emb " + std::to_string(dl.embed) + " vs " +
                std::to_string(dg.embed) + ")");
  }
  if (dl.post_vocab != dg.post_vocab || dl.response_vocab != dg.response_vocab) {
    throw Error("hybrid init: loc/glo vocabulary sizes differ");
  }

  HybridInit out;
  out.params = ModelParams::zeros(Scheme::kHybrid, dl);
  auto& h = out.params;
  auto set = [&](const std::string& name, Provenance p) { out.provenance[name] = p; };

  h.post_embedding = local.post_embedding;
  h.encoder = local.encoder;
  h.global_post_embedding = global.post_embedding;
  h.global_encoder = global.encoder;
  h.response_embedding = local.response_embedding;
  h.decoder = local.decoder;
  h.attention.w_a = local.attention.w_a;
  h.attention.v_a = local.attention.v_a;
  h.attention.b_a = local.attention.b_a;
  h.readout.w_s = local.readout.w_s;
  h.readout.w_y = local.readout.w_y;
  h.readout.b_r = local.readout.b_r;
  h.readout.w_o = local.readout.w_o;
  h.readout.b_o = local.readout.b_o;

  const std::set<std::string> fresh{"stimulus", "att.u_a", "init.w_0", "out.w_c"};
  for (auto& t : tensors(h)) {
    if (fresh.contains(t.name)) {
      *t.tensor = uniform_init(rng, t.tensor->rows(), t.tensor->cols(), lo, hi);
      set(t.name, Provenance::kFresh);
    } else if (t.name == "emb.post_global" || t.name.starts_with("enc_global.")) {
      set(t.name, Provenance::kFromGlobal);
    } else {
      set(t.name, Provenance::kFromLocal);
    }
  }
  return out;
}

TrainResult train_encoded(std::span<const EncodedPair> pairs, const TrainConfig& config,
                          Scheme scheme, const ModelParams* initial,
                          const EpochCallback& on_epoch) {
  config.validate();
  if (pairs.empty()) throw Error("train: empty corpus");
  Rng rng(config.seed);
  TrainResult result;
  if (initial) {
    if (initial->scheme != scheme) {
      throw Error("train: initial parameters are " + std::string(scheme_name(initial->scheme)) +
                  ", requested " + std::string(scheme_name(scheme)));
    }
    result.params = *initial;
  } else {
    result.params = init_params(scheme, config.dims, rng, config.init_lo, config.init_hi);
  }

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto batches = make_batches(pairs, config.batch_size, rng);
    double total = 0.0;
    std::size_t tokens = 0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      BackwardResult step = backward(result.params, batches[b], config.threads);
      if (!std::isfinite(step.mean_nll)) {
        throw Error("train: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                    std::to_string(b + 1) + "; tensor norms: " + tensor_norms(result.params));
      }
      total += step.mean_nll * static_cast<double>(step.tokens);
      tokens += step.tokens;
      sgd_step(result.params, step.grads, config.learning_rate, config.clip_norm, config.frozen);
    }
    EpochStats stats;
    stats.epoch = epoch;
    stats.mean_nll = total / static_cast<double>(tokens);
    stats.perplexity = std::exp(stats.mean_nll);
    result.log.push_back(stats);
    if (on_epoch) on_epoch(stats);
  }
  return result;
}

TrainResult train(std::span<const PostResponsePair> pairs, const Vocabulary& post_vocab,
                  const Vocabulary& response_vocab, const TrainConfig& config, Scheme scheme,
                  const ModelParams* initial, const EpochCallback& on_epoch) {
  if (pairs.empty()) throw Error("train: empty corpus");
  TrainConfig cfg = config;
  cfg.dims.post_vocab = post_vocab.size();
  cfg.dims.response_vocab = response_vocab.size();
  if (initial && (initial->dims.post_vocab != cfg.dims.post_vocab ||
                  initial->dims.response_vocab != cfg.dims.response_vocab)) {
    throw Error("train: initial parameters do not match vocabulary sizes");
  }
  const auto encoded =
      encode_pairs(pairs, post_vocab, response_vocab, config.max_response_tokens);
  return train_encoded(encoded, cfg, scheme, initial, on_epoch);
}

}  // namespace nrm
