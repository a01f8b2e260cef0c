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

#include "nrm/model.h"

#include <algorithm>
#include <cmath>

#include "nrm/error.h"

namespace nrm {
namespace {

void check_length(std::span<const double> v, std::size_t expected, const char* what) {
  if (v.size() != expected) {
    throw Error(std::string(what) + ": expected length " + std::to_string(expected) + ", got " +
                std::to_string(v.size()));
  }
}

void check_token(TokenId id, std::size_t vocab, const char* what) {
  if (id < 0 || static_cast<std::size_t>(id) >= vocab) {
    throw Error(std::string(what) + ": id " + std::to_string(id) + " out of range [0, " +
                std::to_string(vocab) + ")");
  }
}

template <typename Ref, typename P>
std::vector<Ref> collect(P& p) {
  std::vector<Ref> out;
  auto add = [&](std::string name, auto& m, bool vec) { out.push_back({std::move(name), &m, vec}); };
  auto add_gru = [&](const std::string& prefix, auto& g) {
    add(prefix + ".w_z", g.w_z, false);
    add(prefix + ".u_z", g.u_z, false);
    add(prefix + ".b_z", g.b_z, true);
    add(prefix + ".w_r", g.w_r, false);
    add(prefix + ".u_r", g.u_r, false);
    add(prefix + ".b_r", g.b_r, true);
    add(prefix + ".w_h", g.w_h, false);
    add(prefix + ".u_h", g.u_h, false);
    add(prefix + ".b_h", g.b_h, true);
  };
  add("emb.post", p.post_embedding, false);
  if (p.scheme == Scheme::kHybrid) add("emb.post_global", p.global_post_embedding, false);
  add("emb.response", p.response_embedding, false);
  add_gru("enc", p.encoder);
  if (p.scheme == Scheme::kHybrid) add_gru("enc_global", p.global_encoder);
  add_gru("dec", p.decoder);
  add("stimulus", p.stimulus, false);
  if (p.scheme != Scheme::kGlobal) {
    add("att.w_a", p.attention.w_a, false);
    add("att.u_a", p.attention.u_a, false);
    add("att.v_a", p.attention.v_a, true);
    add("att.b_a", p.attention.b_a, true);
  }
  add("init.w_0", p.init_transform, false);
  add("out.w_s", p.readout.w_s, false);
  add("out.w_y", p.readout.w_y, false);
  add("out.w_c", p.readout.w_c, false);
  add("out.b_r", p.readout.b_r, true);
  add("out.w_o", p.readout.w_o, false);
  add("out.b_o", p.readout.b_o, true);
  return out;
}

// Concatenates a row with an optional suffix vector.
Vector concat(std::span<const double> a, std::span<const double> b) {
  Vector out(a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

}  // namespace

std::string_view scheme_name(Scheme scheme) {
  switch (scheme) {
    case Scheme::kGlobal:
      return "glo";
    case Scheme::kLocal:
      return "loc";
    case Scheme::kHybrid:
      return "hyb";
  }
  return "?";
}

Scheme parse_scheme(std::string_view name) {
  if (name == "glo") return Scheme::kGlobal;
  if (name == "loc") return Scheme::kLocal;
  if (name == "hyb") return Scheme::kHybrid;
  throw Error("unknown scheme '" + std::string(name) + "' (expected glo, loc or hyb)");
}

GruParams GruParams::zeros(std::size_t hidden, std::size_t input) {
  GruParams g;
  for (Matrix* w : {&g.w_z, &g.w_r, &g.w_h}) *w = Matrix(hidden, input);
  for (Matrix* u : {&g.u_z, &g.u_r, &g.u_h}) *u = Matrix(hidden, hidden);
  for (Matrix* b : {&g.b_z, &g.b_r, &g.b_h}) *b = Matrix(hidden, 1);
  return g;
}

ModelParams ModelParams::zeros(Scheme scheme, const Dims& d) {
  if (d.hidden == 0 || d.embed == 0 || d.stimulus == 0 || d.post_vocab <= kNumReserved ||
      d.response_vocab <= kNumReserved || (scheme != Scheme::kGlobal && d.attention == 0)) {
    throw Error("model: invalid dims (all sizes must be positive and vocabularies non-trivial)");
  }
  ModelParams p;
  p.scheme = scheme;
  p.dims = d;
  const std::size_t ctx = d.context(scheme);
  p.post_embedding = Matrix(d.post_vocab, d.embed);
  if (scheme == Scheme::kHybrid) p.global_post_embedding = Matrix(d.post_vocab, d.embed);
  p.response_embedding = Matrix(d.response_vocab, d.embed);
  p.encoder = GruParams::zeros(d.hidden, d.embed);
  if (scheme == Scheme::kHybrid) p.global_encoder = GruParams::zeros(d.hidden, d.embed);
  p.decoder = GruParams::zeros(d.hidden, d.embed + d.stimulus);
  p.stimulus = Matrix(d.stimulus, ctx);
  if (scheme != Scheme::kGlobal) {
    p.attention.w_a = Matrix(d.attention, d.hidden);
    p.attention.u_a = Matrix(d.attention, ctx);
    p.attention.v_a = Matrix(d.attention, 1);
    p.attention.b_a = Matrix(d.attention, 1);
  }
  p.init_transform = Matrix(d.hidden, ctx);
  p.readout.w_s = Matrix(d.readout(), d.hidden);
  p.readout.w_y = Matrix(d.readout(), d.embed);
  p.readout.w_c = Matrix(d.readout(), ctx);
  p.readout.b_r = Matrix(d.readout(), 1);
  p.readout.w_o = Matrix(d.response_vocab, d.readout());
  p.readout.b_o = Matrix(d.response_vocab, 1);
  return p;
}

std::vector<TensorRef> tensors(ModelParams& params) { return collect<TensorRef>(params); }

std::vector<ConstTensorRef> tensors(const ModelParams& params) {
  return collect<ConstTensorRef>(params);
}

std::size_t parameter_count(const ModelParams& params) {
  std::size_t n = 0;
  for (const auto& t : tensors(params)) n += t.tensor->size();
  return n;
}

Vector gru_step(const GruParams& p, std::span<const double> x, std::span<const double> h_prev,
                GruTrace* trace) {
  const std::size_t n = p.hidden();
  check_length(x, p.input(), "gru_step input");
  check_length(h_prev, n, "gru_step state");

  Vector z(p.b_z.data().begin(), p.b_z.data().end());
  matvec_add(p.w_z, x, z);
  matvec_add(p.u_z, h_prev, z);
  sigmoid_inplace(z);

  Vector r(p.b_r.data().begin(), p.b_r.data().end());
  matvec_add(p.w_r, x, r);
  matvec_add(p.u_r, h_prev, r);
  sigmoid_inplace(r);

  Vector rh(n);
  for (std::size_t i = 0; i < n; ++i) rh[i] = r[i] * h_prev[i];
  Vector cand(p.b_h.data().begin(), p.b_h.data().end());
  matvec_add(p.w_h, x, cand);
  matvec_add(p.u_h, rh, cand);
  tanh_inplace(cand);

  Vector h(n);
  for (std::size_t i = 0; i < n; ++i) h[i] = (1.0 - z[i]) * h_prev[i] + z[i] * cand[i];

  if (trace) {
    trace->x.assign(x.begin(), x.end());
    trace->h_prev.assign(h_prev.begin(), h_prev.end());
    trace->z = z;
    trace->r = r;
    trace->h_cand = cand;
    trace->h_new = h;
  }
  return h;
}

void gru_step_backward(const GruParams& p, const GruTrace& tr, std::span<const double> d_h_new,
                       GruParams& g, std::span<double> d_x, std::span<double> d_h_prev) {
  const std::size_t n = p.hidden();
  check_length(d_h_new, n, "gru_step_backward gradient");
  check_length(d_x, p.input(), "gru_step_backward d_x");
  check_length(d_h_prev, n, "gru_step_backward d_h_prev");

  Vector da_z(n), da_h(n), rh(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double dz = d_h_new[i] * (tr.h_cand[i] - tr.h_prev[i]);
    da_z[i] = dz * tr.z[i] * (1.0 - tr.z[i]);
    const double dcand = d_h_new[i] * tr.z[i];
    da_h[i] = dcand * (1.0 - tr.h_cand[i] * tr.h_cand[i]);
    d_h_prev[i] += d_h_new[i] * (1.0 - tr.z[i]);
    rh[i] = tr.r[i] * tr.h_prev[i];
  }

  add_outer(g.w_h, da_h, tr.x);
  add_outer(g.u_h, da_h, rh);
  axpy(1.0, da_h, g.b_h.data());
  matvec_transposed_add(p.w_h, da_h, d_x);
  Vector d_rh(n, 0.0);
  matvec_transposed_add(p.u_h, da_h, d_rh);

  Vector da_r(n);
  for (std::size_t i = 0; i < n; ++i) {
    d_h_prev[i] += d_rh[i] * tr.r[i];
    const double dr = d_rh[i] * tr.h_prev[i];
    da_r[i] = dr * tr.r[i] * (1.0 - tr.r[i]);
  }
  add_outer(g.w_r, da_r, tr.x);
  add_outer(g.u_r, da_r, tr.h_prev);
  axpy(1.0, da_r, g.b_r.data());
  matvec_transposed_add(p.w_r, da_r, d_x);
  matvec_transposed_add(p.u_r, da_r, d_h_prev);

  add_outer(g.w_z, da_z, tr.x);
  add_outer(g.u_z, da_z, tr.h_prev);
  axpy(1.0, da_z, g.b_z.data());
  matvec_transposed_add(p.w_z, da_z, d_x);
  matvec_transposed_add(p.u_z, da_z, d_h_prev);
}

namespace {

Matrix run_encoder(const GruParams& gru, const Matrix& embedding, std::span<const TokenId> post,
                   std::vector<GruTrace>* traces) {
  const std::size_t n = gru.hidden();
  Matrix states(post.size(), n);
  Vector h(n, 0.0);
  if (traces) traces->resize(post.size());
  for (std::size_t t = 0; t < post.size(); ++t) {
    h = gru_step(gru, embedding.row(static_cast<std::size_t>(post[t])), h,
                 traces ? &(*traces)[t] : nullptr);
    std::copy(h.begin(), h.end(), states.row(t).begin());
  }
  return states;
}

}  // namespace

EncodedPost make_encoded_post(const ModelParams& params, Matrix states, Vector global_state) {
  EncodedPost enc;
  enc.states = std::move(states);
  enc.global_state = std::move(global_state);
  if (enc.states.rows() == 0) throw Error("encode: empty post");
  if (enc.states.cols() != params.dims.hidden) throw Error("encode: state width mismatch");
  if (params.scheme == Scheme::kHybrid) {
    check_length(enc.global_state, params.dims.hidden, "encode global state");
  }
  if (!params.has_attention()) return enc;

  const std::size_t T = enc.length();
  const std::size_t ctx = params.dims.context(params.scheme);
  enc.keys = Matrix(T, ctx);
  enc.projected_keys = Matrix(T, params.dims.attention);
  for (std::size_t j = 0; j < T; ++j) {
    auto key = enc.keys.row(j);
    const auto h = enc.states.row(j);
    std::copy(h.begin(), h.end(), key.begin());
    if (params.scheme == Scheme::kHybrid) {
      std::copy(enc.global_state.begin(), enc.global_state.end(), key.begin() + h.size());
    }
    matvec_add(params.attention.u_a, key, enc.projected_keys.row(j));
  }
  return enc;
}

EncodedPost encode(const ModelParams& params, std::span<const TokenId> post,
                   EncoderTrace* trace) {
  if (post.empty()) throw Error("encode: post has no unmasked tokens");
  for (TokenId id : post) check_token(id, params.dims.post_vocab, "encode");
  Matrix states = run_encoder(params.encoder, params.post_embedding, post,
                              trace ? &trace->local : nullptr);
  Vector global;
  if (params.scheme == Scheme::kHybrid) {
    const Matrix g = run_encoder(params.global_encoder, params.global_post_embedding, post,
                                 trace ? &trace->global : nullptr);
    const auto last = g.row(g.rows() - 1);
    global.assign(last.begin(), last.end());
  }
  return make_encoded_post(params, std::move(states), std::move(global));
}

std::vector<EncodedPost> encode_batch(const ModelParams& params, const Batch& batch) {
  std::vector<EncodedPost> out;
  out.reserve(batch.rows);
  for (std::size_t i = 0; i < batch.rows; ++i) out.push_back(encode(params, batch.post(i)));
  return out;
}

Vector attention_weights(const ModelParams& params, const EncodedPost& enc,
                         std::span<const double> s_prev, AttentionTrace* trace) {
  if (!params.has_attention()) throw Error("attention_weights: glo scheme has no attention");
  if (enc.keys.rows() != enc.length()) throw Error("attention_weights: post not prepared");
  check_length(s_prev, params.dims.hidden, "attention_weights state");
  const auto& a = params.attention;
  const std::size_t T = enc.length();
  const std::size_t da = params.dims.attention;

  Vector query(a.b_a.data().begin(), a.b_a.data().end());
  matvec_add(a.w_a, s_prev, query);
  Matrix act(T, da);
  Vector scores(T);
  const auto v = a.v_a.data();
  for (std::size_t j = 0; j < T; ++j) {
    auto m = act.row(j);
    const auto u = enc.projected_keys.row(j);
    double e = 0.0;
    for (std::size_t k = 0; k < da; ++k) {
      m[k] = std::tanh(query[k] + u[k]);
      e += v[k] * m[k];
    }
    scores[j] = e;
  }
  Vector alpha = softmax_stable(scores);
  if (trace) {
    trace->query = std::move(query);
    trace->activation = std::move(act);
    trace->alpha = alpha;
  }
  return alpha;
}

Vector attention_weights_padded(const ModelParams& params, const EncodedPost& enc,
                                std::span<const double> s_prev, std::size_t width) {
  if (width < enc.length()) throw Error("attention_weights_padded: width below post length");
  Vector alpha = attention_weights(params, enc, s_prev);
  alpha.resize(width, 0.0);
  return alpha;
}

Vector context(const ModelParams& params, const EncodedPost& enc, std::span<const double> s_prev,
               AttentionTrace* trace) {
  if (enc.length() == 0 || enc.states.cols() != params.dims.hidden) {
    throw Error("context: encoded post does not match model");
  }
  if (params.scheme == Scheme::kGlobal) {
    const auto h = enc.last_state();
    return Vector(h.begin(), h.end());
  }
  if (params.scheme == Scheme::kHybrid && enc.global_state.size() != params.dims.hidden) {
    throw Error("context: hyb scheme requires a global encoder state");
  }
  AttentionTrace local;
  AttentionTrace& tr = trace ? *trace : local;
  attention_weights(params, enc, s_prev, &tr);
  Vector c(params.dims.context(params.scheme), 0.0);
  for (std::size_t j = 0; j < enc.length(); ++j) axpy(tr.alpha[j], enc.keys.row(j), c);
  return c;
}

Vector init_context(const ModelParams& params, const EncodedPost& enc) {
  if (params.scheme == Scheme::kHybrid) return concat(enc.last_state(), enc.global_state);
  const auto h = enc.last_state();
  return Vector(h.begin(), h.end());
}

DecoderState decoder_init(const ModelParams& params, const EncodedPost& enc) {
  DecoderState st;
  st.s = matvec(params.init_transform, init_context(params, enc));
  tanh_inplace(st.s);
  return st;
}

StepOutput decoder_step(const ModelParams& params, const DecoderState& state, TokenId y_prev,
                        const EncodedPost& enc, StepTrace* trace) {
  check_token(y_prev, params.dims.response_vocab, "decoder_step");
  check_length(state.s, params.dims.hidden, "decoder_step state");
  StepOutput out;
  AttentionTrace att;
  out.context = context(params, enc, state.s, &att);

  const auto emb = params.response_embedding.row(static_cast<std::size_t>(y_prev));
  const Vector stim = matvec(params.stimulus, out.context);
  const Vector input = concat(emb, stim);
  GruTrace gru;
  out.state.s = gru_step(params.decoder, input, state.s, trace ? &gru : nullptr);
  out.state.t = state.t + 1;

  const auto& ro = params.readout;
  Vector hidden(ro.b_r.data().begin(), ro.b_r.data().end());
  matvec_add(ro.w_s, out.state.s, hidden);
  matvec_add(ro.w_y, emb, hidden);
  matvec_add(ro.w_c, out.context, hidden);
  tanh_inplace(hidden);
  Vector logits(ro.b_o.data().begin(), ro.b_o.data().end());
  matvec_add(ro.w_o, hidden, logits);

  out.probs = softmax_stable(logits);
  const double lse = log_sum_exp(logits);
  out.log_probs.resize(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out.log_probs[i] = logits[i] - lse;
  out.alpha = att.alpha;

  if (trace) {
    trace->s_prev = state.s;
    trace->context = out.context;
    trace->attention = std::move(att);
    trace->embedding.assign(emb.begin(), emb.end());
    trace->stimulus = stim;
    trace->gru = std::move(gru);
    trace->readout = std::move(hidden);
  }
  return out;
}

double sequence_log_likelihood(const ModelParams& params, std::span<const TokenId> post,
                               std::span<const TokenId> targets) {
  if (targets.empty()) throw Error("sequence_log_likelihood: empty response");
  const EncodedPost enc = encode(params, post);
  DecoderState st = decoder_init(params, enc);
  TokenId prev = kBosId;
  double total = 0.0;
  for (TokenId y : targets) {
    check_token(y, params.dims.response_vocab, "sequence_log_likelihood");
    StepOutput out = decoder_step(params, st, prev, enc);
    total += out.log_probs[static_cast<std::size_t>(y)];
    st = std::move(out.state);
    prev = y;
  }
  return total;
}

}  // namespace nrm
