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

#ifndef NRM_REFERENCE_H_
#define NRM_REFERENCE_H_

// Scalar-loop forward pass of the network, templated on the arithmetic type.
// It shares no code with model.cc and is used as an oracle: with Real = long
// double it gives the finite-difference side of grad_check enough headroom,
// and with Real = double it cross-checks the vectorised forward pass.

#include <cmath>
#include <span>
#include <vector>

#include "nrm/corpus.h"
#include "nrm/error.h"
#include "nrm/model.h"

namespace nrm::reference {

template <typename Real>
using Vec = std::vector<Real>;

template <typename Real>
Real sigmoid(Real x) {
  return x >= 0 ? Real(1) / (Real(1) + std::exp(-x)) : std::exp(x) / (Real(1) + std::exp(x));
}

// out[i] += sum_j m(i, j) * x[j]
template <typename Real>
void affine(const Matrix& m, const Vec<Real>& x, Vec<Real>& out) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    Real acc = 0;
    for (std::size_t j = 0; j < m.cols(); ++j) acc += static_cast<Real>(m(i, j)) * x[j];
    out[i] += acc;
  }
}

template <typename Real>
Vec<Real> bias(const Matrix& b) {
  Vec<Real> v(b.size());
  for (std::size_t i = 0; i < b.size(); ++i) v[i] = static_cast<Real>(b.data()[i]);
  return v;
}

template <typename Real>
Vec<Real> row(const Matrix& m, std::size_t r) {
  Vec<Real> v(m.cols());
  for (std::size_t j = 0; j < m.cols(); ++j) v[j] = static_cast<Real>(m(r, j));
  return v;
}

template <typename Real>
Vec<Real> gru(const GruParams& p, const Vec<Real>& x, const Vec<Real>& h) {
  const std::size_t n = p.hidden();
  Vec<Real> z = bias<Real>(p.b_z), r = bias<Real>(p.b_r), c = bias<Real>(p.b_h);
  affine(p.w_z, x, z);
  affine(p.u_z, h, z);
  affine(p.w_r, x, r);
  affine(p.u_r, h, r);
  Vec<Real> rh(n);
  for (std::size_t i = 0; i < n; ++i) {
    z[i] = sigmoid(z[i]);
    r[i] = sigmoid(r[i]);
    rh[i] = r[i] * h[i];
  }
  affine(p.w_h, x, c);
  affine(p.u_h, rh, c);
  Vec<Real> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = (1 - z[i]) * h[i] + z[i] * std::tanh(c[i]);
  return out;
}

template <typename Real>
std::vector<Vec<Real>> run_encoder(const GruParams& p, const Matrix& emb,
                                   std::span<const TokenId> post) {
  std::vector<Vec<Real>> states;
  Vec<Real> h(p.hidden(), Real(0));
  for (TokenId id : post) {
    h = gru<Real>(p, row<Real>(emb, static_cast<std::size_t>(id)), h);
    states.push_back(h);
  }
  return states;
}

// Per-step log p(target) for the response ids after BOS.
template <typename Real>
std::vector<Real> step_log_probs(const ModelParams& p, std::span<const TokenId> post,
                                 std::span<const TokenId> targets) {
  if (post.empty()) throw Error("reference: empty post");
  const std::size_t dh = p.dims.hidden;
  const auto local = run_encoder<Real>(p.encoder, p.post_embedding, post);
  Vec<Real> global;
  if (p.scheme == Scheme::kHybrid) {
    global = run_encoder<Real>(p.global_encoder, p.global_post_embedding, post).back();
  }
  std::vector<Vec<Real>> keys;
  for (const auto& h : local) {
    Vec<Real> k = h;
    k.insert(k.end(), global.begin(), global.end());
    keys.push_back(std::move(k));
  }
  const Vec<Real>& c_init = keys.back();

  Vec<Real> s(dh, Real(0));
  affine(p.init_transform, c_init, s);
  for (auto& x : s) x = std::tanh(x);

  std::vector<Real> out;
  TokenId prev = kBosId;
  for (TokenId y : targets) {
    Vec<Real> c;
    if (p.scheme == Scheme::kGlobal) {
      c = local.back();
    } else {
      const auto& a = p.attention;
      Vec<Real> q = bias<Real>(a.b_a);
      affine(a.w_a, s, q);
      Vec<Real> e(keys.size());
      Real e_max = 0;
      for (std::size_t j = 0; j < keys.size(); ++j) {
        Vec<Real> u(a.u_a.rows(), Real(0));
        affine(a.u_a, keys[j], u);
        Real score = 0;
        for (std::size_t k = 0; k < u.size(); ++k) {
          score += static_cast<Real>(a.v_a.data()[k]) * std::tanh(q[k] + u[k]);
        }
        e[j] = score;
        if (j == 0 || score > e_max) e_max = score;
      }
      Real total = 0;
      for (auto& x : e) {
        x = std::exp(x - e_max);
        total += x;
      }
      c.assign(keys.front().size(), Real(0));
      for (std::size_t j = 0; j < keys.size(); ++j) {
        for (std::size_t k = 0; k < c.size(); ++k) c[k] += e[j] / total * keys[j][k];
      }
    }
    const Vec<Real> emb = row<Real>(p.response_embedding, static_cast<std::size_t>(prev));
    Vec<Real> input = emb;
    Vec<Real> stim(p.stimulus.rows(), Real(0));
    affine(p.stimulus, c, stim);
    input.insert(input.end(), stim.begin(), stim.end());
    s = gru<Real>(p.decoder, input, s);

    const auto& ro = p.readout;
    Vec<Real> hidden = bias<Real>(ro.b_r);
    affine(ro.w_s, s, hidden);
    affine(ro.w_y, emb, hidden);
    affine(ro.w_c, c, hidden);
    for (auto& x : hidden) x = std::tanh(x);
    Vec<Real> logits = bias<Real>(ro.b_o);
    affine(ro.w_o, hidden, logits);
    Real m = logits[0];
    for (Real x : logits) m = x > m ? x : m;
    Real total = 0;
    for (Real x : logits) total += std::exp(x - m);
    out.push_back(logits[static_cast<std::size_t>(y)] - m - std::log(total));
    prev = y;
  }
  return out;
}

// Mean per-token NLL of a batch.
template <typename Real>
Real batch_nll(const ModelParams& p, const Batch& batch) {
  Real total = 0;
  std::size_t tokens = 0;
  for (std::size_t i = 0; i < batch.rows; ++i) {
    const auto resp = batch.response(i);
    for (Real lp : step_log_probs<Real>(p, batch.post(i), resp.subspan(1))) total -= lp;
    tokens += resp.size() - 1;
  }
  if (tokens == 0) throw Error("reference: batch has no response tokens");
  return total / static_cast<Real>(tokens);
}

}  // namespace nrm::reference

#endif  // NRM_REFERENCE_H_
