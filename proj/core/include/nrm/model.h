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

#ifndef NRM_MODEL_H_
#define NRM_MODEL_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nrm/corpus.h"
#include "nrm/numerics.h"

namespace nrm {

// How the decoder sees the post.
//   kGlobal: c_t = h_T for every step.
//   kLocal:  c_t = sum_j alpha_tj h_j.
//   kHybrid: c_t = sum_j alpha_tj [h_j^l; h_T^g], with separate local-role and
//            global-role encoders.
enum class Scheme : std::uint8_t { kGlobal = 0, kLocal = 1, kHybrid = 2 };

std::string_view scheme_name(Scheme scheme);  // "glo", "loc", "hyb"
Scheme parse_scheme(std::string_view name);

struct Dims {
  std::size_t hidden = 64;     // d_h, encoder and decoder state size
  std::size_t embed = 32;      // d_emb, both embedding tables
  std::size_t attention = 64;  // d_a
  std::size_t stimulus = 32;   // d_L, rows of L
  std::size_t post_vocab = 0;
  std::size_t response_vocab = 0;

  // The readout layer width is tied to the hidden size.
  std::size_t readout() const { return hidden; }
  std::size_t context(Scheme scheme) const {
    return scheme == Scheme::kHybrid ? 2 * hidden : hidden;
  }
  friend bool operator==(const Dims&, const Dims&) = default;
};

// Gate convention:
//   z = sigmoid(W_z x + U_z h + b_z)
//   r = sigmoid(W_r x + U_r h + b_r)
//   h~ = tanh(W_h x + U_h (r * h) + b_h)
//   h' = (1 - z) * h + z * h~
struct GruParams {
  Matrix w_z, u_z, b_z;
  Matrix w_r, u_r, b_r;
  Matrix w_h, u_h, b_h;

  static GruParams zeros(std::size_t hidden, std::size_t input);
  std::size_t hidden() const { return u_z.rows(); }
  std::size_t input() const { return w_z.cols(); }
};

// Additive scoring q(h_j, s) = v_a^T tanh(W_a s + U_a h_j + b_a).
struct AttentionParams {
  Matrix w_a;  // d_a x d_h
  Matrix u_a;  // d_a x d_ctx
  Matrix v_a;  // d_a
  Matrix b_a;  // d_a
};

// g(y_{t-1}, s_t, c_t) = softmax(W_o tanh(W_s s + W_y e(y) + W_c c + b_r) + b_o)
struct ReadoutParams {
  Matrix w_s, w_y, w_c, b_r, w_o, b_o;
};

struct ModelParams {
  Scheme scheme = Scheme::kLocal;
  Dims dims;

  Matrix post_embedding;         // |V_post| x d_emb (local-role for kHybrid)
  Matrix global_post_embedding;  // kHybrid only: feeds the global-role encoder
  Matrix response_embedding;     // |V_resp| x d_emb
  GruParams encoder;             // local-role for kHybrid
  GruParams global_encoder;      // kHybrid only
  GruParams decoder;             // input is [e(y_{t-1}); L c_t]
  Matrix stimulus;               // L: d_L x d_ctx
  AttentionParams attention;     // kLocal and kHybrid
  Matrix init_transform;         // W_0: d_h x d_ctx, s_0 = tanh(W_0 c_init)
  ReadoutParams readout;

  // Every tensor zero, shaped for the given scheme and dims.
  static ModelParams zeros(Scheme scheme, const Dims& dims);
  bool has_attention() const { return scheme != Scheme::kGlobal; }
};

// Gradients share the parameter layout.
using Gradients = ModelParams;

struct TensorRef {
  std::string name;
  Matrix* tensor;
  bool is_vector;  // stored with one dimension in checkpoints
};
struct ConstTensorRef {
  std::string name;
  const Matrix* tensor;
  bool is_vector;
};

// Tensors present for the scheme, in a fixed canonical order.
std::vector<TensorRef> tensors(ModelParams& params);
std::vector<ConstTensorRef> tensors(const ModelParams& params);
std::size_t parameter_count(const ModelParams& params);

struct GruTrace {
  Vector x, h_prev, z, r, h_cand, h_new;
};

Vector gru_step(const GruParams& p, std::span<const double> x, std::span<const double> h_prev,
                GruTrace* trace = nullptr);

// Accumulates parameter gradients into `grads` and d_x / d_h_prev (both +=).
void gru_step_backward(const GruParams& p, const GruTrace& trace,
                       std::span<const double> d_h_new, GruParams& grads,
                       std::span<double> d_x, std::span<double> d_h_prev);

struct EncodedPost {
  Matrix states;         // T x d_h; local-role states for kHybrid
  Vector global_state;   // kHybrid only: h_T^g
  // Attention inputs, filled by encode(): keys row j is h_j (kLocal) or
  // [h_j^l; h_T^g] (kHybrid); projected_keys row j is U_a keys_j.
  Matrix keys;
  Matrix projected_keys;

  std::size_t length() const { return states.rows(); }
  std::span<const double> last_state() const { return states.row(states.rows() - 1); }
};

struct EncoderTrace {
  std::vector<GruTrace> local;
  std::vector<GruTrace> global;
};

// Runs the encoder(s) left to right over the unpadded post. Throws on an
// empty post or an out-of-range id.
EncodedPost encode(const ModelParams& params, std::span<const TokenId> post,
                   EncoderTrace* trace = nullptr);
// One EncodedPost per batch row; PAD positions are excluded.
std::vector<EncodedPost> encode_batch(const ModelParams& params, const Batch& batch);

// Builds keys/projected_keys for externally constructed states.
EncodedPost make_encoded_post(const ModelParams& params, Matrix states, Vector global_state = {});

struct AttentionTrace {
  Vector query;       // W_a s + b_a
  Matrix activation;  // T x d_a, tanh(query + U_a key_j)
  Vector alpha;
};

Vector attention_weights(const ModelParams& params, const EncodedPost& enc,
                         std::span<const double> s_prev, AttentionTrace* trace = nullptr);
// Same weights padded with zeros up to `width` positions (mask = 0 there).
Vector attention_weights_padded(const ModelParams& params, const EncodedPost& enc,
                                std::span<const double> s_prev, std::size_t width);

// Context vector for the scheme; also returns alpha when attention is used.
Vector context(const ModelParams& params, const EncodedPost& enc, std::span<const double> s_prev,
               AttentionTrace* trace = nullptr);

struct DecoderState {
  Vector s;
  std::size_t t = 0;
};

// c_init = h_T (glo/loc) or [h_T^l; h_T^g] (hyb).
Vector init_context(const ModelParams& params, const EncodedPost& enc);
DecoderState decoder_init(const ModelParams& params, const EncodedPost& enc);

struct StepOutput {
  DecoderState state;
  Vector probs;      // softmax over the response vocabulary
  Vector log_probs;  // logits - log_sum_exp(logits)
  Vector context;
  Vector alpha;      // empty for kGlobal
};

struct StepTrace {
  Vector s_prev;
  Vector context;
  AttentionTrace attention;
  Vector embedding;  // e(y_{t-1})
  Vector stimulus;   // L c_t
  GruTrace gru;
  Vector readout;    // tanh(...) hidden layer
};

StepOutput decoder_step(const ModelParams& params, const DecoderState& state, TokenId y_prev,
                        const EncodedPost& enc, StepTrace* trace = nullptr);

// Sum over targets of log p(y_t | y_<t, post) with teacher forcing, starting
// from BOS. `targets` are the ids after BOS (normally ending with EOS).
double sequence_log_likelihood(const ModelParams& params, std::span<const TokenId> post,
                               std::span<const TokenId> targets);

}  // namespace nrm

#endif  // NRM_MODEL_H_
