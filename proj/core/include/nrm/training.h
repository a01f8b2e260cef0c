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

#ifndef NRM_TRAINING_H_
#define NRM_TRAINING_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "nrm/corpus.h"
#include "nrm/model.h"
#include "nrm/rng.h"

namespace nrm {

struct TrainConfig {
  double learning_rate = 0.5;
  std::size_t batch_size = 4;
  std::size_t epochs = 10;
  double clip_norm = 1.0;
  std::uint64_t seed = 1;
  int precision_bytes = 8;  // checkpoint storage; arithmetic is always 64-bit
  double init_lo = -0.1;
  double init_hi = 0.1;
  std::size_t max_response_tokens = 30;  // 0 disables truncation
  std::size_t threads = 1;
  Dims dims;  // vocabulary sizes are taken from the vocabularies passed to train()
  // Tensor names excluded from updates.
  std::set<std::string> frozen;

  void validate() const;
};

struct LossResult {
  double mean_nll = 0.0;
  std::size_t tokens = 0;
};

// Mean negative log-likelihood per predicted response token.
LossResult batch_loss(const ModelParams& params, const Batch& batch);

struct BackwardResult {
  double mean_nll = 0.0;
  std::size_t tokens = 0;
  Gradients grads;
};

// Exact gradient of batch_loss. Rows are processed independently (optionally
// on `threads` workers) and summed in row order, so the result does not
// depend on the thread count.
BackwardResult backward(const ModelParams& params, const Batch& batch, std::size_t threads = 1);

// Adds scale * d(-log p(response | post))/d(theta) into grads and returns the
// row's summed NLL. `response` is BOS ... EOS.
double accumulate_row_gradient(const ModelParams& params, std::span<const TokenId> post,
                               std::span<const TokenId> response, double scale, Gradients& grads);

struct TensorCheck {
  std::string name;
  std::size_t elements = 0;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  bool pass = true;
};

struct GradCheckReport {
  std::vector<TensorCheck> tensors;
  double tolerance = 0.0;
  bool pass = true;
};

// |a - n| / max(|a|, |n|, 1e-8)
double relative_error(double analytic, double numeric);

// kExtended evaluates the loss with the 80-bit scalar reference; kDouble uses
// batch_loss. Double-precision differences carry ~1e-11 absolute noise, which
// is too coarse for the 1e-8 relative-error floor on small gradients.
enum class FiniteDifferencePrecision { kDouble, kExtended };

// Central differences of the batch loss against the supplied analytic gradient.
GradCheckReport compare_gradients(
    const ModelParams& params, const Batch& batch, const Gradients& analytic, double tolerance,
    double epsilon = 1e-5,
    FiniteDifferencePrecision precision = FiniteDifferencePrecision::kExtended);

struct GradCheckOptions {
  Dims dims{.hidden = 8, .embed = 6, .attention = 8, .stimulus = 6,
            .post_vocab = 12, .response_vocab = 12};
  std::size_t rows = 3;
  double epsilon = 1e-5;
  FiniteDifferencePrecision precision = FiniteDifferencePrecision::kExtended;
  // Applied to the analytic gradient before comparison (fault injection).
  std::function<void(Gradients&)> tamper;
};

// Builds a tiny random model and batch from `seed` and checks every tensor.
GradCheckReport grad_check(Scheme scheme, std::uint64_t seed, double tolerance,
                           const GradCheckOptions& options = {});

// Clips the non-frozen gradients to clip_norm, then theta -= lr * g. Returns
// the clip factor.
double sgd_step(ModelParams& params, Gradients& grads, double lr, double clip_norm,
                const std::set<std::string>& frozen = {});

// Every tensor drawn from U[lo, hi) in canonical tensor order.
ModelParams init_params(Scheme scheme, const Dims& dims, Rng& rng, double lo = -0.1,
                        double hi = 0.1);

enum class Provenance { kFromLocal, kFromGlobal, kFresh };
std::string_view provenance_name(Provenance p);

struct HybridInit {
  ModelParams params;
  std::map<std::string, Provenance> provenance;
};

// Hybrid model whose local-role encoder (and its embedding) comes from a
// trained loc model and whose global-role encoder (and its embedding) comes
// from a trained glo model. Decoder and readout tensors are copied from loc
// where the shape is unchanged; tensors that depend on the doubled context
// width are drawn fresh from U[lo, hi).
HybridInit init_hybrid_from_pretrained(const ModelParams& local, const ModelParams& global,
                                       Rng& rng, double lo = -0.1, double hi = 0.1);

// Names of the tensors copied into the hybrid encoders.
std::set<std::string> hybrid_encoder_tensors();

struct EpochStats {
  std::size_t epoch = 0;
  double mean_nll = 0.0;
  double perplexity = 0.0;
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochStats> log;
};

using EpochCallback = std::function<void(const EpochStats&)>;

// Minibatch SGD on mean per-token NLL. Starts from `initial` when given,
// otherwise from init_params(seed). Throws on a non-finite loss with the
// epoch, batch and tensor norms in the message.
TrainResult train(std::span<const PostResponsePair> pairs, const Vocabulary& post_vocab,
                  const Vocabulary& response_vocab, const TrainConfig& config, Scheme scheme,
                  const ModelParams* initial = nullptr, const EpochCallback& on_epoch = {});

// Same loop on pre-encoded pairs.
TrainResult train_encoded(std::span<const EncodedPair> pairs, const TrainConfig& config,
                          Scheme scheme, const ModelParams* initial = nullptr,
                          const EpochCallback& on_epoch = {});

}  // namespace nrm

#endif  // NRM_TRAINING_H_
