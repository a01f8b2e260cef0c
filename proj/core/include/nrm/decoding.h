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

#ifndef NRM_DECODING_H_
#define NRM_DECODING_H_

#include <cstddef>
#include <span>
#include <vector>

#include "nrm/corpus.h"
#include "nrm/model.h"

namespace nrm {

// A generated response. `tokens` excludes BOS and ends with EOS when
// `finished`; unfinished hypotheses were cut at max_len. `log_prob` is the
// left-to-right sum of per-step log-probabilities, so it equals
// sequence_log_likelihood(params, post, tokens).
struct Hypothesis {
  IdSeq tokens;
  double log_prob = 0.0;
  bool finished = false;
};

struct DecodeOptions {
  std::size_t beam = 10;
  std::size_t max_len = 30;
  bool suppress_unk = false;
};

// PAD and BOS are never generated; UNK only when not suppressed.
bool token_allowed(TokenId id, bool suppress_unk);

// Higher score first; equal scores fall back to lexicographic id order.
bool ranks_before(const Hypothesis& a, const Hypothesis& b);

Hypothesis greedy_decode(const ModelParams& params, std::span<const TokenId> post,
                         std::size_t max_len, bool suppress_unk = false);

// Left-to-right beam search without length normalization. Finished
// hypotheses stay in the pool and compete with extensions for the top-k
// slots. Returns the final pool sorted by ranks_before.
std::vector<Hypothesis> beam_search(const ModelParams& params, std::span<const TokenId> post,
                                    const DecodeOptions& options);

// Beam search (default width 500), then the best hypothesis for each
// distinct first token, sorted by ranks_before.
std::vector<Hypothesis> multi_response(const ModelParams& params, std::span<const TokenId> post,
                                       DecodeOptions options = {.beam = 500});

// Largest |V_resp|^max_len the exhaustive search accepts.
inline constexpr double kExhaustiveLimit = 1e6;

// Scores every sequence that ends in EOS within max_len tokens or reaches
// max_len without one, and returns the best.
Hypothesis exhaustive_oracle(const ModelParams& params, std::span<const TokenId> post,
                             std::size_t max_len, bool suppress_unk = false);

}  // namespace nrm

#endif  // NRM_DECODING_H_
