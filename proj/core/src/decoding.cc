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

#include "nrm/decoding.h"

#include <algorithm>
#include <cmath>
#include <map>

#include "nrm/error.h"

namespace nrm {
namespace {

struct Beam {
  Hypothesis hyp;
  DecoderState state;
};

struct Candidate {
  std::size_t parent;
  TokenId token;  // -1 for a carried finished hypothesis
  double score;
};

}  // namespace

bool token_allowed(TokenId id, bool suppress_unk) {
  return id != kPadId && id != kBosId && !(suppress_unk && id == kUnkId);
}

bool ranks_before(const Hypothesis& a, const Hypothesis& b) {
  if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
  return a.tokens < b.tokens;
}

Hypothesis greedy_decode(const ModelParams& params, std::span<const TokenId> post,
                         std::size_t max_len, bool suppress_unk) {
  Hypothesis out;
  if (max_len == 0) return out;
  const EncodedPost enc = encode(params, post);
  DecoderState st = decoder_init(params, enc);
  TokenId prev = kBosId;
  while (out.tokens.size() < max_len) {
    StepOutput step = decoder_step(params, st, prev, enc);
    TokenId best = -1;
    for (std::size_t v = 0; v < step.log_probs.size(); ++v) {
      const auto id = static_cast<TokenId>(v);
      if (!token_allowed(id, suppress_unk)) continue;
      // Strict comparison keeps the smallest id on ties.
      if (best < 0 || step.log_probs[v] > step.log_probs[static_cast<std::size_t>(best)]) best = id;
    }
    out.log_prob += step.log_probs[static_cast<std::size_t>(best)];
    out.tokens.push_back(best);
    st = std::move(step.state);
    prev = best;
    if (best == kEosId) {
      out.finished = true;
      break;
    }
  }
  return out;
}

std::vector<Hypothesis> beam_search(const ModelParams& params, std::span<const TokenId> post,
                                    const DecodeOptions& options) {
  if (options.beam < 1) throw Error("beam_search: beam must be at least 1");
  const EncodedPost enc = encode(params, post);
  std::vector<Beam> pool;
  pool.push_back({Hypothesis{}, decoder_init(params, enc)});
  if (options.max_len == 0) return {pool.front().hyp};

  for (std::size_t len = 0; len < options.max_len; ++len) {
    const bool all_done =
        std::all_of(pool.begin(), pool.end(), [](const Beam& b) { return b.hyp.finished; });
    if (all_done) break;

    std::vector<StepOutput> steps(pool.size());
    std::vector<Candidate> cands;
    for (std::size_t i = 0; i < pool.size(); ++i) {
      const Hypothesis& h = pool[i].hyp;
      if (h.finished) {
        cands.push_back({i, -1, h.log_prob});
        continue;
      }
      const TokenId prev = h.tokens.empty() ? kBosId : h.tokens.back();
      steps[i] = decoder_step(params, pool[i].state, prev, enc);
      for (std::size_t v = 0; v < steps[i].log_probs.size(); ++v) {
        const auto id = static_cast<TokenId>(v);
        if (!token_allowed(id, options.suppress_unk)) continue;
        cands.push_back({i, id, h.log_prob + steps[i].log_probs[v]});
      }
    }

    // Lexicographic tie-break on the would-be sequences without building them.
    auto before = [&](const Candidate& a, const Candidate& b) {
      if (a.score != b.score) return a.score > b.score;
      const IdSeq& ta = pool[a.parent].hyp.tokens;
      const IdSeq& tb = pool[b.parent].hyp.tokens;
      const std::size_t la = ta.size() + (a.token >= 0);
      const std::size_t lb = tb.size() + (b.token >= 0);
      for (std::size_t k = 0; k < std::min(la, lb); ++k) {
        const TokenId xa = k < ta.size() ? ta[k] : a.token;
        const TokenId xb = k < tb.size() ? tb[k] : b.token;
        if (xa != xb) return xa < xb;
      }
      return la < lb;
    };
    const std::size_t keep = std::min(options.beam, cands.size());
    std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep),
                      cands.end(), before);

    std::vector<Beam> next;
    next.reserve(keep);
    for (std::size_t k = 0; k < keep; ++k) {
      const Candidate& c = cands[k];
      if (c.token < 0) {
        next.push_back(pool[c.parent]);
        continue;
      }
      Beam b;
      b.hyp.tokens = pool[c.parent].hyp.tokens;
      b.hyp.tokens.push_back(c.token);
      b.hyp.log_prob = c.score;
      b.hyp.finished = c.token == kEosId;
      b.state = steps[c.parent].state;
      next.push_back(std::move(b));
    }
    pool = std::move(next);
  }

  std::vector<Hypothesis> out;
  out.reserve(pool.size());
  for (auto& b : pool) out.push_back(std::move(b.hyp));
  std::sort(out.begin(), out.end(), ranks_before);
  return out;
}

std::vector<Hypothesis> multi_response(const ModelParams& params, std::span<const TokenId> post,
                                       DecodeOptions options) {
  const auto explored = beam_search(params, post, options);
  std::map<TokenId, Hypothesis> best;
  for (const auto& h : explored) {
    if (h.tokens.empty()) continue;
    auto [it, inserted] = best.try_emplace(h.tokens.front(), h);
    if (!inserted && ranks_before(h, it->second)) it->second = h;
  }
  std::vector<Hypothesis> out;
  out.reserve(best.size());
  for (auto& [first, h] : best) out.push_back(std::move(h));
  std::sort(out.begin(), out.end(), ranks_before);
  return out;
}

namespace {

struct Exhaustive {
  const ModelParams& params;
  const EncodedPost& enc;
  std::size_t max_len;
  bool suppress_unk;
  Hypothesis best;
  bool have_best = false;
  IdSeq prefix;

  void offer(double score, bool finished) {
    Hypothesis h{prefix, score, finished};
    if (!have_best || ranks_before(h, best)) {
      best = std::move(h);
      have_best = true;
    }
  }

  void search(const DecoderState& st, TokenId prev, double score) {
    const StepOutput step = decoder_step(params, st, prev, enc);
    for (std::size_t v = 0; v < step.log_probs.size(); ++v) {
      const auto id = static_cast<TokenId>(v);
      if (!token_allowed(id, suppress_unk)) continue;
      const double s = score + step.log_probs[v];
      prefix.push_back(id);
      if (id == kEosId) {
        offer(s, true);
      } else if (prefix.size() == max_len) {
        offer(s, false);
      } else {
        search(step.state, id, s);
      }
      prefix.pop_back();
    }
  }
};

}  // namespace

Hypothesis exhaustive_oracle(const ModelParams& params, std::span<const TokenId> post,
                             std::size_t max_len, bool suppress_unk) {
  const double space =
      std::pow(static_cast<double>(params.dims.response_vocab), static_cast<double>(max_len));
  if (space > kExhaustiveLimit) {
    throw Error("exhaustive_oracle: |V_resp|^max_len = " + std::to_string(space) +
                " exceeds the 1e6 guard");
  }
  if (max_len == 0) return {};
  const EncodedPost enc = encode(params, post);
  Exhaustive ex{params, enc, max_len, suppress_unk, {}, false, {}};
  ex.search(decoder_init(params, enc), kBosId, 0.0);
  return ex.best;
}

}  // namespace nrm
