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

#include <gtest/gtest.h>

#include <set>

#include "nrm/error.h"
#include "test_util.h"

namespace nrm {
namespace {

using testing::kAllSchemes;
using testing::random_ids;
using testing::random_model;
using testing::small_dims;

// Sharper output distributions make ties and pruning matter.
ModelParams peaked_model(Scheme s, std::uint64_t seed, std::size_t resp_vocab = 9) {
  ModelParams p = random_model(s, small_dims(12, resp_vocab), seed, 1.0);
  for (auto& x : p.readout.w_o.data()) x *= 3.0;
  return p;
}

double rescore(const ModelParams& p, const IdSeq& post, const Hypothesis& h) {
  return sequence_log_likelihood(p, post, h.tokens);
}

TEST(Greedy, ZeroLengthAndDeterminism) {
  const ModelParams p = peaked_model(Scheme::kLocal, 1);
  const IdSeq post{4, 5, 6};
  const Hypothesis empty = greedy_decode(p, post, 0);
  EXPECT_TRUE(empty.tokens.empty());
  EXPECT_EQ(empty.log_prob, 0.0);
  const Hypothesis a = greedy_decode(p, post, 10), b = greedy_decode(p, post, 10);
  EXPECT_EQ(a.tokens, b.tokens);
  EXPECT_EQ(a.log_prob, b.log_prob);
  if (a.finished) EXPECT_EQ(a.tokens.back(), kEosId);
}

TEST(Greedy, NeverEmitsPadOrBos) {
  ModelParams p = peaked_model(Scheme::kGlobal, 2);
  p.readout.b_o(kPadId, 0) = 50.0;
  p.readout.b_o(kBosId, 0) = 40.0;
  const Hypothesis h = greedy_decode(p, IdSeq{4}, 6);
  for (TokenId id : h.tokens) EXPECT_GT(id, kBosId);
}

TEST(Beam, WidthOneEqualsGreedy) {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const Scheme s = kAllSchemes[trial % 3];
    const ModelParams p = peaked_model(s, rng.next());
    const IdSeq post = random_ids(rng, 12, 1 + rng.below(5));
    const std::size_t max_len = 1 + rng.below(6);
    const Hypothesis g = greedy_decode(p, post, max_len);
    const auto b = beam_search(p, post, {.beam = 1, .max_len = max_len});
    ASSERT_EQ(b.size(), 1u);
    EXPECT_EQ(b[0].tokens, g.tokens);
    EXPECT_EQ(b[0].log_prob, g.log_prob);
  }
}

TEST(Beam, SaturatingWidthMatchesExhaustive) {
  Rng rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    const ModelParams p = peaked_model(kAllSchemes[trial % 3], rng.next(), 8);
    const IdSeq post = random_ids(rng, 12, 1 + rng.below(4));
    const auto beams = beam_search(p, post, {.beam = 512, .max_len = 3});
    const Hypothesis best = exhaustive_oracle(p, post, 3);
    EXPECT_EQ(beams.front().tokens, best.tokens);
    EXPECT_NEAR(beams.front().log_prob, best.log_prob, 1e-9);
  }
}

TEST(Beam, ScoresRescoreSortedAndUnique) {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const ModelParams p = peaked_model(kAllSchemes[trial % 3], rng.next());
    const IdSeq post = random_ids(rng, 12, 1 + rng.below(5));
    const auto beams = beam_search(p, post, {.beam = 7, .max_len = 5});
    std::set<IdSeq> seen;
    for (std::size_t i = 0; i < beams.size(); ++i) {
      EXPECT_NEAR(rescore(p, post, beams[i]), beams[i].log_prob, 1e-9);
      EXPECT_TRUE(seen.insert(beams[i].tokens).second);
      if (i) EXPECT_TRUE(!ranks_before(beams[i], beams[i - 1]));
      EXPECT_EQ(beams[i].finished, beams[i].tokens.back() == kEosId);
      if (!beams[i].finished) EXPECT_EQ(beams[i].tokens.size(), 5u);
    }
  }
}

TEST(Beam, WiderBeamNeverWorseOnRandomModels) {
  Rng rng(6);
  for (int trial = 0; trial < 40; ++trial) {
    const ModelParams p = peaked_model(kAllSchemes[trial % 3], rng.next());
    const IdSeq post = random_ids(rng, 12, 1 + rng.below(5));
    double prev = -1e300;
    for (std::size_t k = 1; k <= 12; ++k) {
      const double best = beam_search(p, post, {.beam = k, .max_len = 4}).front().log_prob;
      EXPECT_GE(best, prev - 1e-12) << "trial " << trial << " width " << k;
      prev = best;
    }
  }
}

TEST(Beam, SuppressUnk) {
  ModelParams p = peaked_model(Scheme::kHybrid, 7);
  p.readout.b_o(kUnkId, 0) = 30.0;
  const IdSeq post{4, 8};
  const auto plain = beam_search(p, post, {.beam = 5, .max_len = 4});
  EXPECT_EQ(plain.front().tokens.front(), kUnkId);
  for (const auto& h : beam_search(p, post, {.beam = 5, .max_len = 4, .suppress_unk = true})) {
    for (TokenId id : h.tokens) EXPECT_NE(id, kUnkId);
  }
  for (TokenId id : greedy_decode(p, post, 4, true).tokens) EXPECT_NE(id, kUnkId);
  EXPECT_THROW(beam_search(p, post, {.beam = 0}), Error);
}

TEST(MultiResponse, DistinctFirstTokensBestPerGroup) {
  Rng rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    const ModelParams p = peaked_model(kAllSchemes[trial % 3], rng.next());
    const IdSeq post = random_ids(rng, 12, 3);
    const DecodeOptions opts{.beam = 60, .max_len = 4};
    const auto explored = beam_search(p, post, opts);
    const auto multi = multi_response(p, post, opts);
    std::set<TokenId> firsts;
    for (std::size_t i = 0; i < multi.size(); ++i) {
      EXPECT_TRUE(firsts.insert(multi[i].tokens.front()).second);
      EXPECT_NEAR(rescore(p, post, multi[i]), multi[i].log_prob, 1e-9);
      if (i) EXPECT_GE(multi[i - 1].log_prob, multi[i].log_prob);
      for (const auto& h : explored) {
        if (h.tokens.front() == multi[i].tokens.front()) EXPECT_FALSE(ranks_before(h, multi[i]));
      }
    }
    std::set<TokenId> explored_firsts;
    for (const auto& h : explored) explored_firsts.insert(h.tokens.front());
    EXPECT_EQ(firsts, explored_firsts);
  }
}

TEST(Exhaustive, Guard) {
  const ModelParams p = peaked_model(Scheme::kLocal, 9, 10);
  EXPECT_THROW(exhaustive_oracle(p, IdSeq{4}, 7), Error);
  EXPECT_NO_THROW(exhaustive_oracle(p, IdSeq{4}, 3));
}

// A finished winner at length cap n stays a candidate for every larger cap;
// a capped unfinished one does not.
TEST(Exhaustive, FinishedWinnerBoundsLongerCaps) {
  Rng rng(11);
  int finished_seen = 0;
  for (int trial = 0; trial < 30; ++trial) {
    ModelParams p = peaked_model(kAllSchemes[trial % 3], rng.next(), 8);
    p.readout.b_o(kEosId, 0) += rng.uniform(0.0, 4.0);
    const IdSeq post = random_ids(rng, 12, 2);
    std::vector<Hypothesis> best;
    for (std::size_t n = 1; n <= 4; ++n) {
      best.push_back(exhaustive_oracle(p, post, n));
      EXPECT_NEAR(rescore(p, post, best.back()), best.back().log_prob, 1e-12);
    }
    for (std::size_t n = 0; n < best.size(); ++n) {
      if (!best[n].finished) continue;
      ++finished_seen;
      for (std::size_t m = n + 1; m < best.size(); ++m) EXPECT_GE(best[m].log_prob, best[n].log_prob);
    }
  }
  EXPECT_GT(finished_seen, 10);
}

// With max_len = 1 every sequence is one token, so the argmax is direct.
TEST(Exhaustive, SingleStepArgmax) {
  const ModelParams p = peaked_model(Scheme::kGlobal, 10);
  const IdSeq post{6, 7};
  const EncodedPost enc = encode(p, post);
  const StepOutput step = decoder_step(p, decoder_init(p, enc), kBosId, enc);
  TokenId best = kEosId;
  for (TokenId v = kEosId; v < 9; ++v) {
    if (step.log_probs[v] > step.log_probs[best]) best = v;
  }
  const Hypothesis h = exhaustive_oracle(p, post, 1);
  ASSERT_EQ(h.tokens.size(), 1u);
  EXPECT_EQ(h.tokens[0], best);
  EXPECT_EQ(h.finished, best == kEosId);
}

}  // namespace
}  // namespace nrm
