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

#ifndef NRM_CORPUS_H_
#define NRM_CORPUS_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "nrm/rng.h"

namespace nrm {

using TokenId = std::int32_t;
using TokenSeq = std::vector<std::string>;
using IdSeq = std::vector<TokenId>;

inline constexpr TokenId kPadId = 0;
inline constexpr TokenId kBosId = 1;
inline constexpr TokenId kEosId = 2;
inline constexpr TokenId kUnkId = 3;
inline constexpr std::size_t kNumReserved = 4;

enum class Side { kPost, kResponse };

struct PostResponsePair {
  TokenSeq post;
  TokenSeq response;

  friend bool operator==(const PostResponsePair&, const PostResponsePair&) = default;
};

// Token <-> id bijection. Ids 0..3 are always <pad>, <s>, </s>, <unk>.
class Vocabulary {
 public:
  static const std::array<const char*, kNumReserved> kReservedTokens;

  // Vocabulary holding only the reserved tokens.
  explicit Vocabulary(Side side = Side::kPost);
  // tokens must start with the four reserved tokens and contain no repeats.
  Vocabulary(Side side, std::vector<std::string> tokens);

  Side side() const { return side_; }
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::string& token(TokenId id) const;
  // UNK for out-of-vocabulary tokens.
  TokenId id(const std::string& token) const;
  bool contains(const std::string& token) const { return index_.contains(token); }

 private:
  Side side_;
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

struct VocabBuild {
  Vocabulary vocab;
  // Occurrences covered by kept tokens / all occurrences on that side.
  double coverage = 0.0;
};

struct LoadReport {
  std::vector<PostResponsePair> pairs;
  std::size_t blank_lines = 0;
};

// Reads `post tokens<TAB>response tokens` lines. Throws on a line without a
// TAB (reporting its 1-based number) or on invalid UTF-8.
LoadReport load_pairs(const std::filesystem::path& path);
LoadReport parse_pairs(std::string_view text);
void write_pairs(const std::filesystem::path& path, std::span<const PostResponsePair> pairs);

bool is_valid_utf8(std::string_view s);
TokenSeq split_tokens(std::string_view s);
std::string join_tokens(std::span<const std::string> tokens);

struct CleanConfig {
  // A response is trivial when shorter than this or when its text is listed.
  std::size_t min_response_tokens = 2;
  std::vector<std::string> trivial_stoplist = {"wow", "haha", "ok", "lol", "hmm", "yes", "no"};
  // Responses carrying more than this many URL-like tokens are treated as ads.
  std::size_t max_url_tokens = 0;
  // A response string attached to more than this many distinct posts is an ad.
  std::size_t max_response_fanout = 10;
  // Only the first N responses of each post (input order) are kept.
  std::size_t max_responses_per_post = 30;
};

struct CleanReport {
  std::vector<PostResponsePair> pairs;
  std::size_t removed_empty = 0;
  std::size_t removed_trivial = 0;
  std::size_t removed_url = 0;
  std::size_t removed_fanout = 0;
  std::size_t removed_cap = 0;
};

// Rules run in order: empty post, trivial response, URL ads, duplicate
// fan-out ads, per-post cap. Each pair is counted under the first rule that
// removes it. Applying the function to its own output removes nothing.
CleanReport clean_corpus(std::span<const PostResponsePair> pairs, const CleanConfig& config);
bool looks_like_url(std::string_view token);

// Keeps the `cap` most frequent tokens of one side; ties go to the token seen
// first. Throws on an empty corpus.
VocabBuild build_vocab(std::span<const PostResponsePair> pairs, Side side, std::size_t cap);

IdSeq encode(std::span<const std::string> tokens, const Vocabulary& vocab, bool add_bos_eos);
// Drops BOS/EOS/PAD ids.
TokenSeq decode(std::span<const TokenId> ids, const Vocabulary& vocab);

void save_vocab(const std::filesystem::path& path, const Vocabulary& vocab);
Vocabulary load_vocab(const std::filesystem::path& path, Side side);

// Padded minibatch. Response rows carry BOS ... EOS.
struct Batch {
  std::size_t rows = 0;
  std::size_t post_width = 0;
  std::size_t response_width = 0;
  std::vector<TokenId> post_ids;        // rows x post_width
  std::vector<std::uint8_t> post_mask;  // rows x post_width
  std::vector<TokenId> response_ids;
  std::vector<std::uint8_t> response_mask;
  std::vector<std::size_t> post_lengths;
  std::vector<std::size_t> response_lengths;

  std::span<const TokenId> post(std::size_t row) const {
    return {post_ids.data() + row * post_width, post_lengths[row]};
  }
  std::span<const TokenId> response(std::size_t row) const {
    return {response_ids.data() + row * response_width, response_lengths[row]};
  }
  // Number of predicted tokens: everything after BOS.
  std::size_t target_tokens() const;
};

// Assembles one batch from already-encoded rows; responses must be framed.
Batch make_batch(std::span<const IdSeq> posts, std::span<const IdSeq> responses);

struct EncodedPair {
  IdSeq post;
  IdSeq response;  // BOS ... EOS
};

// Encodes pairs, truncating response content to max_response_tokens when it
// is nonzero.
std::vector<EncodedPair> encode_pairs(std::span<const PostResponsePair> pairs,
                                      const Vocabulary& post_vocab,
                                      const Vocabulary& response_vocab,
                                      std::size_t max_response_tokens = 0);

// Shuffles with rng, then cuts consecutive batches of batch_size rows.
std::vector<Batch> make_batches(std::span<const EncodedPair> pairs, std::size_t batch_size,
                                Rng& rng);
std::vector<Batch> make_batches(std::span<const PostResponsePair> pairs,
                                const Vocabulary& post_vocab, const Vocabulary& response_vocab,
                                std::size_t batch_size, Rng& rng);

}  // namespace nrm

#endif  // NRM_CORPUS_H_
