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

#include "nrm/corpus.h"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_set>

#include "nrm/error.h"

namespace nrm {

const std::array<const char*, kNumReserved> Vocabulary::kReservedTokens = {"<pad>", "<s>",
                                                                           "</s>", "<unk>"};

Vocabulary::Vocabulary(Side side)
    : Vocabulary(side, std::vector<std::string>(kReservedTokens.begin(), kReservedTokens.end())) {}

Vocabulary::Vocabulary(Side side, std::vector<std::string> tokens)
    : side_(side), tokens_(std::move(tokens)) {
  if (tokens_.size() < kNumReserved) throw Error("vocabulary: missing reserved tokens");
  for (std::size_t i = 0; i < kNumReserved; ++i) {
    if (tokens_[i] != kReservedTokens[i]) {
      throw Error("vocabulary: line " + std::to_string(i + 1) + " must be " +
                  kReservedTokens[i] + ", got '" + tokens_[i] + "'");
    }
  }
  index_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (tokens_[i].empty()) throw Error("vocabulary: empty token at id " + std::to_string(i));
    if (!index_.emplace(tokens_[i], static_cast<TokenId>(i)).second) {
      throw Error("vocabulary: duplicate token '" + tokens_[i] + "' at id " + std::to_string(i));
    }
  }
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw Error("vocabulary: id " + std::to_string(id) + " out of range [0, " +
                std::to_string(tokens_.size()) + ")");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

TokenId Vocabulary::id(const std::string& token) const {
  const auto it = index_.find(token);
  return it == index_.end() ? kUnkId : it->second;
}

bool is_valid_utf8(std::string_view s) {
  std::size_t i = 0;
  const auto n = s.size();
  while (i < n) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t len;
    std::uint32_t cp;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      len = 2;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      len = 3;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      len = 4;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + len > n) return false;
    for (std::size_t k = 1; k < len; ++k) {
      const auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    // Overlong forms, surrogates and out-of-range code points.
    if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000) ||
        cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
      return false;
    }
    i += len;
  }
  return true;
}

TokenSeq split_tokens(std::string_view s) {
  TokenSeq out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\r') ++i;
    if (i > start) out.emplace_back(s.substr(start, i - start));
  }
  return out;
}

std::string join_tokens(std::span<const std::string> tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

LoadReport parse_pairs(std::string_view text) {
  LoadReport report;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) {
      ++report.blank_lines;
      continue;
    }
    if (!is_valid_utf8(line)) {
      throw Error("pairs: invalid UTF-8 on line " + std::to_string(line_no));
    }
    const auto tab = line.find('\t');
    if (tab == std::string_view::npos) {
      throw Error("pairs: missing TAB separator on line " + std::to_string(line_no));
    }
    if (line.find('\t', tab + 1) != std::string_view::npos) {
      throw Error("pairs: more than one TAB on line " + std::to_string(line_no));
    }
    report.pairs.push_back({split_tokens(line.substr(0, tab)), split_tokens(line.substr(tab + 1))});
  }
  return report;
}

LoadReport load_pairs(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("pairs: cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_pairs(buffer.str());
}

void write_pairs(const std::filesystem::path& path, std::span<const PostResponsePair> pairs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("pairs: cannot write " + path.string());
  for (const auto& p : pairs) out << join_tokens(p.post) << '\t' << join_tokens(p.response) << '\n';
  if (!out) throw Error("pairs: write failed for " + path.string());
}

bool looks_like_url(std::string_view token) {
  return token.starts_with("http://") || token.starts_with("https://") ||
         token.starts_with("www.") || token.find("://") != std::string_view::npos;
}

CleanReport clean_corpus(std::span<const PostResponsePair> pairs, const CleanConfig& config) {
  CleanReport report;
  const std::unordered_set<std::string> stoplist(config.trivial_stoplist.begin(),
                                                 config.trivial_stoplist.end());

  std::vector<const PostResponsePair*> kept;
  kept.reserve(pairs.size());
  for (const auto& p : pairs) {
    if (p.post.empty()) {
      ++report.removed_empty;
      continue;
    }
    if (p.response.size() < config.min_response_tokens || p.response.empty() ||
        stoplist.contains(join_tokens(p.response))) {
      ++report.removed_trivial;
      continue;
    }
    const auto urls = std::count_if(p.response.begin(), p.response.end(),
                                    [](const std::string& t) { return looks_like_url(t); });
    if (static_cast<std::size_t>(urls) > config.max_url_tokens) {
      ++report.removed_url;
      continue;
    }
    kept.push_back(&p);
  }

  // Fan-out counts distinct posts per response string among the survivors.
  std::map<std::string, std::set<std::string>> posts_per_response;
  for (const auto* p : kept) {
    posts_per_response[join_tokens(p->response)].insert(join_tokens(p->post));
  }
  std::vector<const PostResponsePair*> not_ads;
  not_ads.reserve(kept.size());
  for (const auto* p : kept) {
    if (posts_per_response[join_tokens(p->response)].size() > config.max_response_fanout) {
      ++report.removed_fanout;
    } else {
      not_ads.push_back(p);
    }
  }

  std::unordered_map<std::string, std::size_t> per_post;
  for (const auto* p : not_ads) {
    auto& n = per_post[join_tokens(p->post)];
    if (n >= config.max_responses_per_post) {
      ++report.removed_cap;
      continue;
    }
    ++n;
    report.pairs.push_back(*p);
  }
  return report;
}

VocabBuild build_vocab(std::span<const PostResponsePair> pairs, Side side, std::size_t cap) {
  if (cap < 1) throw Error("build_vocab: cap must be at least 1");
  struct Count {
    std::size_t count = 0;
    std::size_t first_seen = 0;
  };
  std::unordered_map<std::string, Count> counts;
  std::vector<std::string> order;
  std::size_t total = 0;
  const std::unordered_set<std::string> reserved(Vocabulary::kReservedTokens.begin(),
                                                 Vocabulary::kReservedTokens.end());
  for (const auto& p : pairs) {
    for (const auto& tok : side == Side::kPost ? p.post : p.response) {
      ++total;
      if (reserved.contains(tok)) continue;
      auto [it, inserted] = counts.try_emplace(tok);
      if (inserted) {
        it->second.first_seen = order.size();
        order.push_back(tok);
      }
      ++it->second.count;
    }
  }
  if (total == 0) throw Error("build_vocab: empty corpus");

  std::vector<std::size_t> rank(order.size());
  std::iota(rank.begin(), rank.end(), 0);
  std::stable_sort(rank.begin(), rank.end(), [&](std::size_t a, std::size_t b) {
    return counts.at(order[a]).count > counts.at(order[b]).count;
  });
  rank.resize(std::min(cap, rank.size()));

  std::vector<std::string> tokens(Vocabulary::kReservedTokens.begin(),
                                  Vocabulary::kReservedTokens.end());
  std::size_t covered = 0;
  for (std::size_t r : rank) {
    tokens.push_back(order[r]);
    covered += counts.at(order[r]).count;
  }
  return {Vocabulary(side, std::move(tokens)),
          static_cast<double>(covered) / static_cast<double>(total)};
}

IdSeq encode(std::span<const std::string> tokens, const Vocabulary& vocab, bool add_bos_eos) {
  IdSeq ids;
  ids.reserve(tokens.size() + 2);
  if (add_bos_eos) ids.push_back(kBosId);
  for (const auto& t : tokens) ids.push_back(vocab.id(t));
  if (add_bos_eos) ids.push_back(kEosId);
  return ids;
}

TokenSeq decode(std::span<const TokenId> ids, const Vocabulary& vocab) {
  TokenSeq out;
  for (TokenId id : ids) {
    if (id == kPadId || id == kBosId || id == kEosId) continue;
    out.push_back(vocab.token(id));
  }
  return out;
}

void save_vocab(const std::filesystem::path& path, const Vocabulary& vocab) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("vocabulary: cannot write " + path.string());
  for (const auto& t : vocab.tokens()) out << t << '\n';
  if (!out) throw Error("vocabulary: write failed for " + path.string());
}

Vocabulary load_vocab(const std::filesystem::path& path, Side side) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("vocabulary: cannot open " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!is_valid_utf8(line)) {
      throw Error("vocabulary: invalid UTF-8 on line " + std::to_string(tokens.size() + 1));
    }
    tokens.push_back(line);
  }
  return Vocabulary(side, std::move(tokens));
}

std::size_t Batch::target_tokens() const {
  std::size_t n = 0;
  for (std::size_t len : response_lengths) n += len > 0 ? len - 1 : 0;
  return n;
}

Batch make_batch(std::span<const IdSeq> posts, std::span<const IdSeq> responses) {
  if (posts.size() != responses.size()) throw Error("make_batch: post/response count mismatch");
  Batch b;
  b.rows = posts.size();
  for (std::size_t i = 0; i < b.rows; ++i) {
    b.post_width = std::max(b.post_width, posts[i].size());
    b.response_width = std::max(b.response_width, responses[i].size());
  }
  b.post_ids.assign(b.rows * b.post_width, kPadId);
  b.post_mask.assign(b.rows * b.post_width, 0);
  b.response_ids.assign(b.rows * b.response_width, kPadId);
  b.response_mask.assign(b.rows * b.response_width, 0);
  for (std::size_t i = 0; i < b.rows; ++i) {
    b.post_lengths.push_back(posts[i].size());
    b.response_lengths.push_back(responses[i].size());
    for (std::size_t t = 0; t < posts[i].size(); ++t) {
      b.post_ids[i * b.post_width + t] = posts[i][t];
      b.post_mask[i * b.post_width + t] = 1;
    }
    for (std::size_t t = 0; t < responses[i].size(); ++t) {
      b.response_ids[i * b.response_width + t] = responses[i][t];
      b.response_mask[i * b.response_width + t] = 1;
    }
  }
  return b;
}

std::vector<EncodedPair> encode_pairs(std::span<const PostResponsePair> pairs,
                                      const Vocabulary& post_vocab,
                                      const Vocabulary& response_vocab,
                                      std::size_t max_response_tokens) {
  std::vector<EncodedPair> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    std::span<const std::string> resp = p.response;
    if (max_response_tokens > 0 && resp.size() > max_response_tokens) {
      resp = resp.first(max_response_tokens);
    }
    out.push_back({encode(p.post, post_vocab, false), encode(resp, response_vocab, true)});
  }
  return out;
}

std::vector<Batch> make_batches(std::span<const EncodedPair> pairs, std::size_t batch_size,
                                Rng& rng) {
  if (batch_size < 1) throw Error("make_batches: batch_size must be at least 1");
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  shuffle(order.begin(), order.end(), rng);
  std::vector<Batch> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    std::vector<IdSeq> posts, responses;
    for (std::size_t k = start; k < end; ++k) {
      posts.push_back(pairs[order[k]].post);
      responses.push_back(pairs[order[k]].response);
    }
    batches.push_back(make_batch(posts, responses));
  }
  return batches;
}

std::vector<Batch> make_batches(std::span<const PostResponsePair> pairs,
                                const Vocabulary& post_vocab, const Vocabulary& response_vocab,
                                std::size_t batch_size, Rng& rng) {
  const auto encoded = encode_pairs(pairs, post_vocab, response_vocab);
  return make_batches(encoded, batch_size, rng);
}

}  // namespace nrm
