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

#ifndef NRM_TESTS_TEST_UTIL_H_
#define NRM_TESTS_TEST_UTIL_H_

#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include <unistd.h>

#include "nrm/corpus.h"
#include "nrm/model.h"
#include "nrm/rng.h"
#include "nrm/training.h"

namespace nrm::testing {

// Toy corpus: posts of 3..6 tokens over p0..p29, responses of 2..5 over r0..r29.
inline std::vector<PostResponsePair> toy_pairs(std::size_t n = 20, std::uint64_t seed = 42) {
  Rng g(seed);
  std::vector<PostResponsePair> pairs;
  for (std::size_t i = 0; i < n; ++i) {
    PostResponsePair p;
    const std::size_t post_len = 3 + g.below(4);
    const std::size_t resp_len = 2 + g.below(4);
    for (std::size_t t = 0; t < post_len; ++t) p.post.push_back("p" + std::to_string(g.below(30)));
    for (std::size_t t = 0; t < resp_len; ++t) {
      p.response.push_back("r" + std::to_string(g.below(30)));
    }
    pairs.push_back(std::move(p));
  }
  return pairs;
}

inline Dims small_dims(std::size_t post_vocab = 12, std::size_t response_vocab = 12) {
  return Dims{.hidden = 8, .embed = 6, .attention = 8, .stimulus = 6,
              .post_vocab = post_vocab, .response_vocab = response_vocab};
}

inline ModelParams random_model(Scheme scheme, const Dims& dims, std::uint64_t seed,
                                double scale = 0.5) {
  Rng rng(seed);
  return init_params(scheme, dims, rng, -scale, scale);
}

// Ids drawn from the non-reserved range.
inline IdSeq random_ids(Rng& rng, std::size_t vocab, std::size_t len) {
  IdSeq ids(len);
  for (auto& id : ids) id = static_cast<TokenId>(kNumReserved + rng.below(vocab - kNumReserved));
  return ids;
}

inline const Scheme kAllSchemes[] = {Scheme::kGlobal, Scheme::kLocal, Scheme::kHybrid};

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    Rng rng(std::hash<std::string>{}(tag) ^ static_cast<std::uint64_t>(::getpid()));
    path_ = std::filesystem::temp_directory_path() /
            ("nrm_" + tag + "_" + std::to_string(rng.next() % 1000000007ULL));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace nrm::testing

#endif  // NRM_TESTS_TEST_UTIL_H_
