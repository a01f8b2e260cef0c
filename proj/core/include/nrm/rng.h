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

#ifndef NRM_RNG_H_
#define NRM_RNG_H_

#include <array>
#include <cstddef>
#include <cstdint>

namespace nrm {

// Portable deterministic generator: xoshiro256** seeded through splitmix64.
//
// Seeding (splitmix64, applied four times to fill s[0..3]):
//   x += 0x9e3779b97f4a7c15
//   z = x; z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9
//          z = (z ^ (z >> 27)) * 0x94d049bb133111eb
//   out = z ^ (z >> 31)
//
// Update (xoshiro256**):
//   result = rotl(s1 * 5, 7) * 9
//   t = s1 << 17
//   s2 ^= s0; s3 ^= s1; s1 ^= s2; s0 ^= s3; s2 ^= t; s3 = rotl(s3, 45)
//
// Doubles use the top 53 bits: (next() >> 11) * 2^-53, which lies in [0, 1).
// Only integer arithmetic is involved, so sequences are identical on every
// platform for a given seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t next();
  // Uniform in [0, 1).
  double uniform();
  // Uniform in [lo, hi).
  double uniform(double lo, double hi);
  // Uniform integer in [0, n); n must be positive. Rejection sampling keeps
  // it unbiased.
  std::uint64_t below(std::uint64_t n);

 private:
  std::uint64_t seed_;
  std::array<std::uint64_t, 4> state_;
};

// Fisher-Yates shuffle driven by Rng::below.
template <typename RandomIt>
void shuffle(RandomIt first, RandomIt last, Rng& rng) {
  const auto n = static_cast<std::uint64_t>(last - first);
  for (std::uint64_t i = n; i > 1; --i) {
    const auto j = rng.below(i);
    using std::swap;
    swap(first[i - 1], first[j]);
  }
}

}  // namespace nrm

#endif  // NRM_RNG_H_
