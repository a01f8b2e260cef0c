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

#include "nrm/checkpoint.h"

#include <gtest/gtest.h>

#include <cstring>

#include "nrm/error.h"
#include "test_util.h"

namespace nrm {
namespace {

using testing::kAllSchemes;
using testing::random_model;
using testing::small_dims;

std::size_t expected_size(const ModelParams& p, int precision) {
  std::size_t n = 4 + 4 + 1 + 1 + 6 * 4 + 4;
  for (const auto& t : tensors(p)) {
    n += 2 + t.name.size() + 1 + (t.is_vector ? 1 : 2) * 4 + t.tensor->size() * precision;
  }
  return n;
}

TEST(Checkpoint, BitwiseRoundTrip) {
  for (Scheme s : kAllSchemes) {
    const ModelParams p = random_model(s, small_dims(14, 13), 4);
    const auto bytes = serialize_checkpoint(p);
    const ModelParams back = deserialize_checkpoint(bytes);
    EXPECT_EQ(back.scheme, s);
    EXPECT_EQ(back.dims, p.dims);
    const auto a = tensors(p);
    const auto b = tensors(back);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      EXPECT_EQ(a[i].name, b[i].name);
      ASSERT_EQ(a[i].tensor->size(), b[i].tensor->size());
      EXPECT_EQ(std::memcmp(a[i].tensor->data().data(), b[i].tensor->data().data(),
                            a[i].tensor->size() * sizeof(double)),
                0)
          << a[i].name;
    }
    const IdSeq post{4, 9, 5}, resp{6, 7, kEosId};
    EXPECT_EQ(sequence_log_likelihood(p, post, resp), sequence_log_likelihood(back, post, resp));
    EXPECT_EQ(serialize_checkpoint(back), bytes);
  }
}

TEST(Checkpoint, HeaderLayout) {
  const ModelParams p = random_model(Scheme::kHybrid, small_dims(), 1);
  const auto bytes = serialize_checkpoint(p, 8);
  ASSERT_GE(bytes.size(), 38u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "NRMC");
  EXPECT_EQ(bytes[4], 1);
  EXPECT_EQ(bytes[5] | bytes[6] | bytes[7], 0);
  EXPECT_EQ(bytes[8], 2);
  EXPECT_EQ(bytes[9], 8);
  EXPECT_EQ(bytes[10], 8);  // d_h low byte
  const std::uint32_t count = bytes[34] | bytes[35] << 8 | bytes[36] << 16 | bytes[37] << 24;
  EXPECT_EQ(count, tensors(p).size());
}

TEST(Checkpoint, SizeAccounting) {
  for (Scheme s : kAllSchemes) {
    for (int precision : {4, 8}) {
      const ModelParams p = random_model(s, small_dims(17, 9), 2);
      const auto bytes = serialize_checkpoint(p, precision);
      EXPECT_EQ(bytes.size(), expected_size(p, precision));
      EXPECT_EQ(checkpoint_size(p, precision), bytes.size());
    }
  }
}

TEST(Checkpoint, SinglePrecisionRoundsToFloat) {
  const ModelParams p = random_model(Scheme::kLocal, small_dims(), 7);
  const ModelParams back = deserialize_checkpoint(serialize_checkpoint(p, 4));
  const auto a = tensors(p);
  const auto b = tensors(back);
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t k = 0; k < a[i].tensor->size(); ++k) {
      EXPECT_EQ(b[i].tensor->data()[k], static_cast<double>(static_cast<float>(a[i].tensor->data()[k])));
    }
  }
  EXPECT_THROW(serialize_checkpoint(p, 2), Error);
}

TEST(Checkpoint, RejectsCorruption) {
  const ModelParams p = random_model(Scheme::kLocal, small_dims(), 7);
  const auto bytes = serialize_checkpoint(p);

  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  try {
    deserialize_checkpoint(bad_magic);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("offset 0"), std::string::npos) << e.what();
  }

  auto bad_version = bytes;
  bad_version[4] = 2;
  EXPECT_THROW(deserialize_checkpoint(bad_version), Error);

  auto bad_scheme = bytes;
  bad_scheme[8] = 7;
  EXPECT_THROW(deserialize_checkpoint(bad_scheme), Error);

  // Every proper prefix is rejected.
  for (std::size_t cut = 0; cut < bytes.size(); cut += 1 + cut / 7) {
    std::vector<std::uint8_t> prefix(bytes.begin(), bytes.begin() + cut);
    try {
      deserialize_checkpoint(prefix);
      ADD_FAILURE() << "accepted prefix of length " << cut;
    } catch (const Error& e) {
      EXPECT_NE(std::string(e.what()).find("offset"), std::string::npos);
    }
  }
  auto trailing = bytes;
  trailing.push_back(0);
  EXPECT_THROW(deserialize_checkpoint(trailing), Error);
}

TEST(Checkpoint, FileRoundTrip) {
  testing::TempDir dir("ckpt");
  const ModelParams p = random_model(Scheme::kGlobal, small_dims(), 9);
  save_checkpoint(p, dir.file("m.nrm"));
  const ModelParams back = load_checkpoint(dir.file("m.nrm"));
  EXPECT_EQ(serialize_checkpoint(back), serialize_checkpoint(p));
  EXPECT_THROW(load_checkpoint(dir.file("absent.nrm")), Error);
}

}  // namespace
}  // namespace nrm
