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

#ifndef NRM_CHECKPOINT_H_
#define NRM_CHECKPOINT_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "nrm/model.h"

namespace nrm {

// Binary layout, all integers little-endian:
//   "NRMC" | u32 version=1 | u8 scheme | u8 bytes per element (4 or 8)
//   | u32 d_h, d_emb, d_a, d_L, |V_post|, |V_resp|
//   | u32 tensor count
//   | per tensor: u16 name length, name bytes, u8 ndim, u32 dims..., payload
// Payloads are row-major IEEE-754 in the declared precision.
inline constexpr char kCheckpointMagic[4] = {'N', 'R', 'M', 'C'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> serialize_checkpoint(const ModelParams& params, int precision_bytes = 8);
ModelParams deserialize_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path,
                     int precision_bytes = 8);
ModelParams load_checkpoint(const std::filesystem::path& path);

// Exact byte size the serializer produces for these params.
std::size_t checkpoint_size(const ModelParams& params, int precision_bytes);

}  // namespace nrm

#endif  // NRM_CHECKPOINT_H_
