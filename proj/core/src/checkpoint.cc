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

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "nrm/error.h"

namespace nrm {
namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

class Writer {
 public:
  template <typename T>
  void put(T v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    bytes_.insert(bytes_.end(), p, p + sizeof(T));
  }
  void put_bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    bytes_.insert(bytes_.end(), p, p + n);
  }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string get_string(std::size_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  [[noreturn]] void fail(const std::string& msg) const {
    throw Error("checkpoint: " + msg + " at offset " + std::to_string(pos_));
  }

 private:
  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      fail(std::string("truncated while reading ") + what);
    }
  }
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

void check_precision(int precision_bytes) {
  if (precision_bytes != 4 && precision_bytes != 8) {
    throw Error("checkpoint: precision must be 4 or 8 bytes, got " +
                std::to_string(precision_bytes));
  }
}

std::uint32_t to_u32(std::size_t v, const char* what) {
  if (v > UINT32_MAX) throw Error(std::string("checkpoint: ") + what + " exceeds u32");
  return static_cast<std::uint32_t>(v);
}

}  // namespace

std::size_t checkpoint_size(const ModelParams& params, int precision_bytes) {
  check_precision(precision_bytes);
  std::size_t n = 4 + 4 + 1 + 1 + 6 * 4 + 4;
  for (const auto& t : tensors(params)) {
    n += 2 + t.name.size() + 1 + (t.is_vector ? 1 : 2) * 4;
    n += t.tensor->size() * static_cast<std::size_t>(precision_bytes);
  }
  return n;
}

std::vector<std::uint8_t> serialize_checkpoint(const ModelParams& params, int precision_bytes) {
  check_precision(precision_bytes);
  Writer w;
  w.put_bytes(kCheckpointMagic, 4);
  w.put<std::uint32_t>(kCheckpointVersion);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(params.scheme));
  w.put<std::uint8_t>(static_cast<std::uint8_t>(precision_bytes));
  const Dims& d = params.dims;
  for (std::size_t v : {d.hidden, d.embed, d.attention, d.stimulus, d.post_vocab,
                        d.response_vocab}) {
    w.put<std::uint32_t>(to_u32(v, "dimension"));
  }
  const auto list = tensors(params);
  w.put<std::uint32_t>(to_u32(list.size(), "tensor count"));
  for (const auto& t : list) {
    w.put<std::uint16_t>(static_cast<std::uint16_t>(t.name.size()));
    w.put_bytes(t.name.data(), t.name.size());
    if (t.is_vector) {
      w.put<std::uint8_t>(1);
      w.put<std::uint32_t>(to_u32(t.tensor->rows(), "tensor dim"));
    } else {
      w.put<std::uint8_t>(2);
      w.put<std::uint32_t>(to_u32(t.tensor->rows(), "tensor dim"));
      w.put<std::uint32_t>(to_u32(t.tensor->cols(), "tensor dim"));
    }
    for (double x : t.tensor->data()) {
      if (precision_bytes == 8) {
        w.put<double>(x);
      } else {
        w.put<float>(static_cast<float>(x));
      }
    }
  }
  return w.take();
}

ModelParams deserialize_checkpoint(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  const std::string magic = r.get_string(4, "magic");
  if (magic != std::string(kCheckpointMagic, 4)) {
    throw Error("checkpoint: bad magic at offset 0");
  }
  const auto version = r.get<std::uint32_t>("version");
  if (version != kCheckpointVersion) r.fail("unsupported version " + std::to_string(version));
  const auto scheme_byte = r.get<std::uint8_t>("scheme");
  if (scheme_byte > 2) r.fail("unknown scheme " + std::to_string(scheme_byte));
  const auto precision = r.get<std::uint8_t>("precision");
  if (precision != 4 && precision != 8) {
    r.fail("unsupported precision " + std::to_string(precision));
  }
  Dims d;
  d.hidden = r.get<std::uint32_t>("dims");
  d.embed = r.get<std::uint32_t>("dims");
  d.attention = r.get<std::uint32_t>("dims");
  d.stimulus = r.get<std::uint32_t>("dims");
  d.post_vocab = r.get<std::uint32_t>("dims");
  d.response_vocab = r.get<std::uint32_t>("dims");

  ModelParams params;
  try {
    params = ModelParams::zeros(static_cast<Scheme>(scheme_byte), d);
  } catch (const Error& e) {
    r.fail(e.what());
  }
  auto expected = tensors(params);
  const auto count = r.get<std::uint32_t>("tensor count");
  if (count != expected.size()) {
    r.fail("expected " + std::to_string(expected.size()) + " tensors, header says " +
           std::to_string(count));
  }
  for (auto& t : expected) {
    const auto name_len = r.get<std::uint16_t>("tensor name length");
    const std::string name = r.get_string(name_len, "tensor name");
    if (name != t.name) r.fail("expected tensor '" + t.name + "', found '" + name + "'");
    const auto ndim = r.get<std::uint8_t>("tensor ndim");
    if (ndim != (t.is_vector ? 1 : 2)) r.fail("tensor '" + name + "' has wrong rank");
    const std::size_t rows = r.get<std::uint32_t>("tensor dims");
    const std::size_t cols = ndim == 2 ? r.get<std::uint32_t>("tensor dims") : 1;
    if (rows != t.tensor->rows() || cols != t.tensor->cols()) {
      r.fail("tensor '" + name + "' has shape " + std::to_string(rows) + "x" +
             std::to_string(cols) + ", expected " + t.tensor->shape_string());
    }
    for (auto& x : t.tensor->data()) {
      x = precision == 8 ? r.get<double>("tensor payload")
                         : static_cast<double>(r.get<float>("tensor payload"));
    }
    if (!all_finite(t.tensor->data())) r.fail("tensor '" + name + "' holds non-finite values");
  }
  if (r.remaining() != 0) r.fail("trailing bytes after last tensor");
  return params;
}

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path,
                     int precision_bytes) {
  const auto bytes = serialize_checkpoint(params, precision_bytes);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("checkpoint: cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("checkpoint: write failed for " + path.string());
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("checkpoint: cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

}  // namespace nrm
