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

#ifndef NRM_NUMERICS_H_
#define NRM_NUMERICS_H_

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "nrm/rng.h"

namespace nrm {

using Vector = std::vector<double>;

// Dense row-major matrix of doubles. Column vectors (biases) are stored as
// n x 1 matrices.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  void fill(double value);
  // "rows x cols", used in error messages.
  std::string shape_string() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix matmul(const Matrix& a, const Matrix& b);

// y = a * x
Vector matvec(const Matrix& a, std::span<const double> x);
// y += a * x
void matvec_add(const Matrix& a, std::span<const double> x, std::span<double> y);
// y += a^T * x
void matvec_transposed_add(const Matrix& a, std::span<const double> x, std::span<double> y);
// m += u * v^T
void add_outer(Matrix& m, std::span<const double> u, std::span<const double> v);
// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);
double dot(std::span<const double> a, std::span<const double> b);

double sigmoid(double x);
void sigmoid_inplace(std::span<double> v);
void tanh_inplace(std::span<double> v);
double log_sum_exp(std::span<const double> v);
Vector softmax_stable(std::span<const double> logits);

bool all_finite(std::span<const double> v);
double squared_norm(std::span<const double> v);

Matrix uniform_init(Rng& rng, std::size_t rows, std::size_t cols, double lo, double hi);

// Rescales every matrix by max_norm / N when the global L2 norm N exceeds
// max_norm. Returns the applied factor (1 when nothing changed).
double clip_global_norm(std::span<Matrix* const> grads, double max_norm);

}  // namespace nrm

#endif  // NRM_NUMERICS_H_
