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

#ifndef NRM_EVALSTATS_H_
#define NRM_EVALSTATS_H_

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "nrm/numerics.h"

namespace nrm {

struct Category {
  std::string name;
  double score = 0.0;
};

// Unsuitable (0), Neutral (+1), Suitable (+2).
std::vector<Category> default_categories();

// N items x k raters of category indices into `categories`.
class AnnotationTable {
 public:
  AnnotationTable(std::vector<Category> categories, std::size_t items, std::size_t raters);
  AnnotationTable(std::vector<Category> categories, std::vector<std::vector<std::size_t>> labels);

  const std::vector<Category>& categories() const { return categories_; }
  std::size_t items() const { return items_; }
  std::size_t raters() const { return raters_; }
  std::size_t label(std::size_t item, std::size_t rater) const;
  void set_label(std::size_t item, std::size_t rater, std::size_t category);
  // n_ic: raters that put item i in category c.
  std::vector<std::size_t> category_counts(std::size_t item) const;

 private:
  std::vector<Category> categories_;
  std::size_t items_;
  std::size_t raters_;
  std::vector<std::size_t> labels_;
};

// Reads `item,rater,label` CSV. Labels may be a category name or its score.
// Every item must be labelled by every rater exactly once.
AnnotationTable load_annotations(const std::filesystem::path& path,
                                 std::vector<Category> categories = default_categories());
AnnotationTable parse_annotations(std::string_view text,
                                  std::vector<Category> categories = default_categories());

struct ScoreSummary {
  double mean_score = 0.0;
  std::vector<double> fractions;  // one per category, in category order
};

ScoreSummary score_summary(const AnnotationTable& table);

double fleiss_kappa(const AnnotationTable& table);

struct ScoreMatrix {
  std::vector<std::string> treatments;
  Matrix scores;  // subjects x treatments
};

// CSV with a header row of treatment names and one numeric row per subject.
ScoreMatrix load_score_matrix(const std::filesystem::path& path);
ScoreMatrix parse_score_matrix(std::string_view text);

struct FriedmanResult {
  double statistic = 0.0;
  std::size_t dof = 0;
  double p_value = 1.0;
  std::vector<double> average_ranks;
};

// Higher scores rank first (rank 1). Ties share the average rank and the
// statistic is divided by 1 - sum(t^3 - t) / (N k (k^2 - 1)).
FriedmanResult friedman_test(const Matrix& scores);

// Q(dof/2, x/2): upper regularized incomplete gamma.
double chi_square_sf(double x, std::size_t dof);
double regularized_gamma_q(double a, double x);

}  // namespace nrm

#endif  // NRM_EVALSTATS_H_
