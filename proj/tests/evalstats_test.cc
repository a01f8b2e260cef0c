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

#include "nrm/evalstats.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "nrm/error.h"
#include "test_util.h"

namespace nrm {
namespace {

AnnotationTable table(const std::vector<std::vector<std::size_t>>& labels) {
  return AnnotationTable(default_categories(), labels);
}

TEST(ScoreSummary, MeansAndFractions) {
  const ScoreSummary all = score_summary(table({{2, 2}, {2, 2}}));
  EXPECT_DOUBLE_EQ(all.mean_score, 2.0);
  EXPECT_EQ(all.fractions, (std::vector<double>{0.0, 0.0, 1.0}));
  EXPECT_DOUBLE_EQ(score_summary(table({{2, 0}})).mean_score, 1.0);
  const ScoreSummary mixed = score_summary(table({{0, 1, 2}, {2, 2, 1}, {0, 0, 1}}));
  EXPECT_NEAR(mixed.fractions[0] + mixed.fractions[1] + mixed.fractions[2], 1.0, 1e-12);
  EXPECT_NEAR(mixed.mean_score, 9.0 / 9.0, 1e-15);
}

TEST(FleissKappa, PerfectAgreementAndDegenerate) {
  EXPECT_DOUBLE_EQ(fleiss_kappa(table({{0, 0, 0}, {2, 2, 2}, {1, 1, 1}})), 1.0);
  EXPECT_DOUBLE_EQ(fleiss_kappa(table({{0, 0}, {2, 2}})), 1.0);
  EXPECT_THROW(fleiss_kappa(table({{1, 1, 1}, {1, 1, 1}})), Error);
  EXPECT_THROW(fleiss_kappa(table({{1}, {2}})), Error);
}

// P_i = 1/3, 1, 1/3, 0; p = (4, 3, 5)/12; kappa = (5/12 - 25/72) / (47/72) = 5/47.
TEST(FleissKappa, HandEvaluatedFourByThree) {
  EXPECT_NEAR(fleiss_kappa(table({{2, 2, 1}, {0, 0, 0}, {1, 2, 2}, {0, 1, 2}})), 5.0 / 47.0, 1e-15);
}

long double kappa_oracle(const std::vector<std::vector<std::size_t>>& labels, std::size_t cats) {
  const std::size_t n = labels.size(), k = labels[0].size();
  long double pbar = 0;
  std::vector<long double> pc(cats, 0);
  for (const auto& row : labels) {
    std::vector<long double> c(cats, 0);
    for (auto l : row) c[l] += 1;
    long double agree = 0;
    for (std::size_t j = 0; j < cats; ++j) agree += c[j] * (c[j] - 1), pc[j] += c[j];
    pbar += agree / (k * (k - 1.0L));
  }
  pbar /= n;
  long double pe = 0;
  for (auto v : pc) pe += (v / (n * k)) * (v / (n * k));
  return (pbar - pe) / (1 - pe);
}

TEST(FleissKappa, RandomTablesMatchOracleAndInvariances) {
  Rng rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(8), k = 2 + rng.below(5);
    std::vector<std::vector<std::size_t>> labels(n, std::vector<std::size_t>(k));
    for (auto& row : labels) {
      for (auto& l : row) l = rng.below(3);
    }
    const AnnotationTable t = table(labels);
    double kappa;
    try {
      kappa = fleiss_kappa(t);
    } catch (const Error&) {
      continue;  // single category used
    }
    EXPECT_NEAR(kappa, static_cast<double>(kappa_oracle(labels, 3)), 1e-12);
    EXPECT_LE(kappa, 1.0 + 1e-12);
    EXPECT_GE(kappa, -1.0);

    // Swap category 0 and 2, shuffle raters within every item, reverse items.
    auto relabeled = labels;
    for (auto& row : relabeled) {
      for (auto& l : row) l = 2 - l;
      shuffle(row.begin(), row.end(), rng);
    }
    std::reverse(relabeled.begin(), relabeled.end());
    EXPECT_NEAR(fleiss_kappa(table(relabeled)), kappa, 1e-12);
  }
}

TEST(Annotations, ParseNamesOrScores) {
  const AnnotationTable t = parse_annotations(
      "item,rater,label\n"
      "q1,alice,Suitable\n"
      "q1,bob,2\n"
      "q2,alice,0\n"
      "q2,bob,Neutral\n");
  EXPECT_EQ(t.items(), 2u);
  EXPECT_EQ(t.raters(), 2u);
  EXPECT_DOUBLE_EQ(score_summary(t).mean_score, 5.0 / 4.0);
  EXPECT_THROW(parse_annotations("a,b,c\nq1,x,0\n"), Error);
  EXPECT_THROW(parse_annotations("item,rater,label\nq1,x,great\n"), Error);
  EXPECT_THROW(parse_annotations("item,rater,label\nq1,x,0\nq1,x,1\n"), Error);
  EXPECT_THROW(parse_annotations("item,rater,label\nq1,x,0\nq2,y,1\n"), Error);
  EXPECT_THROW(parse_annotations("item,rater,label\n"), Error);
}

TEST(Friedman, IdenticalColumns) {
  const Matrix m = Matrix::from_rows({{1, 1, 1}, {0, 0, 0}, {2, 2, 2}});
  const FriedmanResult r = friedman_test(m);
  EXPECT_EQ(r.statistic, 0.0);
  EXPECT_EQ(r.p_value, 1.0);
  EXPECT_EQ(r.dof, 2u);
  for (double a : r.average_ranks) EXPECT_DOUBLE_EQ(a, 2.0);
}

// Ranks (1, 2) in each of 3 subjects: 12*3/6 * 2 * 0.25 = 3.
TEST(Friedman, TwoTreatmentsAlwaysOrdered) {
  const FriedmanResult r = friedman_test(Matrix::from_rows({{2, 1}, {1, 0}, {2, 0}}));
  EXPECT_EQ(r.average_ranks, (std::vector<double>{1.0, 2.0}));
  EXPECT_DOUBLE_EQ(r.statistic, 3.0);
  EXPECT_EQ(r.dof, 1u);
  EXPECT_NEAR(r.p_value, std::erfc(std::sqrt(1.5)), 1e-12);
}

// Cross-checked against an external statistics package with the same tie correction.
TEST(Friedman, TiedThreeTreatmentExample) {
  const Matrix m =
      Matrix::from_rows({{2, 1, 1}, {0, 1, 2}, {2, 2, 1}, {1, 0, 0}, {2, 1, 0}, {1, 1, 2}});
  const FriedmanResult r = friedman_test(m);
  EXPECT_NEAR(r.statistic, 1.2, 1e-12);
  EXPECT_NEAR(r.p_value, 0.5488116360940265, 1e-10);
  EXPECT_NEAR(r.average_ranks[0], 5.0 / 3.0, 1e-15);
  EXPECT_NEAR(r.average_ranks[1], 13.0 / 6.0, 1e-15);
  EXPECT_NEAR(r.average_ranks[2], 13.0 / 6.0, 1e-15);
}

TEST(Friedman, PermutationAndMonotoneTransformInvariance) {
  Rng rng(44);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.below(10), k = 2 + rng.below(4);
    Matrix m(n, k);
    for (auto& v : m.data()) v = static_cast<double>(rng.below(4));
    FriedmanResult base;
    try {
      base = friedman_test(m);
    } catch (const Error&) {
      continue;
    }
    double rank_total = 0.0;
    for (double a : base.average_ranks) rank_total += a;
    EXPECT_NEAR(rank_total, k * (k + 1) / 2.0, 1e-12);

    Matrix warped = m;
    for (std::size_t i = 0; i < n; ++i) {
      const double scale = rng.uniform(0.5, 3.0), shift = rng.uniform(-5.0, 5.0);
      for (auto& v : warped.row(i)) v = std::exp(scale * v) + shift;
    }
    const FriedmanResult w = friedman_test(warped);
    EXPECT_DOUBLE_EQ(w.statistic, base.statistic);
    EXPECT_EQ(w.average_ranks, base.average_ranks);

    std::vector<std::size_t> perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    shuffle(perm.begin(), perm.end(), rng);
    Matrix permuted(n, k);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < k; ++j) permuted(i, j) = m(i, perm[j]);
    }
    const FriedmanResult p = friedman_test(permuted);
    EXPECT_NEAR(p.statistic, base.statistic, 1e-12);
    for (std::size_t j = 0; j < k; ++j) EXPECT_DOUBLE_EQ(p.average_ranks[j], base.average_ranks[perm[j]]);
  }
}

TEST(Friedman, ScoreMatrixParsing) {
  const ScoreMatrix s = parse_score_matrix("hyb,loc\n2,1\n1,0\n2,0\n");
  EXPECT_EQ(s.treatments, (std::vector<std::string>{"hyb", "loc"}));
  EXPECT_EQ(s.scores.rows(), 3u);
  EXPECT_THROW(parse_score_matrix("a,b\n1\n"), Error);
  EXPECT_THROW(parse_score_matrix("a,b\n1,x\n"), Error);
  EXPECT_THROW(friedman_test(Matrix(3, 1)), Error);
}

TEST(ChiSquare, TwoDofClosedForm) {
  for (double x = 0.0; x <= 50.0; x += 0.125) {
    EXPECT_NEAR(chi_square_sf(x, 2), std::exp(-x / 2), 1e-10) << x;
  }
  EXPECT_NEAR(chi_square_sf(2.0, 2), std::exp(-1.0), 1e-15);
  EXPECT_EQ(chi_square_sf(0.0, 5), 1.0);
}

// dof 1: sf(x) = erfc(sqrt(x / 2)); the 5% critical value is found by bisection.
TEST(ChiSquare, OneDofMatchesErfc) {
  for (double x = 0.0; x <= 40.0; x += 0.1) {
    EXPECT_NEAR(chi_square_sf(x, 1), std::erfc(std::sqrt(x / 2)), 1e-10) << x;
  }
  double lo = 0.0, hi = 10.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = (lo + hi) / 2;
    (std::erfc(std::sqrt(mid / 2)) > 0.05 ? lo : hi) = mid;
  }
  EXPECT_NEAR(chi_square_sf(lo, 1), 0.05, 1e-10);
  EXPECT_NEAR(chi_square_sf(3.841, 1), 0.0500, 1e-4);
}

TEST(ChiSquare, ReferenceValuesAndMonotone) {
  EXPECT_NEAR(chi_square_sf(10.5, 7), 0.1619644930794282, 1e-12);
  EXPECT_NEAR(chi_square_sf(0.3, 5), 0.9976430862605289, 1e-12);
  EXPECT_NEAR(chi_square_sf(80.0, 3), 3.0692774861724164e-17, 1e-25);
  for (std::size_t dof : {1u, 2u, 3u, 7u, 20u}) {
    double prev = 2.0;
    for (double x = 0.05; x < 60; x *= 1.3) {
      const double p = chi_square_sf(x, dof);
      EXPECT_TRUE(p < prev || p == 1.0) << dof << " " << x;
      EXPECT_GE(p, 0.0);
      prev = p;
    }
  }
  EXPECT_THROW(chi_square_sf(-1.0, 2), Error);
  EXPECT_THROW(chi_square_sf(1.0, 0), Error);
}

}  // namespace
}  // namespace nrm
