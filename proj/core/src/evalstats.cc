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

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>

#include "nrm/error.h"

namespace nrm {
namespace {

std::string read_file(const std::filesystem::path& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(std::string(what) + ": cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::vector<std::string_view> lines_of(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    out.push_back(text.substr(pos, end - pos));
    if (end == text.size()) break;
    pos = end + 1;
  }
  return out;
}

std::optional<double> parse_number(std::string_view s) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

// Series expansion of P(a, x), good for x < a + 1.
double gamma_p_series(double a, double x) {
  double term = 1.0 / a;
  double sum = term;
  for (int n = 1; n < 10000; ++n) {
    term *= x / (a + n);
    sum += term;
    if (std::abs(term) < std::abs(sum) * 1e-17) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Lentz continued fraction for Q(a, x), good for x >= a + 1.
double gamma_q_continued_fraction(double a, double x) {
  constexpr double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 10000; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

std::vector<Category> default_categories() {
  return {{"Unsuitable", 0.0}, {"Neutral", 1.0}, {"Suitable", 2.0}};
}

AnnotationTable::AnnotationTable(std::vector<Category> categories, std::size_t items,
                                 std::size_t raters)
    : categories_(std::move(categories)), items_(items), raters_(raters),
      labels_(items * raters, 0) {
  if (categories_.empty()) throw Error("annotations: empty category set");
}

AnnotationTable::AnnotationTable(std::vector<Category> categories,
                                 std::vector<std::vector<std::size_t>> labels)
    : AnnotationTable(std::move(categories), labels.size(),
                      labels.empty() ? 0 : labels.front().size()) {
  for (std::size_t i = 0; i < items_; ++i) {
    if (labels[i].size() != raters_) throw Error("annotations: ragged label rows");
    for (std::size_t r = 0; r < raters_; ++r) set_label(i, r, labels[i][r]);
  }
}

std::size_t AnnotationTable::label(std::size_t item, std::size_t rater) const {
  return labels_.at(item * raters_ + rater);
}

void AnnotationTable::set_label(std::size_t item, std::size_t rater, std::size_t category) {
  if (category >= categories_.size()) {
    throw Error("annotations: category index " + std::to_string(category) + " out of range");
  }
  labels_.at(item * raters_ + rater) = category;
}

std::vector<std::size_t> AnnotationTable::category_counts(std::size_t item) const {
  std::vector<std::size_t> counts(categories_.size(), 0);
  for (std::size_t r = 0; r < raters_; ++r) ++counts[label(item, r)];
  return counts;
}

AnnotationTable parse_annotations(std::string_view text, std::vector<Category> categories) {
  const auto lines = lines_of(text);
  std::size_t first = 0;
  while (first < lines.size() && trim(lines[first]).empty()) ++first;
  if (first == lines.size()) throw Error("annotations: empty file");
  const auto header = split_csv(lines[first]);
  if (header.size() != 3 || header[0] != "item" || header[1] != "rater" || header[2] != "label") {
    throw Error("annotations: header must be item,rater,label");
  }

  const auto resolve = [&](std::string_view label, std::size_t line_no) -> std::size_t {
    for (std::size_t c = 0; c < categories.size(); ++c) {
      if (categories[c].name == label) return c;
    }
    if (const auto v = parse_number(label)) {
      for (std::size_t c = 0; c < categories.size(); ++c) {
        if (categories[c].score == *v) return c;
      }
    }
    throw Error("annotations: unknown label '" + std::string(label) + "' on line " +
                std::to_string(line_no));
  };

  std::map<std::string, std::size_t> item_index, rater_index;
  struct Cell {
    std::size_t item, rater, category, line;
  };
  std::vector<Cell> cells;
  for (std::size_t n = first + 1; n < lines.size(); ++n) {
    if (trim(lines[n]).empty()) continue;
    const auto fields = split_csv(lines[n]);
    if (fields.size() != 3) {
      throw Error("annotations: expected 3 fields on line " + std::to_string(n + 1));
    }
    const auto item = item_index.try_emplace(std::string(fields[0]), item_index.size()).first;
    const auto rater = rater_index.try_emplace(std::string(fields[1]), rater_index.size()).first;
    cells.push_back({item->second, rater->second, resolve(fields[2], n + 1), n + 1});
  }
  if (cells.empty()) throw Error("annotations: no rows");

  AnnotationTable table(std::move(categories), item_index.size(), rater_index.size());
  std::vector<bool> seen(item_index.size() * rater_index.size(), false);
  for (const auto& c : cells) {
    const std::size_t k = c.item * rater_index.size() + c.rater;
    if (seen[k]) {
      throw Error("annotations: duplicate item/rater cell on line " + std::to_string(c.line));
    }
    seen[k] = true;
    table.set_label(c.item, c.rater, c.category);
  }
  if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
    throw Error("annotations: every rater must label every item");
  }
  return table;
}

AnnotationTable load_annotations(const std::filesystem::path& path,
                                 std::vector<Category> categories) {
  return parse_annotations(read_file(path, "annotations"), std::move(categories));
}

ScoreSummary score_summary(const AnnotationTable& table) {
  const std::size_t total = table.items() * table.raters();
  if (total == 0) throw Error("score_summary: empty table");
  ScoreSummary out;
  out.fractions.assign(table.categories().size(), 0.0);
  std::vector<std::size_t> counts(table.categories().size(), 0);
  for (std::size_t i = 0; i < table.items(); ++i) {
    for (std::size_t r = 0; r < table.raters(); ++r) ++counts[table.label(i, r)];
  }
  double sum = 0.0;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    sum += static_cast<double>(counts[c]) * table.categories()[c].score;
    out.fractions[c] = static_cast<double>(counts[c]) / static_cast<double>(total);
  }
  out.mean_score = sum / static_cast<double>(total);
  return out;
}

double fleiss_kappa(const AnnotationTable& table) {
  const std::size_t n_items = table.items();
  const std::size_t k = table.raters();
  if (k < 2) throw Error("fleiss_kappa: need at least 2 raters");
  if (n_items < 1) throw Error("fleiss_kappa: need at least 1 item");

  const std::size_t cats = table.categories().size();
  std::vector<double> totals(cats, 0.0);
  double p_bar = 0.0;
  const double kk = static_cast<double>(k);
  for (std::size_t i = 0; i < n_items; ++i) {
    const auto counts = table.category_counts(i);
    double agree = 0.0;
    for (std::size_t c = 0; c < cats; ++c) {
      const double n = static_cast<double>(counts[c]);
      agree += n * (n - 1.0);
      totals[c] += n;
    }
    p_bar += agree / (kk * (kk - 1.0));
  }
  p_bar /= static_cast<double>(n_items);

  double p_e = 0.0;
  const double all = static_cast<double>(n_items) * kk;
  for (double t : totals) p_e += (t / all) * (t / all);
  const bool single_category =
      std::count_if(totals.begin(), totals.end(), [](double t) { return t > 0.0; }) == 1;
  if (single_category || 1.0 - p_e <= 0.0) {
    throw Error("fleiss_kappa: degenerate distribution (all annotations in one category)");
  }
  return (p_bar - p_e) / (1.0 - p_e);
}

ScoreMatrix parse_score_matrix(std::string_view text) {
  const auto lines = lines_of(text);
  std::size_t first = 0;
  while (first < lines.size() && trim(lines[first]).empty()) ++first;
  if (first == lines.size()) throw Error("scores: empty file");
  ScoreMatrix out;
  for (auto name : split_csv(lines[first])) out.treatments.emplace_back(name);
  const std::size_t k = out.treatments.size();
  std::vector<double> data;
  std::size_t rows = 0;
  for (std::size_t n = first + 1; n < lines.size(); ++n) {
    if (trim(lines[n]).empty()) continue;
    const auto fields = split_csv(lines[n]);
    if (fields.size() != k) {
      throw Error("scores: expected " + std::to_string(k) + " fields on line " +
                  std::to_string(n + 1));
    }
    for (auto f : fields) {
      const auto v = parse_number(f);
      if (!v) {
        throw Error("scores: non-numeric value '" + std::string(f) + "' on line " +
                    std::to_string(n + 1));
      }
      data.push_back(*v);
    }
    ++rows;
  }
  out.scores = Matrix(rows, k, std::move(data));
  return out;
}

ScoreMatrix load_score_matrix(const std::filesystem::path& path) {
  return parse_score_matrix(read_file(path, "scores"));
}

FriedmanResult friedman_test(const Matrix& scores) {
  const std::size_t n = scores.rows();
  const std::size_t k = scores.cols();
  if (n < 1) throw Error("friedman_test: need at least 1 subject");
  if (k < 2) throw Error("friedman_test: need at least 2 treatments");
  if (!all_finite(scores.data())) throw Error("friedman_test: non-finite score");

  std::vector<double> rank_sums(k, 0.0);
  double tie_sum = 0.0;
  std::vector<std::size_t> order(k);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = scores.row(i);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return row[a] > row[b]; });
    for (std::size_t start = 0; start < k;) {
      std::size_t end = start + 1;
      while (end < k && row[order[end]] == row[order[start]]) ++end;
      // Positions start..end-1 hold ranks start+1..end.
      const double avg = (static_cast<double>(start + 1) + static_cast<double>(end)) / 2.0;
      for (std::size_t p = start; p < end; ++p) rank_sums[order[p]] += avg;
      const double t = static_cast<double>(end - start);
      tie_sum += t * t * t - t;
      start = end;
    }
  }

  FriedmanResult out;
  out.dof = k - 1;
  const double nn = static_cast<double>(n);
  const double kk = static_cast<double>(k);
  const double centre = (kk + 1.0) / 2.0;
  double spread = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    out.average_ranks.push_back(rank_sums[j] / nn);
    const double dev = out.average_ranks.back() - centre;
    spread += dev * dev;
  }
  const double raw = 12.0 * nn / (kk * (kk + 1.0)) * spread;
  const double correction = 1.0 - tie_sum / (nn * kk * (kk * kk - 1.0));
  if (raw == 0.0) {
    // Includes fully tied data, where the correction is 0 as well.
    out.statistic = 0.0;
    out.p_value = 1.0;
    return out;
  }
  if (correction <= 0.0) throw Error("friedman_test: degenerate tie correction");
  out.statistic = raw / correction;
  out.p_value = chi_square_sf(out.statistic, out.dof);
  return out;
}

double regularized_gamma_q(double a, double x) {
  if (!(a > 0.0) || !(x >= 0.0)) throw Error("regularized_gamma_q: domain error");
  if (x == 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  if (x < a + 1.0) return std::clamp(1.0 - gamma_p_series(a, x), 0.0, 1.0);
  return std::clamp(gamma_q_continued_fraction(a, x), 0.0, 1.0);
}

double chi_square_sf(double x, std::size_t dof) {
  if (dof < 1) throw Error("chi_square_sf: dof must be at least 1");
  if (!(x >= 0.0)) throw Error("chi_square_sf: x must be non-negative");
  return regularized_gamma_q(static_cast<double>(dof) / 2.0, x / 2.0);
}

}  // namespace nrm
