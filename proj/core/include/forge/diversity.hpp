#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "forge/prediction_table.hpp"

namespace forge {

// Joint hit/miss fractions of a classifier pair against ground truth,
// the (a, b, c, d) cells of the relationship matrix. Fields sum to 1.
struct RelationshipCounts {
  double both_hit = 0.0;     // a: both classifiers correct
  double j_hit_i_miss = 0.0; // b: c_j correct, c_i wrong
  double i_hit_j_miss = 0.0; // c: c_i correct, c_j wrong
  double both_miss = 0.0;    // d: both wrong
};

// Pairwise correlation coefficients over a pool. Lower score = more diversity.
// Pairs whose coefficient is undefined (a classifier with no hits or no
// misses) carry score 0 and are listed in degenerate_pairs with i <= j.
struct DiversityMatrix {
  std::vector<std::string> names;
  std::vector<std::vector<double>> scores;  // M x M, symmetric, values in [-1, 1]
  std::vector<std::pair<std::size_t, std::size_t>> degenerate_pairs;
};

// Counts are accumulated as integers over all N samples and divided once.
RelationshipCounts relationship(const PredictionTable& table, std::size_t i, std::size_t j);

// rho = (ad - bc) / sqrt((a+b)(c+d)(a+c)(b+d)). A zero denominator yields 0
// and sets *degenerate when provided.
double correlation_coefficient(const RelationshipCounts& rc, bool* degenerate = nullptr);

DiversityMatrix diversity_matrix(const PredictionTable& table);

// CSV with a classifier-name header row and column, 6 decimal places.
std::string diversity_to_csv(const DiversityMatrix& matrix);
// JSON document carrying names, scores, and the degenerate-pair list.
std::string diversity_to_json(const DiversityMatrix& matrix);

}  // namespace forge
