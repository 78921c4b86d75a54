#include "forge/diversity.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include <nlohmann/json.hpp>

namespace forge {

RelationshipCounts relationship(const PredictionTable& table, std::size_t i, std::size_t j) {
  const std::size_t m = table.pool_size();
  if (i >= m || j >= m) {
    throw IndexOutOfRange("classifier pair (" + std::to_string(i) + ", " + std::to_string(j) +
                          ") outside pool of " + std::to_string(m));
  }
  const auto& row_i = table.predictions[i];
  const auto& row_j = table.predictions[j];
  std::size_t a = 0, b = 0, c = 0, d = 0;
  const std::size_t n = table.sample_count();
  for (std::size_t s = 0; s < n; ++s) {
    const bool hit_i = row_i[s] == table.truth[s];
    const bool hit_j = row_j[s] == table.truth[s];
    if (hit_i && hit_j) ++a;
    else if (hit_j) ++b;
    else if (hit_i) ++c;
    else ++d;
  }
  const double dn = static_cast<double>(n);
  return {static_cast<double>(a) / dn, static_cast<double>(b) / dn,
          static_cast<double>(c) / dn, static_cast<double>(d) / dn};
}

double correlation_coefficient(const RelationshipCounts& rc, bool* degenerate) {
  const double a = rc.both_hit;
  const double b = rc.j_hit_i_miss;
  const double c = rc.i_hit_j_miss;
  const double d = rc.both_miss;
  const double denom_sq = (a + b) * (c + d) * (a + c) * (b + d);
  if (degenerate != nullptr) *degenerate = false;
  if (denom_sq <= 0.0) {
    if (degenerate != nullptr) *degenerate = true;
    return 0.0;
  }
  return (a * d - b * c) / std::sqrt(denom_sq);
}

DiversityMatrix diversity_matrix(const PredictionTable& table) {
  const std::size_t m = table.pool_size();
  DiversityMatrix matrix;
  matrix.names = table.classifier_names;
  matrix.scores.assign(m, std::vector<double>(m, 0.0));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i; j < m; ++j) {
      bool degenerate = false;
      const double rho = correlation_coefficient(relationship(table, i, j), &degenerate);
      matrix.scores[i][j] = rho;
      matrix.scores[j][i] = rho;
      if (degenerate) matrix.degenerate_pairs.emplace_back(i, j);
    }
  }
  return matrix;
}

std::string diversity_to_csv(const DiversityMatrix& matrix) {
  std::ostringstream out;
  out << "name";
  for (const auto& name : matrix.names) out << ',' << name;
  out << '\n';
  char buffer[32];
  for (std::size_t i = 0; i < matrix.names.size(); ++i) {
    out << matrix.names[i];
    for (double score : matrix.scores[i]) {
      std::snprintf(buffer, sizeof(buffer), "%.6f", score);
      out << ',' << buffer;
    }
    out << '\n';
  }
  return out.str();
}

std::string diversity_to_json(const DiversityMatrix& matrix) {
  nlohmann::ordered_json doc;
  doc["names"] = matrix.names;
  doc["scores"] = matrix.scores;
  auto pairs = nlohmann::ordered_json::array();
  for (const auto& [i, j] : matrix.degenerate_pairs) pairs.push_back({i, j});
  doc["degenerate_pairs"] = pairs;
  return doc.dump(2) + "\n";
}

}  // namespace forge
