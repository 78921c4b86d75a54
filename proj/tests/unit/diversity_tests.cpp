#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "forge/diversity.hpp"
#include "testutil.hpp"

using namespace forge;

namespace {

// Two classifiers with the requested joint hit/miss fractions over 100 samples.
PredictionTable pair_table(double a, double b, double c, double d) {
  const auto na = static_cast<std::size_t>(std::lround(a * 100));
  const auto nb = static_cast<std::size_t>(std::lround(b * 100));
  const auto nc = static_cast<std::size_t>(std::lround(c * 100));
  const auto nd = static_cast<std::size_t>(std::lround(d * 100));
  REQUIRE(na + nb + nc + nd == 100);
  PredictionTable table;
  table.classifier_names = {"ci", "cj"};
  table.num_classes = 2;
  for (std::size_t s = 0; s < 100; ++s) {
    table.sample_ids.push_back(static_cast<std::int64_t>(s));
    table.truth.push_back(0);
  }
  std::vector<LabelId> pi;
  std::vector<LabelId> pj;
  const auto fill = [&](std::size_t count, LabelId vi, LabelId vj) {
    for (std::size_t s = 0; s < count; ++s) {
      pi.push_back(vi);
      pj.push_back(vj);
    }
  };
  fill(na, 0, 0);
  fill(nb, 1, 0);  // b: c_j hits, c_i misses
  fill(nc, 0, 1);
  fill(nd, 1, 1);
  table.predictions = {pi, pj};
  return table;
}

}  // namespace

TEST_SUITE("diversity") {

TEST_CASE("relationship counts on a hand-worked pair") {
  PredictionTable table;
  table.classifier_names = {"ci", "cj"};
  table.sample_ids = {0, 1, 2, 3};
  table.truth = {0, 0, 1, 1};
  table.predictions = {{0, 0, 1, 0}, {0, 1, 1, 1}};
  table.num_classes = 2;
  const auto rc = relationship(table, 0, 1);
  CHECK(rc.both_hit == doctest::Approx(0.5));
  CHECK(rc.j_hit_i_miss == doctest::Approx(0.25));
  CHECK(rc.i_hit_j_miss == doctest::Approx(0.25));
  CHECK(rc.both_miss == doctest::Approx(0.0));
}

TEST_CASE("self pair splits between both-hit and both-miss") {
  const auto table = pair_table(0.75, 0.0, 0.0, 0.25);
  const auto rc = relationship(table, 0, 0);
  CHECK(rc.both_hit == doctest::Approx(0.75));
  CHECK(rc.j_hit_i_miss == doctest::Approx(0.0));
  CHECK(rc.i_hit_j_miss == doctest::Approx(0.0));
  CHECK(rc.both_miss == doctest::Approx(0.25));
}

TEST_CASE("correlation hits the closed-form reference points") {
  bool degenerate = false;
  // Perfect agreement with both cell types populated.
  CHECK(correlation_coefficient({0.5, 0.0, 0.0, 0.5}, &degenerate) == doctest::Approx(1.0));
  CHECK_FALSE(degenerate);
  // Perfect disagreement.
  CHECK(correlation_coefficient({0.0, 0.5, 0.5, 0.0}, &degenerate) == doctest::Approx(-1.0));
  CHECK_FALSE(degenerate);
  // (0.4, 0.1, 0.1, 0.4): (0.16 - 0.01) / 0.25 = 0.6.
  CHECK(correlation_coefficient({0.4, 0.1, 0.1, 0.4}, &degenerate) == doctest::Approx(0.6));
  CHECK_FALSE(degenerate);
}

TEST_CASE("zero denominator is flagged, not thrown") {
  bool degenerate = false;
  CHECK(correlation_coefficient({1.0, 0.0, 0.0, 0.0}, &degenerate) == 0.0);
  CHECK(degenerate);
  degenerate = false;
  CHECK(correlation_coefficient({0.0, 0.0, 0.0, 1.0}, &degenerate) == 0.0);
  CHECK(degenerate);
  // Null pointer is allowed.
  CHECK(correlation_coefficient({1.0, 0.0, 0.0, 0.0}) == 0.0);
}

TEST_CASE("single perfect classifier yields a degenerate 1x1 matrix") {
  PredictionTable table;
  table.classifier_names = {"only"};
  table.sample_ids = {0, 1};
  table.truth = {0, 1};
  table.predictions = {{0, 1}};
  table.num_classes = 2;
  const auto matrix = diversity_matrix(table);
  REQUIRE(matrix.scores.size() == 1);
  CHECK(matrix.scores[0][0] == 0.0);
  REQUIRE(matrix.degenerate_pairs.size() == 1);
  CHECK(matrix.degenerate_pairs[0] == std::pair<std::size_t, std::size_t>{0, 0});
}

TEST_CASE("diagonal is one exactly when a classifier has hits and misses") {
  const auto table = testutil::accuracy_table(2, {0.7, 1.0}, 400, 3);
  const auto matrix = diversity_matrix(table);
  CHECK(matrix.scores[0][0] == doctest::Approx(1.0));
  CHECK(matrix.scores[1][1] == 0.0);  // no misses: degenerate
}

TEST_CASE("identical imperfect classifiers correlate at one off the diagonal") {
  const auto base = testutil::accuracy_table(9, {0.6}, 300, 4);
  PredictionTable table = base;
  table.classifier_names = {"c0", "twin"};
  table.predictions.push_back(base.predictions[0]);
  validate_table(table);
  const auto matrix = diversity_matrix(table);
  CHECK(matrix.scores[0][1] == doctest::Approx(1.0));
  CHECK(matrix.scores[1][0] == doctest::Approx(1.0));
}

TEST_CASE("matrix agrees with the per-pair oracle on random tables") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto table = testutil::random_table(seed, 6, 120, 5);
    const auto matrix = diversity_matrix(table);
    for (std::size_t i = 0; i < 6; ++i) {
      for (std::size_t j = 0; j < 6; ++j) {
        const auto rc = testutil::relationship_oracle(table, i, j);
        const auto lib = relationship(table, i, j);
        CHECK(lib.both_hit == doctest::Approx(rc.both_hit).epsilon(1e-12));
        CHECK(lib.j_hit_i_miss == doctest::Approx(rc.j_hit_i_miss).epsilon(1e-12));
        CHECK(lib.i_hit_j_miss == doctest::Approx(rc.i_hit_j_miss).epsilon(1e-12));
        CHECK(lib.both_miss == doctest::Approx(rc.both_miss).epsilon(1e-12));
        const double expected = testutil::rho_oracle(rc);
        CHECK(std::abs(matrix.scores[i][j] - expected) <= 1e-12);
      }
    }
  }
}

TEST_CASE("counts sum to one and the matrix is symmetric in range") {
  for (std::uint64_t seed = 100; seed < 150; ++seed) {
    const auto table = testutil::random_table(seed, 1 + seed % 10, 20 + (seed * 7) % 180,
                                              2 + static_cast<int>(seed % 7));
    const auto matrix = diversity_matrix(table);
    const std::size_t m = table.pool_size();
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        const auto rc = relationship(table, i, j);
        const double sum = rc.both_hit + rc.j_hit_i_miss + rc.i_hit_j_miss + rc.both_miss;
        CHECK(std::abs(sum - 1.0) <= 1e-12);
        CHECK(matrix.scores[i][j] == matrix.scores[j][i]);
        CHECK(std::abs(matrix.scores[i][j]) <= 1.0 + 1e-12);
        CHECK(std::isfinite(matrix.scores[i][j]));
      }
    }
  }
}

TEST_CASE("correlation increases with both-hit mass at fixed marginals") {
  // Marginals fixed at 0.5/0.5: b = c = 0.5 - a, d = a.
  double previous = -2.0;
  for (int step = 0; step <= 10; ++step) {
    const double a = 0.05 + 0.4 * step / 10.0;  // keep every cell positive
    const double off = 0.5 - a;
    const double rho = correlation_coefficient({a, off, off, a});
    CHECK(rho > previous);
    previous = rho;
  }
}

TEST_CASE("an all-correct classifier never produces a non-finite score") {
  const auto table = testutil::accuracy_table(21, {1.0, 0.8, 0.5}, 200, 4);
  const auto matrix = diversity_matrix(table);
  for (const auto& row : matrix.scores) {
    for (const double v : row) CHECK(std::isfinite(v));
  }
  // Every pair touching the perfect classifier is degenerate.
  bool found = false;
  for (const auto& [i, j] : matrix.degenerate_pairs) {
    if (i == 0 || j == 0) found = true;
  }
  CHECK(found);
}

TEST_CASE("csv and json renderings carry the names and scores") {
  const auto table = testutil::accuracy_table(4, {0.9, 0.6}, 100, 3);
  const auto matrix = diversity_matrix(table);
  const auto csv = diversity_to_csv(matrix);
  CHECK(csv.find("c0") != std::string::npos);
  CHECK(csv.find("c1") != std::string::npos);
  CHECK(csv.substr(0, 5) == "name,");  // header row carries the name column

  const auto json_text = diversity_to_json(matrix);
  CHECK(json_text.find("\"names\"") != std::string::npos);
  CHECK(json_text.find("\"scores\"") != std::string::npos);
  CHECK(json_text.find("\"degenerate_pairs\"") != std::string::npos);
}

}  // TEST_SUITE
