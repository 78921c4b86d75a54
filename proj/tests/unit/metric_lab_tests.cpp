#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "forge/metric_lab.hpp"
#include "testutil.hpp"

using namespace forge;
namespace fs = std::filesystem;

namespace {

BlobSpec two_far_blobs(std::uint64_t seed, std::size_t per_class, double stddev) {
  BlobSpec spec;
  spec.class_means = {{0.0, 0.0}, {10.0, 10.0}};
  spec.stddev = stddev;
  spec.samples_per_class = per_class;
  spec.seed = seed;
  return spec;
}

double mean_intra_distance(const EmbeddingBatch& batch, const std::vector<Embedding>& points) {
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = i + 1; j < points.size(); ++j) {
      if (batch.labels[i] != batch.labels[j]) continue;
      total += squared_distance(points[i], points[j]);
      ++pairs;
    }
  }
  return total / static_cast<double>(pairs);
}

double mean_inter_distance(const EmbeddingBatch& batch, const std::vector<Embedding>& points) {
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = i + 1; j < points.size(); ++j) {
      if (batch.labels[i] == batch.labels[j]) continue;
      total += squared_distance(points[i], points[j]);
      ++pairs;
    }
  }
  return total / static_cast<double>(pairs);
}

}  // namespace

TEST_SUITE("metric_lab") {

TEST_CASE("zero spread collapses every sample onto its mean") {
  const auto batch = generate_blobs(two_far_blobs(1, 5, 0.0));
  REQUIRE(batch.size() == 10);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& mean = batch.labels[i] == 0 ? Embedding{0.0, 0.0} : Embedding{10.0, 10.0};
    CHECK(batch.points[i] == mean);
  }
}

TEST_CASE("blob counts and labels are exact and grouped") {
  BlobSpec spec;
  spec.class_means = {{0.0, 0.0}, {5.0, 0.0}, {0.0, 5.0}};
  spec.stddev = 1.0;
  spec.samples_per_class = 50;
  spec.seed = 9;
  const auto batch = generate_blobs(spec);
  REQUIRE(batch.size() == 150);
  std::map<LabelId, std::size_t> counts;
  for (const auto label : batch.labels) ++counts[label];
  CHECK(counts == std::map<LabelId, std::size_t>{{0, 50}, {1, 50}, {2, 50}});
  // Grouped in mean order.
  for (std::size_t i = 0; i < 150; ++i) CHECK(batch.labels[i] == static_cast<LabelId>(i / 50));
  // Deterministic.
  CHECK(generate_blobs(spec).points == batch.points);
}

TEST_CASE("sample means approach the class means at the clt rate") {
  BlobSpec spec;
  spec.class_means = {{-3.0, 2.0}, {4.0, -1.0}};
  spec.stddev = 0.7;
  spec.samples_per_class = 4000;
  spec.seed = 31;
  const auto batch = generate_blobs(spec);
  const double bound = 4.0 * 0.7 / std::sqrt(4000.0);
  for (std::size_t cls = 0; cls < 2; ++cls) {
    Embedding centroid{0.0, 0.0};
    std::size_t count = 0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      if (batch.labels[i] != static_cast<LabelId>(cls)) continue;
      centroid[0] += batch.points[i][0];
      centroid[1] += batch.points[i][1];
      ++count;
    }
    for (std::size_t d = 0; d < 2; ++d) {
      CHECK(std::abs(centroid[d] / count - spec.class_means[cls][d]) <= bound);
    }
  }
}

TEST_CASE("blob specs are validated") {
  BlobSpec spec;
  spec.class_means = {{0.0}};
  spec.samples_per_class = 3;
  CHECK_THROWS_AS(generate_blobs(spec), InvalidConfig);
  spec.class_means = {{0.0}, {1.0, 2.0}};
  CHECK_THROWS_AS(generate_blobs(spec), DimensionMismatch);
  spec.class_means = {{0.0}, {1.0}};
  spec.stddev = -0.1;
  CHECK_THROWS_AS(generate_blobs(spec), InvalidConfig);
  spec.stddev = 1.0;
  spec.samples_per_class = 0;
  CHECK_THROWS_AS(generate_blobs(spec), InvalidConfig);
}

TEST_CASE("embedding batches round-trip through csv exactly") {
  const auto batch = generate_blobs(two_far_blobs(17, 20, 1.3));
  const auto text = format_embedding_batch(batch);
  const auto reparsed = parse_embedding_batch(text);
  CHECK(reparsed.labels == batch.labels);
  REQUIRE(reparsed.points.size() == batch.points.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    CHECK(reparsed.points[i] == batch.points[i]);  // bitwise, via %.17g
  }

  const auto path = fs::temp_directory_path() /
                    ("forge_lab_" + std::to_string(::getpid()) + ".csv");
  save_embedding_batch(batch, path);
  const auto loaded = load_embedding_batch(path);
  CHECK(loaded.points == batch.points);
  CHECK(loaded.labels == batch.labels);
  fs::remove(path);
}

TEST_CASE("embedding csv failures are named") {
  CHECK_THROWS_AS(parse_embedding_batch(""), MalformedFile);
  CHECK_THROWS_AS(parse_embedding_batch("x0,x1\n1,2\n"), MalformedFile);
  CHECK_THROWS_AS(parse_embedding_batch("label,x0\nzero,1\n"), MalformedFile);
  CHECK_THROWS_AS(parse_embedding_batch("label,x0\n0,abc\n"), MalformedFile);
  CHECK_THROWS_AS(parse_embedding_batch("label,x0,x1\n0,1.0,2.0\n1,3.0\n"), MalformedFile);
  CHECK_THROWS_AS(load_embedding_batch("/nonexistent/missing.csv"), IoError);
}

TEST_CASE("loss kind names round-trip") {
  for (const auto kind : {LossKind::contrastive, LossKind::triplet, LossKind::nngk,
                          LossKind::proxy_anchor, LossKind::softtriple, LossKind::supcon}) {
    CHECK(loss_kind_from_string(to_string(kind)) == kind);
  }
  CHECK_THROWS_AS(loss_kind_from_string("hinge"), InvalidConfig);
}

TEST_CASE("a zero learning rate is the identity") {
  const auto batch = generate_blobs(two_far_blobs(3, 10, 1.0));
  TrainConfig config;
  config.loss = LossKind::triplet;
  config.learning_rate = 0.0;
  config.steps = 5;
  config.batch_size = 8;
  config.seed = 4;
  std::vector<double> trace;
  const auto out = train_embeddings(batch, config, &trace);
  CHECK(out == batch.points);
  CHECK(trace.size() == 5);
}

TEST_CASE("training configuration is validated") {
  const auto batch = generate_blobs(two_far_blobs(3, 10, 1.0));
  TrainConfig config;
  config.batch_size = 1;
  CHECK_THROWS_AS(train_embeddings(batch, config), InvalidConfig);
  config.batch_size = 8;
  config.steps = 0;
  CHECK_THROWS_AS(train_embeddings(batch, config), InvalidConfig);
  config.steps = 1;
  config.learning_rate = -0.1;
  CHECK_THROWS_AS(train_embeddings(batch, config), InvalidConfig);
  config.learning_rate = 0.05;
  config.fd_step = 0.0;
  CHECK_THROWS_AS(train_embeddings(batch, config), InvalidConfig);

  EmbeddingBatch single_class;
  single_class.points = {{0.0}, {1.0}, {2.0}};
  single_class.labels = {0, 0, 0};
  CHECK_THROWS_AS(train_embeddings(single_class, TrainConfig{}), InsufficientData);

  EmbeddingBatch no_pair;
  no_pair.points = {{0.0}, {1.0}};
  no_pair.labels = {0, 1};
  CHECK_THROWS_AS(train_embeddings(no_pair, TrainConfig{}), InsufficientData);
}

TEST_CASE("triplet training tightens classes") {
  BlobSpec spec;
  spec.class_means = {{0.0, 0.0}, {4.0, 0.0}};
  spec.stddev = 1.0;
  spec.samples_per_class = 20;
  spec.seed = 21;
  const auto batch = generate_blobs(spec);
  TrainConfig config;
  config.loss = LossKind::triplet;
  config.learning_rate = 0.02;
  config.steps = 120;
  config.batch_size = 12;
  config.seed = 6;
  const auto trained = train_embeddings(batch, config);
  CHECK(mean_intra_distance(batch, trained) < mean_intra_distance(batch, batch.points));
}

TEST_CASE("contrastive training improves the intra to inter ratio") {
  BlobSpec spec;
  spec.class_means = {{0.0, 0.0}, {3.0, 0.0}};
  spec.stddev = 1.0;
  spec.samples_per_class = 20;
  spec.seed = 22;
  const auto batch = generate_blobs(spec);
  TrainConfig config;
  config.loss = LossKind::contrastive;
  config.learning_rate = 0.02;
  config.steps = 120;
  config.batch_size = 12;
  config.seed = 7;
  const auto trained = train_embeddings(batch, config);
  const double before =
      mean_intra_distance(batch, batch.points) / mean_inter_distance(batch, batch.points);
  const double after = mean_intra_distance(batch, trained) / mean_inter_distance(batch, trained);
  CHECK(after < before);
}

TEST_CASE("fitting uses whole classes when centers cover the training set") {
  const auto batch = generate_blobs(two_far_blobs(5, 6, 0.5));
  NngkConfig config;
  config.num_centers = 12;
  config.seed = 2;
  const auto centers = fit_nngk(batch, config);
  REQUIRE(centers.size() == 12);
  for (double w : centers.weights) CHECK(w == 1.0);
  // Same multiset of points, class by class.
  std::multiset<std::pair<double, double>> want;
  std::multiset<std::pair<double, double>> got;
  for (const auto& p : batch.points) want.insert({p[0], p[1]});
  for (const auto& c : centers.centers) got.insert({c[0], c[1]});
  CHECK(want == got);
}

TEST_CASE("every class keeps at least one center") {
  BlobSpec spec;
  spec.class_means = {{0.0, 0.0}, {8.0, 0.0}, {0.0, 8.0}, {8.0, 8.0}};
  spec.stddev = 0.5;
  spec.samples_per_class = 25;
  spec.seed = 12;
  const auto batch = generate_blobs(spec);
  NngkConfig config;
  config.num_centers = 5;  // fewer than 2 per class
  config.seed = 3;
  const auto centers = fit_nngk(batch, config);
  std::set<LabelId> seen(centers.labels.begin(), centers.labels.end());
  CHECK(seen == std::set<LabelId>{0, 1, 2, 3});

  config.num_centers = 3;  // below the class count
  CHECK_THROWS_AS(fit_nngk(batch, config), InsufficientData);
  config.num_centers = 1000;  // above the training size
  CHECK_THROWS_AS(fit_nngk(batch, config), InsufficientData);
}

TEST_CASE("separated blobs classify a fresh split almost perfectly") {
  BlobSpec train_spec;
  train_spec.class_means = {{0.0, 0.0}, {10.0, 0.0}, {0.0, 10.0}};
  train_spec.stddev = 1.0;
  train_spec.samples_per_class = 40;
  train_spec.seed = 100;
  auto holdout_spec = train_spec;
  holdout_spec.seed = 101;
  const auto train = generate_blobs(train_spec);
  const auto holdout = generate_blobs(holdout_spec);

  NngkConfig config;
  config.num_centers = 24;
  config.seed = 5;
  const auto centers = fit_nngk(train, config);
  const auto predicted = predict_nngk(centers, 0, holdout.points);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < holdout.size(); ++i) {
    if (predicted[i] == holdout.labels[i]) ++hits;
  }
  CHECK(static_cast<double>(hits) / holdout.size() >= 0.95);
}

TEST_CASE("weight refinement keeps weights non-negative") {
  const auto batch = generate_blobs(two_far_blobs(7, 15, 1.5));
  NngkConfig config;
  config.num_centers = 10;
  config.weight_steps = 25;
  config.weight_lr = 0.5;
  config.seed = 8;
  const auto centers = fit_nngk(batch, config);
  for (double w : centers.weights) CHECK(w >= 0.0);
  // The refined classifier still works on its own training data.
  const auto predicted = predict_nngk(centers, 0, batch.points);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (predicted[i] == batch.labels[i]) ++hits;
  }
  CHECK(static_cast<double>(hits) / batch.size() >= 0.9);
}

TEST_CASE("prediction at a center with k one returns its label") {
  CenterSet centers;
  centers.centers = {{0.0, 0.0}, {4.0, 0.0}, {0.0, 4.0}};
  centers.labels = {2, 0, 1};
  centers.weights = {1.0, 1.0, 1.0};
  centers.bandwidth = 1.0;
  const auto predicted = predict_nngk(centers, 1, {{0.0, 0.0}, {4.0, 0.0}, {0.0, 4.0}});
  CHECK(predicted == std::vector<LabelId>{2, 0, 1});
}

TEST_CASE("equidistant classes tie toward the smaller label") {
  CenterSet centers;
  centers.centers = {{-1.0, 0.0}, {1.0, 0.0}};
  centers.labels = {3, 1};
  centers.weights = {1.0, 1.0};
  centers.bandwidth = 1.0;
  const auto predicted = predict_nngk(centers, 0, {{0.0, 0.0}});
  CHECK(predicted == std::vector<LabelId>{1});
}

TEST_CASE("predictions argmax the recomputed class probabilities") {
  const auto batch = generate_blobs(two_far_blobs(19, 25, 2.0));
  NngkConfig config;
  config.num_centers = 20;
  config.seed = 14;
  const auto centers = fit_nngk(batch, config);
  const auto predicted = predict_nngk(centers, 0, batch.points);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    LabelId arg = 0;
    double best = -1.0;
    for (LabelId q = 0; q < 2; ++q) {
      const double prob = nngk_class_prob(batch.points[i], centers, q);
      if (prob > best) {
        best = prob;
        arg = q;
      }
    }
    CHECK(predicted[i] == arg);
  }
}

TEST_CASE("scaling every weight leaves predictions unchanged") {
  const auto batch = generate_blobs(two_far_blobs(23, 15, 2.5));
  NngkConfig config;
  config.num_centers = 12;
  config.seed = 16;
  auto centers = fit_nngk(batch, config);
  const auto before = predict_nngk(centers, 3, batch.points);
  for (double& w : centers.weights) w *= 7.5;
  CHECK(predict_nngk(centers, 3, batch.points) == before);
}

TEST_CASE("pool assembly aligns rows across members and splits") {
  const auto train = generate_blobs(two_far_blobs(41, 20, 1.0));
  const auto validation = generate_blobs(two_far_blobs(42, 10, 1.0));
  const auto test = generate_blobs(two_far_blobs(43, 10, 1.0));

  PoolSpec member;
  member.train.loss = LossKind::contrastive;
  member.train.steps = 10;
  member.train.batch_size = 8;
  member.train.learning_rate = 0.01;
  member.nngk.num_centers = 10;

  std::vector<PoolSpec> specs(3, member);
  specs[1].train.loss = LossKind::triplet;
  specs[1].name = "tri";
  specs[2].train.loss = LossKind::supcon;

  const auto pool = build_pool(specs, train, validation, test);
  CHECK(pool.train.pool_size() == 3);
  CHECK(pool.validation.pool_size() == 3);
  CHECK(pool.test.pool_size() == 3);
  CHECK(pool.train.sample_count() == 40);
  CHECK(pool.validation.sample_count() == 20);
  CHECK(pool.test.sample_count() == 20);
  CHECK(pool.validation.classifier_names ==
        std::vector<std::string>{"contrastive_0", "tri", "supcon_2"});
  // Truth columns mirror the batches.
  for (std::size_t i = 0; i < 20; ++i) CHECK(pool.test.truth[i] == test.labels[i]);
  CHECK_NOTHROW(validate_table(pool.train));
  CHECK_NOTHROW(validate_table(pool.validation));
  CHECK_NOTHROW(validate_table(pool.test));
}

TEST_CASE("pool assembly is deterministic") {
  const auto train = generate_blobs(two_far_blobs(51, 15, 1.0));
  const auto validation = generate_blobs(two_far_blobs(52, 8, 1.0));
  const auto test = generate_blobs(two_far_blobs(53, 8, 1.0));
  PoolSpec member;
  member.train.steps = 5;
  member.train.batch_size = 6;
  member.nngk.num_centers = 8;
  const std::vector<PoolSpec> specs{member};
  const auto lhs = build_pool(specs, train, validation, test);
  const auto rhs = build_pool(specs, train, validation, test);
  CHECK(lhs.train == rhs.train);
  CHECK(lhs.validation == rhs.validation);
  CHECK(lhs.test == rhs.test);
  CHECK_THROWS_AS(build_pool({}, train, validation, test), InvalidConfig);
}

}  // TEST_SUITE
