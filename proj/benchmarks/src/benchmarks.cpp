#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "forge/diversity.hpp"
#include "forge/fusion.hpp"
#include "forge/metric_lab.hpp"
#include "forge/metric_losses.hpp"
#include "forge/umda.hpp"

namespace {

using forge::EmbeddingBatch;
using forge::EnsembleMask;
using forge::LabelId;
using forge::PredictionTable;

PredictionTable scene_sized_table(std::uint64_t seed, std::size_t pool, std::size_t samples,
                                  int classes) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<LabelId> label(0, classes - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  PredictionTable table;
  table.num_classes = classes;
  for (std::size_t i = 0; i < pool; ++i) table.classifier_names.push_back("c" + std::to_string(i));
  for (std::size_t s = 0; s < samples; ++s) {
    table.sample_ids.push_back(static_cast<std::int64_t>(s));
    table.truth.push_back(label(rng));
  }
  table.predictions.assign(pool, std::vector<LabelId>(samples));
  for (auto& row : table.predictions) {
    for (std::size_t s = 0; s < samples; ++s) {
      row[s] = unit(rng) < 0.8 ? table.truth[s] : label(rng);
    }
  }
  return table;
}

EmbeddingBatch blob_batch(std::size_t per_class) {
  forge::BlobSpec spec;
  spec.class_means = {{6.0, 0.0}, {-3.0, 5.2}, {-3.0, -5.2}};
  spec.stddev = 0.5;
  spec.samples_per_class = per_class;
  spec.seed = 1;
  return forge::generate_blobs(spec);
}

void bm_diversity_matrix(benchmark::State& state) {
  const auto table = scene_sized_table(1, 24, 2000, 30);
  for (auto _ : state) {
    benchmark::DoNotOptimize(forge::diversity_matrix(table));
  }
}
BENCHMARK(bm_diversity_matrix)->Unit(benchmark::kMillisecond);

void bm_majority_vote(benchmark::State& state) {
  const auto table = scene_sized_table(2, 24, 2000, 30);
  const EnsembleMask full(24, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(forge::ensemble_accuracy(table, full));
  }
}
BENCHMARK(bm_majority_vote)->Unit(benchmark::kMillisecond);

void bm_umda_selection(benchmark::State& state) {
  const auto table = scene_sized_table(3, 24, 200, 30);
  const auto fitness = forge::ensemble_fitness(table);
  forge::UmdaConfig config;
  config.n = 24;
  config.generations = static_cast<int>(state.range(0));
  config.seed = 5;
  for (auto _ : state) {
    benchmark::DoNotOptimize(forge::run_umda(config, fitness));
  }
}
BENCHMARK(bm_umda_selection)->Arg(10)->Arg(100)->Unit(benchmark::kMillisecond);

void bm_loss_batch(benchmark::State& state) {
  const auto batch = blob_batch(16);  // 48 points
  const auto kind = static_cast<forge::LossKind>(state.range(0));
  forge::TrainConfig config;
  config.loss = kind;
  config.steps = 1;
  config.batch_size = 16;
  config.seed = 2;
  for (auto _ : state) {
    benchmark::DoNotOptimize(forge::train_embeddings(batch, config));
  }
}
BENCHMARK(bm_loss_batch)
    ->DenseRange(0, 5, 1)
    ->Unit(benchmark::kMillisecond);

void bm_finite_diff_supcon(benchmark::State& state) {
  const auto batch = blob_batch(8);  // 24 points
  forge::SupConParams params;
  const forge::BatchFunction objective = [&batch, &params](const std::vector<forge::Embedding>& pts) {
    EmbeddingBatch probe = batch;
    probe.points = pts;
    return forge::supcon_loss(probe, params);
  };
  for (auto _ : state) {
    benchmark::DoNotOptimize(forge::finite_diff_gradient(objective, batch.points, 1e-4));
  }
}
BENCHMARK(bm_finite_diff_supcon)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
