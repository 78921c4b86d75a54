#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "forge/metric_losses.hpp"
#include "forge/prediction_table.hpp"

// Desk-scale embedding lab: synthetic blob data, minibatch descent on the
// metric losses with finite-difference gradients, a kernel-density nearest
// class classifier, and pool assembly into aligned prediction tables.
namespace forge {

// Isotropic Gaussian clusters, one per class mean; class i gets label i.
struct BlobSpec {
  std::vector<Embedding> class_means;  // >= 2 classes, uniform dimension
  double stddev = 1.0;                 // >= 0; zero collapses onto the means
  std::size_t samples_per_class = 0;
  std::uint64_t seed = 0;
};

// Samples grouped by class in mean order, deterministic given the seed.
EmbeddingBatch generate_blobs(const BlobSpec& spec);

// CSV wire format for batches: header `label,x0,...,x{D-1}`, then one row per
// point with the integer label first. Coordinates round-trip exactly.
std::string format_embedding_batch(const EmbeddingBatch& batch);
EmbeddingBatch parse_embedding_batch(const std::string& text);
EmbeddingBatch load_embedding_batch(const std::filesystem::path& path);
void save_embedding_batch(const EmbeddingBatch& batch, const std::filesystem::path& path);

enum class LossKind : std::uint8_t {
  contrastive,
  triplet,
  nngk,
  proxy_anchor,
  softtriple,
  supcon,
};

std::string to_string(LossKind kind);
LossKind loss_kind_from_string(const std::string& text);

struct TrainConfig {
  LossKind loss = LossKind::contrastive;
  double learning_rate = 0.05;  // >= 0; zero makes training the identity
  std::size_t steps = 200;      // >= 1
  std::size_t batch_size = 16;  // >= 2
  double fd_step = 1e-4;
  std::uint64_t seed = 0;

  double margin = 1.0;        // contrastive / triplet
  double proxy_alpha = 32.0;  // proxy-anchor
  double proxy_margin = 0.1;
  double st_lambda = 10.0;  // softtriple
  double st_gamma = 0.1;
  double st_margin = 0.01;
  std::size_t st_centers = 2;
  double supcon_tau = 0.1;
  double nngk_phi = 1.0;
  std::size_t nngk_k = 0;  // 0 means use the full batch
  bool normalize = true;   // cosine losses renormalize inputs
};

// Gradient-descends copies of the input embeddings under the configured loss.
// Every step draws a minibatch, builds the loss-specific objective over it,
// and moves the selected points by central finite differences. When
// loss_trace is non-null it receives one objective value per completed step;
// a non-finite objective aborts with NonFiniteLoss, leaving the trace at the
// steps that finished.
std::vector<Embedding> train_embeddings(const EmbeddingBatch& data, const TrainConfig& config,
                                        std::vector<double>* loss_trace = nullptr);

struct NngkConfig {
  std::size_t num_centers = 16;
  double phi = 1.0;
  std::size_t k = 0;  // 0 means all centers vote
  std::size_t weight_steps = 0;
  double weight_lr = 0.1;
  std::uint64_t seed = 0;
};

// Picks centers class-stratified from the training batch (every class gets at
// least one), then optionally refines the non-negative center weights by
// projected descent on the mean negative log probability of the training
// points (each point excludes its own center when it is one).
CenterSet fit_nngk(const EmbeddingBatch& train, const NngkConfig& config);

// Highest class probability wins; ties go to the smallest label.
std::vector<LabelId> predict_nngk(const CenterSet& centers, std::size_t k,
                                  const std::vector<Embedding>& points);

// One pool member: an embedding trainer plus the classifier fitted on top.
struct PoolSpec {
  TrainConfig train;
  NngkConfig nngk;
  std::string name;  // empty picks "<loss>_<index>"
};

struct PoolTables {
  PredictionTable train;
  PredictionTable validation;
  PredictionTable test;
};

// Trains every spec on the train batch, fits its classifier, and predicts all
// three splits. Rows across members stay aligned by construction.
PoolTables build_pool(const std::vector<PoolSpec>& specs, const EmbeddingBatch& train,
                      const EmbeddingBatch& validation, const EmbeddingBatch& test);

}  // namespace forge
