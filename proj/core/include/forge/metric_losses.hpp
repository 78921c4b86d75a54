#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "forge/errors.hpp"
#include "forge/prediction_table.hpp"

namespace forge {

using Embedding = std::vector<double>;

// Labeled feature vectors of uniform dimension. points[i] belongs to labels[i].
struct EmbeddingBatch {
  std::vector<Embedding> points;
  std::vector<LabelId> labels;

  std::size_t size() const { return points.size(); }
  std::size_t dim() const { return points.empty() ? 0 : points.front().size(); }
};

void validate_batch(const EmbeddingBatch& batch);

double squared_distance(const Embedding& a, const Embedding& b);
double dot(const Embedding& a, const Embedding& b);
double norm(const Embedding& a);
Embedding normalized(const Embedding& a);
double cosine_similarity(const Embedding& a, const Embedding& b);

// --- contrastive / triplet -------------------------------------------------
// Margins compare against squared Euclidean distance throughout.

// Same class: D^2. Distinct class: max(0, m - D^2).
double contrastive_loss(const Embedding& x_p, const Embedding& x_n, bool same_class,
                        double margin);

// max(0, D^2(a,p) - D^2(a,n) + m).
double triplet_loss(const Embedding& x_a, const Embedding& x_p, const Embedding& x_n,
                    double margin);

// --- nearest-neighbour Gaussian kernels ------------------------------------

// Weighted kernel centers with a shared bandwidth phi.
struct CenterSet {
  std::vector<Embedding> centers;
  std::vector<LabelId> labels;
  std::vector<double> weights;
  double bandwidth = 1.0;

  std::size_t size() const { return centers.size(); }
};

void validate_centers(const CenterSet& centers);

// exp(-|x - c|^2 / (2 phi^2)), in (0, 1], 1 iff x == c.
double gaussian_kernel(const Embedding& x, const Embedding& c, double phi);

// Pr(x in class q) = sum_{i in q} w_i f(x, c_i) / sum_j w_j f(x, c_j).
double nngk_class_prob(const Embedding& x, const CenterSet& centers, LabelId q);

// Same ratio restricted to the k nearest centers by Euclidean distance.
// Distance ties break toward the lower center index. With exclude_own_center,
// the first center at exactly zero distance from x is dropped, matching the
// rule that a training example never counts its own contributed center.
double nngk_neighbor_prob(const Embedding& x, const CenterSet& centers, std::size_t k, LabelId r,
                          bool exclude_own_center);

// -ln(prob). Probabilities below 1e-12 are clamped before the log so kernel
// underflow never produces an infinity.
double nngk_loss(double prob_correct);

// --- proxy anchor -----------------------------------------------------------

// One learned representative per class. Similarity s is the cosine.
struct ProxySet {
  std::vector<Embedding> proxies;
  std::vector<LabelId> labels;
  double alpha = 32.0;
  double margin = 0.1;
  bool normalize = true;  // L2-normalize batch points before scoring
};

// Anchored on proxies: proxies with a same-class point in the batch pull it
// closer, proxies of classes absent from the batch push the batch away.
double proxy_anchor_loss(const EmbeddingBatch& batch, const ProxySet& proxies);

// --- softtriple -------------------------------------------------------------

// K weight vectors per class; class index doubles as position in class_weights.
struct SoftTripleParams {
  std::size_t centers_per_class = 2;                     // K
  std::vector<std::vector<Embedding>> class_weights;     // [class][k] -> weight vector
  double gamma = 0.1;    // entropy smoothing of the per-class softmax
  double lambda = 10.0;  // scale on smoothed similarities
  double margin = 0.01;
};

void validate_softtriple(const SoftTripleParams& params, std::size_t dim);

// Softmax-smoothed similarity: softmax_k((1/gamma) x.W_k) weighted mean of x.W_k.
double softtriple_similarity(const Embedding& x, const SoftTripleParams& params, LabelId q);

// -log(exp(lambda(S_y - m)) / (exp(lambda(S_y - m)) + sum_{j != y} exp(lambda S_j))).
double softtriple_loss(const Embedding& x, LabelId y, const SoftTripleParams& params);

// --- supervised contrastive -------------------------------------------------

struct SupConParams {
  double temperature = 0.1;
  bool normalize = true;  // L2-normalize embeddings before inner products
};

// Sum over anchors with at least one positive of the mean negative log ratio
// exp(x_i.x_p / tau) / sum_{a != i} exp(x_i.x_a / tau). Anchors without a
// positive are skipped; a batch with no such anchor at all is an error.
double supcon_loss(const EmbeddingBatch& batch, const SupConParams& params);

// --- finite differences -----------------------------------------------------

using BatchFunction = std::function<double(const std::vector<Embedding>&)>;

// Central differences (f(x + h e_i) - f(x - h e_i)) / (2h) per coordinate per
// point. Throws NonFiniteValue if f is not finite at a probe point.
std::vector<Embedding> finite_diff_gradient(const BatchFunction& f,
                                            const std::vector<Embedding>& points, double h);

}  // namespace forge
