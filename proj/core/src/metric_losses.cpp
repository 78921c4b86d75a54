#include "forge/metric_losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

namespace forge {
namespace {

constexpr double kMinProb = 1e-12;

void check_same_dim(const Embedding& a, const Embedding& b) {
  if (a.size() != b.size()) {
    throw DimensionMismatch("embedding dimensions differ: " + std::to_string(a.size()) + " vs " +
                            std::to_string(b.size()));
  }
}

// log(sum_i exp(z_i)) with max subtraction.
double log_sum_exp(const std::vector<double>& z) {
  const double zmax = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double v : z) sum += std::exp(v - zmax);
  return zmax + std::log(sum);
}

}  // namespace

void validate_batch(const EmbeddingBatch& batch) {
  if (batch.points.empty()) throw EmptyBatch("batch has no points");
  if (batch.points.size() != batch.labels.size()) {
    throw LengthMismatch("batch points/labels length mismatch");
  }
  const std::size_t dim = batch.points.front().size();
  if (dim == 0) throw DimensionMismatch("embeddings need dimension >= 1");
  for (const auto& point : batch.points) {
    if (point.size() != dim) throw DimensionMismatch("batch embeddings have mixed dimensions");
    for (double v : point) {
      if (!std::isfinite(v)) throw NonFiniteValue("batch embedding has a non-finite component");
    }
  }
  for (LabelId label : batch.labels) {
    if (label < 0) throw LabelOutOfRange("negative class label in batch");
  }
}

double squared_distance(const Embedding& a, const Embedding& b) {
  check_same_dim(a, b);
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = a[i] - b[i];
    sum += diff * diff;
  }
  return sum;
}

double dot(const Embedding& a, const Embedding& b) {
  check_same_dim(a, b);
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
  return sum;
}

double norm(const Embedding& a) { return std::sqrt(dot(a, a)); }

Embedding normalized(const Embedding& a) {
  const double length = norm(a);
  if (length == 0.0) return a;  // zero vector has no direction; leave it alone
  Embedding out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] / length;
  return out;
}

double cosine_similarity(const Embedding& a, const Embedding& b) {
  const double na = norm(a);
  const double nb = norm(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot(a, b) / (na * nb);
}

double contrastive_loss(const Embedding& x_p, const Embedding& x_n, bool same_class,
                        double margin) {
  if (margin < 0.0) throw InvalidConfig("contrastive margin must be >= 0");
  const double d2 = squared_distance(x_p, x_n);
  return same_class ? d2 : std::max(0.0, margin - d2);
}

double triplet_loss(const Embedding& x_a, const Embedding& x_p, const Embedding& x_n,
                    double margin) {
  if (margin < 0.0) throw InvalidConfig("triplet margin must be >= 0");
  const double pos = squared_distance(x_a, x_p);
  const double neg = squared_distance(x_a, x_n);
  return std::max(0.0, pos - neg + margin);
}

void validate_centers(const CenterSet& centers) {
  if (centers.centers.empty()) throw InsufficientCenters("center set is empty");
  if (centers.centers.size() != centers.labels.size() ||
      centers.centers.size() != centers.weights.size()) {
    throw LengthMismatch("center set fields have mismatched lengths");
  }
  if (centers.bandwidth <= 0.0) throw NonPositiveBandwidth("bandwidth must be positive");
  const std::size_t dim = centers.centers.front().size();
  for (const auto& center : centers.centers) {
    if (center.size() != dim) throw DimensionMismatch("centers have mixed dimensions");
  }
  for (double w : centers.weights) {
    if (w < 0.0 || !std::isfinite(w)) throw Error("center weights must be finite and >= 0");
  }
}

double gaussian_kernel(const Embedding& x, const Embedding& c, double phi) {
  if (phi <= 0.0) throw NonPositiveBandwidth("bandwidth must be positive");
  return std::exp(-squared_distance(x, c) / (2.0 * phi * phi));
}

double nngk_class_prob(const Embedding& x, const CenterSet& centers, LabelId q) {
  validate_centers(centers);
  double numerator = 0.0;
  double denominator = 0.0;
  for (std::size_t i = 0; i < centers.size(); ++i) {
    const double term = centers.weights[i] * gaussian_kernel(x, centers.centers[i], centers.bandwidth);
    denominator += term;
    if (centers.labels[i] == q) numerator += term;
  }
  if (denominator <= 0.0) {
    throw DegenerateDenominator("all weighted kernel terms vanished");
  }
  return numerator / denominator;
}

double nngk_neighbor_prob(const Embedding& x, const CenterSet& centers, std::size_t k, LabelId r,
                          bool exclude_own_center) {
  validate_centers(centers);
  if (k < 1) throw InvalidConfig("neighbor count k must be >= 1");

  std::vector<std::pair<double, std::size_t>> by_distance;
  by_distance.reserve(centers.size());
  bool own_excluded = false;
  for (std::size_t i = 0; i < centers.size(); ++i) {
    const double d2 = squared_distance(x, centers.centers[i]);
    if (exclude_own_center && !own_excluded && d2 == 0.0) {
      own_excluded = true;
      continue;
    }
    by_distance.emplace_back(d2, i);
  }
  if (k > by_distance.size()) {
    throw InsufficientCenters("k = " + std::to_string(k) + " but only " +
                              std::to_string(by_distance.size()) + " centers available");
  }
  std::sort(by_distance.begin(), by_distance.end());

  double numerator = 0.0;
  double denominator = 0.0;
  for (std::size_t rank = 0; rank < k; ++rank) {
    const std::size_t i = by_distance[rank].second;
    const double term = centers.weights[i] * gaussian_kernel(x, centers.centers[i], centers.bandwidth);
    denominator += term;
    if (centers.labels[i] == r) numerator += term;
  }
  if (denominator <= 0.0) {
    throw DegenerateDenominator("all weighted kernel terms vanished in the neighbor set");
  }
  return numerator / denominator;
}

double nngk_loss(double prob_correct) {
  if (prob_correct < 0.0 || prob_correct > 1.0 + 1e-9) {
    throw InvalidProbability("probability " + std::to_string(prob_correct) + " outside [0, 1]");
  }
  return -std::log(std::clamp(prob_correct, kMinProb, 1.0));
}

double proxy_anchor_loss(const EmbeddingBatch& batch, const ProxySet& proxies) {
  validate_batch(batch);
  if (proxies.proxies.empty()) throw MissingProxy("proxy set is empty");
  if (proxies.proxies.size() != proxies.labels.size()) {
    throw LengthMismatch("proxy points/labels length mismatch");
  }
  {
    std::set<LabelId> seen;
    for (LabelId label : proxies.labels) {
      if (!seen.insert(label).second) {
        throw Error("class " + std::to_string(label) + " has more than one proxy");
      }
    }
    for (LabelId label : batch.labels) {
      if (!seen.count(label)) {
        throw MissingProxy("batch label " + std::to_string(label) + " has no proxy");
      }
    }
  }

  std::vector<Embedding> points;
  points.reserve(batch.size());
  for (const auto& point : batch.points) {
    points.push_back(proxies.normalize ? normalized(point) : point);
  }

  const double alpha = proxies.alpha;
  const double margin = proxies.margin;
  double positive_part = 0.0;
  double negative_part = 0.0;
  std::size_t proxies_with_positives = 0;

  for (std::size_t p = 0; p < proxies.proxies.size(); ++p) {
    const Embedding proxy =
        proxies.normalize ? normalized(proxies.proxies[p]) : proxies.proxies[p];
    double pos_sum = 0.0;
    double neg_sum = 0.0;
    bool has_positive = false;
    for (std::size_t i = 0; i < points.size(); ++i) {
      const double s = cosine_similarity(points[i], proxy);
      if (batch.labels[i] == proxies.labels[p]) {
        has_positive = true;
        pos_sum += std::exp(-alpha * (s - margin));
      } else {
        neg_sum += std::exp(alpha * (s + margin));
      }
    }
    // Proxies with a positive in the batch form P+; the rest are P- and
    // contribute only the repelling term over their batch negatives.
    if (has_positive) {
      ++proxies_with_positives;
      positive_part += std::log1p(pos_sum);
    } else {
      negative_part += std::log1p(neg_sum);
    }
  }

  double loss = 0.0;
  if (proxies_with_positives > 0) {
    loss += positive_part / static_cast<double>(proxies_with_positives);
  }
  loss += negative_part / static_cast<double>(proxies.proxies.size());
  return loss;
}

void validate_softtriple(const SoftTripleParams& params, std::size_t dim) {
  if (params.centers_per_class < 1) throw InvalidConfig("softtriple needs K >= 1");
  if (params.gamma <= 0.0) throw InvalidConfig("softtriple gamma must be positive");
  if (params.lambda <= 0.0) throw InvalidConfig("softtriple lambda must be positive");
  if (params.margin < 0.0) throw InvalidConfig("softtriple margin must be >= 0");
  if (params.class_weights.empty()) throw UnknownClass("softtriple has no class weights");
  for (const auto& weights : params.class_weights) {
    if (weights.size() != params.centers_per_class) {
      throw InvalidConfig("every class needs exactly K weight vectors");
    }
    for (const auto& w : weights) {
      if (w.size() != dim) throw DimensionMismatch("weight vector dimension != embedding dimension");
    }
  }
}

double softtriple_similarity(const Embedding& x, const SoftTripleParams& params, LabelId q) {
  validate_softtriple(params, x.size());
  if (q < 0 || static_cast<std::size_t>(q) >= params.class_weights.size()) {
    throw UnknownClass("class " + std::to_string(q) + " has no softtriple weights");
  }
  const auto& weights = params.class_weights[static_cast<std::size_t>(q)];
  std::vector<double> inner(weights.size());
  std::vector<double> scaled(weights.size());
  for (std::size_t k = 0; k < weights.size(); ++k) {
    inner[k] = dot(x, weights[k]);
    scaled[k] = inner[k] / params.gamma;
  }
  const double lse = log_sum_exp(scaled);
  double value = 0.0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    value += std::exp(scaled[k] - lse) * inner[k];
  }
  return value;
}

double softtriple_loss(const Embedding& x, LabelId y, const SoftTripleParams& params) {
  validate_softtriple(params, x.size());
  if (y < 0 || static_cast<std::size_t>(y) >= params.class_weights.size()) {
    throw UnknownClass("class " + std::to_string(y) + " has no softtriple weights");
  }
  const std::size_t num_classes = params.class_weights.size();
  std::vector<double> logits(num_classes);
  for (std::size_t j = 0; j < num_classes; ++j) {
    const double s = softtriple_similarity(x, params, static_cast<LabelId>(j));
    logits[j] = params.lambda * (static_cast<LabelId>(j) == y ? s - params.margin : s);
  }
  return log_sum_exp(logits) - logits[static_cast<std::size_t>(y)];
}

double supcon_loss(const EmbeddingBatch& batch, const SupConParams& params) {
  validate_batch(batch);
  if (params.temperature <= 0.0) throw InvalidConfig("temperature must be positive");

  std::vector<Embedding> points;
  points.reserve(batch.size());
  for (const auto& point : batch.points) {
    points.push_back(params.normalize ? normalized(point) : point);
  }

  const std::size_t n = points.size();
  const double tau = params.temperature;
  double total = 0.0;
  bool any_anchor = false;

  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> scaled;  // x_i . x_a / tau over A(i) = batch minus i
    scaled.reserve(n - 1);
    std::vector<std::size_t> positives;
    for (std::size_t a = 0; a < n; ++a) {
      if (a == i) continue;
      scaled.push_back(dot(points[i], points[a]) / tau);
      if (batch.labels[a] == batch.labels[i]) positives.push_back(scaled.size() - 1);
    }
    if (positives.empty() || scaled.empty()) continue;  // anchor skipped
    any_anchor = true;

    const double lse = log_sum_exp(scaled);
    double anchor_sum = 0.0;
    for (std::size_t idx : positives) anchor_sum += scaled[idx] - lse;
    total += -anchor_sum / static_cast<double>(positives.size());
  }
  if (!any_anchor) throw NoPositives("no anchor in the batch has a same-class positive");
  return total;
}

std::vector<Embedding> finite_diff_gradient(const BatchFunction& f,
                                            const std::vector<Embedding>& points, double h) {
  if (h <= 0.0) throw InvalidConfig("finite-difference step must be positive");
  std::vector<Embedding> probe = points;
  std::vector<Embedding> gradients(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    gradients[i].assign(points[i].size(), 0.0);
    for (std::size_t d = 0; d < points[i].size(); ++d) {
      const double original = probe[i][d];
      probe[i][d] = original + h;
      const double upper = f(probe);
      probe[i][d] = original - h;
      const double lower = f(probe);
      probe[i][d] = original;
      if (!std::isfinite(upper) || !std::isfinite(lower)) {
        throw NonFiniteValue("objective is not finite at a probe point");
      }
      gradients[i][d] = (upper - lower) / (2.0 * h);
    }
  }
  return gradients;
}

}  // namespace forge
