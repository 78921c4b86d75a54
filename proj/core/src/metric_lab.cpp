#include "forge/metric_lab.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace forge {
namespace {

using Rng = std::mt19937_64;

Embedding class_centroid(const std::vector<Embedding>& points, const std::vector<std::size_t>& members) {
  Embedding centroid(points.front().size(), 0.0);
  for (std::size_t idx : members) {
    for (std::size_t d = 0; d < centroid.size(); ++d) centroid[d] += points[idx][d];
  }
  for (double& v : centroid) v /= static_cast<double>(members.size());
  return centroid;
}

// Positions of each label within `labels`, keyed by label value.
std::map<LabelId, std::vector<std::size_t>> group_by_label(const std::vector<LabelId>& labels) {
  std::map<LabelId, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < labels.size(); ++i) groups[labels[i]].push_back(i);
  return groups;
}

bool has_positive_pair(const std::vector<LabelId>& labels) {
  std::map<LabelId, std::size_t> counts;
  for (LabelId label : labels) {
    if (++counts[label] >= 2) return true;
  }
  return false;
}

bool has_two_classes(const std::vector<LabelId>& labels) {
  return std::set<LabelId>(labels.begin(), labels.end()).size() >= 2;
}

double mean_contrastive(const std::vector<Embedding>& points, const std::vector<LabelId>& labels,
                        double margin) {
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = i + 1; j < points.size(); ++j) {
      sum += contrastive_loss(points[i], points[j], labels[i] == labels[j], margin);
      ++pairs;
    }
  }
  return pairs == 0 ? 0.0 : sum / static_cast<double>(pairs);
}

double mean_triplet(const std::vector<Embedding>& points, const std::vector<LabelId>& labels,
                    double margin) {
  double sum = 0.0;
  std::size_t triples = 0;
  for (std::size_t a = 0; a < points.size(); ++a) {
    for (std::size_t p = 0; p < points.size(); ++p) {
      if (p == a || labels[p] != labels[a]) continue;
      for (std::size_t n = 0; n < points.size(); ++n) {
        if (labels[n] == labels[a]) continue;
        sum += triplet_loss(points[a], points[p], points[n], margin);
        ++triples;
      }
    }
  }
  return triples == 0 ? 0.0 : sum / static_cast<double>(triples);
}

double mean_nngk(const std::vector<Embedding>& points, const std::vector<LabelId>& labels,
                 double phi, std::size_t k_requested) {
  CenterSet centers;
  centers.centers = points;
  centers.labels = labels;
  centers.weights.assign(points.size(), 1.0);
  centers.bandwidth = phi;
  // Every point is its own center, so exclusion always removes one.
  const std::size_t available = points.size() - 1;
  const std::size_t k = k_requested == 0 ? available : std::min(k_requested, available);
  double sum = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double prob = nngk_neighbor_prob(points[i], centers, k, labels[i], true);
    sum += nngk_loss(prob);
  }
  return sum / static_cast<double>(points.size());
}

double proxy_anchor_objective(const std::vector<Embedding>& points,
                              const std::vector<LabelId>& labels, double alpha, double margin,
                              bool normalize) {
  ProxySet proxies;
  for (const auto& [label, members] : group_by_label(labels)) {
    proxies.labels.push_back(label);
    Embedding centroid = class_centroid(points, members);
    proxies.proxies.push_back(normalize ? normalized(centroid) : centroid);
  }
  proxies.alpha = alpha;
  proxies.margin = margin;
  proxies.normalize = normalize;
  EmbeddingBatch batch{points, labels};
  return proxy_anchor_loss(batch, proxies);
}

double softtriple_objective(const std::vector<Embedding>& points,
                            const std::vector<LabelId>& labels, const TrainConfig& config) {
  const auto groups = group_by_label(labels);
  // Dense class ids in ascending label order; weights are unit centroids of
  // an index-parity split of each class's batch members.
  std::map<LabelId, LabelId> dense;
  SoftTripleParams params;
  params.centers_per_class = config.st_centers;
  params.gamma = config.st_gamma;
  params.lambda = config.st_lambda;
  params.margin = config.st_margin;
  for (const auto& [label, members] : groups) {
    dense[label] = static_cast<LabelId>(params.class_weights.size());
    std::vector<Embedding> weights;
    for (std::size_t k = 0; k < config.st_centers; ++k) {
      std::vector<std::size_t> part;
      for (std::size_t p = 0; p < members.size(); ++p) {
        if (p % config.st_centers == k) part.push_back(members[p]);
      }
      if (part.empty()) part = members;
      weights.push_back(normalized(class_centroid(points, part)));
    }
    params.class_weights.push_back(std::move(weights));
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    sum += softtriple_loss(points[i], dense.at(labels[i]), params);
  }
  return sum / static_cast<double>(points.size());
}

double supcon_objective(const std::vector<Embedding>& points, const std::vector<LabelId>& labels,
                        double tau, bool normalize) {
  std::map<LabelId, std::size_t> counts;
  for (LabelId label : labels) ++counts[label];
  std::size_t anchors = 0;
  for (LabelId label : labels) {
    if (counts[label] >= 2) ++anchors;
  }
  EmbeddingBatch batch{points, labels};
  SupConParams params;
  params.temperature = tau;
  params.normalize = normalize;
  return supcon_loss(batch, params) / static_cast<double>(anchors);
}

}  // namespace

EmbeddingBatch generate_blobs(const BlobSpec& spec) {
  if (spec.class_means.size() < 2) throw InvalidConfig("blobs need at least two classes");
  const std::size_t dim = spec.class_means.front().size();
  if (dim == 0) throw DimensionMismatch("blob means need dimension >= 1");
  for (const auto& mean : spec.class_means) {
    if (mean.size() != dim) throw DimensionMismatch("blob means have mixed dimensions");
  }
  if (spec.stddev < 0.0) throw InvalidConfig("blob stddev must be >= 0");
  if (spec.samples_per_class == 0) throw InvalidConfig("blobs need samples_per_class >= 1");

  Rng rng(spec.seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  EmbeddingBatch batch;
  for (std::size_t c = 0; c < spec.class_means.size(); ++c) {
    for (std::size_t i = 0; i < spec.samples_per_class; ++i) {
      Embedding point(dim);
      for (std::size_t d = 0; d < dim; ++d) {
        point[d] = spec.class_means[c][d] + spec.stddev * unit(rng);
      }
      batch.points.push_back(std::move(point));
      batch.labels.push_back(static_cast<LabelId>(c));
    }
  }
  return batch;
}

std::string format_embedding_batch(const EmbeddingBatch& batch) {
  validate_batch(batch);
  std::ostringstream out;
  out << "label";
  for (std::size_t d = 0; d < batch.dim(); ++d) out << ",x" << d;
  out << '\n';
  char buffer[64];
  for (std::size_t i = 0; i < batch.size(); ++i) {
    out << batch.labels[i];
    for (double v : batch.points[i]) {
      std::snprintf(buffer, sizeof buffer, "%.17g", v);
      out << ',' << buffer;
    }
    out << '\n';
  }
  return out.str();
}

EmbeddingBatch parse_embedding_batch(const std::string& text) {
  std::vector<std::string> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(pos, end - pos);
    pos = end + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(std::move(line));
  }
  if (lines.empty()) throw MalformedFile("embedding file is empty");
  if (lines.front().rfind("label", 0) != 0) {
    throw MalformedFile("embedding header must start with 'label'");
  }

  EmbeddingBatch batch;
  for (std::size_t row = 1; row < lines.size(); ++row) {
    const std::string& line = lines[row];
    std::vector<std::string> cells;
    std::size_t cell_pos = 0;
    while (true) {
      const std::size_t comma = line.find(',', cell_pos);
      cells.push_back(line.substr(cell_pos, comma - cell_pos));
      if (comma == std::string::npos) break;
      cell_pos = comma + 1;
    }
    if (cells.size() < 2) throw MalformedFile("embedding row needs a label and coordinates");
    LabelId label = 0;
    auto [ptr, ec] = std::from_chars(cells[0].data(), cells[0].data() + cells[0].size(), label);
    if (ec != std::errc{} || ptr != cells[0].data() + cells[0].size()) {
      throw MalformedFile("bad label '" + cells[0] + "' in embedding row " + std::to_string(row));
    }
    Embedding point;
    for (std::size_t c = 1; c < cells.size(); ++c) {
      double value = 0.0;
      auto [vptr, vec] = std::from_chars(cells[c].data(), cells[c].data() + cells[c].size(), value);
      if (vec != std::errc{} || vptr != cells[c].data() + cells[c].size()) {
        throw MalformedFile("bad coordinate '" + cells[c] + "' in embedding row " +
                            std::to_string(row));
      }
      point.push_back(value);
    }
    if (!batch.points.empty() && point.size() != batch.points.front().size()) {
      throw MalformedFile("embedding row " + std::to_string(row) + " has a ragged width");
    }
    batch.points.push_back(std::move(point));
    batch.labels.push_back(label);
  }
  validate_batch(batch);
  return batch;
}

EmbeddingBatch load_embedding_batch(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_embedding_batch(buffer.str());
  } catch (const MalformedFile& e) {
    throw MalformedFile(path.string() + ": " + e.what());
  }
}

void save_embedding_batch(const EmbeddingBatch& batch, const std::filesystem::path& path) {
  const std::string text = format_embedding_batch(batch);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::contrastive: return "contrastive";
    case LossKind::triplet: return "triplet";
    case LossKind::nngk: return "nngk";
    case LossKind::proxy_anchor: return "proxy_anchor";
    case LossKind::softtriple: return "softtriple";
    case LossKind::supcon: return "supcon";
  }
  throw InvalidConfig("unknown loss kind");
}

LossKind loss_kind_from_string(const std::string& text) {
  if (text == "contrastive") return LossKind::contrastive;
  if (text == "triplet") return LossKind::triplet;
  if (text == "nngk") return LossKind::nngk;
  if (text == "proxy_anchor") return LossKind::proxy_anchor;
  if (text == "softtriple") return LossKind::softtriple;
  if (text == "supcon") return LossKind::supcon;
  throw InvalidConfig("unknown loss kind: " + text);
}

std::vector<Embedding> train_embeddings(const EmbeddingBatch& data, const TrainConfig& config,
                                        std::vector<double>* loss_trace) {
  validate_batch(data);
  if (config.batch_size < 2) throw InvalidConfig("minibatch needs at least 2 points");
  if (config.steps < 1) throw InvalidConfig("training needs at least one step");
  if (config.learning_rate < 0.0) throw InvalidConfig("learning rate must be >= 0");
  if (config.fd_step <= 0.0) throw InvalidConfig("finite-difference step must be positive");
  if (!has_positive_pair(data.labels) || !has_two_classes(data.labels)) {
    throw InsufficientData("training needs at least two classes and one repeated class");
  }

  std::vector<Embedding> points = data.points;
  Rng rng(config.seed);
  const std::size_t batch_size = std::min(config.batch_size, points.size());
  std::vector<std::size_t> all_indices(points.size());
  std::iota(all_indices.begin(), all_indices.end(), 0);

  for (std::size_t step = 0; step < config.steps; ++step) {
    // Every minibatch must contain a positive pair and two classes, or none
    // of the objectives are defined; the dataset check above guarantees a
    // valid draw exists.
    std::vector<std::size_t> batch_indices;
    std::vector<LabelId> batch_labels;
    for (int attempt = 0; attempt < 1000; ++attempt) {
      batch_indices.clear();
      std::sample(all_indices.begin(), all_indices.end(), std::back_inserter(batch_indices),
                  batch_size, rng);
      batch_labels.clear();
      for (std::size_t idx : batch_indices) batch_labels.push_back(data.labels[idx]);
      if (has_positive_pair(batch_labels) && has_two_classes(batch_labels)) break;
      if (attempt == 999) throw InsufficientData("could not draw a usable minibatch");
    }

    BatchFunction objective;
    switch (config.loss) {
      case LossKind::contrastive:
        objective = [&](const std::vector<Embedding>& x) {
          return mean_contrastive(x, batch_labels, config.margin);
        };
        break;
      case LossKind::triplet:
        objective = [&](const std::vector<Embedding>& x) {
          return mean_triplet(x, batch_labels, config.margin);
        };
        break;
      case LossKind::nngk:
        objective = [&](const std::vector<Embedding>& x) {
          return mean_nngk(x, batch_labels, config.nngk_phi, config.nngk_k);
        };
        break;
      case LossKind::proxy_anchor:
        objective = [&](const std::vector<Embedding>& x) {
          return proxy_anchor_objective(x, batch_labels, config.proxy_alpha, config.proxy_margin,
                                        config.normalize);
        };
        break;
      case LossKind::softtriple:
        objective = [&](const std::vector<Embedding>& x) {
          return softtriple_objective(x, batch_labels, config);
        };
        break;
      case LossKind::supcon:
        objective = [&](const std::vector<Embedding>& x) {
          return supcon_objective(x, batch_labels, config.supcon_tau, config.normalize);
        };
        break;
    }

    std::vector<Embedding> batch_points;
    batch_points.reserve(batch_indices.size());
    for (std::size_t idx : batch_indices) batch_points.push_back(points[idx]);

    const double value = objective(batch_points);
    if (!std::isfinite(value)) {
      throw NonFiniteLoss("objective diverged at step " + std::to_string(step));
    }
    if (loss_trace != nullptr) loss_trace->push_back(value);

    const auto gradients = finite_diff_gradient(objective, batch_points, config.fd_step);
    for (std::size_t b = 0; b < batch_indices.size(); ++b) {
      Embedding& target = points[batch_indices[b]];
      for (std::size_t d = 0; d < target.size(); ++d) {
        target[d] -= config.learning_rate * gradients[b][d];
      }
    }
  }
  return points;
}

CenterSet fit_nngk(const EmbeddingBatch& train, const NngkConfig& config) {
  validate_batch(train);
  if (config.num_centers > train.size()) {
    throw InsufficientData("more centers requested than training points");
  }
  if (config.phi <= 0.0) throw NonPositiveBandwidth("bandwidth must be positive");

  // Class-stratified pick: one guaranteed center per class, the rest assigned
  // proportionally to class sizes with remainders going to the largest
  // fractional shares (smaller label wins ties), random members within each
  // class.
  const auto groups = group_by_label(train.labels);
  if (config.num_centers < groups.size()) {
    throw InsufficientData("need at least one center per class");
  }
  const double total = static_cast<double>(train.size());
  const double extra = static_cast<double>(config.num_centers - groups.size());
  std::map<LabelId, std::size_t> quota;
  std::vector<std::pair<double, LabelId>> remainders;
  std::size_t assigned = 0;
  for (const auto& [label, members] : groups) {
    const double share = extra * static_cast<double>(members.size()) / total;
    quota[label] = 1 + static_cast<std::size_t>(share);
    assigned += quota[label];
    remainders.emplace_back(share - std::floor(share), label);
  }
  std::sort(remainders.begin(), remainders.end(), [](const auto& lhs, const auto& rhs) {
    if (lhs.first != rhs.first) return lhs.first > rhs.first;
    return lhs.second < rhs.second;
  });
  for (std::size_t i = 0; assigned < config.num_centers; i = (i + 1) % remainders.size()) {
    const LabelId label = remainders[i].second;
    if (quota[label] < groups.at(label).size()) {
      ++quota[label];
      ++assigned;
    }
  }

  Rng rng(config.seed);
  CenterSet centers;
  centers.bandwidth = config.phi;
  for (const auto& [label, members] : groups) {
    std::vector<std::size_t> shuffled = members;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    for (std::size_t i = 0; i < quota[label]; ++i) {
      centers.centers.push_back(train.points[shuffled[i]]);
      centers.labels.push_back(label);
      centers.weights.push_back(1.0);
    }
  }

  if (config.weight_steps == 0 || centers.size() < 2) return centers;
  if (config.weight_lr <= 0.0) throw InvalidConfig("weight learning rate must be positive");

  // Projected descent on the mean training loss; weights stay non-negative.
  // Training points that are themselves centers lose one neighbor, so cap k
  // one below the center count.
  const std::size_t k_all = centers.size() - 1;
  const std::size_t k = config.k == 0 ? k_all : std::min(config.k, k_all);
  auto objective = [&](const std::vector<double>& weights) {
    CenterSet probe = centers;
    probe.weights = weights;
    double sum = 0.0;
    for (std::size_t i = 0; i < train.size(); ++i) {
      const double prob = nngk_neighbor_prob(train.points[i], probe, k, train.labels[i], true);
      sum += nngk_loss(prob);
    }
    return sum / static_cast<double>(train.size());
  };

  const double h = 1e-4;
  for (std::size_t step = 0; step < config.weight_steps; ++step) {
    std::vector<double> gradient(centers.size(), 0.0);
    std::vector<double> probe = centers.weights;
    for (std::size_t i = 0; i < probe.size(); ++i) {
      const double original = probe[i];
      probe[i] = original + h;
      const double upper = objective(probe);
      probe[i] = std::max(0.0, original - h);
      const double lower = objective(probe);
      probe[i] = original;
      gradient[i] = (upper - lower) / (h + (original - std::max(0.0, original - h)));
    }
    double mass = 0.0;
    for (std::size_t i = 0; i < centers.weights.size(); ++i) {
      centers.weights[i] = std::max(0.0, centers.weights[i] - config.weight_lr * gradient[i]);
      mass += centers.weights[i];
    }
    if (mass <= 0.0) {
      std::fill(centers.weights.begin(), centers.weights.end(), 1.0);
      break;
    }
  }
  return centers;
}

std::vector<LabelId> predict_nngk(const CenterSet& centers, std::size_t k,
                                  const std::vector<Embedding>& points) {
  validate_centers(centers);
  std::vector<LabelId> classes(centers.labels.begin(), centers.labels.end());
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  const std::size_t k_eff = k == 0 ? centers.size() : std::min(k, centers.size());

  std::vector<LabelId> predictions;
  predictions.reserve(points.size());
  for (const auto& point : points) {
    LabelId best = classes.front();
    double best_prob = -1.0;
    for (LabelId candidate : classes) {
      const double prob = nngk_neighbor_prob(point, centers, k_eff, candidate, false);
      if (prob > best_prob) {  // ascending scan, so ties keep the smaller label
        best_prob = prob;
        best = candidate;
      }
    }
    predictions.push_back(best);
  }
  return predictions;
}

namespace {

PredictionTable single_member_table(const std::string& name, const EmbeddingBatch& split,
                                    const std::vector<LabelId>& predictions) {
  PredictionTable table;
  table.classifier_names = {name};
  table.sample_ids.resize(split.size());
  std::iota(table.sample_ids.begin(), table.sample_ids.end(), 0);
  table.truth = split.labels;
  table.predictions = {predictions};
  LabelId max_label = 0;
  for (LabelId label : split.labels) max_label = std::max(max_label, label);
  for (LabelId label : predictions) max_label = std::max(max_label, label);
  table.num_classes = static_cast<int>(max_label) + 1;
  validate_table(table);
  return table;
}

}  // namespace

PoolTables build_pool(const std::vector<PoolSpec>& specs, const EmbeddingBatch& train,
                      const EmbeddingBatch& validation, const EmbeddingBatch& test) {
  if (specs.empty()) throw InvalidConfig("pool needs at least one member");
  validate_batch(train);
  validate_batch(validation);
  validate_batch(test);

  std::vector<PredictionTable> train_tables;
  std::vector<PredictionTable> validation_tables;
  std::vector<PredictionTable> test_tables;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const PoolSpec& spec = specs[i];
    const std::string name =
        spec.name.empty() ? to_string(spec.train.loss) + "_" + std::to_string(i) : spec.name;

    const std::vector<Embedding> trained = train_embeddings(train, spec.train);
    EmbeddingBatch trained_batch{trained, train.labels};
    const CenterSet centers = fit_nngk(trained_batch, spec.nngk);

    train_tables.push_back(
        single_member_table(name, train, predict_nngk(centers, spec.nngk.k, train.points)));
    validation_tables.push_back(single_member_table(
        name, validation, predict_nngk(centers, spec.nngk.k, validation.points)));
    test_tables.push_back(
        single_member_table(name, test, predict_nngk(centers, spec.nngk.k, test.points)));
  }

  PoolTables pool;
  pool.train = merge_tables(train_tables);
  pool.validation = merge_tables(validation_tables);
  pool.test = merge_tables(test_tables);
  return pool;
}

}  // namespace forge
