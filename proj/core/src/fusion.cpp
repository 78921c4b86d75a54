#include "forge/fusion.hpp"

#include <algorithm>

namespace forge {

std::size_t EnsembleMask::popcount() const {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

std::string EnsembleMask::to_string() const {
  std::string out(bits.size(), '0');
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i]) out[i] = '1';
  }
  return out;
}

EnsembleMask EnsembleMask::from_string(const std::string& text) {
  EnsembleMask mask;
  mask.bits.reserve(text.size());
  for (char ch : text) {
    if (ch != '0' && ch != '1') throw Error("mask string must contain only 0 and 1");
    mask.bits.push_back(ch == '1' ? 1 : 0);
  }
  return mask;
}

std::vector<LabelId> majority_vote(const PredictionTable& table, const EnsembleMask& mask) {
  if (mask.size() != table.pool_size()) {
    throw LengthMismatch("mask length " + std::to_string(mask.size()) + " != pool size " +
                         std::to_string(table.pool_size()));
  }
  if (!mask.any()) throw EmptyEnsemble("mask selects no classifiers");

  const std::size_t n = table.sample_count();
  std::vector<LabelId> winners(n);
  std::vector<int> votes(static_cast<std::size_t>(table.num_classes));
  for (std::size_t s = 0; s < n; ++s) {
    std::fill(votes.begin(), votes.end(), 0);
    for (std::size_t i = 0; i < table.pool_size(); ++i) {
      if (mask.bits[i]) ++votes[static_cast<std::size_t>(table.predictions[i][s])];
    }
    // Scanning labels in ascending order makes ties land on the smallest label.
    LabelId winner = 0;
    int best = -1;
    for (LabelId label = 0; label < table.num_classes; ++label) {
      if (votes[static_cast<std::size_t>(label)] > best) {
        best = votes[static_cast<std::size_t>(label)];
        winner = label;
      }
    }
    winners[s] = winner;
  }
  return winners;
}

double ensemble_accuracy(const PredictionTable& table, const EnsembleMask& mask) {
  const std::vector<LabelId> fused = majority_vote(table, mask);
  std::size_t hits = 0;
  for (std::size_t s = 0; s < fused.size(); ++s) {
    if (fused[s] == table.truth[s]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(fused.size());
}

}  // namespace forge
