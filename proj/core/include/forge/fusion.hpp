#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "forge/prediction_table.hpp"

namespace forge {

// Bit-string over a classifier pool: bit i selects classifier i for voting.
// Doubles as the individual x in {0,1}^n of the marginal-model optimizer.
struct EnsembleMask {
  std::vector<std::uint8_t> bits;

  EnsembleMask() = default;
  explicit EnsembleMask(std::size_t n, std::uint8_t fill = 0) : bits(n, fill) {}

  std::size_t size() const { return bits.size(); }
  std::size_t popcount() const;
  bool any() const { return popcount() > 0; }

  // Compact form, e.g. "01101".
  std::string to_string() const;
  static EnsembleMask from_string(const std::string& text);

  bool operator==(const EnsembleMask&) const = default;
};

// Per-sample label with the most votes among selected classifiers; ties break
// toward the smallest label value.
std::vector<LabelId> majority_vote(const PredictionTable& table, const EnsembleMask& mask);

// Accuracy of the majority-vote output against table.truth.
double ensemble_accuracy(const PredictionTable& table, const EnsembleMask& mask);

}  // namespace forge
