#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "forge/errors.hpp"

namespace forge {

// Non-negative class index. Valid labels are < num_classes of the owning table.
using LabelId = std::int32_t;

// Aligned hard-label predictions of a classifier pool against ground truth.
// Rows are classifiers, columns are samples in file order. Immutable after
// construction; safe for concurrent reads.
struct PredictionTable {
  std::vector<std::string> classifier_names;      // length M, no duplicates
  std::vector<std::int64_t> sample_ids;           // length N, file order is authoritative
  std::vector<LabelId> truth;                     // length N
  std::vector<std::vector<LabelId>> predictions;  // M rows, each length N
  int num_classes = 0;

  std::size_t pool_size() const { return classifier_names.size(); }
  std::size_t sample_count() const { return truth.size(); }

  bool operator==(const PredictionTable&) const = default;
};

// Throws if the table violates its invariants (shape, label range, duplicate
// names). All loaders and mergers call this before returning.
void validate_table(const PredictionTable& table);

// CSV wire format:
//   sample_id,truth,<name1>,...,<nameM>
//   #num_classes=<int>            (optional directive line)
//   0,3,3,...                     (one line per sample, LF endings)
// When the directive is absent, num_classes = 1 + max observed label.
PredictionTable parse_prediction_table(const std::string& text);
std::string format_prediction_table(const PredictionTable& table);

PredictionTable load_prediction_table(const std::filesystem::path& path);
void save_prediction_table(const PredictionTable& table, const std::filesystem::path& path);

// Fraction of samples where classifier `index` agrees with truth.
double classifier_accuracy(const PredictionTable& table, std::size_t index);

// Concatenates classifier pools that describe the same fold. Sample ids and
// truth must match position by position (RowOrderMismatch otherwise);
// classifier names must stay unique across inputs.
PredictionTable merge_tables(std::span<const PredictionTable> tables);

}  // namespace forge
