#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "forge/fusion.hpp"
#include "forge/manifest.hpp"
#include "forge/prediction_table.hpp"
#include "forge/umda.hpp"

// Cross-validated comparison of voting the whole pool against voting the
// subset the optimizer picks on validation data.
namespace forge {

struct FoldTables {
  int fold = 0;
  PredictionTable validation;
  PredictionTable test;
};

struct FoldResult {
  int fold = 0;
  double mv_test_accuracy = 0.0;
  double umda_validation_fitness = 0.0;
  double umda_test_accuracy = 0.0;
  double best_single_test_accuracy = 0.0;
  EnsembleMask best_mask;
  std::size_t mask_size = 0;
};

// Population standard deviation: folds are the whole population of interest.
struct StrategySummary {
  double mean = 0.0;
  double stddev = 0.0;
};

StrategySummary summarize(const std::vector<double>& values);

struct BaselineGain {
  std::string name;
  double baseline = 0.0;
  double relative_gain_pct = 0.0;
};

// (new_value - old_value) / old_value * 100.
double relative_gain_percent(double new_value, double old_value);

struct ExperimentConfig {
  std::string dataset_name = "dataset";
  std::size_t lambda = 40;
  std::size_t mu = 10;
  std::size_t generations = 100;
  bool clamp = true;
  std::uint64_t seed = 0;
  // Reference accuracies in the same units as the report; each gains a
  // relative-gain row against the selected-ensemble mean.
  std::vector<std::pair<std::string, double>> extra_baselines;
};

struct ExperimentReport {
  std::string dataset_name;
  std::vector<std::string> classifier_names;
  std::size_t lambda = 0;
  std::size_t mu = 0;
  std::size_t generations = 0;
  bool clamp = true;
  std::uint64_t seed = 0;
  std::vector<FoldResult> folds;
  StrategySummary majority_vote;
  StrategySummary selected;
  StrategySummary best_single;
  double mean_mask_size = 0.0;
  std::vector<BaselineGain> gains;
};

// Per fold: full-pool vote accuracy on test, then an optimizer run whose
// fitness is vote accuracy on validation (seed = config.seed + fold), with
// the winning mask scored once on test. Classifier name lists must agree
// across every table.
ExperimentReport run_experiment(const std::vector<FoldTables>& folds,
                                const ExperimentConfig& config);

// Loads validation and test tables for every fold in the manifest, then runs
// the in-memory experiment. Train split entries are allowed and ignored.
ExperimentReport run_experiment(const std::vector<FoldManifest>& manifest,
                                const ExperimentConfig& config);

enum class ReportFormat : std::uint8_t { json, csv, markdown };

// JSON and CSV are lossless at 6 decimal places and parse back; markdown is
// render-only.
std::string emit_report(const ExperimentReport& report, ReportFormat format);
ExperimentReport parse_report_json(const std::string& text);
ExperimentReport parse_report_csv(const std::string& text);

}  // namespace forge
