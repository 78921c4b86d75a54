#include "forge/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <nlohmann/json.hpp>

namespace forge {
namespace {

using ordered_json = nlohmann::ordered_json;

std::string fixed6(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof buffer, "%.6f", value);
  return buffer;
}

std::string fixed(double value, int places) {
  char buffer[64];
  std::snprintf(buffer, sizeof buffer, "%.*f", places, value);
  return buffer;
}

void check_same_classifiers(const PredictionTable& table,
                            const std::vector<std::string>& reference, int fold,
                            const char* split) {
  if (table.classifier_names != reference) {
    throw ClassifierSetMismatch("fold " + std::to_string(fold) + " " + split +
                                " table names a different classifier pool");
  }
}

std::string emit_csv(const ExperimentReport& report) {
  std::string out = "key,value\n";
  auto row = [&out](const std::string& key, const std::string& value) {
    out += key;
    out += ',';
    out += value;
    out += '\n';
  };
  row("dataset", report.dataset_name);
  row("classifier_count", std::to_string(report.classifier_names.size()));
  for (std::size_t i = 0; i < report.classifier_names.size(); ++i) {
    row("classifier." + std::to_string(i) + ".name", report.classifier_names[i]);
  }
  row("lambda", std::to_string(report.lambda));
  row("mu", std::to_string(report.mu));
  row("generations", std::to_string(report.generations));
  row("clamp", report.clamp ? "true" : "false");
  row("seed", std::to_string(report.seed));
  row("fold_count", std::to_string(report.folds.size()));
  for (std::size_t i = 0; i < report.folds.size(); ++i) {
    const FoldResult& fold = report.folds[i];
    const std::string prefix = "fold." + std::to_string(i) + ".";
    row(prefix + "id", std::to_string(fold.fold));
    row(prefix + "mv_test_accuracy", fixed6(fold.mv_test_accuracy));
    row(prefix + "umda_validation_fitness", fixed6(fold.umda_validation_fitness));
    row(prefix + "umda_test_accuracy", fixed6(fold.umda_test_accuracy));
    row(prefix + "best_single_test_accuracy", fixed6(fold.best_single_test_accuracy));
    row(prefix + "mask", fold.best_mask.to_string());
    row(prefix + "mask_size", std::to_string(fold.mask_size));
  }
  row("majority_vote.mean", fixed6(report.majority_vote.mean));
  row("majority_vote.stddev", fixed6(report.majority_vote.stddev));
  row("selected.mean", fixed6(report.selected.mean));
  row("selected.stddev", fixed6(report.selected.stddev));
  row("best_single.mean", fixed6(report.best_single.mean));
  row("best_single.stddev", fixed6(report.best_single.stddev));
  row("mean_mask_size", fixed6(report.mean_mask_size));
  row("gain_count", std::to_string(report.gains.size()));
  for (std::size_t i = 0; i < report.gains.size(); ++i) {
    const std::string prefix = "gain." + std::to_string(i) + ".";
    row(prefix + "name", report.gains[i].name);
    row(prefix + "baseline", fixed6(report.gains[i].baseline));
    row(prefix + "relative_gain_pct", fixed6(report.gains[i].relative_gain_pct));
  }
  return out;
}

std::string emit_markdown(const ExperimentReport& report) {
  const std::size_t pool = report.classifier_names.size();
  std::string out = "# " + report.dataset_name + "\n\n";
  out += "Folds: " + std::to_string(report.folds.size());
  out += ", pool size: " + std::to_string(pool);
  out += ", optimizer: lambda=" + std::to_string(report.lambda);
  out += " mu=" + std::to_string(report.mu);
  out += " generations=" + std::to_string(report.generations);
  out += " seed=" + std::to_string(report.seed) + "\n\n";

  out += "| strategy | test accuracy | members |\n";
  out += "|---|---|---|\n";
  out += "| majority vote (full pool) | " + fixed(report.majority_vote.mean, 4) + " ± " +
         fixed(report.majority_vote.stddev, 4) + " | [" + std::to_string(pool) + "] |\n";
  out += "| selected subset | " + fixed(report.selected.mean, 4) + " ± " +
         fixed(report.selected.stddev, 4) + " | [" + fixed(report.mean_mask_size, 1) + "] |\n";
  out += "| best single | " + fixed(report.best_single.mean, 4) + " ± " +
         fixed(report.best_single.stddev, 4) + " | [1] |\n";

  out += "\n| fold | full pool | selected | members |\n";
  out += "|---|---|---|---|\n";
  for (const FoldResult& fold : report.folds) {
    out += "| " + std::to_string(fold.fold) + " | " + fixed(fold.mv_test_accuracy, 4) + " | " +
           fixed(fold.umda_test_accuracy, 4) + " | " + std::to_string(fold.mask_size) + " |\n";
  }

  if (!report.gains.empty()) {
    out += "\n| baseline | value | relative gain |\n";
    out += "|---|---|---|\n";
    for (const BaselineGain& gain : report.gains) {
      out += "| " + gain.name + " | " + fixed(gain.baseline, 4) + " | " +
             fixed(gain.relative_gain_pct, 2) + "% |\n";
    }
  }
  return out;
}

std::string emit_json(const ExperimentReport& report) {
  ordered_json doc;
  doc["dataset"] = report.dataset_name;
  doc["classifiers"] = report.classifier_names;
  doc["optimizer"] = {{"lambda", report.lambda},
                      {"mu", report.mu},
                      {"generations", report.generations},
                      {"clamp", report.clamp},
                      {"seed", report.seed}};
  doc["folds"] = ordered_json::array();
  for (const FoldResult& fold : report.folds) {
    doc["folds"].push_back({{"fold", fold.fold},
                            {"mv_test_accuracy", fold.mv_test_accuracy},
                            {"umda_validation_fitness", fold.umda_validation_fitness},
                            {"umda_test_accuracy", fold.umda_test_accuracy},
                            {"best_single_test_accuracy", fold.best_single_test_accuracy},
                            {"mask", fold.best_mask.to_string()},
                            {"mask_size", fold.mask_size}});
  }
  doc["summary"] = {
      {"majority_vote",
       {{"mean", report.majority_vote.mean}, {"stddev", report.majority_vote.stddev}}},
      {"selected", {{"mean", report.selected.mean}, {"stddev", report.selected.stddev}}},
      {"best_single", {{"mean", report.best_single.mean}, {"stddev", report.best_single.stddev}}},
      {"mean_mask_size", report.mean_mask_size}};
  doc["gains"] = ordered_json::array();
  for (const BaselineGain& gain : report.gains) {
    doc["gains"].push_back({{"name", gain.name},
                            {"baseline", gain.baseline},
                            {"relative_gain_pct", gain.relative_gain_pct}});
  }
  return doc.dump(2) + "\n";
}

}  // namespace

StrategySummary summarize(const std::vector<double>& values) {
  if (values.empty()) throw InsufficientData("cannot summarize zero values");
  StrategySummary summary;
  for (double v : values) summary.mean += v;
  summary.mean /= static_cast<double>(values.size());
  double variance = 0.0;
  for (double v : values) variance += (v - summary.mean) * (v - summary.mean);
  summary.stddev = std::sqrt(variance / static_cast<double>(values.size()));
  return summary;
}

double relative_gain_percent(double new_value, double old_value) {
  if (old_value <= 0.0) throw InvalidConfig("baseline for a relative gain must be positive");
  return (new_value - old_value) / old_value * 100.0;
}

ExperimentReport run_experiment(const std::vector<FoldTables>& folds,
                                const ExperimentConfig& config) {
  if (folds.empty()) throw InsufficientData("experiment needs at least one fold");
  const std::vector<std::string>& names = folds.front().validation.classifier_names;

  ExperimentReport report;
  report.dataset_name = config.dataset_name;
  report.classifier_names = names;
  report.lambda = config.lambda;
  report.mu = config.mu;
  report.generations = config.generations;
  report.clamp = config.clamp;
  report.seed = config.seed;

  std::vector<double> mv_values;
  std::vector<double> selected_values;
  std::vector<double> single_values;
  double mask_size_sum = 0.0;

  for (const FoldTables& fold : folds) {
    check_same_classifiers(fold.validation, names, fold.fold, "validation");
    check_same_classifiers(fold.test, names, fold.fold, "test");

    FoldResult result;
    result.fold = fold.fold;

    const EnsembleMask full(names.size(), 1);
    result.mv_test_accuracy = ensemble_accuracy(fold.test, full);

    UmdaConfig umda;
    umda.n = names.size();
    umda.lambda = config.lambda;
    umda.mu = config.mu;
    umda.generations = static_cast<int>(config.generations);
    umda.seed = config.seed + static_cast<std::uint64_t>(fold.fold);
    umda.clamp = config.clamp;
    const RunTrace trace = run_umda(umda, ensemble_fitness(fold.validation));

    result.umda_validation_fitness = trace.best_fitness;
    result.best_mask = trace.best_mask;
    result.mask_size = trace.best_mask.popcount();
    result.umda_test_accuracy = ensemble_accuracy(fold.test, trace.best_mask);

    std::size_t best_index = 0;
    double best_validation = -1.0;
    for (std::size_t i = 0; i < names.size(); ++i) {
      const double acc = classifier_accuracy(fold.validation, i);
      if (acc > best_validation) {
        best_validation = acc;
        best_index = i;
      }
    }
    result.best_single_test_accuracy = classifier_accuracy(fold.test, best_index);

    mv_values.push_back(result.mv_test_accuracy);
    selected_values.push_back(result.umda_test_accuracy);
    single_values.push_back(result.best_single_test_accuracy);
    mask_size_sum += static_cast<double>(result.mask_size);
    report.folds.push_back(std::move(result));
  }

  report.majority_vote = summarize(mv_values);
  report.selected = summarize(selected_values);
  report.best_single = summarize(single_values);
  report.mean_mask_size = mask_size_sum / static_cast<double>(folds.size());

  for (const auto& [name, baseline] : config.extra_baselines) {
    // Compared against fraction-scale accuracies; a value above 1 is a unit mistake.
    if (baseline > 1.0)
      throw InvalidConfig("baseline '" + name + "' must be a fraction in (0, 1]");
    report.gains.push_back(
        {name, baseline, relative_gain_percent(report.selected.mean, baseline)});
  }
  return report;
}

ExperimentReport run_experiment(const std::vector<FoldManifest>& manifest,
                                const ExperimentConfig& config) {
  std::vector<FoldTables> folds;
  for (int fold : fold_ids(manifest)) {
    FoldTables tables;
    tables.fold = fold;
    tables.validation = load_prediction_table(find_table(manifest, fold, Split::validation));
    tables.test = load_prediction_table(find_table(manifest, fold, Split::test));
    folds.push_back(std::move(tables));
  }
  return run_experiment(folds, config);
}

std::string emit_report(const ExperimentReport& report, ReportFormat format) {
  switch (format) {
    case ReportFormat::json: return emit_json(report);
    case ReportFormat::csv: return emit_csv(report);
    case ReportFormat::markdown: return emit_markdown(report);
  }
  throw InvalidConfig("unknown report format");
}

ExperimentReport parse_report_json(const std::string& text) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw MalformedFile(std::string("report is not valid JSON: ") + e.what());
  }
  try {
    ExperimentReport report;
    report.dataset_name = doc.at("dataset").get<std::string>();
    report.classifier_names = doc.at("classifiers").get<std::vector<std::string>>();
    const auto& optimizer = doc.at("optimizer");
    report.lambda = optimizer.at("lambda").get<std::size_t>();
    report.mu = optimizer.at("mu").get<std::size_t>();
    report.generations = optimizer.at("generations").get<std::size_t>();
    report.clamp = optimizer.at("clamp").get<bool>();
    report.seed = optimizer.at("seed").get<std::uint64_t>();
    for (const auto& entry : doc.at("folds")) {
      FoldResult fold;
      fold.fold = entry.at("fold").get<int>();
      fold.mv_test_accuracy = entry.at("mv_test_accuracy").get<double>();
      fold.umda_validation_fitness = entry.at("umda_validation_fitness").get<double>();
      fold.umda_test_accuracy = entry.at("umda_test_accuracy").get<double>();
      fold.best_single_test_accuracy = entry.at("best_single_test_accuracy").get<double>();
      fold.best_mask = EnsembleMask::from_string(entry.at("mask").get<std::string>());
      fold.mask_size = entry.at("mask_size").get<std::size_t>();
      report.folds.push_back(std::move(fold));
    }
    const auto& summary = doc.at("summary");
    report.majority_vote.mean = summary.at("majority_vote").at("mean").get<double>();
    report.majority_vote.stddev = summary.at("majority_vote").at("stddev").get<double>();
    report.selected.mean = summary.at("selected").at("mean").get<double>();
    report.selected.stddev = summary.at("selected").at("stddev").get<double>();
    report.best_single.mean = summary.at("best_single").at("mean").get<double>();
    report.best_single.stddev = summary.at("best_single").at("stddev").get<double>();
    report.mean_mask_size = summary.at("mean_mask_size").get<double>();
    for (const auto& entry : doc.at("gains")) {
      BaselineGain gain;
      gain.name = entry.at("name").get<std::string>();
      gain.baseline = entry.at("baseline").get<double>();
      gain.relative_gain_pct = entry.at("relative_gain_pct").get<double>();
      report.gains.push_back(std::move(gain));
    }
    return report;
  } catch (const nlohmann::json::exception& e) {
    throw MalformedFile(std::string("report JSON misses required fields: ") + e.what());
  }
}

ExperimentReport parse_report_csv(const std::string& text) {
  std::map<std::string, std::string> rows;
  std::size_t pos = 0;
  bool first = true;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(pos, end - pos);
    pos = end + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (first) {
      first = false;
      if (line != "key,value") throw MalformedFile("report CSV must start with key,value");
      continue;
    }
    const std::size_t comma = line.find(',');
    if (comma == std::string::npos) throw MalformedFile("report CSV row without a comma: " + line);
    rows[line.substr(0, comma)] = line.substr(comma + 1);
  }

  auto get = [&rows](const std::string& key) -> const std::string& {
    auto it = rows.find(key);
    if (it == rows.end()) throw MalformedFile("report CSV misses key: " + key);
    return it->second;
  };
  auto get_double = [&get](const std::string& key) { return std::stod(get(key)); };
  auto get_size = [&get](const std::string& key) {
    return static_cast<std::size_t>(std::stoull(get(key)));
  };

  try {
    ExperimentReport report;
    report.dataset_name = get("dataset");
    const std::size_t classifier_count = get_size("classifier_count");
    for (std::size_t i = 0; i < classifier_count; ++i) {
      report.classifier_names.push_back(get("classifier." + std::to_string(i) + ".name"));
    }
    report.lambda = get_size("lambda");
    report.mu = get_size("mu");
    report.generations = get_size("generations");
    report.clamp = get("clamp") == "true";
    report.seed = std::stoull(get("seed"));
    const std::size_t fold_count = get_size("fold_count");
    for (std::size_t i = 0; i < fold_count; ++i) {
      const std::string prefix = "fold." + std::to_string(i) + ".";
      FoldResult fold;
      fold.fold = static_cast<int>(std::stol(get(prefix + "id")));
      fold.mv_test_accuracy = get_double(prefix + "mv_test_accuracy");
      fold.umda_validation_fitness = get_double(prefix + "umda_validation_fitness");
      fold.umda_test_accuracy = get_double(prefix + "umda_test_accuracy");
      fold.best_single_test_accuracy = get_double(prefix + "best_single_test_accuracy");
      fold.best_mask = EnsembleMask::from_string(get(prefix + "mask"));
      fold.mask_size = get_size(prefix + "mask_size");
      report.folds.push_back(std::move(fold));
    }
    report.majority_vote.mean = get_double("majority_vote.mean");
    report.majority_vote.stddev = get_double("majority_vote.stddev");
    report.selected.mean = get_double("selected.mean");
    report.selected.stddev = get_double("selected.stddev");
    report.best_single.mean = get_double("best_single.mean");
    report.best_single.stddev = get_double("best_single.stddev");
    report.mean_mask_size = get_double("mean_mask_size");
    const std::size_t gain_count = get_size("gain_count");
    for (std::size_t i = 0; i < gain_count; ++i) {
      const std::string prefix = "gain." + std::to_string(i) + ".";
      BaselineGain gain;
      gain.name = get(prefix + "name");
      gain.baseline = get_double(prefix + "baseline");
      gain.relative_gain_pct = get_double(prefix + "relative_gain_pct");
      report.gains.push_back(std::move(gain));
    }
    return report;
  } catch (const std::invalid_argument&) {
    throw MalformedFile("report CSV holds a non-numeric value where a number is required");
  } catch (const std::out_of_range&) {
    throw MalformedFile("report CSV holds an out-of-range numeric value");
  }
}

}  // namespace forge
