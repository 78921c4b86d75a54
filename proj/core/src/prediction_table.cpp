#include "forge/prediction_table.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <string_view>
#include <unordered_set>

namespace forge {
namespace {

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

template <typename Int>
Int parse_int(std::string_view field, std::size_t line_no) {
  Int value{};
  const char* first = field.data();
  const char* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last) {
    throw MalformedFile("line " + std::to_string(line_no) + ": expected integer, got '" +
                        std::string(field) + "'");
  }
  return value;
}

}  // namespace

void validate_table(const PredictionTable& table) {
  const std::size_t m = table.classifier_names.size();
  const std::size_t n = table.truth.size();
  if (m < 1) throw MalformedFile("table needs at least one classifier");
  if (n < 1) throw MalformedFile("table needs at least one sample");
  if (table.sample_ids.size() != n) throw MalformedFile("sample_ids/truth length mismatch");
  if (table.predictions.size() != m) throw MalformedFile("predictions row count != classifier count");
  for (const auto& row : table.predictions) {
    if (row.size() != n) throw MalformedFile("ragged prediction row");
  }
  if (table.num_classes < 1) throw MalformedFile("num_classes must be positive");

  std::unordered_set<std::string_view> seen;
  for (const auto& name : table.classifier_names) {
    if (!seen.insert(name).second) throw DuplicateClassifier("duplicate classifier name '" + name + "'");
  }

  auto check_label = [&](LabelId label) {
    if (label < 0 || label >= table.num_classes) {
      throw LabelOutOfRange("label " + std::to_string(label) + " outside [0, " +
                            std::to_string(table.num_classes) + ")");
    }
  };
  for (LabelId label : table.truth) check_label(label);
  for (const auto& row : table.predictions) {
    for (LabelId label : row) check_label(label);
  }
}

PredictionTable parse_prediction_table(const std::string& text) {
  std::vector<std::string_view> lines;
  {
    std::string_view view(text);
    std::size_t start = 0;
    while (start < view.size()) {
      std::size_t pos = view.find('\n', start);
      if (pos == std::string_view::npos) pos = view.size();
      std::string_view line = view.substr(start, pos - start);
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      lines.push_back(line);
      start = pos + 1;
    }
    while (!lines.empty() && lines.back().empty()) lines.pop_back();
  }
  if (lines.empty()) throw MalformedFile("empty file");

  const auto header = split_csv(lines[0]);
  if (header.size() < 3 || header[0] != "sample_id" || header[1] != "truth") {
    throw MalformedFile("header must be 'sample_id,truth,<name1>,...'");
  }

  PredictionTable table;
  for (std::size_t i = 2; i < header.size(); ++i) {
    if (header[i].empty()) throw MalformedFile("empty classifier name in header");
    table.classifier_names.emplace_back(header[i]);
  }
  const std::size_t m = table.classifier_names.size();

  std::size_t row_start = 1;
  int declared_classes = 0;
  if (lines.size() > 1 && !lines[1].empty() && lines[1][0] == '#') {
    constexpr std::string_view directive = "#num_classes=";
    if (lines[1].substr(0, directive.size()) != directive) {
      throw MalformedFile("unknown directive '" + std::string(lines[1]) + "'");
    }
    declared_classes = parse_int<int>(lines[1].substr(directive.size()), 2);
    if (declared_classes < 1) throw MalformedFile("#num_classes must be positive");
    row_start = 2;
  }

  table.predictions.assign(m, {});
  LabelId max_label = 0;
  for (std::size_t li = row_start; li < lines.size(); ++li) {
    const auto fields = split_csv(lines[li]);
    if (fields.size() != m + 2) {
      throw MalformedFile("line " + std::to_string(li + 1) + ": expected " +
                          std::to_string(m + 2) + " fields, got " + std::to_string(fields.size()));
    }
    table.sample_ids.push_back(parse_int<std::int64_t>(fields[0], li + 1));
    const LabelId truth = parse_int<LabelId>(fields[1], li + 1);
    table.truth.push_back(truth);
    max_label = std::max(max_label, truth);
    for (std::size_t c = 0; c < m; ++c) {
      const LabelId label = parse_int<LabelId>(fields[2 + c], li + 1);
      table.predictions[c].push_back(label);
      max_label = std::max(max_label, label);
    }
  }
  if (table.truth.empty()) throw MalformedFile("no data rows");

  table.num_classes = declared_classes > 0 ? declared_classes : max_label + 1;
  validate_table(table);
  return table;
}

std::string format_prediction_table(const PredictionTable& table) {
  validate_table(table);
  std::ostringstream out;
  out << "sample_id,truth";
  for (const auto& name : table.classifier_names) out << ',' << name;
  out << '\n';
  out << "#num_classes=" << table.num_classes << '\n';
  for (std::size_t j = 0; j < table.sample_count(); ++j) {
    out << table.sample_ids[j] << ',' << table.truth[j];
    for (std::size_t i = 0; i < table.pool_size(); ++i) out << ',' << table.predictions[i][j];
    out << '\n';
  }
  return out.str();
}

PredictionTable load_prediction_table(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_prediction_table(buffer.str());
  } catch (const LabelOutOfRange& e) {
    throw LabelOutOfRange(path.string() + ": " + e.what());
  } catch (const DuplicateClassifier& e) {
    throw DuplicateClassifier(path.string() + ": " + e.what());
  } catch (const MalformedFile& e) {
    throw MalformedFile(path.string() + ": " + e.what());
  }
}

void save_prediction_table(const PredictionTable& table, const std::filesystem::path& path) {
  const std::string text = format_prediction_table(table);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

double classifier_accuracy(const PredictionTable& table, std::size_t index) {
  if (index >= table.pool_size()) {
    throw IndexOutOfRange("classifier index " + std::to_string(index) + " >= " +
                          std::to_string(table.pool_size()));
  }
  const auto& row = table.predictions[index];
  std::size_t hits = 0;
  for (std::size_t j = 0; j < table.sample_count(); ++j) {
    if (row[j] == table.truth[j]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(table.sample_count());
}

PredictionTable merge_tables(std::span<const PredictionTable> tables) {
  if (tables.empty()) throw MalformedFile("nothing to merge");
  PredictionTable merged;
  merged.sample_ids = tables.front().sample_ids;
  merged.truth = tables.front().truth;
  merged.num_classes = 0;
  for (const auto& table : tables) {
    if (table.sample_ids != merged.sample_ids) {
      throw RowOrderMismatch("sample_id order differs between tables");
    }
    if (table.truth != merged.truth) {
      throw RowOrderMismatch("ground truth differs between tables");
    }
    merged.num_classes = std::max(merged.num_classes, table.num_classes);
    for (std::size_t i = 0; i < table.pool_size(); ++i) {
      merged.classifier_names.push_back(table.classifier_names[i]);
      merged.predictions.push_back(table.predictions[i]);
    }
  }
  validate_table(merged);
  return merged;
}

}  // namespace forge
