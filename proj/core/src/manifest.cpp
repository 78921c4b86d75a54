#include "forge/manifest.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace forge {

std::string to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::validation: return "validation";
    case Split::test: return "test";
  }
  throw Error("unreachable split value");
}

Split split_from_string(const std::string& text) {
  if (text == "train") return Split::train;
  if (text == "validation") return Split::validation;
  if (text == "test") return Split::test;
  throw MalformedFile("unknown split '" + text + "'");
}

std::vector<FoldManifest> parse_manifest(const std::string& text,
                                         const std::filesystem::path& base_dir) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw MalformedFile(std::string("manifest is not valid JSON: ") + e.what());
  }
  if (!doc.is_array()) throw MalformedFile("manifest must be a JSON array");

  std::vector<FoldManifest> entries;
  std::set<std::pair<int, Split>> seen;
  for (const auto& item : doc) {
    if (!item.is_object() || !item.contains("fold") || !item.contains("split") ||
        !item.contains("path")) {
      throw MalformedFile("manifest entries need fold, split, and path fields");
    }
    FoldManifest entry;
    if (!item["fold"].is_number_integer()) throw MalformedFile("manifest fold must be an integer");
    entry.fold = item["fold"].get<int>();
    if (entry.fold < 0) throw MalformedFile("manifest fold must be non-negative");
    entry.split = split_from_string(item["split"].get<std::string>());
    std::filesystem::path p = item["path"].get<std::string>();
    entry.table_path = p.is_absolute() || base_dir.empty() ? p : base_dir / p;
    if (!seen.insert({entry.fold, entry.split}).second) {
      throw MalformedFile("duplicate manifest entry for fold " + std::to_string(entry.fold) +
                          " split " + to_string(entry.split));
    }
    entries.push_back(std::move(entry));
  }
  return entries;
}

std::vector<FoldManifest> load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_manifest(buffer.str(), path.parent_path());
}

std::string format_manifest(const std::vector<FoldManifest>& entries) {
  nlohmann::ordered_json doc = nlohmann::ordered_json::array();
  for (const auto& entry : entries) {
    doc.push_back({{"fold", entry.fold},
                   {"split", to_string(entry.split)},
                   {"path", entry.table_path.generic_string()}});
  }
  return doc.dump(2) + "\n";
}

void save_manifest(const std::vector<FoldManifest>& entries, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << format_manifest(entries);
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::vector<int> fold_ids(const std::vector<FoldManifest>& entries) {
  std::set<int> ids;
  for (const auto& entry : entries) ids.insert(entry.fold);
  return {ids.begin(), ids.end()};
}

std::filesystem::path find_table(const std::vector<FoldManifest>& entries, int fold, Split split) {
  for (const auto& entry : entries) {
    if (entry.fold == fold && entry.split == split) return entry.table_path;
  }
  throw ManifestIncomplete("manifest has no " + to_string(split) + " table for fold " +
                           std::to_string(fold));
}

}  // namespace forge
