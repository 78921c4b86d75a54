#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "forge/errors.hpp"

namespace forge {

enum class Split { train, validation, test };

std::string to_string(Split split);
Split split_from_string(const std::string& text);

// One entry of a fold manifest: which table file backs a (fold, split) pair.
struct FoldManifest {
  int fold = 0;
  Split split = Split::train;
  std::filesystem::path table_path;

  bool operator==(const FoldManifest&) const = default;
};

// Manifest wire format: JSON array of {"fold": int, "split": "train"|"validation"|"test",
// "path": string}. Relative paths resolve against the manifest's directory.
std::vector<FoldManifest> parse_manifest(const std::string& text,
                                         const std::filesystem::path& base_dir = {});
std::vector<FoldManifest> load_manifest(const std::filesystem::path& path);
std::string format_manifest(const std::vector<FoldManifest>& entries);
void save_manifest(const std::vector<FoldManifest>& entries, const std::filesystem::path& path);

// Sorted list of the fold ids present in the manifest.
std::vector<int> fold_ids(const std::vector<FoldManifest>& entries);

// Path of the table for (fold, split); throws ManifestIncomplete when absent.
std::filesystem::path find_table(const std::vector<FoldManifest>& entries, int fold, Split split);

}  // namespace forge
