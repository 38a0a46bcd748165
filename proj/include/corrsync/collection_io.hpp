#pragma once

// On-disk layout: a JSON manifest next to plain-text points, a CSV distance
// matrix and one CSV per stored map, named `<target>__<source>.csv`.
// Numbers are written in shortest round-trip form, so save/load is bit exact.

#include "corrsync/collection.hpp"

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace corrsync {

ShapeCollection load_collection(const std::filesystem::path& manifest_path,
                                CollectionOptions options = {});

// Writes manifest.json, points/, distances.csv and maps/ under `directory`.
// Returns the manifest path.
std::filesystem::path save_collection(const ShapeCollection& collection,
                                      const std::filesystem::path& directory);

std::vector<Point3> read_points(const std::filesystem::path& path);
Eigen::MatrixXd read_distance_csv(const std::filesystem::path& path);
CorrespondenceMap read_map_csv(const std::filesystem::path& path, std::string source_id,
                               std::string target_id, std::size_t source_size,
                               std::size_t target_size);
std::string map_to_csv(const CorrespondenceMap& map);

// Shortest decimal text that parses back to the same double.
std::string format_double(double value);
double parse_double(std::string_view text);

// Write to a sibling temporary file, then rename over the destination.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);
std::string read_file(const std::filesystem::path& path);

}  // namespace corrsync
