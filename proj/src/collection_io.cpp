#include "corrsync/collection_io.hpp"

#include "corrsync/error.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

namespace corrsync {

namespace fs = std::filesystem;
using nlohmann::json;

// =============================================================================
// Text helpers
// =============================================================================

std::string format_double(double value) {
  char buffer[64];
  const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, result.ptr);
}

double parse_double(std::string_view text) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) {
    text.remove_suffix(1);
  }
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  const auto result = std::from_chars(text.data(), text.data() + text.size(), value);
  if (result.ec != std::errc() || result.ptr != text.data() + text.size()) {
    throw Error(ErrorCode::ParseError, fmt::format("not a number: '{}'", text));
  }
  return value;
}

namespace {

std::size_t parse_index(std::string_view text) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) {
    text.remove_suffix(1);
  }
  std::size_t value = 0;
  const auto result = std::from_chars(text.data(), text.data() + text.size(), value);
  if (result.ec != std::errc() || result.ptr != text.data() + text.size()) {
    throw Error(ErrorCode::ParseError, fmt::format("not an index: '{}'", text));
  }
  return value;
}

std::vector<std::string_view> split(std::string_view line, char delimiter) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(delimiter, start);
    parts.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

std::vector<std::string_view> split_whitespace(std::string_view line) {
  std::vector<std::string_view> parts;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) parts.push_back(line.substr(start, i - start));
  }
  return parts;
}

// Non-empty lines that are not comments.
std::vector<std::string> content_lines(const fs::path& path) {
  std::istringstream in(read_file(path));
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    if (line.front() == '#') continue;
    lines.push_back(line);
  }
  return lines;
}

[[noreturn]] void rethrow_with_location(const fs::path& path, std::size_t line, const Error& e) {
  throw Error(e.code(), fmt::format("{}:{}: {}", path.string(), line, e.what()));
}

}  // namespace

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFile, fmt::format("cannot open '{}'", path.string()));
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file_atomic(const fs::path& path, std::string_view contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path temp = path;
  temp += ".tmp";
  {
    std::ofstream out(temp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::MissingFile, fmt::format("cannot write '{}'", temp.string()));
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error(ErrorCode::MissingFile, fmt::format("short write to '{}'", temp.string()));
  }
  fs::rename(temp, path);
}

// =============================================================================
// Readers
// =============================================================================

std::vector<Point3> read_points(const fs::path& path) {
  std::vector<Point3> points;
  const auto lines = content_lines(path);
  for (std::size_t k = 0; k < lines.size(); ++k) {
    try {
      const auto fields = split_whitespace(lines[k]);
      if (fields.size() != 3) {
        throw Error(ErrorCode::ParseError, fmt::format("expected 3 coordinates, got {}", fields.size()));
      }
      points.emplace_back(parse_double(fields[0]), parse_double(fields[1]), parse_double(fields[2]));
    } catch (const Error& e) {
      rethrow_with_location(path, k + 1, e);
    }
  }
  return points;
}

namespace {

std::vector<double> read_scalars(const fs::path& path) {
  std::vector<double> values;
  const auto lines = content_lines(path);
  for (std::size_t k = 0; k < lines.size(); ++k) {
    try {
      for (auto field : split_whitespace(lines[k])) values.push_back(parse_double(field));
    } catch (const Error& e) {
      rethrow_with_location(path, k + 1, e);
    }
  }
  return values;
}

std::vector<std::array<std::size_t, 3>> read_faces(const fs::path& path) {
  std::vector<std::array<std::size_t, 3>> faces;
  const auto lines = content_lines(path);
  for (std::size_t k = 0; k < lines.size(); ++k) {
    try {
      const auto fields = split_whitespace(lines[k]);
      if (fields.size() != 3) throw Error(ErrorCode::ParseError, "expected 3 vertex indices");
      faces.push_back({parse_index(fields[0]), parse_index(fields[1]), parse_index(fields[2])});
    } catch (const Error& e) {
      rethrow_with_location(path, k + 1, e);
    }
  }
  return faces;
}

}  // namespace

Eigen::MatrixXd read_distance_csv(const fs::path& path) {
  const auto lines = content_lines(path);
  const auto n = static_cast<Eigen::Index>(lines.size());
  Eigen::MatrixXd d(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    try {
      const auto fields = split(lines[static_cast<std::size_t>(r)], ',');
      if (static_cast<Eigen::Index>(fields.size()) != n) {
        throw Error(ErrorCode::InvalidMetric,
                    fmt::format("row has {} entries, expected {}", fields.size(), n));
      }
      for (Eigen::Index c = 0; c < n; ++c) d(r, c) = parse_double(fields[static_cast<std::size_t>(c)]);
    } catch (const Error& e) {
      rethrow_with_location(path, static_cast<std::size_t>(r) + 1, e);
    }
  }
  return d;
}

CorrespondenceMap read_map_csv(const fs::path& path, std::string source_id, std::string target_id,
                               std::size_t source_size, std::size_t target_size) {
  const auto lines = content_lines(path);
  CorrespondenceMap map;
  map.source_id = std::move(source_id);
  map.target_id = std::move(target_id);
  map.target_size = target_size;
  if (lines.empty()) throw Error(ErrorCode::ParseError, fmt::format("{}: empty map file", path.string()));
  const std::size_t columns = split(lines.front(), ',').size();
  if (columns != 2 && columns != 3) {
    throw Error(ErrorCode::ParseError,
                fmt::format("{}: expected 2 (discrete) or 3 (soft) columns", path.string()));
  }
  map.kind = columns == 2 ? MapKind::Discrete : MapKind::Soft;
  std::vector<bool> seen(source_size, false);
  std::vector<std::map<std::size_t, double>> soft_rows(columns == 3 ? source_size : 0);
  if (map.kind == MapKind::Discrete) map.discrete.assign(source_size, 0);

  for (std::size_t k = 0; k < lines.size(); ++k) {
    try {
      const auto fields = split(lines[k], ',');
      if (fields.size() != columns) throw Error(ErrorCode::ParseError, "inconsistent column count");
      const std::size_t s = parse_index(fields[0]);
      const std::size_t t = parse_index(fields[1]);
      if (s >= source_size || t >= target_size) {
        throw Error(ErrorCode::IndexOutOfRange,
                    fmt::format("pair ({},{}) outside {}x{}", s, t, source_size, target_size));
      }
      if (map.kind == MapKind::Discrete) {
        if (seen[s]) throw Error(ErrorCode::ParseError, fmt::format("source {} listed twice", s));
        map.discrete[s] = t;
      } else {
        if (soft_rows[s].contains(t)) {
          throw Error(ErrorCode::ParseError, fmt::format("entry ({},{}) listed twice", s, t));
        }
        soft_rows[s][t] = parse_double(fields[2]);
      }
      seen[s] = true;
    } catch (const Error& e) {
      rethrow_with_location(path, k + 1, e);
    }
  }
  for (std::size_t s = 0; s < source_size; ++s) {
    if (!seen[s]) {
      throw Error(ErrorCode::IndexOutOfRange,
                  fmt::format("{}: source vertex {} has no image", path.string(), s));
    }
  }
  if (map.kind == MapKind::Soft) {
    map.soft.resize(source_size);
    for (std::size_t s = 0; s < source_size; ++s) map.soft[s].assign(soft_rows[s].begin(), soft_rows[s].end());
  }
  try {
    map.validate();
  } catch (const Error& e) {
    throw Error(e.code(), fmt::format("{}: {}", path.string(), e.what()));
  }
  return map;
}

std::string map_to_csv(const CorrespondenceMap& map) {
  std::string out;
  if (map.kind == MapKind::Discrete) {
    for (std::size_t s = 0; s < map.discrete.size(); ++s) out += fmt::format("{},{}\n", s, map.discrete[s]);
    return out;
  }
  for (std::size_t s = 0; s < map.soft.size(); ++s) {
    for (const auto& [t, mass] : map.soft[s]) out += fmt::format("{},{},{}\n", s, t, format_double(mass));
  }
  return out;
}

// =============================================================================
// Manifest
// =============================================================================

ShapeCollection load_collection(const fs::path& manifest_path, CollectionOptions options) {
  json manifest;
  try {
    manifest = json::parse(read_file(manifest_path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, fmt::format("{}: {}", manifest_path.string(), e.what()));
  }
  const fs::path base = manifest_path.parent_path();
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };

  std::vector<Shape> shapes;
  try {
    for (const auto& entry : manifest.at("shapes")) {
      Shape shape;
      shape.id = entry.at("id").get<std::string>();
      shape.points = read_points(resolve(entry.at("points_file").get<std::string>()));
      if (entry.contains("landmarks")) shape.landmarks = entry["landmarks"].get<std::vector<std::size_t>>();
      if (entry.contains("ground_truth")) {
        shape.ground_truth = entry["ground_truth"].get<std::map<std::string, std::size_t>>();
      }
      if (entry.contains("scalar_field_file")) {
        shape.scalar_field = read_scalars(resolve(entry["scalar_field_file"].get<std::string>()));
      }
      if (entry.contains("faces_file")) shape.faces = read_faces(resolve(entry["faces_file"].get<std::string>()));
      shapes.push_back(std::move(shape));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, fmt::format("{}: {}", manifest_path.string(), e.what()));
  }

  Eigen::MatrixXd distances;
  double beta = 1.0;
  fs::path maps_dir;
  try {
    distances = read_distance_csv(resolve(manifest.at("distances_file").get<std::string>()));
    if (manifest.contains("beta")) beta = manifest["beta"].get<double>();
    if (manifest.value("allow_duplicates", false)) options.allow_duplicates = true;
    maps_dir = resolve(manifest.at("maps_dir").get<std::string>());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, fmt::format("{}: {}", manifest_path.string(), e.what()));
  }

  ShapeCollection collection(std::move(shapes), std::move(distances), beta, options);

  if (!fs::is_directory(maps_dir)) {
    throw Error(ErrorCode::MissingFile, fmt::format("maps directory '{}' not found", maps_dir.string()));
  }
  std::vector<fs::path> files;
  for (const auto& item : fs::directory_iterator(maps_dir)) {
    if (item.is_regular_file() && item.path().extension() == ".csv") files.push_back(item.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& file : files) {
    const std::string stem = file.stem().string();
    const auto sep = stem.find("__");
    if (sep == std::string::npos) {
      throw Error(ErrorCode::ParseError,
                  fmt::format("map file '{}' is not named <target>__<source>.csv", file.string()));
    }
    const std::string target_id = stem.substr(0, sep);
    const std::string source_id = stem.substr(sep + 2);
    const std::size_t s = collection.index_of(source_id);
    const std::size_t t = collection.index_of(target_id);
    collection.set_map(read_map_csv(file, source_id, target_id, collection.shape(s).size(),
                                    collection.shape(t).size()));
  }
  return collection;
}

fs::path save_collection(const ShapeCollection& collection, const fs::path& directory) {
  fs::create_directories(directory / "points");
  fs::create_directories(directory / "maps");
  json manifest;
  manifest["shapes"] = json::array();
  for (const auto& shape : collection.shapes()) {
    if (shape.id.find("__") != std::string::npos || shape.id.find('/') != std::string::npos) {
      throw Error(ErrorCode::InvalidArgument,
                  fmt::format("shape id '{}' cannot be used in map file names", shape.id));
    }
    std::string points;
    for (const auto& p : shape.points) {
      points += fmt::format("{} {} {}\n", format_double(p.x()), format_double(p.y()), format_double(p.z()));
    }
    const std::string points_file = fmt::format("points/{}.xyz", shape.id);
    write_file_atomic(directory / points_file, points);
    json entry;
    entry["id"] = shape.id;
    entry["points_file"] = points_file;
    entry["landmarks"] = shape.landmarks;
    entry["ground_truth"] = shape.ground_truth;
    if (shape.scalar_field) {
      std::string field;
      for (double v : *shape.scalar_field) field += format_double(v) + "\n";
      const std::string field_file = fmt::format("points/{}.field", shape.id);
      write_file_atomic(directory / field_file, field);
      entry["scalar_field_file"] = field_file;
    }
    if (!shape.faces.empty()) {
      std::string faces;
      for (const auto& f : shape.faces) faces += fmt::format("{} {} {}\n", f[0], f[1], f[2]);
      const std::string faces_file = fmt::format("points/{}.faces", shape.id);
      write_file_atomic(directory / faces_file, faces);
      entry["faces_file"] = faces_file;
    }
    manifest["shapes"].push_back(entry);
  }

  std::string distances;
  const auto& d = collection.distances();
  for (Eigen::Index r = 0; r < d.rows(); ++r) {
    for (Eigen::Index c = 0; c < d.cols(); ++c) {
      distances += format_double(d(r, c));
      distances += c + 1 == d.cols() ? '\n' : ',';
    }
  }
  write_file_atomic(directory / "distances.csv", distances);

  for (const auto& [key, map] : collection.maps()) {
    write_file_atomic(directory / "maps" / fmt::format("{}__{}.csv", map.target_id, map.source_id),
                      map_to_csv(map));
  }

  manifest["distances_file"] = "distances.csv";
  manifest["maps_dir"] = "maps";
  manifest["beta"] = collection.beta();
  if (collection.options().allow_duplicates) manifest["allow_duplicates"] = true;
  const fs::path manifest_path = directory / "manifest.json";
  write_file_atomic(manifest_path, manifest.dump(2) + "\n");
  return manifest_path;
}

}  // namespace corrsync
