#pragma once

// On-disk formats for the synergy pipeline. Layouts are described in
// docs/formats.md.

#include <nlohmann/json.hpp>

#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "dynsyn/checksum.hpp"
#include "dynsyn/errors.hpp"
#include "dynsyn/synergy.hpp"

namespace dynsyn::synergy {

inline constexpr char kTrajectoryMagic[16] = "DYNSYNTRAJ1";
inline constexpr std::size_t kTrajectoryHeaderBytes = 64;

// Header: 16-byte magic, u64 N_s, u64 N_m, f64 dt, zero padding to 64
// bytes; little-endian. Data follows column-major (all of muscle 0, then
// muscle 1, ...). A sidecar "<path>.json" holds model name, shape, dt and
// the FNV-1a checksum of the binary file.
inline void save_trajectory(const TrajectoryBuffer& buffer, const std::string& path,
                            const nlohmann::json& extra_meta = nlohmann::json::object()) {
  std::string bytes(kTrajectoryHeaderBytes, '\0');
  std::memcpy(bytes.data(), kTrajectoryMagic, sizeof kTrajectoryMagic);
  const auto rows = static_cast<std::uint64_t>(buffer.steps());
  const auto cols = static_cast<std::uint64_t>(buffer.muscles());
  std::memcpy(bytes.data() + 16, &rows, 8);
  std::memcpy(bytes.data() + 24, &cols, 8);
  std::memcpy(bytes.data() + 32, &buffer.dt, 8);
  const std::size_t payload = static_cast<std::size_t>(buffer.lengths.size()) * sizeof(double);
  bytes.resize(kTrajectoryHeaderBytes + payload);
  // Eigen default storage is column-major already.
  std::memcpy(bytes.data() + kTrajectoryHeaderBytes, buffer.lengths.data(), payload);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write '" + path + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("short write to '" + path + "'");

  nlohmann::json meta = extra_meta;
  meta["format"] = "dynsyn-trajectory/1";
  meta["model"] = buffer.model;
  meta["steps"] = rows;
  meta["muscles"] = cols;
  meta["dt"] = buffer.dt;
  meta["checksum"] = hex64(fnv1a64(bytes));
  std::ofstream side(path + ".json");
  if (!side) throw FormatError("cannot write '" + path + ".json'");
  side << meta.dump(2) << '\n';
}

// Reads the binary file; the sidecar, if present, supplies the model name
// and its checksum is verified.
inline TrajectoryBuffer load_trajectory(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LookupError("cannot open '" + path + "'");
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < kTrajectoryHeaderBytes || std::memcmp(bytes.data(), kTrajectoryMagic, sizeof kTrajectoryMagic) != 0)
    throw FormatError("'" + path + "' is not a trajectory file");
  std::uint64_t rows = 0, cols = 0;
  TrajectoryBuffer buffer;
  std::memcpy(&rows, bytes.data() + 16, 8);
  std::memcpy(&cols, bytes.data() + 24, 8);
  std::memcpy(&buffer.dt, bytes.data() + 32, 8);
  if (cols != 0 && rows > (std::numeric_limits<std::uint64_t>::max() / 8) / cols)
    throw FormatError("'" + path + "': implausible shape");
  const std::size_t payload = static_cast<std::size_t>(rows * cols * sizeof(double));
  if (bytes.size() != kTrajectoryHeaderBytes + payload)
    throw FormatError("'" + path + "': size does not match header shape " + std::to_string(rows) + "x" +
                      std::to_string(cols));
  buffer.lengths.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  std::memcpy(buffer.lengths.data(), bytes.data() + kTrajectoryHeaderBytes, payload);

  std::ifstream side(path + ".json");
  if (side) {
    nlohmann::json meta;
    try {
      side >> meta;
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("'" + path + ".json': " + e.what());
    }
    if (meta.contains("checksum") && meta["checksum"] != hex64(fnv1a64(bytes)))
      throw FormatError("'" + path + "': checksum mismatch with sidecar");
    buffer.model = meta.value("model", "");
  }
  return buffer;
}

inline std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

// Row-major CSV with a header row of names.
inline void write_matrix_csv(const MatrixXd& m, const std::vector<std::string>& names, const std::string& path) {
  if (names.size() != static_cast<std::size_t>(m.cols()))
    throw ParameterError("write_matrix_csv: name count does not match matrix width");
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write '" + path + "'");
  for (std::size_t j = 0; j < names.size(); ++j) out << (j ? "," : "") << names[j];
  out << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << format_double(m(i, j));
    out << '\n';
  }
}

inline MatrixXd read_matrix_csv(const std::string& path, std::vector<std::string>* names = nullptr) {
  std::ifstream in(path);
  if (!in) throw LookupError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw FormatError("'" + path + "' is empty");
  std::vector<std::string> header;
  {
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) header.push_back(cell);
  }
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw FormatError("'" + path + "': bad number '" + cell + "'");
      }
    }
    if (row.size() != header.size()) throw FormatError("'" + path + "': ragged row");
    rows.push_back(std::move(row));
  }
  MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(header.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < header.size(); ++j) m(i, j) = rows[i][j];
  if (names) *names = std::move(header);
  return m;
}

inline nlohmann::json selection_table_json(const std::vector<SelectionRow>& table) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : table)
    out.push_back({{"n_groups", r.n_groups}, {"d_max", r.d_max}, {"d_min", r.d_min}, {"gap", r.gap()}, {"cost", r.cost}});
  return out;
}

inline nlohmann::json grouping_to_json(const GroupingResult& g, const std::string& model,
                                       const std::vector<std::string>& muscle_names,
                                       const std::vector<SelectionRow>& table = {}) {
  nlohmann::json out;
  out["format"] = "dynsyn-grouping/1";
  out["model"] = model;
  out["seed"] = g.seed;
  out["n_groups"] = g.n_groups();
  out["groups"] = g.groups;
  out["medoids"] = g.medoids;
  out["cost"] = g.cost;
  out["muscles"] = muscle_names;
  out["selection_table"] = selection_table_json(table);
  return out;
}

inline GroupingResult grouping_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != "dynsyn-grouping/1") throw FormatError("unsupported grouping format");
    GroupingResult g;
    g.groups = j.at("groups").get<std::vector<std::vector<int>>>();
    g.medoids = j.at("medoids").get<std::vector<int>>();
    g.seed = j.at("seed").get<std::uint64_t>();
    g.cost = j.value("cost", 0.0);
    if (j.at("n_groups").get<std::size_t>() != g.groups.size() || g.medoids.size() != g.groups.size())
      throw FormatError("grouping: n_groups, groups and medoids disagree");
    const std::size_t n = g.n_items();
    std::vector<int> seen(n, 0);
    for (std::size_t k = 0; k < g.groups.size(); ++k) {
      if (g.groups[k].empty()) throw FormatError("grouping: empty group");
      bool has_medoid = false;
      for (int i : g.groups[k]) {
        if (i < 0 || static_cast<std::size_t>(i) >= n || seen[static_cast<std::size_t>(i)]++)
          throw FormatError("grouping: groups are not a partition of 0.." + std::to_string(n - 1));
        has_medoid |= i == g.medoids[k];
      }
      if (!has_medoid) throw FormatError("grouping: medoid outside its group");
    }
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("grouping: ") + e.what());
  }
}

inline void save_grouping(const nlohmann::json& doc, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write '" + path + "'");
  out << doc.dump(2) << '\n';
}

inline GroupingResult load_grouping(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LookupError("cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("'" + path + "': " + e.what());
  }
  return grouping_from_json(j);
}

inline void write_selection_csv(const std::vector<SelectionRow>& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write '" + path + "'");
  out << "n_groups,d_max,d_min,gap,cost\n";
  for (const auto& r : table)
    out << r.n_groups << ',' << format_double(r.d_max) << ',' << format_double(r.d_min) << ','
        << format_double(r.gap()) << ',' << format_double(r.cost) << '\n';
}

inline void write_convergence_csv(const ConvergenceStudy& study, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write '" + path + "'");
  out << "sample_size,distance\n";
  for (const auto& r : study.rows) out << r.sample_size << ',' << format_double(r.distance) << '\n';
}

inline std::vector<std::string> muscle_names(const plant::Model& model) {
  std::vector<std::string> out;
  for (const auto& m : model.routing.muscles) out.push_back(m.name);
  return out;
}

}  // namespace dynsyn::synergy
