#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rls/errors.hpp"

namespace rls::cli {

// Columnar table. Complex quantities are stored as paired re_/im_ columns;
// the first line is a '#' comment naming units and conventions.
struct Table {
  std::string comment;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  void add(std::vector<double> row) {
    if (row.size() != columns.size()) throw Error("table row width does not match the header");
    rows.push_back(std::move(row));
  }
  size_t column(const std::string& name) const {
    for (size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == name) return i;
    throw Error("no column '" + name + "'");
  }
};

// %.17g round-trips every finite double exactly.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_table(const std::filesystem::path& path, const Table& t) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "# " << t.comment << "\n";
  for (size_t i = 0; i < t.columns.size(); ++i) out << (i ? "," : "") << t.columns[i];
  out << "\n";
  for (const auto& r : t.rows) {
    for (size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << format_double(r[i]);
    out << "\n";
  }
}

inline Table read_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  Table t;
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      t.comment = line.size() > 2 ? line.substr(2) : "";
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!header) {
      t.columns = cells;
      header = true;
      continue;
    }
    std::vector<double> row;
    for (const auto& c : cells) row.push_back(std::strtod(c.c_str(), nullptr));
    t.add(std::move(row));
  }
  return t;
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

inline nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  return nlohmann::json::parse(in);
}

// A run directory: summary.json (deterministic), metadata.json (timestamps,
// versions) and the CSV tables listed in the summary under "tables".
struct Bundle {
  nlohmann::json summary;
  std::vector<std::pair<std::string, Table>> tables;
};

inline Bundle read_bundle(const std::filesystem::path& dir) {
  Bundle b;
  b.summary = read_json(dir / "summary.json");
  for (const auto& name : b.summary.value("tables", std::vector<std::string>{}))
    b.tables.emplace_back(name, read_table(dir / name));
  return b;
}

}  // namespace rls::cli
