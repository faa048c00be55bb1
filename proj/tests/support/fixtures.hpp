#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ssrcps::test {

inline std::string data_path(const std::string& name) { return std::string(SSRCPS_TEST_DATA_DIR) + "/" + name; }

struct FixtureRow {
  std::vector<std::string> cells;
  std::vector<double> values;  // last column, ';'-separated
};

// Rows of a fixture CSV whose last column is a ';'-separated list of doubles.
inline std::vector<FixtureRow> read_fixture(const std::string& name) {
  std::ifstream in(data_path(name));
  if (!in) throw std::runtime_error("missing fixture " + name);
  std::string line;
  std::getline(in, line);
  std::vector<FixtureRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    FixtureRow row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.cells.push_back(cell);
    std::stringstream vs(row.cells.back());
    while (std::getline(vs, cell, ';')) row.values.push_back(std::stod(cell));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace ssrcps::test
