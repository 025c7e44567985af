#include "slos/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace slos {

void validate(const FunctionalDataset& data) {
  if (data.n() < 2)
    throw std::invalid_argument("FunctionalDataset: need at least 2 samples");
  if (data.curves.rows() != data.responses.size())
    throw std::invalid_argument("FunctionalDataset: responses/curves row mismatch");
  if (data.curves.cols() != data.grid.size())
    throw std::invalid_argument("FunctionalDataset: grid/curves column mismatch");
  if (!(data.t_end > data.t_start))
    throw std::invalid_argument("FunctionalDataset: empty domain");
  for (int k = 0; k < data.k(); ++k) {
    if (k > 0 && !(data.grid[k] > data.grid[k - 1]))
      throw std::invalid_argument("FunctionalDataset: grid must be strictly increasing");
    if (data.grid[k] < data.t_start - 1e-12 || data.grid[k] > data.t_end + 1e-12)
      throw std::invalid_argument("FunctionalDataset: grid point outside domain");
  }
  if (!data.curves.allFinite() || !data.responses.allFinite())
    throw std::invalid_argument("FunctionalDataset: non-finite values");
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) {
    // Trim surrounding whitespace and quotes.
    const auto b = field.find_first_not_of(" \t\r\"");
    const auto e = field.find_last_not_of(" \t\r\"");
    out.push_back(b == std::string::npos ? "" : field.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

bool parse_double(const std::string& s, double* out) {
  if (s.empty()) return false;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') return false;
  *out = v;
  return true;
}

}  // namespace

FunctionalDataset load_csv(const std::string& path, const CsvLayout& layout) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("load_csv: " + path + " is empty");
  const std::vector<std::string> header = split_csv_line(line);

  // Classify columns: named response (+ optional id), numeric headers = grid.
  int response_col = -1, id_col = -1;
  std::vector<int> grid_cols;
  std::vector<double> grid_vals;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == layout.response_column) {
      response_col = static_cast<int>(c);
      continue;
    }
    if (layout.id_column && header[c] == *layout.id_column) {
      id_col = static_cast<int>(c);
      continue;
    }
    double t = 0.0;
    if (!parse_double(header[c], &t))
      throw std::runtime_error("load_csv: non-numeric grid header '" + header[c] +
                               "' in column " + std::to_string(c + 1));
    grid_cols.push_back(static_cast<int>(c));
    grid_vals.push_back(t);
  }
  if (response_col < 0)
    throw std::runtime_error("load_csv: response column '" + layout.response_column +
                             "' not found");
  if (grid_vals.size() < 2)
    throw std::runtime_error("load_csv: fewer than 2 grid columns");
  if (!std::is_sorted(grid_vals.begin(), grid_vals.end()))
    throw std::runtime_error("load_csv: grid header not sorted ascending");

  std::vector<std::vector<double>> rows;
  std::vector<double> ys;
  std::vector<std::string> labels;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r,") == std::string::npos) continue;
    const std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() < header.size())
      throw std::runtime_error("load_csv: row " + std::to_string(line_no) +
                               " has " + std::to_string(fields.size()) +
                               " fields, expected " + std::to_string(header.size()));
    std::vector<double> row(grid_cols.size());
    for (std::size_t j = 0; j < grid_cols.size(); ++j) {
      if (!parse_double(fields[grid_cols[j]], &row[j]))
        throw std::runtime_error("load_csv: missing or non-numeric value at row " +
                                 std::to_string(line_no) + ", column " +
                                 std::to_string(grid_cols[j] + 1));
    }
    double y = 0.0;
    if (!parse_double(fields[response_col], &y))
      throw std::runtime_error("load_csv: missing or non-numeric response at row " +
                               std::to_string(line_no));
    rows.push_back(std::move(row));
    ys.push_back(y);
    labels.push_back(id_col >= 0 ? fields[id_col] : "");
  }
  if (rows.size() < 2)
    throw std::runtime_error("load_csv: " + path + " has fewer than 2 data rows");

  FunctionalDataset data;
  const int n = static_cast<int>(rows.size());
  const int K = static_cast<int>(grid_vals.size());
  data.grid = Eigen::Map<const Vector>(grid_vals.data(), K);
  data.curves.resize(n, K);
  for (int i = 0; i < n; ++i)
    data.curves.row(i) = Eigen::Map<const Vector>(rows[i].data(), K).transpose();
  data.responses = Eigen::Map<const Vector>(ys.data(), n);
  data.t_start = layout.domain_start.value_or(grid_vals.front());
  data.t_end = layout.domain_end.value_or(grid_vals.back());
  if (id_col >= 0) data.labels = std::move(labels);
  validate(data);
  return data;
}

std::string format_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace slos
