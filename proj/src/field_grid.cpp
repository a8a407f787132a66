#include "spreader/field_grid.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "spreader/errors.hpp"

namespace spreader {

FieldGrid::FieldGrid(double side_length, int n_cells, Point origin)
    : side_length_(side_length), n_cells_(n_cells), origin_(origin) {
  if (n_cells < 1) {
    throw ConfigError("field grid: n_cells must be >= 1");
  }
  if (!(side_length > 0.0) || !std::isfinite(side_length)) {
    throw ConfigError("field grid: side_length must be positive");
  }
  if (!std::isfinite(origin.x) || !std::isfinite(origin.y)) {
    throw ConfigError("field grid: origin must be finite");
  }
}

std::vector<Point> FieldGrid::cell_centers() const {
  std::vector<Point> centers;
  centers.reserve(size());
  for (int row = 0; row < n_cells_; ++row) {
    for (int col = 0; col < n_cells_; ++col) {
      centers.push_back(center(row, col));
    }
  }
  return centers;
}

template <class Tag>
void CellMap<Tag>::check() const {
  if (values_.rows() != values_.cols()) {
    throw ShapeError("cell map must be square, got " + std::to_string(values_.rows()) + "x" +
                     std::to_string(values_.cols()));
  }
  for (Eigen::Index i = 0; i < values_.size(); ++i) {
    const double v = values_.data()[i];
    if (!std::isfinite(v) || v < 0.0) {
      throw ConfigError("cell map entries must be finite and non-negative (entry " +
                        std::to_string(i) + " = " + std::to_string(v) + ")");
    }
  }
}

template class CellMap<AppliedTag>;
template class CellMap<PrescribedTag>;

double cost(const AmountMap& applied, const PrescriptionMap& prescribed) {
  if (applied.n() != prescribed.n()) {
    throw ShapeError("cost: applied is " + std::to_string(applied.n()) + "x" +
                     std::to_string(applied.n()) + ", prescription is " +
                     std::to_string(prescribed.n()) + "x" + std::to_string(prescribed.n()));
  }
  return (prescribed.values() - applied.values()).squaredNorm();
}

AmountMap accumulate(const AmountMap& applied, const AmountMap& deposit) {
  if (applied.n() != deposit.n()) {
    throw ShapeError("accumulate: dimension mismatch");
  }
  AmountMap out = applied;
  out.mutable_values() += deposit.values();
  return out;
}

std::string format_double(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

void write_csv(std::ostream& out, const CellMatrix& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c > 0) out << ',';
      out << format_double(m(r, c));
    }
    out << '\n';
  }
}

void write_csv(const std::filesystem::path& path, const CellMatrix& m) {
  std::ofstream out(path);
  if (!out) {
    throw ConfigError("cannot write " + path.string());
  }
  write_csv(out, m);
}

CellMatrix read_csv(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) {
      const char* first = field.data();
      const char* last = first + field.size();
      while (first < last && *first == ' ') ++first;
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(first, last, v);
      if (ec != std::errc() || ptr != last) {
        throw ConfigError("csv: cannot parse '" + field + "' on row " +
                          std::to_string(rows.size()));
      }
      row.push_back(v);
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw ShapeError("csv: ragged row " + std::to_string(rows.size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) {
    throw ShapeError("csv: empty matrix");
  }
  CellMatrix m(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
  }
  return m;
}

CellMatrix read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot read " + path.string());
  }
  return read_csv(in);
}

}  // namespace spreader
