#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <iosfwd>
#include <vector>

namespace spreader {

/// Row-major N x N matrix. Row index maps to y, column index to x.
using CellMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Point {
  double x = 0.0;
  double y = 0.0;

  bool operator==(const Point&) const = default;
};

/// Square field split into n_cells x n_cells equal squares.
class FieldGrid {
 public:
  FieldGrid(double side_length, int n_cells, Point origin = {});

  double side_length() const noexcept { return side_length_; }
  int n_cells() const noexcept { return n_cells_; }
  Point origin() const noexcept { return origin_; }
  double cell_size() const noexcept { return side_length_ / n_cells_; }
  double cell_area() const noexcept { return cell_size() * cell_size(); }
  std::size_t size() const noexcept {
    return static_cast<std::size_t>(n_cells_) * static_cast<std::size_t>(n_cells_);
  }

  /// Center of cell (row, col), both 0-based.
  Point center(int row, int col) const noexcept {
    const double h = cell_size();
    return {origin_.x + (col + 0.5) * h, origin_.y + (row + 0.5) * h};
  }

  /// All N^2 centers, row-major.
  std::vector<Point> cell_centers() const;

  bool operator==(const FieldGrid&) const = default;

 private:
  double side_length_;
  int n_cells_;
  Point origin_;
};

/// Per-cell amount [g]. Entries are non-negative and finite.
/// The tag keeps applied and prescribed maps from being mixed up.
template <class Tag>
class CellMap {
 public:
  CellMap() = default;
  explicit CellMap(int n) : values_(CellMatrix::Zero(n, n)) {}
  CellMap(int n, double fill) : values_(CellMatrix::Constant(n, n, fill)) { check(); }
  explicit CellMap(CellMatrix values) : values_(std::move(values)) { check(); }

  int n() const noexcept { return static_cast<int>(values_.rows()); }
  const CellMatrix& values() const noexcept { return values_; }
  double operator()(int row, int col) const { return values_(row, col); }
  double sum() const { return values_.sum(); }

  /// Raw access for callers that only add non-negative deposits.
  CellMatrix& mutable_values() noexcept { return values_; }

  bool operator==(const CellMap& other) const { return values_ == other.values_; }

 private:
  void check() const;

  CellMatrix values_;
};

struct AppliedTag {};
struct PrescribedTag {};
using AmountMap = CellMap<AppliedTag>;
using PrescriptionMap = CellMap<PrescribedTag>;

/// Sum of squared differences between prescription and applied amount [g^2].
double cost(const AmountMap& applied, const PrescriptionMap& prescribed);

/// Elementwise sum of the applied map and one step's deposit.
AmountMap accumulate(const AmountMap& applied, const AmountMap& deposit);

/// Headerless CSV, one row per line, N columns, round-trip precision.
void write_csv(std::ostream& out, const CellMatrix& m);
void write_csv(const std::filesystem::path& path, const CellMatrix& m);
CellMatrix read_csv(std::istream& in);
CellMatrix read_csv(const std::filesystem::path& path);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

}  // namespace spreader
