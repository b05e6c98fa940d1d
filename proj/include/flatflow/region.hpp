#pragma once

#include <cstdint>
#include <vector>

#include "flatflow/contour.hpp"
#include "flatflow/grid.hpp"

namespace flatflow {

/// A planar set given by a level-set field: cell centres with value <= 0 are
/// inside. The boundary is the marching-squares contour of the zero level, and
/// area and perimeter are always measured on that contour.
class Region {
 public:
  Region() = default;

  explicit Region(GridField level_set) : phi_(std::move(level_set)) {
    if (!phi_.all_finite()) throw Error(ErrorKind::NonFinite, "region level set has non-finite values");
    const std::size_t n = phi_.size();
    indicator_.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
      indicator_[k] = phi_[k] <= 0.0 ? 1 : 0;
      inside_cells_ += indicator_[k];
    }
    contours_ = marching_squares(phi_, 0.0);
    const double min_area = kMinDiagnosticCells * phi_.grid().cell_area();
    for (const Contour& c : contours_) {
      area_ += c.signed_area();
      perimeter_ += c.length();
      if (std::abs(c.signed_area()) >= min_area && c.size() >= 4) diagnostic_.push_back(c);
    }
  }

  /// Staircase region from a cell indicator (contour through edge midpoints).
  static Region from_indicator(const Grid& grid, const std::vector<std::uint8_t>& inside) {
    if (inside.size() != grid.size()) throw Error(ErrorKind::InvalidArgument, "indicator size mismatch");
    GridField phi(grid);
    for (std::size_t k = 0; k < inside.size(); ++k) phi[k] = inside[k] ? -0.5 * grid.spacing : 0.5 * grid.spacing;
    return Region(std::move(phi));
  }

  const Grid& grid() const { return phi_.grid(); }
  const GridField& level_set() const { return phi_; }
  bool inside(int i, int j) const { return indicator_[grid().index(i, j)] != 0; }
  const std::vector<std::uint8_t>& indicator() const { return indicator_; }
  std::size_t inside_cells() const { return inside_cells_; }
  bool empty() const { return inside_cells_ == 0; }
  bool full() const { return inside_cells_ == indicator_.size(); }

  /// All boundary loops, including tiny islands.
  const std::vector<Contour>& contours() const { return contours_; }
  /// Loops enclosing at least four cells; islands below that carry no usable
  /// curvature and are left out of boundary diagnostics.
  const std::vector<Contour>& diagnostic_contours() const { return diagnostic_; }

  double area() const { return area_; }
  double perimeter() const { return perimeter_; }

  static constexpr double kMinDiagnosticCells = 4.0;

 private:
  GridField phi_;
  std::vector<std::uint8_t> indicator_;
  std::size_t inside_cells_ = 0;
  std::vector<Contour> contours_;
  std::vector<Contour> diagnostic_;
  double area_ = 0.0;
  double perimeter_ = 0.0;
};

/// Shoelace area of the interpolated boundary (0 for an empty region).
inline double area(const Region& region) { return region.area(); }
/// Total length of the interpolated boundary.
inline double perimeter(const Region& region) { return region.perimeter(); }

}  // namespace flatflow
