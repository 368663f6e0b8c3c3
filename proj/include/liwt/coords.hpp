#pragma once

// Continuous image coordinates. An h x w lattice covers (-1, 1)^2 and pixel
// (i, j) sits at (-1 + (2i+1)/h, -1 + (2j+1)/w); the first component is the
// row (vertical) axis.

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace liwt {

struct Point2 {
  double y = 0.0;
  double x = 0.0;
  friend bool operator==(const Point2&, const Point2&) = default;
};

struct LatticeIndex {
  std::int64_t i = 0;
  std::int64_t j = 0;
  friend bool operator==(const LatticeIndex&, const LatticeIndex&) = default;
};

struct CoordSpace {
  std::int64_t h = 1;
  std::int64_t w = 1;

  Point2 center(std::int64_t i, std::int64_t j) const;
  // Nearest lattice point, clamped into the lattice.
  LatticeIndex nearest(Point2 p) const;
  std::int64_t flat(LatticeIndex idx) const { return idx.i * w + idx.j; }
};

inline constexpr int kGridPoints = 9;

// The 3x3 lattice neighbourhood around the point nearest a query.
struct LocalGrid {
  LatticeIndex center;
  // Row-major over row offsets {-1,0,1} then column offsets {-1,0,1}, clamped.
  std::array<LatticeIndex, kGridPoints> indices{};
  // Flat row index i*w + j of each entry in `indices`.
  std::array<std::int64_t, kGridPoints> rows{};
  // (query - clamped lattice center) with components scaled by (h, w).
  std::array<Point2, kGridPoints> deltas{};
};

LocalGrid local_grid(const CoordSpace& space, Point2 query);

// Pixel centers of an h x w lattice in row-major order.
std::vector<Point2> pixel_centers(std::int64_t h, std::int64_t w);

// floor(s * n) with a small tolerance so 3.3 * 10 gives 33.
std::int64_t scaled_extent(double scale, std::int64_t n);

// Centers of the floor(s_h*h) x floor(s_w*w) output lattice.
std::vector<Point2> hr_query_coords(std::int64_t h_lr, std::int64_t w_lr, double s_h, double s_w);

// Sinusoidal encoding of an offset: for each level l the four values
// sin(2^l dy), cos(2^l dy), sin(2^l dx), cos(2^l dx).
std::vector<double> gamma(Point2 delta, int levels);
void gamma_into(Point2 delta, int levels, std::span<double> out);

struct Cell {
  double ch = 0.0;  // 2 / (s_h * H)
  double cw = 0.0;  // 2 / (s_w * W)
  double scaled_h = 0.0;  // ch * H, what the decoder sees
  double scaled_w = 0.0;
};

Cell cell_of(double s_h, double s_w, std::int64_t h_lr, std::int64_t w_lr);

}  // namespace liwt
