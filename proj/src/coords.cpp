#include "liwt/coords.hpp"

#include <algorithm>
#include <cmath>

#include "liwt/errors.hpp"

namespace liwt {

Point2 CoordSpace::center(std::int64_t i, std::int64_t j) const {
  return {-1.0 + static_cast<double>(2 * i + 1) / static_cast<double>(h),
          -1.0 + static_cast<double>(2 * j + 1) / static_cast<double>(w)};
}

namespace {

std::int64_t nearest_along(double c, std::int64_t n) {
  const double u = (c + 1.0) * static_cast<double>(n) / 2.0;
  if (!(u > 0.0)) return 0;  // also catches NaN
  const double f = std::floor(u);
  if (f >= static_cast<double>(n)) return n - 1;
  return static_cast<std::int64_t>(f);
}

}  // namespace

LatticeIndex CoordSpace::nearest(Point2 p) const { return {nearest_along(p.y, h), nearest_along(p.x, w)}; }

LocalGrid local_grid(const CoordSpace& space, Point2 query) {
  LocalGrid g;
  g.center = space.nearest(query);
  int r = 0;
  for (int di = -1; di <= 1; ++di) {
    for (int dj = -1; dj <= 1; ++dj, ++r) {
      const LatticeIndex idx{std::clamp<std::int64_t>(g.center.i + di, 0, space.h - 1),
                             std::clamp<std::int64_t>(g.center.j + dj, 0, space.w - 1)};
      const Point2 c = space.center(idx.i, idx.j);
      g.indices[r] = idx;
      g.rows[r] = space.flat(idx);
      g.deltas[r] = {(query.y - c.y) * static_cast<double>(space.h), (query.x - c.x) * static_cast<double>(space.w)};
    }
  }
  return g;
}

std::vector<Point2> pixel_centers(std::int64_t h, std::int64_t w) {
  if (h < 1 || w < 1) throw InvalidArgument("pixel_centers: extents must be positive");
  const CoordSpace space{h, w};
  std::vector<Point2> out;
  out.reserve(static_cast<std::size_t>(h * w));
  for (std::int64_t i = 0; i < h; ++i)
    for (std::int64_t j = 0; j < w; ++j) out.push_back(space.center(i, j));
  return out;
}

std::int64_t scaled_extent(double scale, std::int64_t n) {
  return static_cast<std::int64_t>(std::floor(scale * static_cast<double>(n) + 1e-9));
}

std::vector<Point2> hr_query_coords(std::int64_t h_lr, std::int64_t w_lr, double s_h, double s_w) {
  if (!(s_h > 0.0) || !(s_w > 0.0)) throw InvalidArgument("hr_query_coords: scales must be positive");
  const auto oh = scaled_extent(s_h, h_lr);
  const auto ow = scaled_extent(s_w, w_lr);
  if (oh < 1 || ow < 1) throw InvalidArgument("hr_query_coords: empty output lattice");
  return pixel_centers(oh, ow);
}

void gamma_into(Point2 delta, int levels, std::span<double> out) {
  if (out.size() != static_cast<std::size_t>(4 * levels)) throw InvalidArgument("gamma: output span has wrong length");
  double freq = 1.0;
  for (int l = 0; l < levels; ++l, freq *= 2.0) {
    out[4 * l + 0] = std::sin(freq * delta.y);
    out[4 * l + 1] = std::cos(freq * delta.y);
    out[4 * l + 2] = std::sin(freq * delta.x);
    out[4 * l + 3] = std::cos(freq * delta.x);
  }
}

std::vector<double> gamma(Point2 delta, int levels) {
  std::vector<double> out(static_cast<std::size_t>(4 * levels));
  gamma_into(delta, levels, out);
  return out;
}

Cell cell_of(double s_h, double s_w, std::int64_t h_lr, std::int64_t w_lr) {
  if (!(s_h > 0.0) || !(s_w > 0.0) || h_lr < 1 || w_lr < 1) throw InvalidArgument("cell_of: arguments must be positive");
  Cell c;
  c.ch = 2.0 / (s_h * static_cast<double>(h_lr));
  c.cw = 2.0 / (s_w * static_cast<double>(w_lr));
  c.scaled_h = c.ch * static_cast<double>(h_lr);
  c.scaled_w = c.cw * static_cast<double>(w_lr);
  return c;
}

}  // namespace liwt
