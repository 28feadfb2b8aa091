#include "rangebev/bev.hpp"

#include <algorithm>
#include <cmath>

#include "rangebev/errors.hpp"
#include "rangebev/geometry.hpp"

namespace rangebev {

GridSpec make_grid(double x0, double x1, double y0, double y1, double z0, double z1, double cell,
                   int stride) {
  if (cell <= 0.0) throw config_error("grid: cell size must be positive");
  if (stride < 1) throw config_error("grid: stride must be >= 1");
  if (x1 <= x0 || y1 <= y0 || z1 <= z0) throw config_error("grid: empty extent");

  GridSpec g;
  g.z0 = z0;
  g.z1 = z1;
  g.cell = cell;
  g.stride = stride;

  int nx = static_cast<int>(std::ceil((x1 - x0) / cell - 1e-9));
  nx -= nx % stride;
  int ny = static_cast<int>(std::ceil((y1 - y0) / cell - 1e-9));
  ny -= ny % stride;
  if (nx < stride || ny < stride) throw config_error("grid: extent smaller than one aligned cell");

  g.nx = nx;
  g.ny = ny;
  g.x0 = x0;
  g.x1 = x0 + nx * cell;  // trim the far edge
  const double ymid = 0.5 * (y0 + y1);
  g.y0 = ymid - 0.5 * ny * cell;  // trim symmetrically
  g.y1 = ymid + 0.5 * ny * cell;
  return g;
}

GridSpec default_grid() { return make_grid(0.0, 70.4, -40.0, 40.0, -3.0, 1.0, 0.55, 4); }

Tensor encode(const PointCloud& pc, const GridSpec& grid) {
  if (grid.nx <= 0 || grid.ny <= 0) throw config_error("encode: grid has no cells");
  const int nx = grid.nx, ny = grid.ny;
  const std::size_t cells = static_cast<std::size_t>(nx) * ny;
  std::vector<int> count(cells, 0);
  std::vector<double> maxz(cells, 0.0);
  std::vector<double> sumr(cells, 0.0);

  for (const Point4& p : pc.points) {
    if (p.x < grid.x0 || p.x >= grid.x1 || p.y < grid.y0 || p.y >= grid.y1 || p.z < grid.z0 ||
        p.z > grid.z1)
      continue;
    const int ix = std::min(nx - 1, static_cast<int>((p.x - grid.x0) / grid.cell));
    const int iy = std::min(ny - 1, static_cast<int>((p.y - grid.y0) / grid.cell));
    const std::size_t c = static_cast<std::size_t>(ix) * ny + iy;
    if (count[c] == 0 || p.z > maxz[c]) maxz[c] = p.z;
    count[c]++;
    sumr[c] += p.reflectance;
  }

  Tensor img({3, nx, ny});
  const double log64 = std::log(64.0);
  const double zspan = grid.z1 - grid.z0;
  double* density = img.data();
  double* height = img.data() + cells;
  double* refl = img.data() + 2 * cells;
  for (std::size_t c = 0; c < cells; ++c) {
    if (count[c] == 0) continue;
    density[c] = std::min(1.0, std::log(static_cast<double>(count[c]) + 1.0) / log64);
    height[c] = (std::clamp(maxz[c], grid.z0, grid.z1) - grid.z0) / zspan;
    refl[c] = sumr[c] / count[c];
  }
  return img;
}

RangeMask cell_range_band(const GridSpec& grid, int feature_stride, double threshold,
                          double exclusion) {
  if (feature_stride < 1) throw config_error("range mask: stride must be >= 1");
  if (grid.nx % feature_stride != 0 || grid.ny % feature_stride != 0)
    throw config_error("range mask: grid cells are not a multiple of the stride");
  RangeMask mask;
  mask.h = grid.nx / feature_stride;
  mask.w = grid.ny / feature_stride;
  mask.threshold = threshold;
  mask.exclusion = exclusion;
  mask.band.resize(static_cast<std::size_t>(mask.h) * mask.w);
  const double acell = grid.cell * feature_stride;
  for (int i = 0; i < mask.h; ++i)
    for (int j = 0; j < mask.w; ++j) {
      const double cx = grid.x0 + (i + 0.5) * acell;
      const double cy = grid.y0 + (j + 0.5) * acell;
      const double r = std::hypot(cx, cy);
      Band b;
      if (r < exclusion)
        b = Band::kExcludedNear;
      else if (r > threshold)
        b = Band::kFar;
      else
        b = Band::kNear;
      mask.band[static_cast<std::size_t>(i) * mask.w + j] = b;
      if (b == Band::kNear)
        mask.near_count++;
      else if (b == Band::kFar)
        mask.far_count++;
      else
        mask.excluded_count++;
    }
  return mask;
}

std::vector<int> box_to_cells(const Box3D& box, const GridSpec& grid, int feature_stride) {
  if (grid.nx % feature_stride != 0 || grid.ny % feature_stride != 0)
    throw config_error("box_to_cells: grid cells are not a multiple of the stride");
  const int h = grid.nx / feature_stride;
  const int w = grid.ny / feature_stride;
  const double acell = grid.cell * feature_stride;

  Box3D grid_rect;
  grid_rect.cx = 0.5 * (grid.x0 + grid.x1);
  grid_rect.cy = 0.5 * (grid.y0 + grid.y1);
  grid_rect.length = grid.x1 - grid.x0;
  grid_rect.width = grid.y1 - grid.y0;
  grid_rect.yaw = 0.0;
  if (bev_intersection_area(box, grid_rect) <= 0.0)
    throw data_error("box_to_cells: box footprint lies entirely outside the grid");

  std::vector<int> cells;
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      const double cx = grid.x0 + (i + 0.5) * acell;
      const double cy = grid.y0 + (j + 0.5) * acell;
      if (point_in_bev_box(cx, cy, box)) cells.push_back(i * w + j);
    }
  if (!cells.empty()) return cells;

  // sub-cell box: take the cell whose center is nearest to the box center
  int best = 0;
  double best_d = 1e300;
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      const double cx = grid.x0 + (i + 0.5) * acell;
      const double cy = grid.y0 + (j + 0.5) * acell;
      const double d = std::hypot(cx - box.cx, cy - box.cy);
      if (d < best_d) {
        best_d = d;
        best = i * w + j;
      }
    }
  return {best};
}

}  // namespace rangebev
