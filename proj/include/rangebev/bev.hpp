#pragma once

#include <cstdint>
#include <vector>

#include "rangebev/box.hpp"
#include "rangebev/tensor.hpp"

namespace rangebev {

/// BEV grid over the detection range. Rows (tensor H) follow x, columns
/// (tensor W) follow y. Cell counts are trimmed to multiples of the feature
/// stride so the aligned layer tiles the grid exactly: the default
/// 0.55 m cell gives 128 x 144 cells and a 32 x 36 aligned layer.
struct GridSpec {
  double x0 = 0.0, x1 = 70.4;
  double y0 = -40.0, y1 = 40.0;
  double z0 = -3.0, z1 = 1.0;
  double cell = 0.55;
  int stride = 4;  // aligned-layer downsampling factor

  int nx = 0, ny = 0;  // derived cell counts

  int aligned_nx() const { return nx / stride; }
  int aligned_ny() const { return ny / stride; }
  double aligned_cell() const { return cell * stride; }

  double cell_center_x(int i) const { return x0 + (i + 0.5) * cell; }
  double cell_center_y(int j) const { return y0 + (j + 0.5) * cell; }
  double aligned_center_x(int i) const { return x0 + (i + 0.5) * aligned_cell(); }
  double aligned_center_y(int j) const { return y0 + (j + 0.5) * aligned_cell(); }
};

/// Derive cell counts from extents; the x extent is trimmed at the far edge
/// and the y extent symmetrically so both counts are stride multiples.
GridSpec make_grid(double x0, double x1, double y0, double y1, double z0, double z1, double cell,
                   int stride);
GridSpec default_grid();

/// 3 x nx x ny pseudo-image: channel 0 log-density min(1, log(n+1)/log 64),
/// channel 1 normalized max height, channel 2 mean reflectance. Points
/// outside the 3D extent are discarded; empty cells are exactly zero.
Tensor encode(const PointCloud& pc, const GridSpec& grid);

enum class Band : std::int8_t { kExcludedNear = 0, kNear = 1, kFar = 2 };

/// Per-aligned-cell range band, determined solely by the cell center range.
struct RangeMask {
  int h = 0, w = 0;
  std::vector<Band> band;
  double threshold = 40.0;
  double exclusion = 3.0;
  int near_count = 0, far_count = 0, excluded_count = 0;

  Band at(int i, int j) const { return band[static_cast<std::size_t>(i) * w + j]; }
  int included() const { return near_count + far_count; }
};

RangeMask cell_range_band(const GridSpec& grid, int feature_stride, double threshold,
                          double exclusion);

/// Aligned-layer cells whose centers fall inside the box BEV footprint;
/// falls back to the single nearest cell for sub-cell boxes. Throws
/// data_error when the box footprint misses the grid extent entirely.
std::vector<int> box_to_cells(const Box3D& box, const GridSpec& grid, int feature_stride);

}  // namespace rangebev
