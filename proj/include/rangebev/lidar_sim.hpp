#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rangebev/box.hpp"

namespace rangebev {

/// Spinning-LiDAR model. Rays are cast from (0, 0, mount_height) on a fixed
/// (elevation, azimuth) grid; `elevation_deg` is sorted ascending.
struct LidarSpec {
  std::vector<double> elevation_deg;
  double azimuth_res_deg = 0.4;
  double azimuth_min_deg = -90.0;  // forward sector; the detection grid only covers x >= 0
  double azimuth_max_deg = 90.0;
  double max_range = 80.0;
  double noise_sigma = 0.02;  // Gaussian range noise along the ray, meters
  double dropout = 0.05;      // per-ray drop probability
  double mount_height = 1.73;

  int channels() const { return static_cast<int>(elevation_deg.size()); }
  void validate() const;
};

/// Evenly spaced elevation angles from lo to hi (inclusive).
std::vector<double> linspace_deg(double lo, double hi, int n);

/// Built-in profiles: "dense-64ch" and "sparse-32ch". The two stand in for
/// different physical devices; cross-device adaptation uses one as source
/// and the other as target.
LidarSpec lidar_profile(const std::string& name);

struct SceneConfig {
  int min_cars = 2;
  int max_cars = 8;
  double x_min = 6.0;   // placement extent of car centers, within detection range
  double x_max = 64.0;
  double y_min = -30.0;
  double y_max = 30.0;
  double base_length = 4.0;
  double base_width = 1.8;
  double base_height = 1.6;
  double dim_jitter = 0.15;  // +/- fraction on each dimension
  int max_attempts = 1000;
};

struct SceneSpec {
  std::vector<LabeledObject> objects;
  // ground plane is z = 0; extent covers all boxes
  double extent_x0 = 0.0, extent_x1 = 0.0, extent_y0 = 0.0, extent_y1 = 0.0;
};

/// Deterministic per (seed, config). Car boxes are rejection-sampled so BEV
/// footprints do not overlap; throws data_error when placement keeps failing.
SceneSpec generate_scene(std::uint64_t seed, const SceneConfig& config);

/// Cast every (elevation, azimuth) ray; the nearest box-face or ground-plane
/// intersection within max_range becomes a point. Range noise is applied
/// along the ray and whole rays are dropped with the dropout probability.
/// Reflectance is 0.8 for boxes, 0.2 for ground. Deterministic per seed and
/// independent of ray evaluation order.
PointCloud ray_cast(const SceneSpec& scene, const LidarSpec& lidar, std::uint64_t seed);

/// Number of points inside the yaw-rotated box, boundaries inclusive.
int points_in_box(const PointCloud& pc, const Box3D& box);

}  // namespace rangebev
