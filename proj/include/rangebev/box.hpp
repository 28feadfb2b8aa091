#pragma once

#include <cmath>
#include <string>
#include <vector>

namespace rangebev {

inline constexpr double kPi = 3.14159265358979323846;

/// Wrap an angle to (-pi, pi].
inline double wrap_angle(double a) {
  a = std::fmod(a, 2.0 * kPi);
  if (a <= -kPi) a += 2.0 * kPi;
  if (a > kPi) a -= 2.0 * kPi;
  return a;
}

/// Oriented 3D box in the sensor frame (x forward, y left, z up).
/// `length` runs along the heading, `width` across it, `height` up.
struct Box3D {
  double cx = 0.0, cy = 0.0, cz = 0.0;
  double length = 0.0, width = 0.0, height = 0.0;
  double yaw = 0.0;  // rotation about z, in (-pi, pi]

  double bev_range() const { return std::hypot(cx, cy); }
};

struct LabeledObject {
  Box3D box;
  std::string label = "Car";
  double range = 0.0;  // sqrt(cx^2 + cy^2), kept consistent with box

  LabeledObject() = default;
  explicit LabeledObject(Box3D b, std::string cls = "Car")
      : box(b), label(std::move(cls)), range(b.bev_range()) {}
};

struct Point4 {
  double x = 0.0, y = 0.0, z = 0.0;
  double reflectance = 0.0;
};

struct PointCloud {
  std::vector<Point4> points;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

}  // namespace rangebev
