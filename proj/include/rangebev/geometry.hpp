#pragma once

#include <array>
#include <vector>

#include "rangebev/box.hpp"

namespace rangebev {

struct Vec2 {
  double x = 0.0, y = 0.0;
};

using Polygon = std::vector<Vec2>;

/// BEV footprint corners of a box, counter-clockwise.
std::array<Vec2, 4> box_corners_bev(const Box3D& box);

/// Signed area of a simple polygon (positive when counter-clockwise).
double polygon_area(const Polygon& poly);

/// Clip a convex polygon against another (Sutherland-Hodgman).
Polygon clip_convex(const Polygon& subject, const Polygon& clip);

/// Overlap area of two yaw-rotated BEV rectangles.
double bev_intersection_area(const Box3D& a, const Box3D& b);

/// IoU of two yaw-rotated BEV rectangles via convex polygon clipping.
double rotated_bev_iou(const Box3D& a, const Box3D& b);

/// Is (x, y) inside the box's BEV footprint? Boundaries inclusive.
bool point_in_bev_box(double x, double y, const Box3D& box);

}  // namespace rangebev
