#pragma once

#include <string>
#include <vector>

#include "rangebev/box.hpp"

namespace rangebev {

/// One line of a KITTI label file: exactly 15 whitespace-separated fields.
/// The 2D bbox is carried but unused (emitted as zeros).
struct LabelRecord {
  std::string type = "Car";
  double truncation = 0.0;
  int occlusion = 0;
  double alpha = 0.0;
  double bbox[4] = {0.0, 0.0, 0.0, 0.0};
  double height = 0.0, width = 0.0, length = 0.0;  // dims, camera convention h w l
  double x = 0.0, y = 0.0, z = 0.0;                // location, camera frame
  double rotation_y = 0.0;
};

/// Velodyne binary: consecutive little-endian float32 (x, y, z, reflectance)
/// quadruples, 16 bytes per point.
PointCloud read_point_bin(const std::string& path);
void write_point_bin(const PointCloud& pc, const std::string& path);

LabelRecord parse_label_line(const std::string& line);
std::string write_label_line(const LabelRecord& rec);

std::vector<LabelRecord> read_label_file(const std::string& path);
void write_label_file(const std::vector<LabelRecord>& recs, const std::string& path);

/// Fixed nominal camera-to-lidar extrinsic: camera x -> -y, camera z -> x,
/// camera y -> -z. The label location is the box bottom center; the returned
/// box center is lifted by height/2. Yaw is -rotation_y - pi/2, wrapped.
Box3D camera_to_lidar_box(const LabelRecord& rec);
LabelRecord lidar_to_camera_record(const Box3D& box, const std::string& type = "Car");

/// Counts over [0, max_range) with right-open bins. When max_range is zero
/// the histogram extends to cover the largest range seen.
std::vector<int> range_histogram(const std::vector<LabeledObject>& objects, double bin_width,
                                 double max_range = 0.0);

struct ManifestEntry {
  std::string point_path;
  std::string label_path;
  std::string split;  // "train" or "eval"
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;

  std::vector<ManifestEntry> split(const std::string& tag) const;
};

/// Line format: point_path<TAB>label_path<TAB>split
DatasetManifest read_manifest(const std::string& path);
void write_manifest(const DatasetManifest& manifest, const std::string& path);

}  // namespace rangebev
