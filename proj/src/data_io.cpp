#include "rangebev/data_io.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "rangebev/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "point binary I/O assumes a little-endian host");

namespace rangebev {

PointCloud read_point_bin(const std::string& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw data_error("cannot open point file '" + path + "'");
  const std::streamoff size = in.tellg();
  if (size % 16 != 0)
    throw format_error("point file '" + path + "' truncated at byte offset " +
                       std::to_string((size / 16) * 16) + " (size " + std::to_string(size) +
                       " is not a multiple of 16)");
  in.seekg(0);
  PointCloud pc;
  const std::size_t n = static_cast<std::size_t>(size / 16);
  pc.points.resize(n);
  std::vector<float> buf(n * 4);
  if (n > 0) in.read(reinterpret_cast<char*>(buf.data()), size);
  if (n > 0 && !in) throw format_error("point file '" + path + "': short read");
  for (std::size_t i = 0; i < n; ++i) {
    pc.points[i].x = static_cast<double>(buf[i * 4 + 0]);
    pc.points[i].y = static_cast<double>(buf[i * 4 + 1]);
    pc.points[i].z = static_cast<double>(buf[i * 4 + 2]);
    pc.points[i].reflectance = static_cast<double>(buf[i * 4 + 3]);
  }
  return pc;
}

void write_point_bin(const PointCloud& pc, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw data_error("cannot write point file '" + path + "'");
  std::vector<float> buf(pc.points.size() * 4);
  for (std::size_t i = 0; i < pc.points.size(); ++i) {
    buf[i * 4 + 0] = static_cast<float>(pc.points[i].x);
    buf[i * 4 + 1] = static_cast<float>(pc.points[i].y);
    buf[i * 4 + 2] = static_cast<float>(pc.points[i].z);
    buf[i * 4 + 3] = static_cast<float>(pc.points[i].reflectance);
  }
  if (!buf.empty())
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(float)));
}

LabelRecord parse_label_line(const std::string& line) {
  std::istringstream iss(line);
  std::vector<std::string> fields;
  std::string tok;
  while (iss >> tok) fields.push_back(tok);
  if (fields.size() != 15)
    throw format_error("label line: expected 15 fields, found " + std::to_string(fields.size()) +
                       " (field " + std::to_string(std::min<std::size_t>(fields.size() + 1, 15)) +
                       (fields.size() < 15 ? " missing)" : " onward unexpected)"));
  auto num = [&](std::size_t i) {
    const std::string& f = fields[i];
    std::size_t pos = 0;
    double v = 0.0;
    try {
      v = std::stod(f, &pos);
    } catch (const std::exception&) {
      throw format_error("label line: field " + std::to_string(i + 1) + " ('" + f +
                         "') is not numeric");
    }
    if (pos != f.size())
      throw format_error("label line: field " + std::to_string(i + 1) + " ('" + f +
                         "') is not numeric");
    return v;
  };
  LabelRecord rec;
  rec.type = fields[0];
  rec.truncation = num(1);
  rec.occlusion = static_cast<int>(std::lround(num(2)));
  rec.alpha = num(3);
  for (int i = 0; i < 4; ++i) rec.bbox[i] = num(static_cast<std::size_t>(4 + i));
  rec.height = num(8);
  rec.width = num(9);
  rec.length = num(10);
  rec.x = num(11);
  rec.y = num(12);
  rec.z = num(13);
  rec.rotation_y = num(14);
  if (rec.type != "DontCare" && (rec.height <= 0.0 || rec.width <= 0.0 || rec.length <= 0.0))
    throw format_error("label line: non-positive dimensions for type '" + rec.type + "'");
  return rec;
}

std::string write_label_line(const LabelRecord& rec) {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "%s %.2f %d %.2f %.2f %.2f %.2f %.2f %.2f %.2f %.2f %.2f %.2f %.2f %.2f",
                rec.type.c_str(), rec.truncation, rec.occlusion, rec.alpha, rec.bbox[0],
                rec.bbox[1], rec.bbox[2], rec.bbox[3], rec.height, rec.width, rec.length, rec.x,
                rec.y, rec.z, rec.rotation_y);
  return std::string(buf);
}

std::vector<LabelRecord> read_label_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open label file '" + path + "'");
  std::vector<LabelRecord> recs;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      recs.push_back(parse_label_line(line));
    } catch (const format_error& e) {
      throw format_error("'" + path + "' line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return recs;
}

void write_label_file(const std::vector<LabelRecord>& recs, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw data_error("cannot write label file '" + path + "'");
  for (const LabelRecord& rec : recs) out << write_label_line(rec) << "\n";
}

Box3D camera_to_lidar_box(const LabelRecord& rec) {
  Box3D box;
  box.cx = rec.z;
  box.cy = -rec.x;
  box.cz = -rec.y + rec.height / 2.0;  // label location is the bottom center
  box.length = rec.length;
  box.width = rec.width;
  box.height = rec.height;
  box.yaw = wrap_angle(-rec.rotation_y - kPi / 2.0);
  return box;
}

LabelRecord lidar_to_camera_record(const Box3D& box, const std::string& type) {
  LabelRecord rec;
  rec.type = type;
  rec.height = box.height;
  rec.width = box.width;
  rec.length = box.length;
  rec.z = box.cx;
  rec.x = -box.cy;
  rec.y = -(box.cz - box.height / 2.0);
  rec.rotation_y = wrap_angle(-box.yaw - kPi / 2.0);
  rec.alpha = rec.rotation_y;  // placeholder; alpha is unused downstream
  return rec;
}

std::vector<int> range_histogram(const std::vector<LabeledObject>& objects, double bin_width,
                                 double max_range) {
  if (bin_width <= 0.0) throw config_error("range_histogram: bin width must be positive");
  double upper = max_range;
  if (upper <= 0.0) {
    for (const LabeledObject& o : objects) upper = std::max(upper, o.range);
    upper += bin_width;  // ensure the largest range falls in a right-open bin
  }
  const int n_bins = std::max(1, static_cast<int>(std::ceil(upper / bin_width - 1e-12)));
  std::vector<int> counts(static_cast<std::size_t>(n_bins), 0);
  for (const LabeledObject& o : objects) {
    if (o.range < 0.0 || o.range >= n_bins * bin_width) continue;
    counts[static_cast<std::size_t>(o.range / bin_width)]++;
  }
  return counts;
}

std::vector<ManifestEntry> DatasetManifest::split(const std::string& tag) const {
  std::vector<ManifestEntry> out;
  for (const ManifestEntry& e : entries)
    if (e.split == tag) out.push_back(e);
  return out;
}

DatasetManifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open manifest '" + path + "'");
  DatasetManifest manifest;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::size_t t1 = line.find('\t');
    const std::size_t t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
    if (t1 == std::string::npos || t2 == std::string::npos || line.find('\t', t2 + 1) != std::string::npos)
      throw format_error("manifest '" + path + "' line " + std::to_string(lineno) +
                         ": expected point_path<TAB>label_path<TAB>split");
    ManifestEntry e;
    e.point_path = line.substr(0, t1);
    e.label_path = line.substr(t1 + 1, t2 - t1 - 1);
    e.split = line.substr(t2 + 1);
    if (e.split != "train" && e.split != "eval")
      throw format_error("manifest '" + path + "' line " + std::to_string(lineno) +
                         ": unknown split '" + e.split + "'");
    manifest.entries.push_back(std::move(e));
  }
  return manifest;
}

void write_manifest(const DatasetManifest& manifest, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw data_error("cannot write manifest '" + path + "'");
  for (const ManifestEntry& e : manifest.entries)
    out << e.point_path << '\t' << e.label_path << '\t' << e.split << "\n";
}

}  // namespace rangebev
