#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "rangebev/data_io.hpp"
#include "rangebev/errors.hpp"
#include "rangebev/rng.hpp"

using namespace rangebev;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("rangebev_test_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

std::vector<char> slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::vector<char>((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("point bin: empty file reads as empty cloud") {
  TempDir tmp;
  const std::string p = tmp.file("empty.bin");
  std::ofstream(p, std::ios::binary).close();
  CHECK(read_point_bin(p).empty());
}

TEST_CASE("point bin: single point round-trips exactly in 16 bytes") {
  TempDir tmp;
  const std::string p = tmp.file("one.bin");
  PointCloud pc;
  pc.points.push_back({1.0, 2.0, 3.0, 0.5});
  write_point_bin(pc, p);
  CHECK(fs::file_size(p) == 16);
  PointCloud back = read_point_bin(p);
  REQUIRE(back.size() == 1);
  CHECK(back.points[0].x == 1.0);
  CHECK(back.points[0].y == 2.0);
  CHECK(back.points[0].z == 3.0);
  CHECK(back.points[0].reflectance == 0.5);
}

TEST_CASE("point bin: write-read-write produces byte-identical files") {
  TempDir tmp;
  Rng rng(404);
  PointCloud pc;
  for (int i = 0; i < 1000; ++i)
    pc.points.push_back({rng.uniform(-80, 80), rng.uniform(-80, 80), rng.uniform(-3, 3),
                         rng.uniform(0, 1)});
  const std::string a = tmp.file("a.bin"), b = tmp.file("b.bin");
  write_point_bin(pc, a);
  write_point_bin(read_point_bin(a), b);
  CHECK(slurp(a) == slurp(b));
}

TEST_CASE("point bin: truncated file raises a format error naming the offset") {
  TempDir tmp;
  const std::string p = tmp.file("bad.bin");
  std::ofstream out(p, std::ios::binary);
  const char junk[22] = {0};
  out.write(junk, 22);
  out.close();
  CHECK_THROWS_AS(read_point_bin(p), format_error);
  try {
    read_point_bin(p);
  } catch (const format_error& e) {
    CHECK(std::string(e.what()).find("16") != std::string::npos);
  }
}

TEST_CASE("label line: hand-parsed example") {
  LabelRecord rec =
      parse_label_line("Car 0.00 0 -1.58 0 0 0 0 1.50 1.80 4.00 2.00 1.50 10.00 -1.40");
  CHECK(rec.type == "Car");
  CHECK(rec.height == doctest::Approx(1.50));
  CHECK(rec.width == doctest::Approx(1.80));
  CHECK(rec.length == doctest::Approx(4.00));
  CHECK(rec.x == doctest::Approx(2.00));
  CHECK(rec.y == doctest::Approx(1.50));
  CHECK(rec.z == doctest::Approx(10.00));
  CHECK(rec.rotation_y == doctest::Approx(-1.40));
}

TEST_CASE("label line: 14 fields raises a format error naming field 15") {
  CHECK_THROWS_AS(parse_label_line("Car 0.00 0 -1.58 0 0 0 0 1.50 1.80 4.00 2.00 1.50 10.00"),
                  format_error);
  try {
    parse_label_line("Car 0.00 0 -1.58 0 0 0 0 1.50 1.80 4.00 2.00 1.50 10.00");
  } catch (const format_error& e) {
    CHECK(std::string(e.what()).find("15") != std::string::npos);
  }
}

TEST_CASE("label line: non-numeric field raises naming the field index") {
  try {
    parse_label_line("Car 0.00 0 -1.58 0 0 0 0 1.50 xyz 4.00 2.00 1.50 10.00 -1.40");
    CHECK(false);
  } catch (const format_error& e) {
    CHECK(std::string(e.what()).find("field 10") != std::string::npos);
  }
}

TEST_CASE("label line: parse-write identity on valid records") {
  Rng rng(8);
  for (int i = 0; i < 50; ++i) {
    LabelRecord rec;
    rec.type = i % 3 ? "Car" : "Van";
    rec.truncation = std::round(rng.uniform(0, 1) * 100) / 100;
    rec.occlusion = rng.uniform_int(0, 3);
    rec.alpha = std::round(rng.uniform(-3.14, 3.14) * 100) / 100;
    rec.height = std::round(rng.uniform(1.2, 2.0) * 100) / 100;
    rec.width = std::round(rng.uniform(1.5, 2.0) * 100) / 100;
    rec.length = std::round(rng.uniform(3.0, 5.0) * 100) / 100;
    rec.x = std::round(rng.uniform(-40, 40) * 100) / 100;
    rec.y = std::round(rng.uniform(-2, 2) * 100) / 100;
    rec.z = std::round(rng.uniform(0, 70) * 100) / 100;
    rec.rotation_y = std::round(rng.uniform(-3.14, 3.14) * 100) / 100;

    const std::string line = write_label_line(rec);
    const LabelRecord back = parse_label_line(line);
    CHECK(back.type == rec.type);
    CHECK(back.truncation == doctest::Approx(rec.truncation));
    CHECK(back.occlusion == rec.occlusion);
    CHECK(back.height == doctest::Approx(rec.height));
    CHECK(back.width == doctest::Approx(rec.width));
    CHECK(back.length == doctest::Approx(rec.length));
    CHECK(back.x == doctest::Approx(rec.x));
    CHECK(back.y == doctest::Approx(rec.y));
    CHECK(back.z == doctest::Approx(rec.z));
    CHECK(back.rotation_y == doctest::Approx(rec.rotation_y));
    CHECK(write_label_line(back) == line);
  }
}

TEST_CASE("camera/lidar conversion: hand-applied axis map") {
  LabelRecord rec;
  rec.height = 1.5;
  rec.width = 1.8;
  rec.length = 4.0;
  rec.x = 0.0;
  rec.y = 1.5;
  rec.z = 10.0;
  rec.rotation_y = 0.0;
  Box3D box = camera_to_lidar_box(rec);
  CHECK(box.cx == doctest::Approx(10.0));
  CHECK(box.cy == doctest::Approx(0.0));
  // bottom center at z = -1.5, lifted by height/2
  CHECK(box.cz == doctest::Approx(-1.5 + 0.75));
}

TEST_CASE("camera/lidar conversion: rotation_y = -pi/2 gives yaw 0") {
  LabelRecord rec;
  rec.height = 1.5;
  rec.width = 1.8;
  rec.length = 4.0;
  rec.rotation_y = -kPi / 2.0;
  CHECK(camera_to_lidar_box(rec).yaw == doctest::Approx(0.0));
}

TEST_CASE("camera/lidar conversion: double conversion is the identity") {
  Rng rng(66);
  for (int i = 0; i < 50; ++i) {
    Box3D box;
    box.cx = rng.uniform(1, 70);
    box.cy = rng.uniform(-40, 40);
    box.height = rng.uniform(1.2, 2.0);
    box.cz = box.height / 2.0;
    box.width = rng.uniform(1.5, 2.0);
    box.length = rng.uniform(3, 5);
    box.yaw = rng.yaw();
    Box3D back = camera_to_lidar_box(lidar_to_camera_record(box));
    CHECK(back.cx == doctest::Approx(box.cx).epsilon(1e-12));
    CHECK(back.cy == doctest::Approx(box.cy).epsilon(1e-12));
    CHECK(back.cz == doctest::Approx(box.cz).epsilon(1e-12));
    CHECK(std::abs(wrap_angle(back.yaw - box.yaw)) < 1e-12);
  }
}

TEST_CASE("range_histogram basics") {
  CHECK(range_histogram({}, 10.0, 30.0) == std::vector<int>{0, 0, 0});

  std::vector<LabeledObject> objs;
  for (double r : {5.0, 15.0, 15.0}) {
    Box3D b;
    b.cx = r;
    b.length = b.width = b.height = 1.0;
    objs.emplace_back(b);
  }
  CHECK(range_histogram(objs, 10.0, 20.0) == std::vector<int>{1, 2});
  CHECK_THROWS_AS(range_histogram(objs, 0.0, 20.0), config_error);
}

TEST_CASE("manifest round trip and validation") {
  TempDir tmp;
  DatasetManifest m;
  m.entries.push_back({"points/000000.bin", "labels/000000.txt", "train"});
  m.entries.push_back({"points/000001.bin", "labels/000001.txt", "eval"});
  const std::string p = tmp.file("manifest.tsv");
  write_manifest(m, p);
  DatasetManifest back = read_manifest(p);
  REQUIRE(back.entries.size() == 2);
  CHECK(back.entries[0].point_path == "points/000000.bin");
  CHECK(back.entries[1].split == "eval");
  CHECK(back.split("train").size() == 1);

  std::ofstream bad(tmp.file("bad.tsv"));
  bad << "a.bin\tb.txt\tnope\n";
  bad.close();
  CHECK_THROWS_AS(read_manifest(tmp.file("bad.tsv")), format_error);
}
