#include "rangebev/lidar_sim.hpp"

#include <algorithm>
#include <cmath>

#include "rangebev/errors.hpp"
#include "rangebev/geometry.hpp"
#include "rangebev/rng.hpp"

namespace rangebev {

void LidarSpec::validate() const {
  if (elevation_deg.empty()) throw config_error("lidar: no elevation channels");
  if (!std::is_sorted(elevation_deg.begin(), elevation_deg.end()))
    throw config_error("lidar: elevation angles must be sorted ascending");
  if (azimuth_res_deg <= 0.0) throw config_error("lidar: azimuth resolution must be positive");
  const double rem = std::fmod(360.0, azimuth_res_deg);
  if (std::min(rem, azimuth_res_deg - rem) > 1e-6)
    throw config_error("lidar: azimuth resolution must divide 360");
  if (max_range <= 0.0) throw config_error("lidar: max range must be positive");
  if (dropout < 0.0 || dropout >= 1.0) throw config_error("lidar: dropout must be in [0, 1)");
  if (azimuth_max_deg <= azimuth_min_deg) throw config_error("lidar: empty azimuth sector");
}

std::vector<double> linspace_deg(double lo, double hi, int n) {
  std::vector<double> out(static_cast<std::size_t>(n));
  if (n == 1) {
    out[0] = lo;
    return out;
  }
  for (int i = 0; i < n; ++i)
    out[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / static_cast<double>(n - 1);
  return out;
}

LidarSpec lidar_profile(const std::string& name) {
  LidarSpec spec;
  if (name == "dense-64ch") {
    spec.elevation_deg = linspace_deg(-24.0, 2.0, 64);
    spec.azimuth_res_deg = 0.4;
    spec.max_range = 80.0;
    spec.noise_sigma = 0.02;
    spec.dropout = 0.05;
    spec.mount_height = 1.73;
  } else if (name == "sparse-32ch") {
    spec.elevation_deg = linspace_deg(-25.0, 5.0, 32);
    spec.azimuth_res_deg = 0.8;
    spec.max_range = 70.0;
    spec.noise_sigma = 0.03;
    spec.dropout = 0.10;
    spec.mount_height = 1.84;
  } else {
    throw config_error("unknown lidar profile '" + name + "'");
  }
  spec.validate();
  return spec;
}

SceneSpec generate_scene(std::uint64_t seed, const SceneConfig& config) {
  if (config.min_cars < 0 || config.max_cars < config.min_cars)
    throw config_error("scene: invalid car count range");
  if (config.x_max < config.x_min || config.y_max < config.y_min)
    throw config_error("scene: invalid placement extent");

  Rng rng(derive_seed(seed, 0x5ce9e));
  SceneSpec scene;
  const int n_cars = config.min_cars == config.max_cars
                         ? config.min_cars
                         : rng.uniform_int(config.min_cars, config.max_cars);
  for (int i = 0; i < n_cars; ++i) {
    bool placed = false;
    for (int attempt = 0; attempt < config.max_attempts; ++attempt) {
      Box3D box;
      box.cx = rng.uniform(config.x_min, config.x_max);
      box.cy = rng.uniform(config.y_min, config.y_max);
      box.yaw = rng.yaw();
      box.length = config.base_length * (1.0 + config.dim_jitter * rng.uniform(-1.0, 1.0));
      box.width = config.base_width * (1.0 + config.dim_jitter * rng.uniform(-1.0, 1.0));
      box.height = config.base_height * (1.0 + config.dim_jitter * rng.uniform(-1.0, 1.0));
      box.cz = 0.5 * box.height;  // resting on the ground plane

      bool overlaps = false;
      for (const LabeledObject& other : scene.objects)
        if (bev_intersection_area(box, other.box) > 1e-9) {
          overlaps = true;
          break;
        }
      if (overlaps) continue;
      scene.objects.emplace_back(box);
      placed = true;
      break;
    }
    if (!placed)
      throw data_error("scene: failed to place car " + std::to_string(i) + " after " +
                       std::to_string(config.max_attempts) + " attempts");
  }
  const double pad = config.base_length * (1.0 + config.dim_jitter);
  scene.extent_x0 = config.x_min - pad;
  scene.extent_x1 = config.x_max + pad;
  scene.extent_y0 = config.y_min - pad;
  scene.extent_y1 = config.y_max + pad;
  return scene;
}

namespace {

// Ray / oriented-box intersection via the slab test in the box frame.
// Returns the entry distance, or a negative value on miss.
double ray_box_hit(double ox, double oy, double oz, double dx, double dy, double dz,
                   const Box3D& box) {
  const double c = std::cos(box.yaw);
  const double s = std::sin(box.yaw);
  const double px = ox - box.cx, py = oy - box.cy, pz = oz - box.cz;
  const double lo[3] = {c * px + s * py, -s * px + c * py, pz};
  const double ld[3] = {c * dx + s * dy, -s * dx + c * dy, dz};
  const double half[3] = {0.5 * box.length, 0.5 * box.width, 0.5 * box.height};

  double t0 = 0.0, t1 = 1e30;
  for (int a = 0; a < 3; ++a) {
    if (std::abs(ld[a]) < 1e-12) {
      if (lo[a] < -half[a] || lo[a] > half[a]) return -1.0;
      continue;
    }
    double ta = (-half[a] - lo[a]) / ld[a];
    double tb = (half[a] - lo[a]) / ld[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return -1.0;
  }
  return t0 > 1e-9 ? t0 : -1.0;
}

}  // namespace

PointCloud ray_cast(const SceneSpec& scene, const LidarSpec& lidar, std::uint64_t seed) {
  lidar.validate();
  const int n_ch = lidar.channels();
  const int n_az = static_cast<int>(
      std::floor((lidar.azimuth_max_deg - lidar.azimuth_min_deg) / lidar.azimuth_res_deg + 1e-9));
  const double deg = kPi / 180.0;
  const double oz = lidar.mount_height;

  const std::int64_t n_rays = static_cast<std::int64_t>(n_ch) * n_az;
  std::vector<Point4> slots(static_cast<std::size_t>(n_rays));
  std::vector<std::uint8_t> has(static_cast<std::size_t>(n_rays), 0);

#pragma omp parallel for schedule(static)
  for (std::int64_t ray = 0; ray < n_rays; ++ray) {
    const int ch = static_cast<int>(ray / n_az);
    const int ka = static_cast<int>(ray % n_az);
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(ray) + 0x9d2c));
    if (rng.uniform() < lidar.dropout) continue;

    const double elev = lidar.elevation_deg[static_cast<std::size_t>(ch)] * deg;
    const double az = (lidar.azimuth_min_deg + ka * lidar.azimuth_res_deg) * deg;
    const double ce = std::cos(elev);
    const double dx = ce * std::cos(az);
    const double dy = ce * std::sin(az);
    const double dz = std::sin(elev);

    double best_t = -1.0;
    double refl = 0.0;
    if (dz < -1e-12) {
      const double t = -oz / dz;
      if (t <= lidar.max_range) {
        best_t = t;
        refl = 0.2;
      }
    }
    for (const LabeledObject& obj : scene.objects) {
      const double t = ray_box_hit(0.0, 0.0, oz, dx, dy, dz, obj.box);
      if (t > 0.0 && t <= lidar.max_range && (best_t < 0.0 || t < best_t)) {
        best_t = t;
        refl = 0.8;
      }
    }
    if (best_t < 0.0) continue;

    const double t_noisy = best_t + lidar.noise_sigma * rng.normal();
    if (t_noisy <= 1e-6 || t_noisy > lidar.max_range) continue;
    slots[static_cast<std::size_t>(ray)] = {t_noisy * dx, t_noisy * dy, oz + t_noisy * dz, refl};
    has[static_cast<std::size_t>(ray)] = 1;
  }

  PointCloud pc;
  pc.points.reserve(static_cast<std::size_t>(n_rays) / 2);
  for (std::int64_t ray = 0; ray < n_rays; ++ray)
    if (has[static_cast<std::size_t>(ray)]) pc.points.push_back(slots[static_cast<std::size_t>(ray)]);
  return pc;
}

int points_in_box(const PointCloud& pc, const Box3D& box) {
  const double c = std::cos(box.yaw);
  const double s = std::sin(box.yaw);
  int count = 0;
  for (const Point4& p : pc.points) {
    const double px = p.x - box.cx, py = p.y - box.cy, pz = p.z - box.cz;
    const double lx = c * px + s * py;
    const double ly = -s * px + c * py;
    if (std::abs(lx) <= 0.5 * box.length && std::abs(ly) <= 0.5 * box.width &&
        std::abs(pz) <= 0.5 * box.height)
      ++count;
  }
  return count;
}

}  // namespace rangebev
