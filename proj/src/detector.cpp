#include "rangebev/detector.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "rangebev/errors.hpp"
#include "rangebev/geometry.hpp"
#include "rangebev/rng.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace rangebev {

Detector::Detector(double slope) {
  adapted.add_conv("adapted.conv1", 3, 16, 3, 1, 1);
  adapted.add_leaky_relu(slope);
  adapted.add_conv("adapted.conv2", 16, 32, 3, 2, 1);
  adapted.add_leaky_relu(slope);
  adapted.add_conv("adapted.conv3", 32, 32, 3, 2, 1);
  adapted.add_leaky_relu(slope);

  shared.add_conv("shared.conv1", 32, 32, 3, 1, 1);
  shared.add_leaky_relu(slope);
  shared.add_conv("shared.conv2", 32, 32, 3, 1, 1);
  shared.add_leaky_relu(slope);

  head.add_conv("head.conv", 32, kHeadChannels, 1, 1, 0);
}

void Detector::init(std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0xde7ec7));
  adapted.init(rng);
  shared.init(rng);
  head.init(rng);
}

Detector::Output Detector::forward(const Tensor& image, Cache* cache) const {
  Output out;
  if (cache) {
    out.aligned = adapted.forward(image, &cache->adapted_c);
    cache->aligned = out.aligned;
    const Tensor s = shared.forward(out.aligned, &cache->shared_c);
    out.head = head.forward(s, &cache->head_c);
  } else {
    out.aligned = adapted.forward(image, nullptr);
    out.head = head.forward(shared.forward(out.aligned, nullptr), nullptr);
  }
  return out;
}

void Detector::backward(const Tensor& grad_head, const Tensor* extra_grad_aligned,
                        const Cache& cache) {
  Tensor g = head.backward(grad_head, cache.head_c, true);
  g = shared.backward(g, cache.shared_c, true);
  if (extra_grad_aligned) {
    if (!g.same_shape(*extra_grad_aligned))
      throw usage_error("Detector::backward: aligned gradient shape mismatch");
    for (std::int64_t i = 0; i < g.size(); ++i)
      g.values[static_cast<std::size_t>(i)] +=
          extra_grad_aligned->values[static_cast<std::size_t>(i)];
  }
  adapted.backward(g, cache.adapted_c, true);
}

void Detector::backward_from_aligned(const Tensor& grad_aligned, const Cache& cache) {
  adapted.backward(grad_aligned, cache.adapted_c, true);
}

std::vector<Parameter*> Detector::params() {
  std::vector<Parameter*> out;
  adapted.collect_params(out);
  shared.collect_params(out);
  head.collect_params(out);
  return out;
}

std::vector<Parameter*> Detector::adapted_params() {
  std::vector<Parameter*> out;
  adapted.collect_params(out);
  return out;
}

std::vector<Parameter*> Detector::shared_and_head_params() {
  std::vector<Parameter*> out;
  shared.collect_params(out);
  head.collect_params(out);
  return out;
}

std::vector<const Parameter*> Detector::params() const {
  std::vector<const Parameter*> out;
  adapted.collect_params(out);
  shared.collect_params(out);
  head.collect_params(out);
  return out;
}

void Detector::zero_grads() {
  for (Parameter* p : params()) p->zero_grad();
}

TargetMap assign_targets(const std::vector<LabeledObject>& gts, const GridSpec& grid,
                         int feature_stride) {
  TargetMap t;
  t.h = grid.nx / feature_stride;
  t.w = grid.ny / feature_stride;
  t.kind.assign(static_cast<std::size_t>(t.h) * t.w, CellKind::kNegative);
  t.reg.assign(static_cast<std::size_t>(t.h) * t.w, {});
  const double acell = grid.cell * feature_stride;

  // claimed[cell] = index of the gt that owns it
  std::vector<int> claimed(static_cast<std::size_t>(t.h) * t.w, -1);
  auto bin_index = [](double v, double origin, double cell) -> int {
    const double f = (v - origin) / cell;
    int i = static_cast<int>(std::floor(f));
    // a center exactly on a boundary belongs to the lower cell (offset +0.5)
    if (f == std::floor(f) && i > 0) --i;
    return i;
  };
  auto cell_of = [&](double x, double y) -> int {
    const int i = bin_index(x, grid.x0, acell);
    const int j = bin_index(y, grid.y0, acell);
    if (i < 0 || i >= t.h || j < 0 || j >= t.w) return -1;
    return i * t.w + j;
  };
  auto center_dist = [&](int cell, const Box3D& b) {
    const double cx = grid.x0 + (cell / t.w + 0.5) * acell;
    const double cy = grid.y0 + (cell % t.w + 0.5) * acell;
    return std::hypot(cx - b.cx, cy - b.cy);
  };

  // first pass: every gt claims its containing cell; nearest center wins ties
  std::vector<int> pending;
  for (std::size_t gi = 0; gi < gts.size(); ++gi) {
    const int cell = cell_of(gts[gi].box.cx, gts[gi].box.cy);
    if (cell < 0) {
      t.dropped_gt++;
      continue;
    }
    int& owner = claimed[static_cast<std::size_t>(cell)];
    if (owner < 0) {
      owner = static_cast<int>(gi);
    } else if (center_dist(cell, gts[gi].box) <
               center_dist(cell, gts[static_cast<std::size_t>(owner)].box)) {
      pending.push_back(owner);
      owner = static_cast<int>(gi);
    } else {
      pending.push_back(static_cast<int>(gi));
    }
  }
  // displaced gts spill to their nearest free cell
  for (int gi : pending) {
    const Box3D& b = gts[static_cast<std::size_t>(gi)].box;
    int best = -1;
    double best_d = 1e300;
    for (int cell = 0; cell < t.h * t.w; ++cell) {
      if (claimed[static_cast<std::size_t>(cell)] >= 0) continue;
      const double d = center_dist(cell, b);
      if (d < best_d) {
        best_d = d;
        best = cell;
      }
    }
    if (best < 0) {
      t.dropped_gt++;
      continue;
    }
    claimed[static_cast<std::size_t>(best)] = gi;
  }

  for (int cell = 0; cell < t.h * t.w; ++cell) {
    const int gi = claimed[static_cast<std::size_t>(cell)];
    if (gi < 0) continue;
    const Box3D& b = gts[static_cast<std::size_t>(gi)].box;
    const int i = cell / t.w;
    const int j = cell % t.w;
    const double cx = grid.x0 + (i + 0.5) * acell;
    const double cy = grid.y0 + (j + 0.5) * acell;
    t.kind[static_cast<std::size_t>(cell)] = CellKind::kPositive;
    t.reg[static_cast<std::size_t>(cell)] = {
        (b.cx - cx) / acell,           (b.cy - cy) / acell,
        std::log(b.length / kAnchorLength), std::log(b.width / kAnchorWidth),
        std::sin(b.yaw),               std::cos(b.yaw)};
  }

  // 8-neighborhoods of positives become ignore cells
  for (int i = 0; i < t.h; ++i)
    for (int j = 0; j < t.w; ++j) {
      if (t.at(i, j) != CellKind::kPositive) continue;
      for (int di = -1; di <= 1; ++di)
        for (int dj = -1; dj <= 1; ++dj) {
          const int ni = i + di, nj = j + dj;
          if (ni < 0 || ni >= t.h || nj < 0 || nj >= t.w) continue;
          CellKind& k = t.kind[static_cast<std::size_t>(ni) * t.w + nj];
          if (k == CellKind::kNegative) k = CellKind::kIgnored;
        }
    }

  for (CellKind k : t.kind) {
    if (k == CellKind::kPositive) t.positives++;
    if (k == CellKind::kNegative) t.negatives++;
  }
  return t;
}

DetectionLoss detection_loss(const Tensor& head, const TargetMap& targets, double reg_weight) {
  if (head.shape != std::vector<int>{kHeadChannels, targets.h, targets.w})
    throw usage_error("detection_loss: head shape " + head.shape_str() +
                      " does not match target map");
  DetectionLoss out;
  out.grad_head = Tensor(head.shape);
  const int cells = targets.h * targets.w;
  const int included = targets.positives + targets.negatives;
  if (included == 0 && targets.positives == 0) return out;  // everything ignored

  // objectness: BCE over included cells via sigmoid probabilities
  std::vector<int> included_cells;
  included_cells.reserve(static_cast<std::size_t>(included));
  Tensor probs({included}), labels({included});
  int n = 0;
  for (int c = 0; c < cells; ++c) {
    const CellKind k = targets.kind[static_cast<std::size_t>(c)];
    if (k == CellKind::kIgnored) continue;
    const double logit = head.values[static_cast<std::size_t>(c)];
    probs.values[static_cast<std::size_t>(n)] = 1.0 / (1.0 + std::exp(-logit));
    labels.values[static_cast<std::size_t>(n)] = k == CellKind::kPositive ? 1.0 : 0.0;
    included_cells.push_back(c);
    ++n;
  }
  if (n > 0) {
    const LossResult bce = bce_loss(probs, labels);
    out.objectness_term = bce.loss;
    for (int i = 0; i < n; ++i) {
      const double p = probs.values[static_cast<std::size_t>(i)];
      const double dsig = p * (1.0 - p);
      out.grad_head.values[static_cast<std::size_t>(included_cells[static_cast<std::size_t>(i)])] =
          bce.grad_pred.values[static_cast<std::size_t>(i)] * dsig;
    }
  }

  // regression: smooth-L1 over the 6 channels of positive cells
  if (targets.positives > 0) {
    const int m = targets.positives * 6;
    Tensor pred({m}), target({m});
    std::vector<int> cell_of(static_cast<std::size_t>(targets.positives));
    int pi = 0;
    for (int c = 0; c < cells; ++c) {
      if (targets.kind[static_cast<std::size_t>(c)] != CellKind::kPositive) continue;
      cell_of[static_cast<std::size_t>(pi)] = c;
      for (int ch = 0; ch < 6; ++ch) {
        pred.values[static_cast<std::size_t>(pi * 6 + ch)] =
            head.values[static_cast<std::size_t>((ch + 1) * cells + c)];
        target.values[static_cast<std::size_t>(pi * 6 + ch)] =
            targets.reg[static_cast<std::size_t>(c)][static_cast<std::size_t>(ch)];
      }
      ++pi;
    }
    const LossResult huber = smooth_l1(pred, target);
    out.regression_term = reg_weight * huber.loss;
    for (int p = 0; p < targets.positives; ++p)
      for (int ch = 0; ch < 6; ++ch)
        out.grad_head.values[static_cast<std::size_t>(
            (ch + 1) * cells + cell_of[static_cast<std::size_t>(p)])] =
            reg_weight * huber.grad_pred.values[static_cast<std::size_t>(p * 6 + ch)];
  }

  out.loss = out.objectness_term + out.regression_term;
  return out;
}

std::vector<Detection> decode_and_nms(const Tensor& head, const GridSpec& grid,
                                      double score_thresh, double iou_thresh) {
  if (score_thresh <= 0.0 || score_thresh >= 1.0 || iou_thresh <= 0.0 || iou_thresh >= 1.0)
    throw config_error("decode_and_nms: thresholds must be in (0, 1)");
  const int h = head.dim(1), w = head.dim(2);
  const int cells = h * w;
  const double acell = grid.aligned_cell();

  std::vector<Detection> cands;
  for (int c = 0; c < cells; ++c) {
    const double score = 1.0 / (1.0 + std::exp(-head.values[static_cast<std::size_t>(c)]));
    if (score < score_thresh) continue;
    const int i = c / w;
    const int j = c % w;
    Detection d;
    d.score = score;
    const double dx = head.values[static_cast<std::size_t>(1 * cells + c)];
    const double dy = head.values[static_cast<std::size_t>(2 * cells + c)];
    d.box.cx = std::clamp(grid.x0 + (i + 0.5) * acell + dx * acell, grid.x0, grid.x1);
    d.box.cy = std::clamp(grid.y0 + (j + 0.5) * acell + dy * acell, grid.y0, grid.y1);
    d.box.length = kAnchorLength *
                   std::exp(std::clamp(head.values[static_cast<std::size_t>(3 * cells + c)], -4.0, 4.0));
    d.box.width = kAnchorWidth *
                  std::exp(std::clamp(head.values[static_cast<std::size_t>(4 * cells + c)], -4.0, 4.0));
    d.box.cz = kNominalZ;
    d.box.height = kNominalHeight;
    d.box.yaw = std::atan2(head.values[static_cast<std::size_t>(5 * cells + c)],
                           head.values[static_cast<std::size_t>(6 * cells + c)]);
    d.range = d.box.bev_range();
    cands.push_back(d);
  }

  std::sort(cands.begin(), cands.end(), [](const Detection& a, const Detection& b) {
    return a.score > b.score;
  });

  std::vector<Detection> kept;
  std::vector<bool> suppressed(cands.size(), false);
  for (std::size_t i = 0; i < cands.size(); ++i) {
    if (suppressed[i]) continue;
    kept.push_back(cands[i]);
    for (std::size_t j = i + 1; j < cands.size(); ++j) {
      if (suppressed[j]) continue;
      if (rotated_bev_iou(cands[i].box, cands[j].box) > iou_thresh) suppressed[j] = true;
    }
  }
  return kept;
}

namespace {

template <typename T>
void write_raw(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::ifstream& in, const std::string& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw format_error("checkpoint '" + path + "': unexpected end of file");
  return v;
}

constexpr char kCkptMagic[8] = {'B', 'E', 'V', 'C', 'K', 'P', 'T', '1'};

}  // namespace

void save_checkpoint(const std::string& path, const std::vector<const Parameter*>& params) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw data_error("cannot write checkpoint '" + path + "'");
  out.write(kCkptMagic, 8);
  write_raw(out, static_cast<std::uint32_t>(params.size()));
  for (const Parameter* p : params) {
    write_raw(out, static_cast<std::uint32_t>(p->name.size()));
    out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    write_raw(out, static_cast<std::uint32_t>(p->value.shape.size()));
    for (int d : p->value.shape) write_raw(out, static_cast<std::int32_t>(d));
  }
  for (const Parameter* p : params)
    out.write(reinterpret_cast<const char*>(p->value.values.data()),
              static_cast<std::streamsize>(p->value.values.size() * sizeof(double)));
}

void load_checkpoint(const std::string& path, const std::vector<Parameter*>& params) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open checkpoint '" + path + "'");
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kCkptMagic, 8) != 0)
    throw format_error("checkpoint '" + path + "': bad magic");
  const auto count = read_raw<std::uint32_t>(in, path);
  if (count != params.size())
    throw format_error("checkpoint '" + path + "': has " + std::to_string(count) +
                       " entries, expected " + std::to_string(params.size()));
  for (Parameter* p : params) {
    const auto name_len = read_raw<std::uint32_t>(in, path);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (!in || name != p->name)
      throw format_error("checkpoint '" + path + "': layer '" + name + "' does not match '" +
                         p->name + "'");
    const auto ndim = read_raw<std::uint32_t>(in, path);
    std::vector<int> shape(ndim);
    for (auto& d : shape) d = read_raw<std::int32_t>(in, path);
    if (shape != p->value.shape)
      throw format_error("checkpoint '" + path + "': shape mismatch for layer '" + name + "'");
  }
  for (Parameter* p : params) {
    in.read(reinterpret_cast<char*>(p->value.values.data()),
            static_cast<std::streamsize>(p->value.values.size() * sizeof(double)));
    if (!in) throw format_error("checkpoint '" + path + "': value block truncated");
  }
}

}  // namespace rangebev
