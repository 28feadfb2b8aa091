#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "rangebev/bev.hpp"
#include "rangebev/box.hpp"
#include "rangebev/nn.hpp"

namespace rangebev {

/// Regression anchor; every cell regresses against one nominal car.
inline constexpr double kAnchorLength = 4.0;
inline constexpr double kAnchorWidth = 1.8;
/// Detections carry a fixed ground-car vertical profile.
inline constexpr double kNominalZ = 0.8;
inline constexpr double kNominalHeight = 1.6;
/// Head channels: [objectness, dx, dy, dlog_l, dlog_w, sin yaw, cos yaw].
inline constexpr int kHeadChannels = 7;

/// Two-stage BEV detector with an explicit adapted / aligned / shared split.
/// The aligned layer is the adapted stack's output; adaptation losses inject
/// gradient there and can never touch shared or head parameters.
struct Detector {
  Stack adapted;  // conv3->16 s1, conv16->32 s2, conv32->32 s2, leaky-relu between
  Stack shared;   // two conv32->32 s1 blocks
  Stack head;     // conv32->7 k1

  struct Cache {
    std::vector<Tensor> adapted_c, shared_c, head_c;
    Tensor aligned;
  };

  struct Output {
    Tensor aligned;  // 32 x H/4 x W/4
    Tensor head;     // 7 x H/4 x W/4
  };

  explicit Detector(double slope = 0.1);
  void init(std::uint64_t seed);

  Output forward(const Tensor& image, Cache* cache) const;

  /// Backward from the detection-head gradient, optionally adding an extra
  /// gradient at the aligned layer (the adaptation losses). Parameter
  /// gradients accumulate into each stack.
  void backward(const Tensor& grad_head, const Tensor* extra_grad_aligned, const Cache& cache);

  /// Adaptation-only backward: gradient enters at the aligned layer and
  /// reaches adapted-stack parameters only.
  void backward_from_aligned(const Tensor& grad_aligned, const Cache& cache);

  std::vector<Parameter*> params();
  std::vector<Parameter*> adapted_params();
  std::vector<Parameter*> shared_and_head_params();
  std::vector<const Parameter*> params() const;

  void zero_grads();
};

enum class CellKind : std::int8_t { kNegative = 0, kPositive = 1, kIgnored = 2 };

struct TargetMap {
  int h = 0, w = 0;
  std::vector<CellKind> kind;
  std::vector<std::array<double, 6>> reg;  // valid at positive cells
  int positives = 0;
  int negatives = 0;
  int dropped_gt = 0;  // gts that could not claim a cell

  CellKind at(int i, int j) const { return kind[static_cast<std::size_t>(i) * w + j]; }
};

/// One positive cell per ground-truth BEV center; the 8-neighborhood of each
/// positive is ignored. When two gts share a cell the nearer one keeps it and
/// the other spills to its own nearest free cell (dropped when none is free).
TargetMap assign_targets(const std::vector<LabeledObject>& gts, const GridSpec& grid,
                         int feature_stride);

struct DetectionLoss {
  double loss = 0.0;
  double objectness_term = 0.0;
  double regression_term = 0.0;
  Tensor grad_head;
};

/// BCE on sigmoid(objectness) over positive+negative cells plus
/// reg_weight * smooth-L1 over positive-cell regression channels.
DetectionLoss detection_loss(const Tensor& head, const TargetMap& targets, double reg_weight);

struct Detection {
  Box3D box;
  double score = 0.0;
  double range = 0.0;
};

/// Decode per-cell boxes above score_thresh and apply greedy rotated-IoU NMS
/// (detections overlapping a kept one with IoU > iou_thresh are suppressed).
std::vector<Detection> decode_and_nms(const Tensor& head, const GridSpec& grid,
                                      double score_thresh, double iou_thresh);

/// Flat binary checkpoint: layer table (name, shape) followed by raw 64-bit
/// little-endian values; reload is bit-exact.
void save_checkpoint(const std::string& path, const std::vector<const Parameter*>& params);
void load_checkpoint(const std::string& path, const std::vector<Parameter*>& params);

}  // namespace rangebev
