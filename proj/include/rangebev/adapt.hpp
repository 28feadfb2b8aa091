#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "rangebev/bev.hpp"
#include "rangebev/box.hpp"
#include "rangebev/nn.hpp"

namespace rangebev {

/// Object signature in point-cloud space: width, height and yaw. Scale
/// consistency makes these comparable across ranges.
struct ObjectDescriptor {
  double width = 0.0;
  double height = 0.0;
  double yaw = 0.0;

  static ObjectDescriptor of(const Box3D& box) { return {box.width, box.height, box.yaw}; }
};

/// Indices into the input list: F holds objects beyond the threshold,
/// N the rest. Objects exactly at the threshold are near.
std::pair<std::vector<int>, std::vector<int>> partition_by_range(
    const std::vector<LabeledObject>& objects, double threshold);

/// Pooled aligned-layer feature of one object: channel-wise mean over the
/// cells covered by its BEV footprint. `cells` is kept for distributing
/// gradients back to the feature map.
struct ObjectFeature {
  ObjectDescriptor descriptor;
  std::vector<double> f;   // one value per aligned channel
  std::vector<int> cells;  // aligned-layer cell indices that were pooled
  int scene = 0;           // batch index of the owning scene
};

/// Returns false (and leaves `out` untouched) when the box misses the grid;
/// the caller skips such objects.
bool pool_object_feature(const Tensor& aligned, const Box3D& box, const GridSpec& grid,
                         int feature_stride, ObjectFeature& out);

/// Distribute a pooled-feature gradient uniformly back over the pooled cells.
void pool_backward(const std::vector<double>& grad_f, const std::vector<int>& cells,
                   Tensor& grad_aligned);

/// Similarity weights of near-range objects for one far-range target:
/// softmax of negative L1 descriptor distance (yaw difference wrapped to
/// [0, pi]). Weights are nonnegative and sum to 1.
std::vector<double> local_weights(const ObjectDescriptor& target,
                                  const std::vector<ObjectDescriptor>& near_descriptors);

/// Weighted average of near-range object features. The result is a plain
/// value with no gradient path back to the near features.
std::vector<double> target_feature(const std::vector<double>& weights,
                                   const std::vector<std::vector<double>>& near_features);

struct LocalLoss {
  double loss = 0.0;
  std::vector<std::vector<double>> grad_f;  // d loss / d f_t, far objects only
};

/// Sum over far objects of the squared distance to their target features.
/// Gradients exist for the far features only; the targets are constants.
LocalLoss local_loss(const std::vector<std::vector<double>>& far_features,
                     const std::vector<std::vector<double>>& target_features);

/// Patch discriminator over the aligned layer: three 3x3 convs (receptive
/// field about 7x7 cells) ending in a per-cell sigmoid probability map.
struct Discriminator {
  Stack net;

  explicit Discriminator(int in_channels = 32, double slope = 0.1);
  void init(std::uint64_t seed);

  Tensor forward(const Tensor& aligned, std::vector<Tensor>* cache) const;
  /// Returns the gradient w.r.t. the aligned input. Parameter gradients are
  /// accumulated only when `accumulate_param_grads` is set.
  Tensor backward(const Tensor& grad_probs, const std::vector<Tensor>& cache,
                  bool accumulate_param_grads);

  std::vector<Parameter*> params();
  std::vector<const Parameter*> params() const;
  void zero_grads();
};

struct MaskedLoss {
  double loss = 0.0;
  Tensor grad_probs;
  int cells_used = 0;
};

/// Discriminator objective: BCE with label 1 on near cells and 0 on far
/// cells, averaged over included cells. Excluded-near cells contribute
/// nothing.
MaskedLoss discriminator_loss(const Tensor& probs, const RangeMask& mask);

/// Generator objective: flipped-label BCE on far cells only (far features
/// should read as near). Zero when the mask has no far cells.
MaskedLoss generator_adversarial_loss(const Tensor& probs, const RangeMask& mask);

/// Zero a gradient map at excluded-near cells; adaptation gradients never
/// touch the exclusion zone.
void apply_exclusion_mask(Tensor& grad_aligned, const RangeMask& mask);

}  // namespace rangebev
