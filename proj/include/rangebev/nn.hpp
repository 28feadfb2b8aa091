#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "rangebev/rng.hpp"
#include "rangebev/tensor.hpp"

namespace rangebev {

/// Probability clamp for binary cross entropy; log() is undefined at 0 and 1.
inline constexpr double kBceEps = 1e-7;

enum class LayerKind { kConv2d, kLeakyRelu, kSigmoid, kLinear };

struct LayerSpec {
  LayerKind kind = LayerKind::kConv2d;
  int in_channels = 1;
  int out_channels = 1;
  int kernel = 1;
  int stride = 1;
  int padding = 0;
  double negative_slope = 0.1;  // leaky-relu slope

  static LayerSpec conv(int in_ch, int out_ch, int k, int s, int p) {
    LayerSpec spec;
    spec.kind = LayerKind::kConv2d;
    spec.in_channels = in_ch;
    spec.out_channels = out_ch;
    spec.kernel = k;
    spec.stride = s;
    spec.padding = p;
    spec.validate();
    return spec;
  }
  static LayerSpec leaky_relu(double slope = 0.1) {
    LayerSpec spec;
    spec.kind = LayerKind::kLeakyRelu;
    spec.negative_slope = slope;
    return spec;
  }
  static LayerSpec sigmoid() {
    LayerSpec spec;
    spec.kind = LayerKind::kSigmoid;
    return spec;
  }

  void validate() const;
  bool has_params() const { return kind == LayerKind::kConv2d || kind == LayerKind::kLinear; }
};

/// Output spatial size of a convolution along one axis.
inline int conv_out_dim(int in, int kernel, int stride, int pad) {
  return (in + 2 * pad - kernel) / stride + 1;
}

struct ConvGrads {
  Tensor grad_input;
  Tensor grad_weights;
  Tensor grad_bias;
};

// Optimized path: im2col + register-tiled GEMM. Bitwise deterministic for
// any thread count (each output element is accumulated in a fixed order by
// exactly one thread).
Tensor conv2d_forward(const Tensor& input, const Parameter& weights, const Parameter& bias,
                      const LayerSpec& spec);
ConvGrads conv2d_backward(const Tensor& grad_out, const Tensor& cached_input,
                          const Parameter& weights, const LayerSpec& spec);

// Serial reference path: direct six-nested-loop convolution. Kept as the
// oracle for the optimized path and for the kernel benchmark.
Tensor conv2d_forward_ref(const Tensor& input, const Parameter& weights, const Parameter& bias,
                          const LayerSpec& spec);
ConvGrads conv2d_backward_ref(const Tensor& grad_out, const Tensor& cached_input,
                              const Parameter& weights, const LayerSpec& spec);

Tensor activation_forward(const Tensor& x, const LayerSpec& spec);
Tensor activation_backward(const Tensor& grad_out, const Tensor& cached_input,
                           const LayerSpec& spec);

struct LossResult {
  double loss = 0.0;
  Tensor grad_pred;
};

/// Mean binary cross entropy over all entries. Predictions are clamped to
/// [kBceEps, 1-kBceEps]; labels must be exactly 0 or 1.
LossResult bce_loss(const Tensor& pred, const Tensor& label);

/// Mean Huber loss with the quadratic/linear transition at |d| = 1.
LossResult smooth_l1(const Tensor& pred, const Tensor& target);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam update over `params` at step t (1-based).
/// Gradients are zeroed after the update. Throws data_error on any
/// non-finite gradient.
void adam_step(const std::vector<Parameter*>& params, const AdamConfig& cfg, std::int64_t t);

/// Max relative error between `analytic` and central finite differences of
/// `fn` at `x`. Denominator is max(|analytic|, |numeric|, 1e-8).
double finite_diff_check(const std::function<double(const Tensor&)>& fn, const Tensor& x,
                         const Tensor& analytic_grad, double h);

/// Uniform init in +/- sqrt(6 / (fan_in + fan_out)).
void glorot_init(Parameter& p, int fan_in, int fan_out, Rng& rng);

/// A sequence of conv / activation layers with per-layer input caches.
struct Stack {
  struct Entry {
    LayerSpec spec;
    Parameter w;
    Parameter b;
  };
  std::vector<Entry> entries;

  void add_conv(const std::string& name, int in_ch, int out_ch, int k, int s, int p);
  void add_leaky_relu(double slope = 0.1);
  void add_sigmoid();

  void init(Rng& rng);

  /// Forward pass. When `cache` is non-null it receives each layer's input
  /// (required later by backward).
  Tensor forward(const Tensor& x, std::vector<Tensor>* cache) const;

  /// Backward pass; returns the gradient w.r.t. the stack input. Parameter
  /// gradients are accumulated only when `accumulate_param_grads` is set
  /// (the frozen-discriminator pass turns it off).
  Tensor backward(const Tensor& grad_out, const std::vector<Tensor>& cache,
                  bool accumulate_param_grads);

  void collect_params(std::vector<Parameter*>& out);
  void collect_params(std::vector<const Parameter*>& out) const;
};

}  // namespace rangebev
