#include "rangebev/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "rangebev/errors.hpp"

namespace rangebev {

void LayerSpec::validate() const {
  if (stride < 1) throw config_error("layer spec: stride must be >= 1");
  if (padding < 0) throw config_error("layer spec: padding must be >= 0");
  if (in_channels < 1 || out_channels < 1)
    throw config_error("layer spec: channel counts must be >= 1");
  if (kernel < 1) throw config_error("layer spec: kernel must be >= 1");
}

namespace {

void check_conv_shapes(const Tensor& input, const Parameter& weights, const LayerSpec& spec) {
  if (spec.kind != LayerKind::kConv2d) throw config_error("conv2d: spec kind is not conv2d");
  if (input.shape.size() != 3) throw config_error("conv2d: input must be C x H x W");
  if (input.dim(0) != spec.in_channels)
    throw config_error("conv2d: input channels " + std::to_string(input.dim(0)) +
                       " do not match spec " + std::to_string(spec.in_channels));
  const std::vector<int> wshape = {spec.out_channels, spec.in_channels, spec.kernel, spec.kernel};
  if (weights.value.shape != wshape)
    throw config_error("conv2d: weight shape " + weights.value.shape_str() + " does not match spec");
  if (conv_out_dim(input.dim(1), spec.kernel, spec.stride, spec.padding) < 1 ||
      conv_out_dim(input.dim(2), spec.kernel, spec.stride, spec.padding) < 1)
    throw config_error("conv2d: output would be empty for input " + input.shape_str());
}

// ---------------------------------------------------------------------------
// GEMM micro-kernels. Row-major throughout. OpenMP splits work over disjoint
// output tiles, and each output element is accumulated in a fixed serial
// order, so results are bitwise identical for any thread count.
// ---------------------------------------------------------------------------

// C[M][N] += A[M][K] * B[K][N]
void gemm_nn(const double* A, const double* B, double* C, int M, int K, int N) {
  constexpr int MR = 6, NR = 32;
  const int mtiles = (M + MR - 1) / MR;
  const int ntiles = (N + NR - 1) / NR;
#pragma omp parallel for collapse(2) schedule(static)
  for (int ti = 0; ti < mtiles; ++ti) {
    for (int tj = 0; tj < ntiles; ++tj) {
      const int i0 = ti * MR;
      const int j0 = tj * NR;
      const int mi = std::min(MR, M - i0);
      const int nj = std::min(NR, N - j0);
      if (mi == MR && nj == NR) {
        double acc[MR][NR];
        for (int i = 0; i < MR; ++i)
          for (int j = 0; j < NR; ++j)
            acc[i][j] = C[(static_cast<std::size_t>(i0) + i) * N + j0 + j];
        for (int k = 0; k < K; ++k) {
          const double* b = B + static_cast<std::size_t>(k) * N + j0;
          for (int i = 0; i < MR; ++i) {
            const double a = A[(static_cast<std::size_t>(i0) + i) * K + k];
            for (int j = 0; j < NR; ++j) acc[i][j] += a * b[j];
          }
        }
        for (int i = 0; i < MR; ++i)
          for (int j = 0; j < NR; ++j)
            C[(static_cast<std::size_t>(i0) + i) * N + j0 + j] = acc[i][j];
      } else {
        for (int i = 0; i < mi; ++i) {
          double* c = C + (static_cast<std::size_t>(i0) + i) * N + j0;
          for (int k = 0; k < K; ++k) {
            const double a = A[(static_cast<std::size_t>(i0) + i) * K + k];
            const double* b = B + static_cast<std::size_t>(k) * N + j0;
            for (int j = 0; j < nj; ++j) c[j] += a * b[j];
          }
        }
      }
    }
  }
}

// C[M][N] += A[M][K] * Bt[N][K]^T  (dot products over contiguous K)
void gemm_nt(const double* A, const double* Bt, double* C, int M, int K, int N) {
  constexpr int MR = 4, NR = 4, KV = 8;
  const int mtiles = (M + MR - 1) / MR;
  const int ntiles = (N + NR - 1) / NR;
#pragma omp parallel for collapse(2) schedule(static)
  for (int ti = 0; ti < mtiles; ++ti) {
    for (int tj = 0; tj < ntiles; ++tj) {
      const int i0 = ti * MR;
      const int j0 = tj * NR;
      const int mi = std::min(MR, M - i0);
      const int nj = std::min(NR, N - j0);
      if (mi == MR && nj == NR) {
        double acc[MR][NR][KV] = {};
        const int kmain = K - K % KV;
        for (int k = 0; k < kmain; k += KV) {
          for (int i = 0; i < MR; ++i) {
            const double* a = A + (static_cast<std::size_t>(i0) + i) * K + k;
            for (int j = 0; j < NR; ++j) {
              const double* b = Bt + (static_cast<std::size_t>(j0) + j) * K + k;
              for (int v = 0; v < KV; ++v) acc[i][j][v] += a[v] * b[v];
            }
          }
        }
        for (int i = 0; i < MR; ++i)
          for (int j = 0; j < NR; ++j) {
            double s = 0.0;
            for (int v = 0; v < KV; ++v) s += acc[i][j][v];
            for (int k = kmain; k < K; ++k)
              s += A[(static_cast<std::size_t>(i0) + i) * K + k] *
                   Bt[(static_cast<std::size_t>(j0) + j) * K + k];
            C[(static_cast<std::size_t>(i0) + i) * N + j0 + j] += s;
          }
      } else {
        for (int i = 0; i < mi; ++i)
          for (int j = 0; j < nj; ++j) {
            const double* a = A + (static_cast<std::size_t>(i0) + i) * K;
            const double* b = Bt + (static_cast<std::size_t>(j0) + j) * K;
            double s = 0.0;
            for (int k = 0; k < K; ++k) s += a[k] * b[k];
            C[(static_cast<std::size_t>(i0) + i) * N + j0 + j] += s;
          }
      }
    }
  }
}

// col[(ic*k+ky)*k+kx][oy*ow+ox] = input[ic][oy*s+ky-p][ox*s+kx-p], 0 outside.
void im2col(const double* in, int ci, int h, int w, int k, int s, int p, int oh, int ow,
            double* col) {
  const int K = ci * k * k;
#pragma omp parallel for schedule(static)
  for (int row = 0; row < K; ++row) {
    const int ic = row / (k * k);
    const int ky = (row / k) % k;
    const int kx = row % k;
    double* dst = col + static_cast<std::size_t>(row) * oh * ow;
    for (int oy = 0; oy < oh; ++oy) {
      const int iy = oy * s + ky - p;
      double* drow = dst + static_cast<std::size_t>(oy) * ow;
      if (iy < 0 || iy >= h) {
        std::memset(drow, 0, sizeof(double) * static_cast<std::size_t>(ow));
        continue;
      }
      const double* irow = in + (static_cast<std::size_t>(ic) * h + iy) * w;
      int x0 = 0;
      while (x0 < ow && x0 * s + kx - p < 0) ++x0;
      int x1 = ow;
      while (x1 > x0 && (x1 - 1) * s + kx - p >= w) --x1;
      for (int x = 0; x < x0; ++x) drow[x] = 0.0;
      if (s == 1) {
        const double* src = irow + kx - p;
        std::memcpy(drow + x0, src + x0, sizeof(double) * static_cast<std::size_t>(x1 - x0));
      } else {
        for (int x = x0; x < x1; ++x) drow[x] = irow[x * s + kx - p];
      }
      for (int x = x1; x < ow; ++x) drow[x] = 0.0;
    }
  }
}

// Scatter-add of a column matrix back to the input layout. Serial: distinct
// col rows collide on input cells.
void col2im_add(const double* col, int ci, int h, int w, int k, int s, int p, int oh, int ow,
                double* in) {
  const int K = ci * k * k;
  for (int row = 0; row < K; ++row) {
    const int ic = row / (k * k);
    const int ky = (row / k) % k;
    const int kx = row % k;
    const double* src = col + static_cast<std::size_t>(row) * oh * ow;
    for (int oy = 0; oy < oh; ++oy) {
      const int iy = oy * s + ky - p;
      if (iy < 0 || iy >= h) continue;
      double* irow = in + (static_cast<std::size_t>(ic) * h + iy) * w;
      const double* srow = src + static_cast<std::size_t>(oy) * ow;
      int x0 = 0;
      while (x0 < ow && x0 * s + kx - p < 0) ++x0;
      int x1 = ow;
      while (x1 > x0 && (x1 - 1) * s + kx - p >= w) --x1;
      for (int x = x0; x < x1; ++x) irow[x * s + kx - p] += srow[x];
    }
  }
}

// Reused im2col scratch. Forward/backward on one network instance is
// single-threaded; concurrent replicas each get their own buffer.
std::vector<double>& col_scratch() {
  thread_local std::vector<double> buf;
  return buf;
}

}  // namespace

Tensor conv2d_forward(const Tensor& input, const Parameter& weights, const Parameter& bias,
                      const LayerSpec& spec) {
  check_conv_shapes(input, weights, spec);
  const int h = input.dim(1), w = input.dim(2);
  const int oh = conv_out_dim(h, spec.kernel, spec.stride, spec.padding);
  const int ow = conv_out_dim(w, spec.kernel, spec.stride, spec.padding);
  const int K = spec.in_channels * spec.kernel * spec.kernel;
  const int N = oh * ow;

  Tensor out({spec.out_channels, oh, ow});
  for (int oc = 0; oc < spec.out_channels; ++oc) {
    double* orow = out.data() + static_cast<std::size_t>(oc) * N;
    const double bv = bias.value.values[static_cast<std::size_t>(oc)];
    std::fill(orow, orow + N, bv);
  }

  const bool is_1x1 = spec.kernel == 1 && spec.stride == 1 && spec.padding == 0;
  const double* col = nullptr;
  if (is_1x1) {
    col = input.data();
  } else {
    auto& buf = col_scratch();
    buf.resize(static_cast<std::size_t>(K) * N);
    im2col(input.data(), spec.in_channels, h, w, spec.kernel, spec.stride, spec.padding, oh, ow,
           buf.data());
    col = buf.data();
  }
  gemm_nn(weights.value.data(), col, out.data(), spec.out_channels, K, N);
  return out;
}

ConvGrads conv2d_backward(const Tensor& grad_out, const Tensor& cached_input,
                          const Parameter& weights, const LayerSpec& spec) {
  if (cached_input.values.empty())
    throw usage_error("conv2d_backward: missing forward cache");
  check_conv_shapes(cached_input, weights, spec);
  const int h = cached_input.dim(1), w = cached_input.dim(2);
  const int oh = conv_out_dim(h, spec.kernel, spec.stride, spec.padding);
  const int ow = conv_out_dim(w, spec.kernel, spec.stride, spec.padding);
  if (grad_out.shape != std::vector<int>{spec.out_channels, oh, ow})
    throw usage_error("conv2d_backward: grad_out shape " + grad_out.shape_str() +
                      " does not match forward output");
  const int K = spec.in_channels * spec.kernel * spec.kernel;
  const int N = oh * ow;

  ConvGrads g;
  g.grad_input = Tensor(cached_input.shape);
  g.grad_weights = Tensor(weights.value.shape);
  g.grad_bias = Tensor({spec.out_channels});

  for (int oc = 0; oc < spec.out_channels; ++oc) {
    const double* go = grad_out.data() + static_cast<std::size_t>(oc) * N;
    double s = 0.0;
    for (int n = 0; n < N; ++n) s += go[n];
    g.grad_bias.values[static_cast<std::size_t>(oc)] = s;
  }

  const bool is_1x1 = spec.kernel == 1 && spec.stride == 1 && spec.padding == 0;
  const double* col = nullptr;
  std::vector<double>* buf = nullptr;
  if (is_1x1) {
    col = cached_input.data();
  } else {
    buf = &col_scratch();
    buf->resize(static_cast<std::size_t>(K) * N);
    im2col(cached_input.data(), spec.in_channels, h, w, spec.kernel, spec.stride, spec.padding, oh,
           ow, buf->data());
    col = buf->data();
  }

  // dW[oc][ckk] = sum_n GO[oc][n] * col[ckk][n]
  gemm_nt(grad_out.data(), col, g.grad_weights.data(), spec.out_channels, N, K);

  // dcol[ckk][n] = sum_oc W^T[ckk][oc] * GO[oc][n], then scatter back.
  std::vector<double> wt(static_cast<std::size_t>(K) * spec.out_channels);
  for (int oc = 0; oc < spec.out_channels; ++oc)
    for (int q = 0; q < K; ++q)
      wt[static_cast<std::size_t>(q) * spec.out_channels + oc] =
          weights.value.values[static_cast<std::size_t>(oc) * K + q];
  if (is_1x1) {
    gemm_nn(wt.data(), grad_out.data(), g.grad_input.data(), K, spec.out_channels, N);
  } else {
    std::vector<double> dcol(static_cast<std::size_t>(K) * N, 0.0);
    gemm_nn(wt.data(), grad_out.data(), dcol.data(), K, spec.out_channels, N);
    col2im_add(dcol.data(), spec.in_channels, h, w, spec.kernel, spec.stride, spec.padding, oh, ow,
               g.grad_input.data());
  }
  return g;
}

Tensor conv2d_forward_ref(const Tensor& input, const Parameter& weights, const Parameter& bias,
                          const LayerSpec& spec) {
  check_conv_shapes(input, weights, spec);
  const int h = input.dim(1), w = input.dim(2);
  const int oh = conv_out_dim(h, spec.kernel, spec.stride, spec.padding);
  const int ow = conv_out_dim(w, spec.kernel, spec.stride, spec.padding);
  Tensor out({spec.out_channels, oh, ow});
  for (int oc = 0; oc < spec.out_channels; ++oc)
    for (int oy = 0; oy < oh; ++oy)
      for (int ox = 0; ox < ow; ++ox) {
        double acc = bias.value.values[static_cast<std::size_t>(oc)];
        for (int ic = 0; ic < spec.in_channels; ++ic)
          for (int ky = 0; ky < spec.kernel; ++ky)
            for (int kx = 0; kx < spec.kernel; ++kx) {
              const int iy = oy * spec.stride + ky - spec.padding;
              const int ix = ox * spec.stride + kx - spec.padding;
              if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
              acc += weights.value.values[static_cast<std::size_t>(
                         ((oc * spec.in_channels + ic) * spec.kernel + ky) * spec.kernel + kx)] *
                     input.at3(ic, iy, ix);
            }
        out.at3(oc, oy, ox) = acc;
      }
  return out;
}

ConvGrads conv2d_backward_ref(const Tensor& grad_out, const Tensor& cached_input,
                              const Parameter& weights, const LayerSpec& spec) {
  if (cached_input.values.empty())
    throw usage_error("conv2d_backward_ref: missing forward cache");
  check_conv_shapes(cached_input, weights, spec);
  const int h = cached_input.dim(1), w = cached_input.dim(2);
  const int oh = conv_out_dim(h, spec.kernel, spec.stride, spec.padding);
  const int ow = conv_out_dim(w, spec.kernel, spec.stride, spec.padding);
  ConvGrads g;
  g.grad_input = Tensor(cached_input.shape);
  g.grad_weights = Tensor(weights.value.shape);
  g.grad_bias = Tensor({spec.out_channels});
  for (int oc = 0; oc < spec.out_channels; ++oc)
    for (int oy = 0; oy < oh; ++oy)
      for (int ox = 0; ox < ow; ++ox) {
        const double go = grad_out.at3(oc, oy, ox);
        g.grad_bias.values[static_cast<std::size_t>(oc)] += go;
        for (int ic = 0; ic < spec.in_channels; ++ic)
          for (int ky = 0; ky < spec.kernel; ++ky)
            for (int kx = 0; kx < spec.kernel; ++kx) {
              const int iy = oy * spec.stride + ky - spec.padding;
              const int ix = ox * spec.stride + kx - spec.padding;
              if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
              const std::size_t wi = static_cast<std::size_t>(
                  ((oc * spec.in_channels + ic) * spec.kernel + ky) * spec.kernel + kx);
              g.grad_weights.values[wi] += go * cached_input.at3(ic, iy, ix);
              g.grad_input.at3(ic, iy, ix) += go * weights.value.values[wi];
            }
      }
  return g;
}

Tensor activation_forward(const Tensor& x, const LayerSpec& spec) {
  Tensor out(x.shape);
  const std::int64_t n = x.size();
  const double* in = x.data();
  double* o = out.data();
  if (spec.kind == LayerKind::kLeakyRelu) {
    const double a = spec.negative_slope;
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) o[i] = in[i] >= 0.0 ? in[i] : a * in[i];
  } else if (spec.kind == LayerKind::kSigmoid) {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) o[i] = 1.0 / (1.0 + std::exp(-in[i]));
  } else {
    throw config_error("activation_forward: spec kind is not an activation");
  }
  return out;
}

Tensor activation_backward(const Tensor& grad_out, const Tensor& cached_input,
                           const LayerSpec& spec) {
  if (!grad_out.same_shape(cached_input))
    throw usage_error("activation_backward: grad shape does not match cached input");
  Tensor out(grad_out.shape);
  const std::int64_t n = grad_out.size();
  const double* g = grad_out.data();
  const double* in = cached_input.data();
  double* o = out.data();
  if (spec.kind == LayerKind::kLeakyRelu) {
    const double a = spec.negative_slope;
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) o[i] = in[i] >= 0.0 ? g[i] : a * g[i];
  } else if (spec.kind == LayerKind::kSigmoid) {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
      const double s = 1.0 / (1.0 + std::exp(-in[i]));
      o[i] = g[i] * s * (1.0 - s);
    }
  } else {
    throw config_error("activation_backward: spec kind is not an activation");
  }
  return out;
}

LossResult bce_loss(const Tensor& pred, const Tensor& label) {
  if (!pred.same_shape(label)) throw usage_error("bce_loss: shape mismatch");
  const std::int64_t n = pred.size();
  if (n == 0) return {0.0, Tensor(pred.shape)};
  LossResult r;
  r.grad_pred = Tensor(pred.shape);
  double sum = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double y = label.values[static_cast<std::size_t>(i)];
    if (y != 0.0 && y != 1.0)
      throw data_error("bce_loss: label must be 0 or 1, got " + std::to_string(y));
    const double p = pred.values[static_cast<std::size_t>(i)];
    const double pc = std::clamp(p, kBceEps, 1.0 - kBceEps);
    sum += -(y * std::log(pc) + (1.0 - y) * std::log(1.0 - pc));
    // Clamped region is flat, so its gradient is exactly zero.
    const bool clamped = p < kBceEps || p > 1.0 - kBceEps;
    r.grad_pred.values[static_cast<std::size_t>(i)] =
        clamped ? 0.0 : (pc - y) / (pc * (1.0 - pc)) / static_cast<double>(n);
  }
  r.loss = sum / static_cast<double>(n);
  return r;
}

LossResult smooth_l1(const Tensor& pred, const Tensor& target) {
  if (!pred.same_shape(target)) throw usage_error("smooth_l1: shape mismatch");
  const std::int64_t n = pred.size();
  if (n == 0) return {0.0, Tensor(pred.shape)};
  LossResult r;
  r.grad_pred = Tensor(pred.shape);
  double sum = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double d = pred.values[static_cast<std::size_t>(i)] -
                     target.values[static_cast<std::size_t>(i)];
    const double ad = std::abs(d);
    if (ad < 1.0) {
      sum += 0.5 * d * d;
      r.grad_pred.values[static_cast<std::size_t>(i)] = d / static_cast<double>(n);
    } else {
      sum += ad - 0.5;
      r.grad_pred.values[static_cast<std::size_t>(i)] =
          (d > 0.0 ? 1.0 : -1.0) / static_cast<double>(n);
    }
  }
  r.loss = sum / static_cast<double>(n);
  return r;
}

void adam_step(const std::vector<Parameter*>& params, const AdamConfig& cfg, std::int64_t t) {
  if (t < 1) throw usage_error("adam_step: step index must be >= 1");
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (Parameter* p : params) {
    const std::int64_t n = p->value.size();
    for (std::int64_t i = 0; i < n; ++i) {
      const double g = p->grad.values[static_cast<std::size_t>(i)];
      if (!std::isfinite(g))
        throw data_error("adam_step: non-finite gradient in parameter '" + p->name +
                         "' at index " + std::to_string(i));
      double& m = p->m.values[static_cast<std::size_t>(i)];
      double& v = p->v.values[static_cast<std::size_t>(i)];
      m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
      v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
      const double mhat = m / bc1;
      const double vhat = v / bc2;
      p->value.values[static_cast<std::size_t>(i)] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
    p->zero_grad();
  }
}

double finite_diff_check(const std::function<double(const Tensor&)>& fn, const Tensor& x,
                         const Tensor& analytic_grad, double h) {
  if (!x.same_shape(analytic_grad))
    throw usage_error("finite_diff_check: gradient shape mismatch");
  Tensor probe = x;
  double worst = 0.0;
  const std::int64_t n = x.size();
  for (std::int64_t i = 0; i < n; ++i) {
    const double orig = probe.values[static_cast<std::size_t>(i)];
    probe.values[static_cast<std::size_t>(i)] = orig + h;
    const double fp = fn(probe);
    probe.values[static_cast<std::size_t>(i)] = orig - h;
    const double fm = fn(probe);
    probe.values[static_cast<std::size_t>(i)] = orig;
    const double numeric = (fp - fm) / (2.0 * h);
    const double analytic = analytic_grad.values[static_cast<std::size_t>(i)];
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    worst = std::max(worst, std::abs(analytic - numeric) / denom);
  }
  return worst;
}

void glorot_init(Parameter& p, int fan_in, int fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (double& v : p.value.values) v = rng.uniform(-bound, bound);
}

void Stack::add_conv(const std::string& name, int in_ch, int out_ch, int k, int s, int p) {
  Entry e;
  e.spec = LayerSpec::conv(in_ch, out_ch, k, s, p);
  e.w = Parameter(name + ".w", {out_ch, in_ch, k, k});
  e.b = Parameter(name + ".b", {out_ch});
  entries.push_back(std::move(e));
}

void Stack::add_leaky_relu(double slope) {
  Entry e;
  e.spec = LayerSpec::leaky_relu(slope);
  entries.push_back(std::move(e));
}

void Stack::add_sigmoid() {
  Entry e;
  e.spec = LayerSpec::sigmoid();
  entries.push_back(std::move(e));
}

void Stack::init(Rng& rng) {
  for (Entry& e : entries) {
    if (!e.spec.has_params()) continue;
    const int k2 = e.spec.kernel * e.spec.kernel;
    glorot_init(e.w, e.spec.in_channels * k2, e.spec.out_channels * k2, rng);
    e.b.value.fill(0.0);
  }
}

Tensor Stack::forward(const Tensor& x, std::vector<Tensor>* cache) const {
  if (cache) cache->clear();
  Tensor cur = x;
  for (const Entry& e : entries) {
    if (cache) cache->push_back(cur);
    if (e.spec.kind == LayerKind::kConv2d)
      cur = conv2d_forward(cur, e.w, e.b, e.spec);
    else
      cur = activation_forward(cur, e.spec);
  }
  return cur;
}

Tensor Stack::backward(const Tensor& grad_out, const std::vector<Tensor>& cache,
                       bool accumulate_param_grads) {
  if (cache.size() != entries.size())
    throw usage_error("Stack::backward: cache size does not match layer count");
  Tensor g = grad_out;
  for (std::size_t i = entries.size(); i-- > 0;) {
    Entry& e = entries[i];
    if (e.spec.kind == LayerKind::kConv2d) {
      ConvGrads cg = conv2d_backward(g, cache[i], e.w, e.spec);
      if (accumulate_param_grads) {
        for (std::int64_t j = 0; j < e.w.grad.size(); ++j)
          e.w.grad.values[static_cast<std::size_t>(j)] +=
              cg.grad_weights.values[static_cast<std::size_t>(j)];
        for (std::int64_t j = 0; j < e.b.grad.size(); ++j)
          e.b.grad.values[static_cast<std::size_t>(j)] +=
              cg.grad_bias.values[static_cast<std::size_t>(j)];
      }
      g = std::move(cg.grad_input);
    } else {
      g = activation_backward(g, cache[i], e.spec);
    }
  }
  return g;
}

void Stack::collect_params(std::vector<Parameter*>& out) {
  for (Entry& e : entries)
    if (e.spec.has_params()) {
      out.push_back(&e.w);
      out.push_back(&e.b);
    }
}

void Stack::collect_params(std::vector<const Parameter*>& out) const {
  for (const Entry& e : entries)
    if (e.spec.has_params()) {
      out.push_back(&e.w);
      out.push_back(&e.b);
    }
}

}  // namespace rangebev
