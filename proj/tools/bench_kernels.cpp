// Micro-benchmark comparing the optimized conv kernels against the serial
// reference implementation, over the layer shapes the detector actually uses.
#include <chrono>
#include <cstdio>
#include <vector>

#include "rangebev/nn.hpp"
#include "rangebev/rng.hpp"

using namespace rangebev;

namespace {

template <typename F>
double time_ms(F&& f, int reps) {
  const auto t0 = std::chrono::steady_clock::now();
  for (int r = 0; r < reps; ++r) f();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

}  // namespace

int main() {
  struct Shape {
    const char* name;
    int ci, h, w, co, k, s, p;
  };
  const std::vector<Shape> shapes = {
      {"adapted conv1", 3, 128, 144, 16, 3, 1, 1}, {"adapted conv2", 16, 128, 144, 32, 3, 2, 1},
      {"adapted conv3", 32, 64, 72, 32, 3, 2, 1},  {"shared conv", 32, 32, 36, 32, 3, 1, 1},
      {"head 1x1", 32, 32, 36, 7, 1, 1, 0},        {"disc conv", 32, 32, 36, 32, 3, 1, 1},
  };

  std::printf("%-14s %12s %12s %8s | %12s %12s %8s\n", "layer", "fwd opt", "fwd ref", "speedup",
              "bwd opt", "bwd ref", "speedup");
  double tot_opt = 0.0, tot_ref = 0.0;
  for (const Shape& sp : shapes) {
    Rng rng(1234);
    LayerSpec spec = LayerSpec::conv(sp.ci, sp.co, sp.k, sp.s, sp.p);
    Parameter w("w", {sp.co, sp.ci, sp.k, sp.k});
    Parameter b("b", {sp.co});
    for (double& v : w.value.values) v = rng.uniform(-1, 1);
    Tensor x({sp.ci, sp.h, sp.w});
    for (double& v : x.values) v = rng.uniform(0, 1);

    Tensor out = conv2d_forward(x, w, b, spec);
    Tensor go(out.shape);
    for (double& v : go.values) v = rng.uniform(-1, 1);

    const double flop = 2.0 * out.size() * sp.ci * sp.k * sp.k;
    const int reps = std::max(3, static_cast<int>(2e8 / flop));

    const double f_opt = time_ms([&] { conv2d_forward(x, w, b, spec); }, reps);
    const double f_ref = time_ms([&] { conv2d_forward_ref(x, w, b, spec); }, reps);
    const double b_opt = time_ms([&] { conv2d_backward(go, x, w, spec); }, reps);
    const double b_ref = time_ms([&] { conv2d_backward_ref(go, x, w, spec); }, reps);

    std::printf("%-14s %9.3f ms %9.3f ms %7.2fx | %9.3f ms %9.3f ms %7.2fx\n", sp.name, f_opt,
                f_ref, f_ref / f_opt, b_opt, b_ref, b_ref / b_opt);
    tot_opt += f_opt + b_opt;
    tot_ref += f_ref + b_ref;
  }
  std::printf("%-14s %9.3f ms (opt)  vs  %9.3f ms (ref)  -> %.2fx overall\n", "total", tot_opt,
              tot_ref, tot_ref / tot_opt);
  return 0;
}
