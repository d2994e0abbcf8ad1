// Timing comparison of the OpenMP kernels against their serial references.
// Run: qmap_bench [workers]

#include "qmap/frmaps.hpp"
#include "qmap/imgproc.hpp"
#include "qmap/nn_kernels.hpp"
#include "qmap/parallel.hpp"
#include "qmap/ref_kernels.hpp"
#include "qmap/rng.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>

using namespace qmap;
using nn::Tensor4;

namespace {

double time_ms(const std::function<void()>& fn, int reps) {
    fn(); // warm up
    auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < reps; ++i) fn();
    auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

void row(const std::string& name, double serial_ms, double omp_ms) {
    std::printf("%-28s %10.3f ms %10.3f ms %8.2fx\n", name.c_str(), serial_ms, omp_ms,
                serial_ms / omp_ms);
}

Tensor4 rand_tensor(int n, int c, int h, int w, Rng& rng) {
    Tensor4 t(n, c, h, w);
    for (double& v : t.data) v = rng.uniform(-1.0, 1.0);
    return t;
}

} // namespace

int main(int argc, char** argv) {
    int workers = argc > 1 ? std::atoi(argv[1]) : 0;
    set_workers(workers);
    std::printf("workers: %d\n", qmap::workers());
    std::printf("%-28s %13s %13s %9s\n", "kernel", "serial", "openmp", "speedup");

    Rng rng(1);

    { // conv3x3 forward, generator-like shape
        Tensor4 in = rand_tensor(8, 32, 48, 48, rng);
        Tensor4 w = rand_tensor(32, 32, 3, 3, rng);
        Tensor4 b = rand_tensor(32, 1, 1, 1, rng);
        Tensor4 out;
        double s = time_ms([&] { refk::conv3x3_fwd(in, w, b, out); }, 3);
        double p = time_ms([&] { nn::kern::conv3x3_fwd(in, w, b, out); }, 3);
        row("conv3x3_fwd 8x32x48x48", s, p);
    }
    { // conv3x3 weight gradients
        Tensor4 in = rand_tensor(8, 32, 24, 24, rng);
        Tensor4 dout = rand_tensor(8, 48, 24, 24, rng);
        Tensor4 dw, db;
        double s = time_ms([&] { refk::conv3x3_bwd_params(dout, in, dw, db); }, 3);
        double p = time_ms([&] { nn::kern::conv3x3_bwd_params(dout, in, dw, db); }, 3);
        row("conv3x3_bwd_w 8x32x24x24", s, p);
    }
    { // deconv forward
        Tensor4 in = rand_tensor(8, 64, 12, 12, rng);
        Tensor4 w = rand_tensor(64, 32, 2, 2, rng);
        Tensor4 b = rand_tensor(32, 1, 1, 1, rng);
        Tensor4 out;
        double s = time_ms([&] { refk::deconv2x2_fwd(in, w, b, out); }, 5);
        double p = time_ms([&] { nn::kern::deconv2x2_fwd(in, w, b, out); }, 5);
        row("deconv2x2_fwd 8x64x12x12", s, p);
    }
    { // fully connected
        Tensor4 in = rand_tensor(8, 128, 4, 4, rng);
        Tensor4 w = rand_tensor(512, 2048, 1, 1, rng);
        Tensor4 b = rand_tensor(512, 1, 1, 1, rng);
        Tensor4 out;
        double s = time_ms([&] { refk::fc_fwd(in, w, b, out); }, 5);
        double p = time_ms([&] { nn::kern::fc_fwd(in, w, b, out); }, 5);
        row("fc_fwd 2048->512 x8", s, p);
    }
    { // ssim map
        Rng r2(2);
        img::Image a(160, 160, 3), b(160, 160, 3);
        for (double& v : a.data) v = r2.uniform();
        for (double& v : b.data) v = r2.uniform();
        double s = time_ms([&] { refk::ssim_map(a, b); }, 3);
        double p = time_ms([&] { fr::ssim_map(a, b); }, 3);
        row("ssim_map 160x160", s, p);
    }
    { // gradient magnitude + blur
        Rng r2(3);
        img::Plane plane(320, 320);
        for (double& v : plane.data) v = r2.uniform(0.0, 255.0);
        double s = time_ms([&] { refk::gradient_magnitude(plane, fr::GradOp::scharr); }, 5);
        double p = time_ms([&] { fr::gradient_magnitude(plane, fr::GradOp::scharr); }, 5);
        row("gradient_magnitude 320^2", s, p);
        s = time_ms([&] { refk::gaussian_blur(plane, 2.4); }, 5);
        p = time_ms([&] { img::gaussian_blur(plane, 2.4); }, 5);
        row("gaussian_blur 320^2", s, p);
    }
    return 0;
}
