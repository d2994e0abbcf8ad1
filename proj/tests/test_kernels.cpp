#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

// The OpenMP kernels must agree bit-for-bit with the serial references for
// any worker count: every output element is owned by one thread and keeps a
// fixed accumulation order.

#include "qmap/frmaps.hpp"
#include "qmap/imgproc.hpp"
#include "qmap/nn_kernels.hpp"
#include "qmap/parallel.hpp"
#include "qmap/ref_kernels.hpp"
#include "support/testutil.hpp"

using namespace qmap;
using nn::Tensor4;

namespace {
const int kWorkerCounts[] = {1, 2, 4};
}

TEST_CASE("conv3x3 forward/backward match the serial reference bitwise") {
    Rng rng(101);
    Tensor4 in = testutil::random_tensor(3, 4, 9, 7, rng);
    Tensor4 w = testutil::random_tensor(5, 4, 3, 3, rng);
    Tensor4 b = testutil::random_tensor(5, 1, 1, 1, rng);
    Tensor4 dout = testutil::random_tensor(3, 5, 9, 7, rng);

    Tensor4 ref_out, ref_din, ref_dw, ref_db;
    refk::conv3x3_fwd(in, w, b, ref_out);
    refk::conv3x3_bwd_input(dout, w, ref_din);
    refk::conv3x3_bwd_params(dout, in, ref_dw, ref_db);

    for (int workers : kWorkerCounts) {
        set_workers(workers);
        Tensor4 out, din, dw, db;
        nn::kern::conv3x3_fwd(in, w, b, out);
        nn::kern::conv3x3_bwd_input(dout, w, din);
        nn::kern::conv3x3_bwd_params(dout, in, dw, db);
        CHECK(out.data == ref_out.data);
        CHECK(din.data == ref_din.data);
        CHECK(dw.data == ref_dw.data);
        CHECK(db.data == ref_db.data);
    }
    set_workers(1);
}

TEST_CASE("deconv2x2 forward matches the serial reference bitwise") {
    Rng rng(102);
    Tensor4 in = testutil::random_tensor(2, 3, 5, 6, rng);
    Tensor4 w = testutil::random_tensor(3, 4, 2, 2, rng);
    Tensor4 b = testutil::random_tensor(4, 1, 1, 1, rng);

    Tensor4 ref_out;
    refk::deconv2x2_fwd(in, w, b, ref_out);
    for (int workers : kWorkerCounts) {
        set_workers(workers);
        Tensor4 out;
        nn::kern::deconv2x2_fwd(in, w, b, out);
        CHECK(out.data == ref_out.data);
    }
    set_workers(1);
}

TEST_CASE("maxpool and fc match the serial reference bitwise") {
    Rng rng(103);
    Tensor4 in = testutil::random_tensor(2, 3, 7, 9, rng);
    Tensor4 ref_out;
    std::vector<int64_t> ref_arg;
    refk::maxpool2x2_fwd(in, ref_out, ref_arg);

    Tensor4 fin = testutil::random_tensor(3, 2, 4, 4, rng);
    Tensor4 fw = testutil::random_tensor(6, 32, 1, 1, rng);
    Tensor4 fb = testutil::random_tensor(6, 1, 1, 1, rng);
    Tensor4 ref_fc;
    refk::fc_fwd(fin, fw, fb, ref_fc);

    for (int workers : kWorkerCounts) {
        set_workers(workers);
        Tensor4 out, fc;
        std::vector<int64_t> arg;
        nn::kern::maxpool2x2_fwd(in, out, arg);
        nn::kern::fc_fwd(fin, fw, fb, fc);
        CHECK(out.data == ref_out.data);
        CHECK(arg == ref_arg);
        CHECK(fc.data == ref_fc.data);
    }
    set_workers(1);
}

TEST_CASE("gradient magnitude and gaussian blur match the serial reference bitwise") {
    Rng rng(104);
    img::Plane p = testutil::random_plane(33, 41, rng);

    img::Plane ref_scharr = refk::gradient_magnitude(p, fr::GradOp::scharr);
    img::Plane ref_prewitt = refk::gradient_magnitude(p, fr::GradOp::prewitt);
    img::Plane ref_blur = refk::gaussian_blur(p, 1.6);

    for (int workers : kWorkerCounts) {
        set_workers(workers);
        CHECK(fr::gradient_magnitude(p, fr::GradOp::scharr).data == ref_scharr.data);
        CHECK(fr::gradient_magnitude(p, fr::GradOp::prewitt).data == ref_prewitt.data);
        CHECK(img::gaussian_blur(p, 1.6).data == ref_blur.data);
    }
    set_workers(1);
}

TEST_CASE("ssim map matches the serial reference bitwise") {
    Rng rng(105);
    img::Image ref = testutil::random_image(40, 40, 3, rng);
    img::Image dist = ref;
    for (double& v : dist.data) v = std::clamp(v + 0.05 * rng.normal(), 0.0, 1.0);

    img::QualityMap serial = refk::ssim_map(dist, ref);
    for (int workers : kWorkerCounts) {
        set_workers(workers);
        CHECK(fr::ssim_map(dist, ref).data == serial.data);
    }
    set_workers(1);
}

TEST_CASE("full map generators are worker-count invariant") {
    Rng rng(106);
    img::Image a = testutil::random_image(32, 32, 3, rng);
    img::Image b = testutil::random_image(32, 32, 3, rng);

    for (fr::FrMethod m : {fr::FrMethod::ssim, fr::FrMethod::fsim_gm, fr::FrMethod::fsim_pc,
                           fr::FrMethod::mdsi_gc}) {
        set_workers(1);
        img::QualityMap base = fr::compute_map(m, a, b);
        for (int workers : {2, 4}) {
            set_workers(workers);
            CHECK(fr::compute_map(m, a, b).data == base.data);
        }
    }
    set_workers(1);
}
