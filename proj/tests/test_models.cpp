#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "qmap/errors.hpp"
#include "qmap/model_store.hpp"
#include "qmap/predict.hpp"
#include "qmap/training.hpp"
#include "support/testutil.hpp"

#include <cmath>

using namespace qmap;
using namespace qmap::models;
using nn::Mode;
using nn::Tensor4;

namespace {

UNetSpec tiny_unet() {
    UNetSpec s;
    s.stage_channels = {4, 8, 12, 16};
    return s;
}

PoolNetSpec tiny_pool(int input_size, int channels = 1) {
    PoolNetSpec s;
    s.input_channels = channels;
    s.input_size = input_size;
    s.conv_channels = {4, 8, 8, 8, 8};
    s.fc_units = 16;
    return s;
}

// Closed-form parameter count for the generator wiring:
// SP: conv(in->c_i) + bn; UP: deconv + merge conv + bn; head conv.
size_t unet_param_count(const UNetSpec& s) {
    size_t total = 0;
    int in_c = s.input_channels;
    for (int i = 0; i < s.depth; ++i) {
        total += static_cast<size_t>(s.stage_channels[i]) * in_c * 9 + s.stage_channels[i]; // conv
        total += 2 * static_cast<size_t>(s.stage_channels[i]);                               // bn
        in_c = s.stage_channels[i];
    }
    for (int j = 0; j < s.depth; ++j) {
        int skip_c = s.stage_channels[s.depth - 1 - j];
        int out_c = (j < s.depth - 1) ? s.stage_channels[s.depth - 2 - j] : s.stage_channels[0];
        total += static_cast<size_t>(in_c) * out_c * 4 + out_c;              // deconv
        total += static_cast<size_t>(out_c) * (skip_c + out_c) * 9 + out_c;  // merge conv
        total += 2 * static_cast<size_t>(out_c);                             // bn
        in_c = out_c;
    }
    total += static_cast<size_t>(s.output_channels) * in_c * 9 + s.output_channels; // head
    return total;
}

size_t dpn_param_count(const PoolNetSpec& s, int streams) {
    size_t trunk = 0;
    int in_c = s.input_channels;
    for (int i = 0; i < 5; ++i) {
        trunk += static_cast<size_t>(s.conv_channels[i]) * in_c * 9 + s.conv_channels[i];
        trunk += 2 * static_cast<size_t>(s.conv_channels[i]);
        in_c = s.conv_channels[i];
    }
    int edge = s.input_size;
    for (int i = 0; i < 5; ++i) edge /= 2;
    size_t feat = static_cast<size_t>(s.conv_channels.back()) * edge * edge * streams;
    size_t head = feat * s.fc_units + s.fc_units + static_cast<size_t>(s.fc_units) * 1 + 1;
    return trunk * streams + head;
}

std::vector<MapSample> constant_label_set(int n, int edge, double value, uint64_t seed) {
    Rng rng(seed);
    std::vector<MapSample> out;
    for (int i = 0; i < n; ++i) {
        MapSample s;
        s.image = testutil::random_tensor(1, 3, edge, edge, rng, 0.0, 1.0);
        s.label = Tensor4(1, 1, edge, edge);
        for (double& v : s.label.data) v = value;
        out.push_back(std::move(s));
    }
    return out;
}

} // namespace

TEST_CASE("generator: 144x144x3 -> 144x144x1 in (0,1)") {
    nn::ComputeGraph g = build_generator(UNetSpec{}, 7);
    Rng rng(1);
    Tensor4 x = testutil::random_tensor(1, 3, 144, 144, rng, 0.0, 1.0);
    auto [out, tape] = g.forward(x, Mode::eval, 0);
    CHECK(out.c == 1);
    CHECK(out.h == 144);
    CHECK(out.w == 144);
    for (double v : out.data) {
        CHECK(v > 0.0);
        CHECK(v < 1.0);
    }
}

TEST_CASE("generator: minimal 16x16 input reaches a 1x1 bottleneck") {
    nn::ComputeGraph g = build_generator(tiny_unet(), 7);
    Rng rng(2);
    Tensor4 x = testutil::random_tensor(1, 3, 16, 16, rng, 0.0, 1.0);
    auto [out, tape] = g.forward(x, Mode::eval, 0);
    CHECK(out.h == 16);
    CHECK(out.w == 16);
}

TEST_CASE("generator rejects inputs not divisible by 16") {
    CHECK_THROWS_AS(check_generator_input(UNetSpec{}, 50, 144), ShapeError);
    CHECK_NOTHROW(check_generator_input(UNetSpec{}, 144, 144));
}

TEST_CASE("generator parameter count matches the closed form") {
    UNetSpec def;
    nn::ComputeGraph g = build_generator(def, 7);
    CHECK(g.param_count() == unet_param_count(def));

    UNetSpec tiny = tiny_unet();
    nn::ComputeGraph g2 = build_generator(tiny, 7);
    CHECK(g2.param_count() == unet_param_count(tiny));
}

TEST_CASE("dpn: 144x144 map to scalar; parameter count closed form") {
    PoolNetSpec spec; // defaults: 144 input, 1 channel
    PoolerNet net = build_pooler(spec, 11);
    Rng rng(3);
    Tensor4 x = testutil::random_tensor(2, 1, 144, 144, rng, 0.0, 1.0);
    Tensor4 out = pooler_forward(net, {x}, Mode::eval, 0);
    CHECK(out.n == 2);
    CHECK(out.c == 1);
    CHECK(out.h == 1);
    CHECK(out.w == 1);
    CHECK(net.param_count() == dpn_param_count(spec, 1));
}

TEST_CASE("dpn_direct accepts a raw 3-channel patch") {
    PoolNetSpec spec = tiny_pool(48, 3);
    spec.kind = PoolerKind::DPN_direct;
    PoolerNet net = build_pooler(spec, 11);
    Rng rng(4);
    Tensor4 x = testutil::random_tensor(1, 3, 48, 48, rng, 0.0, 1.0);
    Tensor4 out = pooler_forward(net, {x}, Mode::eval, 0);
    CHECK(out.n == 1);
    CHECK(out.c == 1);
}

TEST_CASE("fc2: two 1024-unit layers, parameter count closed form") {
    PoolNetSpec spec;
    spec.kind = PoolerKind::FC2;
    spec.input_size = 144;
    PoolerNet net = build_pooler(spec, 11);
    const size_t in_units = 144 * 144;
    size_t expect = in_units * 1024 + 1024      // fc1
                    + 1024 * 1024 + 1024        // fc2
                    + 1024 + 1;                 // scalar head
    CHECK(net.param_count() == expect);
    CHECK(net.trunks.empty());

    Rng rng(5);
    Tensor4 x = testutil::random_tensor(1, 1, 144, 144, rng, 0.0, 1.0);
    Tensor4 out = pooler_forward(net, {x}, Mode::eval, 0);
    CHECK(out.c == 1);
}

TEST_CASE("pooler rejects inputs too small for five halvings") {
    PoolNetSpec spec = tiny_pool(16);
    CHECK_THROWS_AS(build_pooler(spec, 1), ShapeError);
}

TEST_CASE("fusion wiring: single stream concatenates channels, multi stream trunks") {
    FusionMode single{FusionKind::single_stream, {fr::FrMethod::ssim, fr::FrMethod::fsim_gm}};
    PoolNetSpec sspec = tiny_pool(48, 2);
    PoolerNet snet = build_pooler(sspec, single, 3);
    CHECK(snet.trunks.size() == 1);
    CHECK(snet.streams() == 1);
    Rng rng(6);
    Tensor4 two_ch = testutil::random_tensor(1, 2, 48, 48, rng, 0.0, 1.0);
    CHECK(pooler_forward(snet, {two_ch}, Mode::eval, 0).c == 1);

    FusionMode multi{FusionKind::multi_stream, {fr::FrMethod::ssim, fr::FrMethod::fsim_gm}};
    PoolNetSpec mspec = tiny_pool(48, 1);
    PoolerNet mnet = build_pooler(mspec, multi, 3);
    CHECK(mnet.trunks.size() == 2);
    CHECK(mnet.streams() == 2);
    Tensor4 m1 = testutil::random_tensor(1, 1, 48, 48, rng, 0.0, 1.0);
    Tensor4 m2 = testutil::random_tensor(1, 1, 48, 48, rng, 0.0, 1.0);
    PoolerTapes tapes;
    Tensor4 out = pooler_forward(mnet, {m1, m2}, Mode::train, 1, &tapes);
    CHECK(out.c == 1);
    // concatenated conv5 features: each trunk contributes its channel block
    CHECK(tapes.feature_channels == std::vector<int>{8, 8});
    // head consumes 2*8 channels on a 1x1 grid at 48 input
    CHECK(mnet.head.nodes[0].spec.in_units == 16);
}

TEST_CASE("train_generator fits constant all-ones labels") {
    nn::ComputeGraph gen = build_generator(tiny_unet(), 21);
    std::vector<MapSample> data = constant_label_set(50, 16, 1.0, 77);

    TrainOptions opt;
    opt.epochs = 30;
    opt.batch_size = 4;
    opt.lr = 1e-2;
    opt.seed = 5;
    opt.val_fraction = 0.0;
    opt.hflip = false;
    TrainHistory hist = train_generator(gen, data, opt);

    double mean = 0.0;
    size_t count = 0;
    for (const MapSample& s : data) {
        auto [out, tape] = gen.forward(s.image, Mode::eval, 0);
        for (double v : out.data) mean += v;
        count += out.size();
    }
    mean /= static_cast<double>(count);
    CHECK(mean > 0.95);
    CHECK(hist.train_loss.size() == 30);
}

TEST_CASE("training is deterministic: same seed, identical history") {
    std::vector<MapSample> data = constant_label_set(12, 16, 0.7, 31);
    TrainOptions opt;
    opt.epochs = 3;
    opt.batch_size = 4;
    opt.lr = 1e-3;
    opt.seed = 9;
    opt.val_fraction = 0.25;

    nn::ComputeGraph g1 = build_generator(tiny_unet(), 5);
    nn::ComputeGraph g2 = build_generator(tiny_unet(), 5);
    TrainHistory h1 = train_generator(g1, data, opt);
    TrainHistory h2 = train_generator(g2, data, opt);
    CHECK(h1.train_loss == h2.train_loss);
    CHECK(h1.val_loss == h2.val_loss);
    CHECK(g1.param_checksum() == g2.param_checksum());
}

TEST_CASE("train_pooler learns a mean-derived score and freezes generators") {
    Rng rng(41);
    // dataset where the score is a deterministic function of the patch
    std::vector<PatchScoreSample> data;
    for (int i = 0; i < 60; ++i) {
        double base = rng.uniform(0.2, 0.9);
        Tensor4 patch(1, 1, 32, 32);
        for (double& v : patch.data) v = std::clamp(base + 0.06 * rng.normal(), 0.0, 1.0);
        double mean = 0.0;
        for (double v : patch.data) mean += v;
        mean /= static_cast<double>(patch.size());
        data.push_back({patch, 100.0 * mean});
    }

    PoolNetSpec spec = tiny_pool(32);
    PoolerNet net = build_pooler(spec, 13);
    TrainOptions opt;
    opt.epochs = 40;
    opt.batch_size = 8;
    opt.lr = 5e-3;
    opt.seed = 3;
    opt.val_fraction = 0.2;
    opt.hflip = false;
    TrainHistory hist = train_pooler(net, {}, data, opt);
    CHECK(hist.train_loss.back() < hist.train_loss.front());

    std::vector<double> pred = pooler_scores(net, {}, data);
    // crude fit check: predictions correlate strongly with targets
    double sxy = 0, sx = 0, sy = 0, sxx = 0, syy = 0;
    for (size_t i = 0; i < pred.size(); ++i) {
        sx += pred[i];
        sy += data[i].score;
        sxy += pred[i] * data[i].score;
        sxx += pred[i] * pred[i];
        syy += data[i].score * data[i].score;
    }
    double n = static_cast<double>(pred.size());
    double corr = (n * sxy - sx * sy) / std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
    CHECK(corr > 0.9);
}

TEST_CASE("stage-2 training leaves the frozen generator untouched") {
    nn::ComputeGraph gen = build_generator(tiny_unet(), 5);
    const uint64_t before = gen.param_checksum();

    Rng rng(42);
    std::vector<PatchScoreSample> data;
    for (int i = 0; i < 10; ++i)
        data.push_back({testutil::random_tensor(1, 3, 32, 32, rng, 0.0, 1.0),
                        rng.uniform(10.0, 90.0)});

    PoolNetSpec spec = tiny_pool(32);
    PoolerNet net = build_pooler(spec, 13);
    TrainOptions opt;
    opt.epochs = 2;
    opt.batch_size = 4;
    opt.lr = 5e-3;
    opt.seed = 3;
    opt.val_fraction = 0.0;
    opt.hflip = false;
    train_pooler(net, {&gen}, data, opt);
    CHECK(gen.param_checksum() == before);
}

TEST_CASE("train_pooler validates the score range") {
    Rng rng(43);
    std::vector<PatchScoreSample> data{{testutil::random_tensor(1, 1, 32, 32, rng), 130.0}};
    PoolerNet net = build_pooler(tiny_pool(32), 1);
    TrainOptions opt;
    opt.epochs = 1;
    CHECK_THROWS_AS(train_pooler(net, {}, data, opt), DomainError);
}

TEST_CASE("predict_score: single patch equality, 4-patch mean, repeatability") {
    Predictor p;
    p.gens.push_back(build_generator(tiny_unet(), 5));
    p.pooler = build_pooler(tiny_pool(48), 13);
    p.patch_size = 48;
    p.stride = 40;

    Rng rng(44);
    img::Image one = testutil::random_image(48, 48, 3, rng);
    Prediction pr1 = predict_score(p, one);
    CHECK(pr1.map.height == 48);

    // direct check against a manual single-patch pipeline
    Tensor4 patch = nn::from_image(one);
    auto [map, tape] = p.gens[0].forward(patch, Mode::eval, 0);
    Tensor4 score = pooler_forward(p.pooler, {map}, Mode::eval, 0);
    CHECK(pr1.score == doctest::Approx(100.0 * score.data[0]).epsilon(1e-12));

    // 88x88 with stride 40: origins {0,40} per axis, 4 patches
    img::Image four = testutil::random_image(88, 88, 3, rng);
    Prediction pr4 = predict_score(p, four);
    img::PatchGrid grid = img::extract_patches(four, 48, 40);
    REQUIRE(grid.patches.size() == 4);
    double mean = 0.0;
    for (const img::Image& pi : grid.patches) {
        Tensor4 t = nn::from_image(pi);
        auto [m, tp] = p.gens[0].forward(t, Mode::eval, 0);
        mean += 100.0 * pooler_forward(p.pooler, {m}, Mode::eval, 0).data[0];
    }
    mean /= 4.0;
    CHECK(pr4.score == doctest::Approx(mean).epsilon(1e-12));

    Prediction again = predict_score(p, four);
    CHECK(again.score == pr4.score);
    CHECK(again.map.data == pr4.map.data);

    CHECK_THROWS_AS(predict_score(p, testutil::random_image(30, 30, 3, rng)), SizeError);
}

TEST_CASE("predict on an image tiled from identical patches equals the patch score") {
    Predictor p;
    p.gens.push_back(build_generator(tiny_unet(), 5));
    p.pooler = build_pooler(tiny_pool(48), 13);
    p.patch_size = 48;
    p.stride = 48; // disjoint tiling

    Rng rng(45);
    img::Image tile = testutil::random_image(48, 48, 3, rng);
    img::Image big(96, 96, 3);
    for (int y = 0; y < 96; ++y)
        for (int x = 0; x < 96; ++x)
            for (int c = 0; c < 3; ++c) big.at(y, x, c) = tile.at(y % 48, x % 48, c);

    Prediction whole = predict_score(p, big);
    Prediction single = predict_score(p, tile);
    CHECK(whole.score == doctest::Approx(single.score).epsilon(1e-12));
}

TEST_CASE("model bundles round trip through checkpoint + sidecar") {
    testutil::TempDir tmp("bundle");

    GeneratorBundle gb;
    gb.spec = tiny_unet();
    gb.method = fr::FrMethod::mdsi_gc;
    gb.graph = build_generator(gb.spec, 5);
    gb.seed = 99;
    gb.data_fingerprint = "00ff00ff00ff00ff";
    gb.patch_size = 48;
    gb.stride = 40;
    std::string gpath = (tmp / "gen.ckpt").string();
    save_generator(gb, gpath);
    GeneratorBundle gload = load_generator(gpath);
    CHECK(gload.graph.param_checksum() == gb.graph.param_checksum());
    CHECK(gload.method == fr::FrMethod::mdsi_gc);
    CHECK(gload.spec.stage_channels == gb.spec.stage_channels);
    CHECK(gload.data_fingerprint == gb.data_fingerprint);
    CHECK(gload.patch_size == 48);

    PoolerBundle pb;
    pb.spec = tiny_pool(48);
    pb.net = build_pooler(pb.spec,
                          FusionMode{FusionKind::multi_stream,
                                     {fr::FrMethod::ssim, fr::FrMethod::fsim_gm}},
                          13);
    pb.spec.input_channels = 1;
    pb.source_mode = "pm";
    pb.seed = 100;
    pb.data_fingerprint = gb.data_fingerprint;
    std::string ppath = (tmp / "pool.ckpt").string();
    save_pooler(pb, ppath);
    PoolerBundle pload = load_pooler(ppath);
    CHECK(pload.net.param_checksum() == pb.net.param_checksum());
    CHECK(pload.net.trunks.size() == 2);
    CHECK(pload.net.fusion.kind == FusionKind::multi_stream);
    CHECK(pload.net.fusion.map_methods.size() == 2);
    CHECK(pload.source_mode == "pm");
}
