#include "qmap/training.hpp"
#include "qmap/errors.hpp"
#include "qmap/hash.hpp"
#include "qmap/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace qmap::models {

using nn::ComputeGraph;
using nn::Mode;
using nn::Tensor4;

nn::AdamConfig TrainOptions::adam_config() const {
    nn::AdamConfig cfg;
    cfg.lr = lr;
    cfg.beta1 = beta1;
    cfg.beta2 = beta2;
    cfg.eps = adam_eps;
    cfg.weight_decay = weight_decay;
    return cfg;
}

nn::Tensor4 hflip_tensor(const Tensor4& t) {
    Tensor4 out(t.n, t.c, t.h, t.w);
    for (int b = 0; b < t.n; ++b)
        for (int c = 0; c < t.c; ++c)
            for (int y = 0; y < t.h; ++y)
                for (int x = 0; x < t.w; ++x)
                    out.at(b, c, y, x) = t.at(b, c, y, t.w - 1 - x);
    return out;
}

namespace {

struct Item {
    int index;
    bool flipped;
};

// Deterministic train/val index split plus flip augmentation of the train part.
struct Splits {
    std::vector<Item> train;
    std::vector<int> val;
};

Splits make_splits(size_t n, const TrainOptions& opt) {
    std::vector<int> idx(n);
    for (size_t i = 0; i < n; ++i) idx[i] = static_cast<int>(i);
    Rng rng = Rng(opt.seed).substream("valsplit");
    rng.shuffle(idx);
    long n_val = std::lround(opt.val_fraction * static_cast<double>(n));
    n_val = std::clamp(n_val, 0L, static_cast<long>(n) - 1);

    Splits s;
    s.val.assign(idx.begin(), idx.begin() + n_val);
    for (size_t i = n_val; i < n; ++i) {
        s.train.push_back({idx[i], false});
        if (opt.hflip) s.train.push_back({idx[i], true});
    }
    return s;
}

double clamped_bce(const Tensor4& prob, const Tensor4& target) {
    double sum = 0.0;
    constexpr double eps = 1e-12;
    for (size_t i = 0; i < prob.size(); ++i) {
        double p = std::clamp(prob.data[i], eps, 1.0 - eps);
        double t = target.data[i];
        sum += -(t * std::log(p) + (1.0 - t) * std::log(1.0 - p));
    }
    return sum / static_cast<double>(prob.size());
}

uint64_t step_seed(const TrainOptions& opt, const char* stage, int epoch, size_t step) {
    return Rng(opt.seed)
        .substream(stage, static_cast<uint64_t>(epoch) * 1000003ULL + step)
        .next_u64();
}

} // namespace

TrainHistory train_generator(ComputeGraph& gen, const std::vector<MapSample>& data,
                             const TrainOptions& opt) {
    if (data.empty()) throw SizeError("train_generator: no samples");
    for (size_t i = 0; i < data.size(); ++i) {
        const MapSample& s = data[i];
        if (s.label.h != s.image.h || s.label.w != s.image.w || s.label.c != 1)
            throw ShapeError("train_generator: sample " + std::to_string(i) +
                             " label " + s.label.shape_str() + " misaligned with image " +
                             s.image.shape_str());
        for (double v : s.label.data)
            if (!(v >= 0.0 && v <= 1.0))
                throw DomainError("train_generator: map label outside [0,1]");
    }

    Splits splits = make_splits(data.size(), opt);
    if (splits.train.empty()) throw SizeError("train_generator: empty train split");

    nn::AdamState adam = nn::AdamState::for_graph(gen);
    const nn::AdamConfig adam_cfg = opt.adam_config();

    TrainHistory hist;
    double best = std::numeric_limits<double>::infinity();
    ComputeGraph best_graph = gen;

    auto eval_val = [&]() {
        double sum = 0.0;
        size_t count = 0;
        for (size_t k = 0; k < splits.val.size(); k += opt.batch_size) {
            size_t hi = std::min(splits.val.size(), k + opt.batch_size);
            std::vector<const Tensor4*> xs, ys;
            for (size_t j = k; j < hi; ++j) {
                xs.push_back(&data[splits.val[j]].image);
                ys.push_back(&data[splits.val[j]].label);
            }
            Tensor4 x = nn::stack_batch(xs);
            Tensor4 y = nn::stack_batch(ys);
            auto [p, tape] = gen.forward(x, Mode::eval, 0);
            sum += clamped_bce(p, y) * static_cast<double>(p.n);
            count += p.n;
        }
        return sum / static_cast<double>(count);
    };

    for (int epoch = 0; epoch < opt.epochs; ++epoch) {
        std::vector<Item> order = splits.train;
        Rng(opt.seed).substream("shuffle", epoch).shuffle(order);

        double loss_sum = 0.0;
        size_t seen = 0;
        for (size_t k = 0; k < order.size(); k += opt.batch_size) {
            size_t hi = std::min(order.size(), k + opt.batch_size);
            std::vector<Tensor4> flipped;
            std::vector<const Tensor4*> xs, ys;
            flipped.reserve(2 * (hi - k));
            for (size_t j = k; j < hi; ++j) {
                const MapSample& s = data[order[j].index];
                if (order[j].flipped) {
                    flipped.push_back(hflip_tensor(s.image));
                    xs.push_back(&flipped.back());
                    flipped.push_back(hflip_tensor(s.label));
                    ys.push_back(&flipped.back());
                } else {
                    xs.push_back(&s.image);
                    ys.push_back(&s.label);
                }
            }
            Tensor4 x = nn::stack_batch(xs);
            Tensor4 y = nn::stack_batch(ys);

            auto [out, tape] = gen.forward(x, Mode::train, step_seed(opt, "gen-step", epoch, k));
            nn::LossResult lr = nn::loss_bce_sigmoid(tape.last_layer_input(), y);
            if (!std::isfinite(lr.loss)) throw NumericError("train_generator: non-finite loss");
            nn::Gradients grads = gen.backward_from(tape, lr.grad, gen.nodes.size() - 1);
            nn::adam_step(gen, grads, adam, adam_cfg);

            loss_sum += lr.loss * static_cast<double>(x.n);
            seen += x.n;
        }
        hist.train_loss.push_back(loss_sum / static_cast<double>(seen));

        double metric = hist.train_loss.back();
        if (!splits.val.empty()) {
            hist.val_loss.push_back(eval_val());
            metric = hist.val_loss.back();
        }
        if (metric < best) {
            best = metric;
            hist.best_epoch = epoch;
            best_graph = gen;
        }
    }
    hist.best_loss = best;
    gen = best_graph;
    return hist;
}

namespace {

// Map patches through the frozen generators into pooler input streams.
std::vector<Tensor4> streams_for(const Tensor4& patch, std::vector<ComputeGraph*>& gens,
                                 const PoolerNet& pool) {
    if (gens.empty()) return {patch};
    std::vector<Tensor4> maps;
    maps.reserve(gens.size());
    for (ComputeGraph* g : gens) {
        auto [m, tape] = g->forward(patch, Mode::eval, 0);
        maps.push_back(std::move(m));
    }
    if (pool.fusion.kind == FusionKind::multi_stream) return maps;
    Tensor4 fused = maps[0];
    for (size_t i = 1; i < maps.size(); ++i) fused = nn::concat_channels(fused, maps[i]);
    return {fused};
}

uint64_t gens_checksum(const std::vector<ComputeGraph*>& gens) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (const ComputeGraph* g : gens) {
        uint64_t c = g->param_checksum();
        h = fnv1a64(&c, sizeof(c), h);
    }
    return h;
}

} // namespace

TrainHistory train_pooler(PoolerNet& pool, const std::vector<ComputeGraph*>& frozen_gens,
                          const std::vector<PatchScoreSample>& data, const TrainOptions& opt) {
    if (data.empty()) throw SizeError("train_pooler: no samples");
    for (const PatchScoreSample& s : data)
        if (!(s.score >= 0.0 && s.score <= 100.0))
            throw DomainError("train_pooler: score outside [0,100]");

    std::vector<ComputeGraph*> gens = frozen_gens;
    const uint64_t frozen_before = gens_checksum(gens);

    // The generators are frozen, so predicted maps are constant: materialize
    // every needed input stream once up front.
    Splits splits = make_splits(data.size(), opt);
    if (splits.train.empty()) throw SizeError("train_pooler: empty train split");

    const int nstreams = pool.streams();
    struct Prepared {
        std::vector<Tensor4> streams;
        double target; // score / 100
    };
    std::vector<Prepared> train_set(splits.train.size());
    for (size_t i = 0; i < splits.train.size(); ++i) {
        const PatchScoreSample& s = data[splits.train[i].index];
        Tensor4 patch = splits.train[i].flipped ? hflip_tensor(s.patch) : s.patch;
        train_set[i].streams = streams_for(patch, gens, pool);
        train_set[i].target = s.score / 100.0;
        if (static_cast<int>(train_set[i].streams.size()) != nstreams)
            throw ShapeError("train_pooler: sample produced " +
                             std::to_string(train_set[i].streams.size()) + " streams, pooler expects " +
                             std::to_string(nstreams));
    }
    std::vector<Prepared> val_set(splits.val.size());
    for (size_t i = 0; i < splits.val.size(); ++i) {
        const PatchScoreSample& s = data[splits.val[i]];
        val_set[i].streams = streams_for(s.patch, gens, pool);
        val_set[i].target = s.score / 100.0;
    }
    if (gens_checksum(gens) != frozen_before)
        throw StateError("train_pooler: frozen generator parameters changed");

    std::vector<nn::AdamState> trunk_adam;
    for (ComputeGraph& t : pool.trunks) trunk_adam.push_back(nn::AdamState::for_graph(t));
    nn::AdamState head_adam = nn::AdamState::for_graph(pool.head);
    const nn::AdamConfig adam_cfg = opt.adam_config();

    auto batch_streams = [&](const std::vector<Prepared>& set, const std::vector<size_t>& ids) {
        std::vector<Tensor4> streams(nstreams);
        for (int s = 0; s < nstreams; ++s) {
            std::vector<const Tensor4*> parts;
            parts.reserve(ids.size());
            for (size_t id : ids) parts.push_back(&set[id].streams[s]);
            streams[s] = nn::stack_batch(parts);
        }
        return streams;
    };

    auto eval_val = [&]() {
        double sum = 0.0;
        size_t count = 0;
        for (size_t k = 0; k < val_set.size(); k += opt.batch_size) {
            size_t hi = std::min(val_set.size(), k + opt.batch_size);
            std::vector<size_t> ids;
            for (size_t j = k; j < hi; ++j) ids.push_back(j);
            std::vector<Tensor4> streams = batch_streams(val_set, ids);
            Tensor4 target(static_cast<int>(ids.size()), 1, 1, 1);
            for (size_t j = 0; j < ids.size(); ++j) target.data[j] = val_set[ids[j]].target;
            Tensor4 out = pooler_forward(pool, streams, Mode::eval, 0);
            sum += nn::loss_mse(out, target).loss * static_cast<double>(ids.size());
            count += ids.size();
        }
        return sum / static_cast<double>(count);
    };

    TrainHistory hist;
    double best = std::numeric_limits<double>::infinity();
    PoolerNet best_net = pool;

    for (int epoch = 0; epoch < opt.epochs; ++epoch) {
        std::vector<size_t> order(train_set.size());
        for (size_t i = 0; i < order.size(); ++i) order[i] = i;
        Rng(opt.seed).substream("shuffle", epoch).shuffle(order);

        double loss_sum = 0.0;
        size_t seen = 0;
        for (size_t k = 0; k < order.size(); k += opt.batch_size) {
            size_t hi = std::min(order.size(), k + opt.batch_size);
            std::vector<size_t> ids(order.begin() + k, order.begin() + hi);
            std::vector<Tensor4> streams = batch_streams(train_set, ids);
            Tensor4 target(static_cast<int>(ids.size()), 1, 1, 1);
            for (size_t j = 0; j < ids.size(); ++j) target.data[j] = train_set[ids[j]].target;

            PoolerTapes tapes;
            Tensor4 out = pooler_forward(pool, streams, Mode::train,
                                         step_seed(opt, "pool-step", epoch, k), &tapes);
            nn::LossResult lr = nn::loss_mse(out, target);
            if (!std::isfinite(lr.loss)) throw NumericError("train_pooler: non-finite loss");
            PoolerGrads grads = pooler_backward(pool, tapes, lr.grad);
            for (size_t t = 0; t < pool.trunks.size(); ++t)
                nn::adam_step(pool.trunks[t], grads.trunks[t], trunk_adam[t], adam_cfg);
            nn::adam_step(pool.head, grads.head, head_adam, adam_cfg);

            loss_sum += lr.loss * static_cast<double>(ids.size());
            seen += ids.size();
        }
        hist.train_loss.push_back(loss_sum / static_cast<double>(seen));

        double metric = hist.train_loss.back();
        if (!val_set.empty()) {
            hist.val_loss.push_back(eval_val());
            metric = hist.val_loss.back();
        }
        if (metric < best) {
            best = metric;
            hist.best_epoch = epoch;
            best_net = pool;
        }
    }
    hist.best_loss = best;
    pool = best_net;

    if (gens_checksum(gens) != frozen_before)
        throw StateError("train_pooler: frozen generator parameters changed");
    return hist;
}

std::vector<double> pooler_scores(PoolerNet& pool, const std::vector<ComputeGraph*>& frozen_gens,
                                  const std::vector<PatchScoreSample>& data) {
    std::vector<ComputeGraph*> gens = frozen_gens;
    std::vector<double> out;
    out.reserve(data.size());
    for (const PatchScoreSample& s : data) {
        std::vector<Tensor4> streams = streams_for(s.patch, gens, pool);
        Tensor4 score = pooler_forward(pool, streams, Mode::eval, 0);
        out.push_back(score.data[0] * 100.0);
    }
    return out;
}

std::vector<MapSample> generator_samples(const data::DatasetManifest& m,
                                         const data::LabelStore& store, const PatchOptions& po) {
    std::vector<MapSample> out;
    for (const data::Entry& e : m.entries) {
        const data::LabelStore::Item& item = store.find(e.id);
        img::Image image = item.image_file.empty()
                               ? img::load_image(m.resolve(e.distorted_path))
                               : img::load_image(store.image_path(item));
        img::Image map_img = img::load_image(store.map_path(item));
        if (map_img.channels != 1)
            throw ShapeError("label map for '" + e.id + "' is not grayscale");
        if (map_img.height != image.height || map_img.width != image.width)
            throw ShapeError("label map for '" + e.id + "' misaligned with its image");

        std::vector<int> rows = img::patch_origins(image.height, po.patch_size, po.stride);
        std::vector<int> cols = img::patch_origins(image.width, po.patch_size, po.stride);
        for (int r : rows)
            for (int c : cols) {
                MapSample s;
                s.image = Tensor4(1, image.channels, po.patch_size, po.patch_size);
                for (int ch = 0; ch < image.channels; ++ch)
                    for (int y = 0; y < po.patch_size; ++y)
                        for (int x = 0; x < po.patch_size; ++x)
                            s.image.at(0, ch, y, x) = image.at(r + y, c + x, ch);
                s.label = Tensor4(1, 1, po.patch_size, po.patch_size);
                for (int y = 0; y < po.patch_size; ++y)
                    for (int x = 0; x < po.patch_size; ++x)
                        s.label.at(0, 0, y, x) = map_img.at(r + y, c + x, 0);
                out.push_back(std::move(s));
            }
    }
    return out;
}

std::vector<PatchScoreSample> image_patch_samples(const data::DatasetManifest& m,
                                                  const PatchOptions& po) {
    std::vector<PatchScoreSample> out;
    for (const data::Entry& e : m.entries) {
        img::Image image = img::load_image(m.resolve(e.distorted_path));
        img::PatchGrid grid = img::extract_patches(image, po.patch_size, po.stride);
        for (const img::Image& p : grid.patches)
            out.push_back({nn::from_image(p), e.score});
    }
    return out;
}

std::vector<PatchScoreSample> map_patch_samples(const data::DatasetManifest& m,
                                                const data::LabelStore& store,
                                                const PatchOptions& po) {
    std::vector<PatchScoreSample> out;
    for (const data::Entry& e : m.entries) {
        const data::LabelStore::Item& item = store.find(e.id);
        img::Image map_img = img::load_image(store.map_path(item));
        img::PatchGrid grid = img::extract_patches(map_img, po.patch_size, po.stride);
        for (const img::Image& p : grid.patches)
            out.push_back({nn::from_image(p), e.score});
    }
    return out;
}

} // namespace qmap::models
