// qmap command line: one subcommand per pipeline stage.
//   map        full-reference similarity map + pooled scores
//   synth      procedural distortion dataset
//   labels     materialize map labels for a manifest
//   train-gen  stage 1: fit the map-predicting network
//   train-pool stage 2: fit the score-pooling network
//   predict    blind score + stitched map for one image
//   eval       SRCC/PLCC report over a manifest
//   study      local-patch-averaging comparison table

#include <CLI11.hpp>
#include <json.hpp>

#include "qmap/errors.hpp"
#include "qmap/frmaps.hpp"
#include "qmap/hash.hpp"
#include "qmap/labels.hpp"
#include "qmap/logistic.hpp"
#include "qmap/model_store.hpp"
#include "qmap/parallel.hpp"
#include "qmap/predict.hpp"
#include "qmap/study.hpp"
#include "qmap/synth.hpp"
#include "qmap/training.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace qmap;

namespace {

struct CommonOpts {
    std::string out;
    std::string config;
    uint64_t seed = 7;
    int workers = 1;
    bool dry_run = false;
};

void add_common(CLI::App* cmd, CommonOpts& c) {
    cmd->add_option("--out", c.out, "output directory")->required()->configurable(false);
    cmd->add_option("--seed", c.seed, "run seed");
    cmd->add_option("--workers", c.workers, "worker threads (results are identical for any count)")
        ->configurable(false);
    cmd->add_flag("--dry-run", c.dry_run, "print the resolved plan without executing")
        ->configurable(false);
    cmd->add_option("--config", c.config, "flat key=value config file; flags override")
        ->configurable(false);
}

// Expands `--config file` into --key=value arguments for every key the
// command line does not already set, so explicit flags always win.
std::vector<std::string> expand_config(std::vector<std::string> args) {
    std::string cfg_path;
    for (size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size())
            cfg_path = args[i + 1];
        else if (args[i].rfind("--config=", 0) == 0)
            cfg_path = args[i].substr(9);
    }
    if (cfg_path.empty()) return args;

    std::ifstream f(cfg_path);
    if (!f) throw IoError("cannot read config file " + cfg_path);
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        size_t b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        size_t e = line.find_last_not_of(" \t\r");
        line = line.substr(b, e - b + 1);
        size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw FormatError(cfg_path + ":" + std::to_string(lineno) + ": expected key=value");
        std::string key = line.substr(0, eq);
        std::string value = line.substr(eq + 1);
        std::string flag = "--" + key;
        bool present = false;
        for (const std::string& a : args)
            if (a == flag || a.rfind(flag + "=", 0) == 0) {
                present = true;
                break;
            }
        if (!present) args.push_back(flag + "=" + value);
    }
    return args;
}

// Timestamps live only here; summaries and artifacts stay byte-reproducible.
void append_log(const std::string& out_dir, const std::string& message) {
    std::ofstream log(fs::path(out_dir) / "run.log", std::ios::app);
    auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char stamp[32];
    std::strftime(stamp, sizeof(stamp), "%F %T", std::gmtime(&now));
    log << "[" << stamp << "] " << message << "\n";
}

void write_resolved_config(CLI::App* cmd, const std::string& out_dir) {
    std::ofstream f(fs::path(out_dir) / "resolved.cfg");
    f << cmd->config_to_str(true, false);
}

void write_summary(const std::string& out_dir, const json& j) {
    std::ofstream f(fs::path(out_dir) / "summary.jsonl", std::ios::app);
    f << j.dump() << "\n";
}

// Shared prologue: honor --dry-run, create the out dir, persist the config.
bool start_run(CLI::App* cmd, const CommonOpts& c, const std::string& plan) {
    if (c.dry_run) {
        std::cout << "dry-run: " << plan << "\n" << cmd->config_to_str(true, false);
        return false;
    }
    fs::create_directories(c.out);
    set_workers(c.workers);
    write_resolved_config(cmd, c.out);
    append_log(c.out, plan);
    return true;
}

std::vector<int> parse_int_list(const std::string& csv, const char* what) {
    std::vector<int> out;
    std::string cur;
    for (char ch : csv + ",") {
        if (ch == ',') {
            if (!cur.empty()) out.push_back(std::stoi(cur));
            cur.clear();
        } else {
            cur += ch;
        }
    }
    if (out.empty()) throw FormatError(std::string(what) + ": empty list");
    return out;
}

std::string hex_fingerprint(const std::string& path) { return to_hex(fingerprint_file(path)); }

void check_fingerprint(const std::string& artifact, const std::string& have,
                       const std::string& want) {
    if (have != want)
        throw StateError(artifact + " was trained on a different dataset (fingerprint " + have +
                         ", manifest has " + want + "); refusing to mix lineages");
}

models::Predictor load_predictor(const std::vector<std::string>& gen_paths,
                                 const std::string& pool_path) {
    models::Predictor p;
    models::PoolerBundle pb = models::load_pooler(pool_path);
    p.pooler = pb.net;
    p.patch_size = pb.patch_size;
    p.stride = pb.stride;

    std::vector<fr::FrMethod> gen_methods;
    for (const std::string& gp : gen_paths) {
        models::GeneratorBundle gb = models::load_generator(gp);
        check_fingerprint(gp, gb.data_fingerprint, pb.data_fingerprint);
        if (gb.patch_size != pb.patch_size || gb.stride != pb.stride)
            throw StateError(gp + " patch protocol differs from the pooler's");
        gen_methods.push_back(gb.method);
        p.gens.push_back(std::move(gb.graph));
    }
    const auto& want = p.pooler.fusion.map_methods;
    if (!want.empty() && want != gen_methods)
        throw StateError("generator methods do not match the pooler's fusion method list");
    return p;
}

// ---------------------------------------------------------------- map ----

struct MapArgs {
    CommonOpts common;
    std::string dist, ref, method = "ssim", map_config;
};

int run_map(CLI::App* cmd, MapArgs& a) {
    fr::FrMethod method = fr::parse_method(a.method);
    if (!start_run(cmd, a.common, "map " + a.dist + " vs " + a.ref)) return 0;

    fr::MapConfig cfg = a.map_config.empty() ? fr::MapConfig{} : fr::load_map_config(a.map_config);
    img::Image dist = img::load_image(a.dist);
    img::Image ref = img::load_image(a.ref);
    img::QualityMap map = fr::compute_map(method, dist, ref, cfg);

    std::string map_name = "map_" + a.method + ".png";
    fr::save_map(map, (fs::path(a.common.out) / map_name).string());

    double avg = fr::pool_map(map, fr::PoolStrategy::average, cfg);
    double sd = fr::pool_map(map, fr::PoolStrategy::std_dev, cfg);
    double dev = fr::pool_map(map, fr::PoolStrategy::deviation, cfg);
    std::printf("average %.6f\nstd_dev %.6f\ndeviation %.6f\n", avg, sd, dev);

    write_summary(a.common.out, json{{"cmd", "map"},
                                     {"method", a.method},
                                     {"map", map_name},
                                     {"average", avg},
                                     {"std_dev", sd},
                                     {"deviation", dev},
                                     {"height", map.height},
                                     {"width", map.width}});
    return 0;
}

// -------------------------------------------------------------- synth ----

struct SynthArgs {
    CommonOpts common;
    int bases = 6;
    int base_size = 160;
    std::string types = "gaussian_blur,white_noise,jpeg_blocking,local_blockwise";
    int levels = 5;
};

int run_synth(CLI::App* cmd, SynthArgs& a) {
    if (!start_run(cmd, a.common, "synth " + std::to_string(a.bases) + " bases")) return 0;

    data::SynthConfig cfg;
    cfg.num_bases = a.bases;
    cfg.base_size = a.base_size;
    cfg.levels = a.levels;
    cfg.kinds.clear();
    std::string cur;
    for (char ch : a.types + ",") {
        if (ch == ',') {
            if (!cur.empty()) cfg.kinds.push_back(data::parse_distortion(cur));
            cur.clear();
        } else {
            cur += ch;
        }
    }

    data::DatasetManifest m = data::synthesize(cfg, a.common.seed, a.common.out);
    std::string manifest = (fs::path(a.common.out) / "manifest.csv").string();
    write_summary(a.common.out, json{{"cmd", "synth"},
                                     {"entries", m.entries.size()},
                                     {"manifest", "manifest.csv"},
                                     {"fingerprint", hex_fingerprint(manifest)}});
    std::printf("synthesized %zu entries\n", m.entries.size());
    return 0;
}

// ------------------------------------------------------------- labels ----

struct LabelsArgs {
    CommonOpts common;
    std::string manifest, map_config;
    std::vector<std::string> methods;
};

int run_labels(CLI::App* cmd, LabelsArgs& a) {
    if (a.common.out.empty()) {
        const char* cache = std::getenv("QMAP_CACHE");
        if (cache) a.common.out = cache;
    }
    if (!start_run(cmd, a.common, "labels for " + a.manifest)) return 0;

    fr::MapConfig cfg = a.map_config.empty() ? fr::MapConfig{} : fr::load_map_config(a.map_config);
    data::DatasetManifest m = data::load_manifest(a.manifest);
    for (const std::string& token : a.methods) {
        fr::FrMethod method = fr::parse_method(token);
        data::LabelStore store =
            data::materialize_labels(m, method, cfg, a.common.out, a.manifest);
        write_summary(a.common.out, json{{"cmd", "labels"},
                                         {"method", token},
                                         {"count", store.items.size()},
                                         {"fingerprint", store.manifest_fingerprint}});
        std::printf("labels[%s]: %zu maps\n", token.c_str(), store.items.size());
    }
    return 0;
}

// ---------------------------------------------------------- train-gen ----

struct TrainGenArgs {
    CommonOpts common;
    std::string manifest, labels, method = "fsim_gm";
    std::string gen_channels = "32,64,128,256";
    int patch = 144, stride = 120;
    int epochs = 100, batch = 8;
    double lr = 1e-3, val_fraction = 0.2;
    bool no_hflip = false;
};

void write_history_csv(const models::TrainHistory& h, const std::string& path) {
    std::ofstream f(path);
    f << "epoch,train_loss,val_loss\n";
    char buf[96];
    for (size_t e = 0; e < h.train_loss.size(); ++e) {
        if (e < h.val_loss.size())
            std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g\n", e, h.train_loss[e], h.val_loss[e]);
        else
            std::snprintf(buf, sizeof(buf), "%zu,%.17g,\n", e, h.train_loss[e]);
        f << buf;
    }
}

int run_train_gen(CLI::App* cmd, TrainGenArgs& a) {
    fr::FrMethod method = fr::parse_method(a.method);
    if (!start_run(cmd, a.common, "train-gen on " + a.manifest)) return 0;

    data::DatasetManifest m = data::load_manifest(a.manifest);
    data::LabelStore store = data::load_label_store(a.labels, method);
    std::string fp = hex_fingerprint(a.manifest);
    check_fingerprint("label store " + store.root, store.manifest_fingerprint, fp);

    models::UNetSpec spec;
    spec.stage_channels = parse_int_list(a.gen_channels, "--gen-channels");
    spec.depth = static_cast<int>(spec.stage_channels.size());
    models::check_generator_input(spec, a.patch, a.patch);

    models::PatchOptions po{a.patch, a.stride};
    std::vector<models::MapSample> samples = models::generator_samples(m, store, po);

    nn::ComputeGraph gen = models::build_generator(spec, a.common.seed);
    models::TrainOptions opt;
    opt.epochs = a.epochs;
    opt.batch_size = a.batch;
    opt.lr = a.lr;
    opt.seed = a.common.seed;
    opt.val_fraction = a.val_fraction;
    opt.hflip = !a.no_hflip;
    models::TrainHistory hist = models::train_generator(gen, samples, opt);

    models::GeneratorBundle bundle;
    bundle.spec = spec;
    bundle.method = method;
    bundle.graph = std::move(gen);
    bundle.seed = a.common.seed;
    bundle.data_fingerprint = fp;
    bundle.patch_size = a.patch;
    bundle.stride = a.stride;
    std::string ckpt_name = "gen_" + a.method + ".ckpt";
    models::save_generator(bundle, (fs::path(a.common.out) / ckpt_name).string());
    write_history_csv(hist, (fs::path(a.common.out) / "history_gen.csv").string());

    write_summary(a.common.out, json{{"cmd", "train-gen"},
                                     {"method", a.method},
                                     {"samples", samples.size()},
                                     {"epochs", a.epochs},
                                     {"best_epoch", hist.best_epoch},
                                     {"best_loss", hist.best_loss},
                                     {"epoch0_loss", hist.train_loss.front()},
                                     {"checkpoint", ckpt_name},
                                     {"fingerprint", fp}});
    std::printf("train-gen: %zu samples, best epoch %d, loss %.6f\n", samples.size(),
                hist.best_epoch, hist.best_loss);
    return 0;
}

// --------------------------------------------------------- train-pool ----

struct TrainPoolArgs {
    CommonOpts common;
    std::string manifest, labels, method = "fsim_gm";
    std::string source = "gt"; // pm | gt | direct
    std::string pooler = "dpn";
    std::string fusion = "single";
    std::vector<std::string> gens;
    std::string conv_channels = "32,64,128,128,128";
    int fc_units = 512;
    int patch = 144, stride = 120;
    int epochs = 100, batch = 8;
    double lr = 5e-3, val_fraction = 0.2;
    double train_fraction = 0.8;
    uint64_t split_seed = 1;
    bool no_hflip = false;
};

int run_train_pool(CLI::App* cmd, TrainPoolArgs& a) {
    if (!start_run(cmd, a.common, "train-pool (" + a.source + ") on " + a.manifest)) return 0;

    data::DatasetManifest m = data::load_manifest(a.manifest);
    std::string fp = hex_fingerprint(a.manifest);
    auto [train_m, test_m] = data::split(m, {a.train_fraction, a.split_seed});
    // keep paths valid from the new location by re-rooting them
    for (auto* part : {&train_m, &test_m})
        for (auto& e : part->entries) {
            e.distorted_path = m.resolve(e.distorted_path);
            if (!e.reference_path.empty()) e.reference_path = m.resolve(e.reference_path);
        }
    train_m.base_dir = a.common.out;
    test_m.base_dir = a.common.out;
    data::save_manifest(train_m, (fs::path(a.common.out) / "train_manifest.csv").string());
    data::save_manifest(test_m, (fs::path(a.common.out) / "test_manifest.csv").string());

    models::PatchOptions po{a.patch, a.stride};
    models::PoolNetSpec spec;
    spec.kind = models::parse_pooler_kind(a.pooler);
    spec.conv_channels = parse_int_list(a.conv_channels, "--conv-channels");
    spec.fc_units = a.fc_units;
    spec.input_size = a.patch;

    models::FusionMode fusion;
    fusion.kind = models::parse_fusion(a.fusion);

    std::vector<models::GeneratorBundle> gen_bundles;
    std::vector<nn::ComputeGraph*> frozen;
    std::vector<models::PatchScoreSample> samples;

    if (a.source == "pm") {
        if (a.gens.empty()) throw StateError("train-pool --source pm needs at least one --gen");
        for (const std::string& gp : a.gens) {
            models::GeneratorBundle gb = models::load_generator(gp);
            check_fingerprint(gp, gb.data_fingerprint, fp);
            if (gb.patch_size != a.patch || gb.stride != a.stride)
                throw StateError(gp + " patch protocol differs from --patch/--stride");
            fusion.map_methods.push_back(gb.method);
            gen_bundles.push_back(std::move(gb));
        }
        for (auto& gb : gen_bundles) frozen.push_back(&gb.graph);
        spec.input_channels =
            fusion.kind == models::FusionKind::single_stream ? static_cast<int>(frozen.size()) : 1;
        samples = models::image_patch_samples(train_m, po);
    } else if (a.source == "gt") {
        data::LabelStore store = data::load_label_store(a.labels, fr::parse_method(a.method));
        check_fingerprint("label store " + store.root, store.manifest_fingerprint, fp);
        fusion.map_methods = {fr::parse_method(a.method)};
        spec.input_channels = 1;
        samples = models::map_patch_samples(train_m, store, po);
    } else if (a.source == "direct") {
        spec.kind = models::PoolerKind::DPN_direct;
        spec.input_channels = 3;
        samples = models::image_patch_samples(train_m, po);
    } else {
        throw FormatError("unknown --source '" + a.source + "' (pm|gt|direct)");
    }

    models::PoolerNet net = models::build_pooler(spec, fusion, a.common.seed);
    models::TrainOptions opt;
    opt.epochs = a.epochs;
    opt.batch_size = a.batch;
    opt.lr = a.lr;
    opt.seed = a.common.seed;
    opt.val_fraction = a.val_fraction;
    opt.hflip = !a.no_hflip;
    models::TrainHistory hist = models::train_pooler(net, frozen, samples, opt);

    uint64_t frozen_sum = 0;
    for (nn::ComputeGraph* g : frozen) frozen_sum ^= g->param_checksum();

    models::PoolerBundle bundle;
    bundle.spec = spec;
    bundle.net = std::move(net);
    bundle.source_mode = a.source;
    bundle.seed = a.common.seed;
    bundle.data_fingerprint = fp;
    bundle.patch_size = a.patch;
    bundle.stride = a.stride;
    models::save_pooler(bundle, (fs::path(a.common.out) / "pool.ckpt").string());
    write_history_csv(hist, (fs::path(a.common.out) / "history_pool.csv").string());

    write_summary(a.common.out, json{{"cmd", "train-pool"},
                                     {"source", a.source},
                                     {"pooler", a.pooler},
                                     {"fusion", a.fusion},
                                     {"samples", samples.size()},
                                     {"best_epoch", hist.best_epoch},
                                     {"best_loss", hist.best_loss},
                                     {"frozen_checksum", to_hex(frozen_sum)},
                                     {"checkpoint", "pool.ckpt"},
                                     {"fingerprint", fp}});
    std::printf("train-pool: %zu samples, best epoch %d, loss %.6f\n", samples.size(),
                hist.best_epoch, hist.best_loss);
    return 0;
}

// ------------------------------------------------------------ predict ----

struct PredictArgs {
    CommonOpts common;
    std::string image, pool;
    std::vector<std::string> gens;
};

int run_predict(CLI::App* cmd, PredictArgs& a) {
    if (!start_run(cmd, a.common, "predict " + a.image)) return 0;

    models::Predictor p = load_predictor(a.gens, a.pool);
    img::Image image = img::load_image(a.image);
    models::Prediction pr = models::predict_score(p, image);

    fr::save_map(pr.map, (fs::path(a.common.out) / "predicted_map.png").string());
    std::printf("score %.6f\n", pr.score);
    write_summary(a.common.out, json{{"cmd", "predict"},
                                     {"image", a.image},
                                     {"score", pr.score},
                                     {"map", "predicted_map.png"}});
    return 0;
}

// --------------------------------------------------------------- eval ----

struct EvalArgs {
    CommonOpts common;
    std::string manifest, pool;
    std::vector<std::string> gens;
    bool logistic = false;
    bool per_type = false;
};

int run_eval(CLI::App* cmd, EvalArgs& a) {
    if (!start_run(cmd, a.common, "eval on " + a.manifest)) return 0;

    data::DatasetManifest m = data::load_manifest(a.manifest);
    models::Predictor p = load_predictor(a.gens, a.pool);

    std::vector<double> pred, gt;
    std::vector<std::string> types;
    for (const data::Entry& e : m.entries) {
        img::Image image = img::load_image(m.resolve(e.distorted_path));
        pred.push_back(models::predict_score(p, image).score);
        gt.push_back(e.score);
        types.push_back(e.distortion_type);
    }

    eval::EvalReport report;
    report.n = static_cast<int>(pred.size());
    report.srcc = eval::srcc(pred, gt);
    report.plcc = eval::plcc(pred, gt);

    json j{{"cmd", "eval"},
           {"n", report.n},
           {"srcc", report.srcc},
           {"plcc", report.plcc}};

    if (a.per_type) {
        std::map<std::string, std::vector<size_t>> groups;
        for (size_t i = 0; i < types.size(); ++i) groups[types[i]].push_back(i);
        json per;
        for (const auto& [type, ids] : groups) {
            if (ids.size() < 3) continue;
            std::vector<double> tp, tg;
            for (size_t i : ids) {
                tp.push_back(pred[i]);
                tg.push_back(gt[i]);
            }
            report.per_type[type] = {eval::srcc(tp, tg), eval::plcc(tp, tg)};
            per[type] = {{"srcc", report.per_type[type].first},
                         {"plcc", report.per_type[type].second}};
        }
        j["per_type"] = per;
    }

    if (a.logistic) {
        // cross-dataset protocol: fit the mapping on 80% of the test data,
        // report mapped PLCC on the remaining 20%
        std::vector<size_t> idx(pred.size());
        for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        Rng(a.common.seed).substream("logistic-split").shuffle(idx);
        size_t n_fit = idx.size() * 8 / 10;
        std::vector<double> fp, fg, rp, rg;
        for (size_t i = 0; i < idx.size(); ++i) {
            if (i < n_fit) {
                fp.push_back(pred[idx[i]]);
                fg.push_back(gt[idx[i]]);
            } else {
                rp.push_back(pred[idx[i]]);
                rg.push_back(gt[idx[i]]);
            }
        }
        eval::LogisticFit fit = eval::fit_logistic(fp, fg);
        report.logistic = fit.params;
        std::vector<double> mapped;
        for (double v : rp) mapped.push_back(eval::apply_logistic(fit.params, v));
        report.plcc_mapped = eval::plcc(mapped, rg);
        j["logistic"] = {{"eta1", fit.params.eta1},
                         {"eta2", fit.params.eta2},
                         {"eta3", fit.params.eta3},
                         {"eta4", fit.params.eta4},
                         {"plcc_mapped", *report.plcc_mapped}};
    }

    // one-row CSV for spreadsheet use
    {
        std::ofstream f(fs::path(a.common.out) / "eval.csv");
        f << "n,srcc,plcc\n";
        char buf[96];
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g\n", report.n, report.srcc, report.plcc);
        f << buf;
    }
    write_summary(a.common.out, j);
    std::printf("eval: n=%d srcc=%.4f plcc=%.4f\n", report.n, report.srcc, report.plcc);
    return 0;
}

// -------------------------------------------------------------- study ----

struct StudyArgs {
    CommonOpts common;
    std::string manifest, labels, method = "fsim_gm";
    std::string blocks = "1,2,4,8,16,24,36,48";
    std::string conv_channels = "16,32,32,32,32";
    int fc_units = 64;
    int patch = 48, stride = 40;
    int epochs = 20, batch = 8;
    double lr = 5e-3;
    double test_fraction = 0.25;
};

int run_study(CLI::App* cmd, StudyArgs& a) {
    if (!start_run(cmd, a.common, "study on " + a.manifest)) return 0;

    data::DatasetManifest m = data::load_manifest(a.manifest);
    data::LabelStore store = data::load_label_store(a.labels, fr::parse_method(a.method));
    check_fingerprint("label store " + store.root, store.manifest_fingerprint,
                      hex_fingerprint(a.manifest));

    // cut every label map into patches; each inherits its entry's score
    std::vector<std::pair<img::QualityMap, double>> maps;
    for (const data::Entry& e : m.entries) {
        img::Image map_img = img::load_image(store.map_path(store.find(e.id)));
        img::PatchGrid grid = img::extract_patches(map_img, a.patch, a.stride);
        for (const img::Image& patch : grid.patches) {
            img::QualityMap q(patch.height, patch.width);
            q.data = patch.data;
            maps.emplace_back(std::move(q), e.score);
        }
    }

    eval::StudyOptions opt;
    opt.pooler.input_channels = 1;
    opt.pooler.input_size = a.patch;
    opt.pooler.conv_channels = parse_int_list(a.conv_channels, "--conv-channels");
    opt.pooler.fc_units = a.fc_units;
    opt.train.epochs = a.epochs;
    opt.train.batch_size = a.batch;
    opt.train.lr = a.lr;
    opt.train.seed = a.common.seed;
    opt.train.val_fraction = 0.0;
    opt.train.hflip = false;
    opt.test_fraction = a.test_fraction;
    opt.split_seed = a.common.seed;

    std::vector<eval::StudyRow> rows =
        eval::patch_average_study(maps, parse_int_list(a.blocks, "--blocks"), opt);
    eval::save_study_csv(rows, (fs::path(a.common.out) / "study.csv").string());

    json jrows = json::array();
    for (const auto& r : rows) {
        jrows.push_back({{"block", r.block}, {"srcc", r.srcc}, {"plcc", r.plcc}});
        std::printf("block %2d: srcc=%.4f plcc=%.4f\n", r.block, r.srcc, r.plcc);
    }
    write_summary(a.common.out, json{{"cmd", "study"},
                                     {"maps", maps.size()},
                                     {"rows", jrows},
                                     {"table", "study.csv"}});
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"blind per-pixel quality map toolkit"};
    app.option_defaults()->always_capture_default(true);
    app.require_subcommand(1);

    MapArgs map_args;
    CLI::App* cmd_map = app.add_subcommand("map", "full-reference similarity map + poolings");
    cmd_map->add_option("--dist", map_args.dist, "distorted image")->required();
    cmd_map->add_option("--ref", map_args.ref, "reference image")->required();
    cmd_map->add_option("--method", map_args.method, "ssim|fsim_gm|fsim_pc|mdsi_gc");
    cmd_map->add_option("--map-config", map_args.map_config, "map constant overrides");
    add_common(cmd_map, map_args.common);

    SynthArgs synth_args;
    CLI::App* cmd_synth = app.add_subcommand("synth", "generate a procedural distortion dataset");
    cmd_synth->add_option("--bases", synth_args.bases, "number of base images");
    cmd_synth->add_option("--base-size", synth_args.base_size, "base image edge (>= 160)");
    cmd_synth->add_option("--types", synth_args.types, "comma-separated distortion kinds");
    cmd_synth->add_option("--levels", synth_args.levels, "levels per kind (1..5)");
    add_common(cmd_synth, synth_args.common);

    LabelsArgs labels_args;
    CLI::App* cmd_labels = app.add_subcommand("labels", "materialize FR map labels");
    cmd_labels->add_option("--manifest", labels_args.manifest, "dataset manifest")->required();
    cmd_labels->add_option("--method", labels_args.methods, "map method (repeatable)")
        ->required()
        ->take_all();
    cmd_labels->add_option("--map-config", labels_args.map_config, "map constant overrides");
    add_common(cmd_labels, labels_args.common);
    cmd_labels->get_option("--out")->required(false); // falls back to QMAP_CACHE

    TrainGenArgs tg;
    CLI::App* cmd_tg = app.add_subcommand("train-gen", "stage 1: train the map predictor");
    cmd_tg->add_option("--manifest", tg.manifest, "dataset manifest")->required();
    cmd_tg->add_option("--labels", tg.labels, "label store root")->required();
    cmd_tg->add_option("--method", tg.method, "label method");
    cmd_tg->add_option("--gen-channels", tg.gen_channels, "encoder stage widths");
    cmd_tg->add_option("--patch", tg.patch, "patch size");
    cmd_tg->add_option("--stride", tg.stride, "patch stride");
    cmd_tg->add_option("--epochs", tg.epochs, "training epochs");
    cmd_tg->add_option("--batch", tg.batch, "batch size");
    cmd_tg->add_option("--lr", tg.lr, "learning rate");
    cmd_tg->add_option("--val-fraction", tg.val_fraction, "validation fraction");
    cmd_tg->add_flag("--no-hflip", tg.no_hflip, "disable flip augmentation");
    add_common(cmd_tg, tg.common);

    TrainPoolArgs tp;
    CLI::App* cmd_tp = app.add_subcommand("train-pool", "stage 2: train the score pooler");
    cmd_tp->add_option("--manifest", tp.manifest, "dataset manifest")->required();
    cmd_tp->add_option("--source", tp.source, "pm|gt|direct");
    cmd_tp->add_option("--labels", tp.labels, "label store root (gt mode)");
    cmd_tp->add_option("--method", tp.method, "label method (gt mode)");
    cmd_tp->add_option("--gen", tp.gens, "generator checkpoint (repeatable, pm mode)")->take_all();
    cmd_tp->add_option("--pooler", tp.pooler, "dpn|fc2");
    cmd_tp->add_option("--fusion", tp.fusion, "single|multi");
    cmd_tp->add_option("--conv-channels", tp.conv_channels, "trunk conv widths");
    cmd_tp->add_option("--fc-units", tp.fc_units, "hidden units of the head");
    cmd_tp->add_option("--patch", tp.patch, "patch size");
    cmd_tp->add_option("--stride", tp.stride, "patch stride");
    cmd_tp->add_option("--epochs", tp.epochs, "training epochs");
    cmd_tp->add_option("--batch", tp.batch, "batch size");
    cmd_tp->add_option("--lr", tp.lr, "learning rate");
    cmd_tp->add_option("--val-fraction", tp.val_fraction, "validation fraction");
    cmd_tp->add_option("--train-fraction", tp.train_fraction, "reference-level train share");
    cmd_tp->add_option("--split-seed", tp.split_seed, "reference split seed");
    cmd_tp->add_flag("--no-hflip", tp.no_hflip, "disable flip augmentation");
    add_common(cmd_tp, tp.common);

    PredictArgs pr;
    CLI::App* cmd_pr = app.add_subcommand("predict", "blind score + stitched map");
    cmd_pr->add_option("--image", pr.image, "distorted image")->required();
    cmd_pr->add_option("--gen", pr.gens, "generator checkpoint (repeatable)")
        ->required()
        ->take_all();
    cmd_pr->add_option("--pool", pr.pool, "pooler checkpoint")->required();
    add_common(cmd_pr, pr.common);

    EvalArgs ev;
    CLI::App* cmd_ev = app.add_subcommand("eval", "correlation report over a manifest");
    cmd_ev->add_option("--manifest", ev.manifest, "evaluation manifest")->required();
    cmd_ev->add_option("--gen", ev.gens, "generator checkpoint (repeatable)")
        ->required()
        ->take_all();
    cmd_ev->add_option("--pool", ev.pool, "pooler checkpoint")->required();
    cmd_ev->add_flag("--logistic", ev.logistic, "fit the cross-dataset logistic mapping");
    cmd_ev->add_flag("--per-type", ev.per_type, "report per-distortion-type correlations");
    add_common(cmd_ev, ev.common);

    StudyArgs st;
    CLI::App* cmd_st = app.add_subcommand("study", "local-patch-averaging comparison");
    cmd_st->add_option("--manifest", st.manifest, "dataset manifest")->required();
    cmd_st->add_option("--labels", st.labels, "label store root")->required();
    cmd_st->add_option("--method", st.method, "label method");
    cmd_st->add_option("--blocks", st.blocks, "comma-separated local patch sizes");
    cmd_st->add_option("--conv-channels", st.conv_channels, "pooler conv widths");
    cmd_st->add_option("--fc-units", st.fc_units, "pooler hidden units");
    cmd_st->add_option("--patch", st.patch, "map patch size");
    cmd_st->add_option("--stride", st.stride, "map patch stride");
    cmd_st->add_option("--epochs", st.epochs, "epochs per block");
    cmd_st->add_option("--batch", st.batch, "batch size");
    cmd_st->add_option("--lr", st.lr, "learning rate");
    cmd_st->add_option("--test-fraction", st.test_fraction, "held-out share");
    add_common(cmd_st, st.common);

    try {
        std::vector<std::string> args(argv + 1, argv + argc);
        args = expand_config(std::move(args));
        std::reverse(args.begin(), args.end());
        app.parse(std::move(args));
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }

    try {
        if (cmd_map->parsed()) return run_map(cmd_map, map_args);
        if (cmd_synth->parsed()) return run_synth(cmd_synth, synth_args);
        if (cmd_labels->parsed()) return run_labels(cmd_labels, labels_args);
        if (cmd_tg->parsed()) return run_train_gen(cmd_tg, tg);
        if (cmd_tp->parsed()) return run_train_pool(cmd_tp, tp);
        if (cmd_pr->parsed()) return run_predict(cmd_pr, pr);
        if (cmd_ev->parsed()) return run_eval(cmd_ev, ev);
        if (cmd_st->parsed()) return run_study(cmd_st, st);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
