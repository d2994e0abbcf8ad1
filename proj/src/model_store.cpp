#include "qmap/model_store.hpp"
#include "qmap/checkpoint.hpp"
#include "qmap/errors.hpp"

#include <json.hpp>

#include <fstream>

namespace qmap::models {

using nlohmann::json;

namespace {

json unet_to_json(const UNetSpec& s) {
    return json{{"depth", s.depth},
                {"stage_channels", s.stage_channels},
                {"input_channels", s.input_channels},
                {"output_channels", s.output_channels},
                {"leaky_slope", s.leaky_slope}};
}

UNetSpec unet_from_json(const json& j) {
    UNetSpec s;
    s.depth = j.at("depth").get<int>();
    s.stage_channels = j.at("stage_channels").get<std::vector<int>>();
    s.input_channels = j.at("input_channels").get<int>();
    s.output_channels = j.at("output_channels").get<int>();
    s.leaky_slope = j.at("leaky_slope").get<double>();
    return s;
}

json pool_to_json(const PoolNetSpec& s) {
    return json{{"kind", pooler_kind_token(s.kind)},
                {"input_channels", s.input_channels},
                {"input_size", s.input_size},
                {"conv_channels", s.conv_channels},
                {"fc_units", s.fc_units},
                {"dropout_p", s.dropout_p},
                {"leaky_slope", s.leaky_slope}};
}

PoolNetSpec pool_from_json(const json& j) {
    PoolNetSpec s;
    s.kind = parse_pooler_kind(j.at("kind").get<std::string>());
    s.input_channels = j.at("input_channels").get<int>();
    s.input_size = j.at("input_size").get<int>();
    s.conv_channels = j.at("conv_channels").get<std::vector<int>>();
    s.fc_units = j.at("fc_units").get<int>();
    s.dropout_p = j.at("dropout_p").get<double>();
    s.leaky_slope = j.at("leaky_slope").get<double>();
    return s;
}

json fusion_to_json(const FusionMode& f) {
    std::vector<std::string> methods;
    for (fr::FrMethod m : f.map_methods) methods.push_back(fr::method_token(m));
    return json{{"kind", fusion_token(f.kind)}, {"methods", methods}};
}

FusionMode fusion_from_json(const json& j) {
    FusionMode f;
    f.kind = parse_fusion(j.at("kind").get<std::string>());
    for (const auto& m : j.at("methods"))
        f.map_methods.push_back(fr::parse_method(m.get<std::string>()));
    return f;
}

void write_sidecar(const json& j, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write sidecar " + path);
    f << j.dump(2) << "\n";
}

json read_sidecar(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw LoadError("missing sidecar " + path);
    json j;
    f >> j;
    return j;
}

} // namespace

void save_generator(const GeneratorBundle& b, const std::string& path) {
    nn::Checkpoint ckpt;
    ckpt.rng_seed = b.seed;
    ckpt.entries.push_back({"generator", b.graph, std::nullopt});
    nn::save_checkpoint(ckpt, path);

    json j{{"kind", "generator"},
           {"method", fr::method_token(b.method)},
           {"unet", unet_to_json(b.spec)},
           {"seed", b.seed},
           {"data_fingerprint", b.data_fingerprint},
           {"patch_size", b.patch_size},
           {"stride", b.stride}};
    write_sidecar(j, path + ".json");
}

GeneratorBundle load_generator(const std::string& path) {
    nn::Checkpoint ckpt = nn::load_checkpoint(path);
    json j = read_sidecar(path + ".json");
    if (j.at("kind").get<std::string>() != "generator")
        throw LoadError(path + " is not a generator checkpoint");

    GeneratorBundle b;
    b.graph = ckpt.find("generator").graph;
    b.seed = ckpt.rng_seed;
    b.method = fr::parse_method(j.at("method").get<std::string>());
    b.spec = unet_from_json(j.at("unet"));
    b.data_fingerprint = j.at("data_fingerprint").get<std::string>();
    b.patch_size = j.at("patch_size").get<int>();
    b.stride = j.at("stride").get<int>();
    return b;
}

void save_pooler(const PoolerBundle& b, const std::string& path) {
    nn::Checkpoint ckpt;
    ckpt.rng_seed = b.seed;
    for (size_t i = 0; i < b.net.trunks.size(); ++i)
        ckpt.entries.push_back({"trunk" + std::to_string(i), b.net.trunks[i], std::nullopt});
    ckpt.entries.push_back({"head", b.net.head, std::nullopt});
    nn::save_checkpoint(ckpt, path);

    json j{{"kind", "pooler"},
           {"pool", pool_to_json(b.spec)},
           {"fusion", fusion_to_json(b.net.fusion)},
           {"source_mode", b.source_mode},
           {"num_trunks", b.net.trunks.size()},
           {"seed", b.seed},
           {"data_fingerprint", b.data_fingerprint},
           {"patch_size", b.patch_size},
           {"stride", b.stride}};
    write_sidecar(j, path + ".json");
}

PoolerBundle load_pooler(const std::string& path) {
    nn::Checkpoint ckpt = nn::load_checkpoint(path);
    json j = read_sidecar(path + ".json");
    if (j.at("kind").get<std::string>() != "pooler")
        throw LoadError(path + " is not a pooler checkpoint");

    PoolerBundle b;
    b.spec = pool_from_json(j.at("pool"));
    b.net.spec = b.spec;
    b.net.fusion = fusion_from_json(j.at("fusion"));
    size_t ntrunks = j.at("num_trunks").get<size_t>();
    for (size_t i = 0; i < ntrunks; ++i)
        b.net.trunks.push_back(ckpt.find("trunk" + std::to_string(i)).graph);
    b.net.head = ckpt.find("head").graph;
    b.source_mode = j.at("source_mode").get<std::string>();
    b.seed = ckpt.rng_seed;
    b.data_fingerprint = j.at("data_fingerprint").get<std::string>();
    b.patch_size = j.at("patch_size").get<int>();
    b.stride = j.at("stride").get<int>();
    return b;
}

} // namespace qmap::models
