#include "qmap/checkpoint.hpp"
#include "qmap/errors.hpp"

#include <cstring>
#include <fstream>

namespace qmap::nn {

namespace {

constexpr char MAGIC[8] = {'Q', 'M', 'A', 'P', 'N', 'E', 'T', '1'};
constexpr uint32_t VERSION = 1;

// All scalars are written little-endian; this writer assumes a LE host,
// which covers every platform this project targets.
void put_u32(std::ostream& os, uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }
void put_u64(std::ostream& os, uint64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); }
void put_f64(std::ostream& os, double v) { os.write(reinterpret_cast<const char*>(&v), 8); }

void put_str(std::ostream& os, const std::string& s) {
    put_u32(os, static_cast<uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

uint32_t get_u32(std::istream& is) {
    uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 4);
    if (!is) throw DecodeError("truncated checkpoint");
    return v;
}

uint64_t get_u64(std::istream& is) {
    uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 8);
    if (!is) throw DecodeError("truncated checkpoint");
    return v;
}

double get_f64(std::istream& is) {
    double v = 0;
    is.read(reinterpret_cast<char*>(&v), 8);
    if (!is) throw DecodeError("truncated checkpoint");
    return v;
}

std::string get_str(std::istream& is) {
    uint32_t len = get_u32(is);
    if (len > (1u << 20)) throw DecodeError("corrupt string length in checkpoint");
    std::string s(len, '\0');
    is.read(s.data(), len);
    if (!is) throw DecodeError("truncated checkpoint");
    return s;
}

void put_tensor(std::ostream& os, const Tensor4& t) {
    put_u32(os, static_cast<uint32_t>(t.n));
    put_u32(os, static_cast<uint32_t>(t.c));
    put_u32(os, static_cast<uint32_t>(t.h));
    put_u32(os, static_cast<uint32_t>(t.w));
    os.write(reinterpret_cast<const char*>(t.data.data()),
             static_cast<std::streamsize>(t.data.size() * sizeof(double)));
}

Tensor4 get_tensor(std::istream& is) {
    int n = static_cast<int>(get_u32(is));
    int c = static_cast<int>(get_u32(is));
    int h = static_cast<int>(get_u32(is));
    int w = static_cast<int>(get_u32(is));
    Tensor4 t(n, c, h, w);
    is.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    if (!is) throw DecodeError("truncated tensor in checkpoint");
    return t;
}

void put_graph(std::ostream& os, const ComputeGraph& g) {
    put_u32(os, static_cast<uint32_t>(g.nodes.size()));
    for (const Node& node : g.nodes) {
        put_u32(os, static_cast<uint32_t>(node.spec.kind));
        put_u32(os, static_cast<uint32_t>(node.spec.in_channels));
        put_u32(os, static_cast<uint32_t>(node.spec.out_channels));
        put_u32(os, static_cast<uint32_t>(node.spec.in_units));
        put_u32(os, static_cast<uint32_t>(node.spec.out_units));
        put_f64(os, node.spec.slope);
        put_f64(os, node.spec.drop_p);
        put_f64(os, node.spec.bn_eps);
        put_f64(os, node.spec.bn_momentum);
        put_str(os, node.spec.concat_with);
        put_str(os, node.save_as);
        put_u32(os, static_cast<uint32_t>(node.params.size()));
        for (const Tensor4& p : node.params) put_tensor(os, p);
        put_u32(os, static_cast<uint32_t>(node.buffers.size()));
        for (const Tensor4& b : node.buffers) put_tensor(os, b);
    }
}

ComputeGraph get_graph(std::istream& is) {
    ComputeGraph g;
    uint32_t nnodes = get_u32(is);
    for (uint32_t i = 0; i < nnodes; ++i) {
        LayerSpec spec;
        spec.kind = static_cast<LayerKind>(get_u32(is));
        spec.in_channels = static_cast<int>(get_u32(is));
        spec.out_channels = static_cast<int>(get_u32(is));
        spec.in_units = static_cast<int>(get_u32(is));
        spec.out_units = static_cast<int>(get_u32(is));
        spec.slope = get_f64(is);
        spec.drop_p = get_f64(is);
        spec.bn_eps = get_f64(is);
        spec.bn_momentum = get_f64(is);
        spec.concat_with = get_str(is);
        std::string save_as = get_str(is);
        g.add(spec, save_as);
        Node& node = g.nodes.back();
        uint32_t nparams = get_u32(is);
        node.params.clear();
        for (uint32_t j = 0; j < nparams; ++j) node.params.push_back(get_tensor(is));
        uint32_t nbuffers = get_u32(is);
        node.buffers.clear();
        for (uint32_t j = 0; j < nbuffers; ++j) node.buffers.push_back(get_tensor(is));
    }
    return g;
}

} // namespace

const Checkpoint::Entry& Checkpoint::find(const std::string& name) const {
    for (const Entry& e : entries)
        if (e.name == name) return e;
    throw LoadError("checkpoint has no graph named '" + name + "'");
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write checkpoint " + path);
    os.write(MAGIC, sizeof(MAGIC));
    put_u32(os, VERSION);
    put_u32(os, static_cast<uint32_t>(ckpt.entries.size()));
    for (const Checkpoint::Entry& e : ckpt.entries) {
        put_str(os, e.name);
        put_graph(os, e.graph);
        os.put(e.adam.has_value() ? 1 : 0);
        if (e.adam.has_value()) {
            put_u64(os, e.adam->step);
            for (size_t i = 0; i < e.adam->m.size(); ++i)
                for (size_t j = 0; j < e.adam->m[i].size(); ++j) {
                    put_tensor(os, e.adam->m[i][j]);
                    put_tensor(os, e.adam->v[i][j]);
                }
        }
    }
    put_u64(os, ckpt.rng_seed);
    if (!os) throw IoError("failed writing checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot read checkpoint " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, MAGIC, 8) != 0)
        throw DecodeError(path + " is not a qmap checkpoint");
    uint32_t version = get_u32(is);
    if (version != VERSION)
        throw DecodeError("unsupported checkpoint version " + std::to_string(version));

    Checkpoint ckpt;
    uint32_t nentries = get_u32(is);
    for (uint32_t i = 0; i < nentries; ++i) {
        Checkpoint::Entry e;
        e.name = get_str(is);
        e.graph = get_graph(is);
        int has_adam = is.get();
        if (has_adam == 1) {
            AdamState st = AdamState::for_graph(e.graph);
            st.step = get_u64(is);
            for (size_t a = 0; a < st.m.size(); ++a)
                for (size_t b = 0; b < st.m[a].size(); ++b) {
                    st.m[a][b] = get_tensor(is);
                    st.v[a][b] = get_tensor(is);
                }
            e.adam = std::move(st);
        } else if (has_adam != 0) {
            throw DecodeError("corrupt optimizer flag in checkpoint");
        }
        ckpt.entries.push_back(std::move(e));
    }
    ckpt.rng_seed = get_u64(is);
    return ckpt;
}

} // namespace qmap::nn
