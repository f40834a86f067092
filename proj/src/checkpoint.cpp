#include "fsrlab/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace fsrlab {

namespace {

constexpr char kModelMagic[8] = {'F', 'S', 'R', 'M', 'D', 'L', '0', '1'};

template <class T>
void put(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& in, const char* what) {
    T v;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw Error(std::string("model checkpoint: truncated ") + what);
    return v;
}

void put_layer(std::ostream& out, const DenseLayer& l) {
    put(out, std::uint64_t(l.out()));
    put(out, std::uint64_t(l.in()));
    put(out, std::uint32_t(l.act));
    put(out, l.alpha);
    out.write(reinterpret_cast<const char*>(l.weight.data.data()),
              std::streamsize(l.weight.data.size() * sizeof(float)));
    out.write(reinterpret_cast<const char*>(l.bias.data.data()),
              std::streamsize(l.bias.data.size() * sizeof(float)));
}

DenseLayer get_layer(std::istream& in) {
    DenseLayer l;
    const auto out_dim = std::size_t(get<std::uint64_t>(in, "layer out"));
    const auto in_dim = std::size_t(get<std::uint64_t>(in, "layer in"));
    l.act = Activation(get<std::uint32_t>(in, "activation"));
    l.alpha = get<float>(in, "alpha");
    l.weight = Tensor::zeros({out_dim, in_dim});
    l.bias = Tensor::zeros({out_dim});
    in.read(reinterpret_cast<char*>(l.weight.data.data()),
            std::streamsize(l.weight.data.size() * sizeof(float)));
    in.read(reinterpret_cast<char*>(l.bias.data.data()),
            std::streamsize(l.bias.data.size() * sizeof(float)));
    if (!in) throw Error("model checkpoint: truncated layer data");
    return l;
}

} // namespace

void write_model(std::ostream& out, const Mlp& m) {
    put(out, std::uint32_t(m.trunk.size()));
    put(out, std::uint32_t(m.heads.size()));
    put(out, std::int32_t(m.active_head));
    for (const auto& l : m.trunk) put_layer(out, l);
    for (const auto& h : m.heads) put_layer(out, h);
}

Mlp read_model(std::istream& in) {
    Mlp m;
    const auto nt = get<std::uint32_t>(in, "trunk count");
    const auto nh = get<std::uint32_t>(in, "head count");
    m.active_head = get<std::int32_t>(in, "active head");
    for (std::uint32_t i = 0; i < nt; ++i) m.trunk.push_back(get_layer(in));
    for (std::uint32_t i = 0; i < nh; ++i) m.heads.push_back(get_layer(in));
    m.version = 1;
    return m;
}

void save_model(const std::string& path, const Mlp& m, const RngStates& rng) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    out.write(kModelMagic, sizeof kModelMagic);
    write_model(out, m);
    put(out, std::uint32_t(rng.size()));
    for (const auto& [name, st] : rng) {
        put(out, std::uint32_t(name.size()));
        out.write(name.data(), std::streamsize(name.size()));
        for (auto w : st) put(out, w);
    }
    if (!out) throw Error("write failed: " + path);
}

LoadedModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    char magic[8];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kModelMagic, sizeof magic) != 0)
        throw Error(path + ": not a model checkpoint (bad magic)");
    LoadedModel lm;
    lm.model = read_model(in);
    const auto n = get<std::uint32_t>(in, "rng state count");
    for (std::uint32_t i = 0; i < n; ++i) {
        const auto len = get<std::uint32_t>(in, "rng name length");
        std::string name(len, '\0');
        in.read(name.data(), std::streamsize(len));
        std::array<std::uint64_t, 4> st{};
        for (auto& w : st) w = get<std::uint64_t>(in, "rng state");
        lm.rng[name] = st;
    }
    return lm;
}

} // namespace fsrlab
