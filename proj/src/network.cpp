#include "hst/network.hpp"

#include <cstdio>
#include <cstring>

#include "hst/graph.hpp"
#include "hst/rng.hpp"

namespace hst {

void validate_config(const NetConfig& c) {
    require(c.in_channels >= 1 && c.out_channels >= 1, errc::invalid_config, "channel counts");
    require(c.feat_channels >= 1, errc::invalid_config, "feat_channels");
    require(c.window >= 2 && c.window % 2 == 0, errc::invalid_config,
            "window must be even and at least 2");
    require(c.heads >= 1, errc::invalid_config, "heads");
    require((2 * c.feat_channels) % c.heads == 0, errc::invalid_config,
            "heads must divide the decoder channel count");
    require(c.mlp_ratio >= 1, errc::invalid_config, "mlp_ratio");
}

namespace {

// Shapes and names in declaration order; shared by init, load and the
// parameter-count formula.
std::vector<ParamEntry> make_entries(const NetConfig& c) {
    const int f = c.feat_channels;
    const int cc = 2 * f;
    const int hidden = c.mlp_ratio * cc;
    std::vector<ParamEntry> e;
    e.reserve(pidx::entry_count);

    auto push = [&](std::string name, std::vector<int> shape) {
        e.push_back({std::move(name), Tensor(std::move(shape))});
    };

    push("encoder.conv1.weight", {f, c.in_channels, 3, 3});
    push("encoder.conv1.bias", {f});
    push("encoder.conv2.weight", {f, f, 3, 3});
    push("encoder.conv2.bias", {f});
    push("encoder.conv3.weight", {f, f, 3, 3});
    push("encoder.conv3.bias", {f});
    push("ccam.query.weight", {f, f, 1, 1});
    push("ccam.query.bias", {f});
    push("ccam.key.weight", {f, f, 1, 1});
    push("ccam.key.bias", {f});
    push("ccam.value.weight", {f, f, 1, 1});
    push("ccam.value.bias", {f});
    for (int b = 0; b < 3; ++b) {
        const std::string base = "decoder.block" + std::to_string(b);
        push(base + ".norm1.gamma", {cc});
        push(base + ".norm1.beta", {cc});
        push(base + ".attn.qkv.weight", {cc, 3 * cc});
        push(base + ".attn.qkv.bias", {3 * cc});
        push(base + ".attn.proj.weight", {cc, cc});
        push(base + ".attn.proj.bias", {cc});
        push(base + ".norm2.gamma", {cc});
        push(base + ".norm2.beta", {cc});
        push(base + ".mlp.fc1.weight", {cc, hidden});
        push(base + ".mlp.fc1.bias", {hidden});
        push(base + ".mlp.fc2.weight", {hidden, cc});
        push(base + ".mlp.fc2.bias", {cc});
    }
    push("decoder.fusion.weight", {f, 4 * cc, 3, 3});
    push("decoder.fusion.bias", {f});
    push("decoder.head.weight", {c.out_channels, f, 3, 3});
    push("decoder.head.bias", {c.out_channels});
    return e;
}

bool is_weight(const std::string& name) {
    return name.size() >= 6 && name.compare(name.size() - 6, 6, "weight") == 0;
}

bool is_norm_gamma(const std::string& name) {
    return name.find(".gamma") != std::string::npos;
}

// fan_in per weight tensor: conv {O,I,k,k} -> I*k*k, linear {K,N} -> K.
std::size_t fan_in(const Tensor& t) {
    if (t.rank() == 4) return static_cast<std::size_t>(t.dim(1)) * t.dim(2) * t.dim(3);
    return static_cast<std::size_t>(t.dim(0));
}

double snap_f32(double x) { return static_cast<double>(static_cast<float>(x)); }

}  // namespace

ParamSet init_params(const NetConfig& c, std::uint64_t seed) {
    validate_config(c);
    ParamSet p;
    p.config = c;
    p.seed = seed;
    p.entries = make_entries(c);

    Pcg32 rng(seed, 7);
    for (auto& entry : p.entries) {
        if (is_norm_gamma(entry.name)) {
            for (double& x : entry.value.v) x = 1.0;
        } else if (is_weight(entry.name)) {
            const double std = std::sqrt(2.0 / static_cast<double>(fan_in(entry.value)));
            for (double& x : entry.value.v) x = snap_f32(rng.normal() * std);
        }
        // biases and norm shifts stay zero
    }
    return p;
}

std::size_t expected_param_count(const NetConfig& c) {
    const std::size_t f = static_cast<std::size_t>(c.feat_channels);
    const std::size_t in = static_cast<std::size_t>(c.in_channels);
    const std::size_t out = static_cast<std::size_t>(c.out_channels);
    const std::size_t cc = 2 * f;
    const std::size_t hid = static_cast<std::size_t>(c.mlp_ratio) * cc;

    std::size_t n = 0;
    n += f * in * 9 + f;            // encoder conv1
    n += 2 * (f * f * 9 + f);       // encoder conv2/3
    n += 3 * (f * f + f);           // ccam projections
    std::size_t blockn = 0;
    blockn += 2 * cc;               // norm1
    blockn += cc * 3 * cc + 3 * cc; // qkv
    blockn += cc * cc + cc;         // proj
    blockn += 2 * cc;               // norm2
    blockn += cc * hid + hid;       // fc1
    blockn += hid * cc + cc;        // fc2
    n += 3 * blockn;
    n += f * (4 * cc) * 9 + f;      // fusion conv
    n += out * f * 9 + out;         // head conv
    return n;
}

namespace {

constexpr char kMagic[4] = {'H', 'S', 'T', '1'};

void put_u32(std::FILE* fp, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    std::fwrite(b, 1, 4, fp);
}

void put_u64(std::FILE* fp, std::uint64_t v) {
    put_u32(fp, static_cast<std::uint32_t>(v));
    put_u32(fp, static_cast<std::uint32_t>(v >> 32));
}

bool get_u32(std::FILE* fp, std::uint32_t* v) {
    unsigned char b[4];
    if (std::fread(b, 1, 4, fp) != 4) return false;
    *v = static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    return true;
}

bool get_u64(std::FILE* fp, std::uint64_t* v) {
    std::uint32_t lo, hi;
    if (!get_u32(fp, &lo) || !get_u32(fp, &hi)) return false;
    *v = static_cast<std::uint64_t>(hi) << 32 | lo;
    return true;
}

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

void save_params(const ParamSet& p, const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    require(fp != nullptr, errc::io_error, "cannot open for writing: " + path);
    std::fwrite(kMagic, 1, 4, fp.get());
    put_u32(fp.get(), static_cast<std::uint32_t>(p.config.in_channels));
    put_u32(fp.get(), static_cast<std::uint32_t>(p.config.feat_channels));
    put_u32(fp.get(), static_cast<std::uint32_t>(p.config.window));
    put_u32(fp.get(), static_cast<std::uint32_t>(p.config.heads));
    put_u32(fp.get(), static_cast<std::uint32_t>(p.config.mlp_ratio));
    put_u32(fp.get(), static_cast<std::uint32_t>(p.config.out_channels));
    put_u64(fp.get(), p.seed);
    std::vector<float> buf;
    for (const auto& entry : p.entries) {
        buf.resize(entry.value.numel());
        for (std::size_t i = 0; i < buf.size(); ++i)
            buf[i] = static_cast<float>(entry.value.v[i]);
        const std::size_t wrote = std::fwrite(buf.data(), sizeof(float), buf.size(), fp.get());
        require(wrote == buf.size(), errc::io_error, "short write: " + path);
    }
    require(std::fflush(fp.get()) == 0, errc::io_error, "flush failed: " + path);
}

ParamSet load_params(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    require(fp != nullptr, errc::missing_file, "cannot open: " + path);
    char magic[4];
    require(std::fread(magic, 1, 4, fp.get()) == 4 && std::memcmp(magic, kMagic, 4) == 0,
            errc::corrupt_header, "bad params magic");
    std::uint32_t fields[6];
    for (auto& f : fields)
        require(get_u32(fp.get(), &f), errc::corrupt_header, "truncated params header");
    ParamSet p;
    p.config.in_channels = static_cast<int>(fields[0]);
    p.config.feat_channels = static_cast<int>(fields[1]);
    p.config.window = static_cast<int>(fields[2]);
    p.config.heads = static_cast<int>(fields[3]);
    p.config.mlp_ratio = static_cast<int>(fields[4]);
    p.config.out_channels = static_cast<int>(fields[5]);
    require(get_u64(fp.get(), &p.seed), errc::corrupt_header, "truncated params header");
    validate_config(p.config);

    p.entries = make_entries(p.config);
    std::vector<float> buf;
    for (auto& entry : p.entries) {
        buf.resize(entry.value.numel());
        const std::size_t got = std::fread(buf.data(), sizeof(float), buf.size(), fp.get());
        require(got == buf.size(), errc::corrupt_header, "truncated params data");
        for (std::size_t i = 0; i < buf.size(); ++i)
            entry.value.v[i] = static_cast<double>(buf[i]);
    }
    char extra;
    require(std::fread(&extra, 1, 1, fp.get()) == 0, errc::corrupt_header,
            "trailing bytes in params file");
    return p;
}

namespace {

EagerEngine make_eager(Trace* trace) {
    EagerEngine e;
    e.trace = trace;
    return e;
}

EagerEngine::V wrap(const Tensor& t) {
    return std::make_shared<const Tensor>(t);
}

}  // namespace

Tensor can_encode(const Tensor& x, const ParamSet& p, Trace* trace) {
    EagerEngine e = make_eager(trace);
    auto bp = graph::bind_params(e, p);
    require(x.rank() == 3 && x.dim(0) == p.config.in_channels, errc::dimension_mismatch,
            "encoder input channels");
    require(x.dim(1) % p.config.window == 0 && x.dim(2) % p.config.window == 0,
            errc::dimension_mismatch, "spatial dims must be multiples of the window size");
    return *graph::encode_features(e, wrap(x), bp);
}

Tensor cross_channel_attention(const Tensor& phi1, const Tensor& phi2, const ParamSet& p,
                               Trace* trace) {
    EagerEngine e = make_eager(trace);
    auto bp = graph::bind_params(e, p);
    return *graph::cross_channel_attention_graph(e, wrap(phi1), wrap(phi2), bp);
}

Tensor window_block(const Tensor& x, const ParamSet& p, int block, bool shifted, Trace* trace) {
    require(block >= 0 && block < 3, errc::invalid_argument, "block index");
    EagerEngine e = make_eager(trace);
    auto bp = graph::bind_params(e, p);
    return *graph::window_block_graph(e, wrap(x), bp, block, shifted,
                                      "decoder.block" + std::to_string(block));
}

Tensor decode(const Tensor& fused, const Tensor& skip, const ParamSet& p, Trace* trace) {
    check_same_shape(fused, skip, "decoder inputs");
    require(fused.dim(0) == 2 * p.config.feat_channels, errc::dimension_mismatch,
            "decoder input channels");
    EagerEngine e = make_eager(trace);
    auto bp = graph::bind_params(e, p);
    return *graph::decode_graph(e, wrap(fused), wrap(skip), bp);
}

Tensor net_forward(const Tensor& x1, const Tensor& x2, const ParamSet& p, Trace* trace) {
    EagerEngine e = make_eager(trace);
    auto bp = graph::bind_params(e, p);
    return *graph::net_forward_graph(e, wrap(x1), wrap(x2), bp);
}

}  // namespace hst
