#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hst/engine.hpp"
#include "hst/tensor.hpp"

namespace hst {

// Architecture knobs. Dilation rates of the encoder are fixed at (1,2,4);
// decoder blocks run on 2*feat_channels with shift pattern (off, on, off).
struct NetConfig {
    int in_channels = 7;
    int feat_channels = 64;
    int window = 8;
    int heads = 4;
    int mlp_ratio = 2;
    int out_channels = 3;
};

inline NetConfig tiny_config() {
    NetConfig c;
    c.feat_channels = 8;
    c.window = 4;
    c.heads = 1;
    return c;
}

void validate_config(const NetConfig& c);

struct ParamEntry {
    std::string name;
    Tensor value;
};

// All learnable weights, in a fixed declaration order shared by the
// initializer, the serializer, the optimizer and the gradient checker.
struct ParamSet {
    NetConfig config;
    std::uint64_t seed = 0;
    std::vector<ParamEntry> entries;

    std::size_t scalar_count() const {
        std::size_t n = 0;
        for (const auto& e : entries) n += e.value.numel();
        return n;
    }
};

// Indices into ParamSet::entries.
namespace pidx {
inline constexpr int enc_w(int layer) { return 2 * layer; }
inline constexpr int enc_b(int layer) { return 2 * layer + 1; }
inline constexpr int ccam_q_w = 6, ccam_q_b = 7;
inline constexpr int ccam_k_w = 8, ccam_k_b = 9;
inline constexpr int ccam_v_w = 10, ccam_v_b = 11;
// j: 0 ln1.g, 1 ln1.b, 2 qkv.w, 3 qkv.b, 4 proj.w, 5 proj.b,
//    6 ln2.g, 7 ln2.b, 8 fc1.w, 9 fc1.b, 10 fc2.w, 11 fc2.b
inline constexpr int blk(int block, int j) { return 12 + 12 * block + j; }
inline constexpr int fusion_w = 48, fusion_b = 49;
inline constexpr int head_w = 50, head_b = 51;
inline constexpr int entry_count = 52;
}  // namespace pidx

// Fan-in-scaled normal weights (std = sqrt(2/fan_in)), zero biases, unit
// layer-norm scales. Every value is snapped to float32 so the on-disk
// format round-trips exactly. Identical seeds give identical bytes.
ParamSet init_params(const NetConfig& c, std::uint64_t seed);

std::size_t expected_param_count(const NetConfig& c);

// Flat little-endian container: magic "HST1", six u32 config fields, u64
// seed, then raw float32 tensor data in declaration order.
void save_params(const ParamSet& p, const std::string& path);
ParamSet load_params(const std::string& path);

// Eager entry points. x inputs are {7,H,W} stacks with H,W multiples of
// the window size.
Tensor can_encode(const Tensor& x, const ParamSet& p, Trace* trace = nullptr);
Tensor cross_channel_attention(const Tensor& phi1, const Tensor& phi2, const ParamSet& p,
                               Trace* trace = nullptr);
Tensor window_block(const Tensor& x, const ParamSet& p, int block, bool shifted,
                    Trace* trace = nullptr);
Tensor decode(const Tensor& fused, const Tensor& skip, const ParamSet& p,
              Trace* trace = nullptr);
Tensor net_forward(const Tensor& x1, const Tensor& x2, const ParamSet& p,
                   Trace* trace = nullptr);

}  // namespace hst
