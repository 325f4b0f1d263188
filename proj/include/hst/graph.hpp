#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "hst/network.hpp"
#include "hst/structure_tensor.hpp"
#include "hst/radiometry.hpp"

// The model, the structure-tensor map and the training loss as engine
// templates. Instantiated with EagerEngine for inference and with
// TapeEngine wherever gradients are needed.
namespace hst::graph {

inline constexpr double kLeakySlope = 0.1;
inline constexpr double kLnEps = 1e-5;
inline constexpr int kEncoderDilations[3] = {1, 2, 4};

template <class E>
struct BoundParams {
    const NetConfig* cfg = nullptr;
    std::vector<typename E::V> t;

    const typename E::V& operator[](int i) const { return t[static_cast<std::size_t>(i)]; }
};

template <class E>
BoundParams<E> bind_params(const E& e, const ParamSet& p);

template <>
inline BoundParams<EagerEngine> bind_params(const EagerEngine&, const ParamSet& p) {
    BoundParams<EagerEngine> b;
    b.cfg = &p.config;
    b.t.reserve(p.entries.size());
    for (const auto& entry : p.entries)  // aliases, no copy
        b.t.emplace_back(std::shared_ptr<const Tensor>(), &entry.value);
    return b;
}

template <>
inline BoundParams<TapeEngine> bind_params(const TapeEngine& e, const ParamSet& p) {
    BoundParams<TapeEngine> b;
    b.cfg = &p.config;
    b.t.reserve(p.entries.size());
    for (const auto& entry : p.entries) b.t.push_back(e.param(entry.value));
    return b;
}

template <class E>
typename E::V encode_features(const E& e, typename E::V x, const BoundParams<E>& p) {
    typename E::V h = x;
    for (int layer = 0; layer < 3; ++layer) {
        h = e.leaky_relu(e.conv2d(h, p[pidx::enc_w(layer)], p[pidx::enc_b(layer)],
                                  kEncoderDilations[layer]),
                         kLeakySlope);
    }
    return h;
}

// Channel attention between the two feature maps: queries come from the
// reference features, keys/values from the other image. The C x C attention
// matrix mixes the non-reference channels toward the reference.
template <class E>
typename E::V cross_channel_attention_graph(const E& e, typename E::V phi1,
                                            typename E::V phi2, const BoundParams<E>& p) {
    const Tensor& v1 = E::val(phi1);
    check_same_shape(v1, E::val(phi2), "cross-channel attention inputs");
    const int c = v1.dim(0), h = v1.dim(1), w = v1.dim(2);

    auto q = e.conv2d(phi2, p[pidx::ccam_q_w], p[pidx::ccam_q_b], 1);
    auto k = e.conv2d(phi1, p[pidx::ccam_k_w], p[pidx::ccam_k_b], 1);
    auto v = e.conv2d(phi1, p[pidx::ccam_v_w], p[pidx::ccam_v_b], 1);

    const auto flat = kern::map_flatten_cn(c, h, w);
    auto qf = e.gather(q, flat);
    auto kf = e.gather(k, flat);
    auto vf = e.gather(v, flat);

    auto logits = e.scale(e.bmm(qf, kf, false, true), 1.0 / std::sqrt(static_cast<double>(h) * w));
    auto attn = e.softmax(logits, nullptr, 1);
    e.trace_add("ccam.attn", attn);
    auto mixed = e.bmm(attn, vf, false, false);
    return e.gather(mixed, kern::map_unflatten_cn(c, h, w));
}

// Pre-norm transformer block with attention confined to win x win tiles.
// The shifted variant cycles the map by half a window and masks pairs that
// wrapped across opposite borders.
template <class E>
typename E::V window_block_graph(const E& e, typename E::V x, const BoundParams<E>& p,
                                 int block, bool shifted, const std::string& tag) {
    const Tensor& xv = E::val(x);
    const int c = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
    const int win = p.cfg->window, heads = p.cfg->heads;
    require(h % win == 0 && w % win == 0, errc::dimension_mismatch,
            "spatial dims must be multiples of the window size");
    const int d = c / heads;
    const int shift = win / 2;
    const int nw = (h / win) * (w / win), t = win * win;

    typename E::V cur = x;
    if (shifted) cur = e.gather(cur, kern::map_roll(c, h, w, shift, shift));
    auto tokens = e.gather(cur, kern::map_win_partition(c, h, w, win));

    auto t1 = e.layer_norm(tokens, p[pidx::blk(block, 0)], p[pidx::blk(block, 1)], kLnEps);
    auto qkv = e.linear(t1, p[pidx::blk(block, 2)], p[pidx::blk(block, 3)]);
    auto q = e.gather(qkv, kern::map_head_split(nw, t, c, heads, 0));
    auto k = e.gather(qkv, kern::map_head_split(nw, t, c, heads, 1));
    auto v = e.gather(qkv, kern::map_head_split(nw, t, c, heads, 2));

    auto logits = e.scale(e.bmm(q, k, false, true), 1.0 / std::sqrt(static_cast<double>(d)));
    Tensor mask;
    const Tensor* mask_ptr = nullptr;
    if (shifted) {
        mask = kern::build_shift_mask(h, w, win, shift);
        mask_ptr = &mask;
    }
    auto attn = e.softmax(logits, mask_ptr, heads);
    e.trace_add(tag + ".attn", attn);

    auto ctx = e.bmm(attn, v, false, false);
    auto merged = e.gather(ctx, kern::map_head_merge(nw, t, c, heads));
    auto proj = e.linear(merged, p[pidx::blk(block, 4)], p[pidx::blk(block, 5)]);
    auto res1 = e.add(tokens, proj);

    auto t2 = e.layer_norm(res1, p[pidx::blk(block, 6)], p[pidx::blk(block, 7)], kLnEps);
    auto hidden = e.gelu(e.linear(t2, p[pidx::blk(block, 8)], p[pidx::blk(block, 9)]));
    auto mlp = e.linear(hidden, p[pidx::blk(block, 10)], p[pidx::blk(block, 11)]);
    auto res2 = e.add(res1, mlp);

    auto out = e.gather(res2, kern::map_win_merge(c, h, w, win));
    if (shifted) out = e.gather(out, kern::map_roll(c, h, w, -shift, -shift));
    return out;
}

template <class E>
typename E::V decode_graph(const E& e, typename E::V fused, typename E::V skip,
                           const BoundParams<E>& p) {
    auto y1 = window_block_graph(e, fused, p, 0, false, "decoder.block0");
    auto y2 = window_block_graph(e, y1, p, 1, true, "decoder.block1");
    auto y3 = window_block_graph(e, y2, p, 2, false, "decoder.block2");
    auto cat = e.concat({y1, y2, y3, skip});
    e.trace_add("decoder.cat", cat);
    auto f = e.leaky_relu(e.conv2d(cat, p[pidx::fusion_w], p[pidx::fusion_b], 1), kLeakySlope);
    auto head = e.conv2d(f, p[pidx::head_w], p[pidx::head_b], 1);
    return e.sigmoid(head);
}

template <class E>
typename E::V net_forward_graph(const E& e, typename E::V x1, typename E::V x2,
                                const BoundParams<E>& p) {
    const Tensor& v1 = E::val(x1);
    check_same_shape(v1, E::val(x2), "forward inputs");
    require(v1.rank() == 3 && v1.dim(0) == p.cfg->in_channels, errc::dimension_mismatch,
            "forward expects {in_channels,H,W}");
    require(v1.dim(1) % p.cfg->window == 0 && v1.dim(2) % p.cfg->window == 0,
            errc::dimension_mismatch, "spatial dims must be multiples of the window size");

    auto phi1 = encode_features(e, x1, p);
    auto phi2 = encode_features(e, x2, p);
    e.trace_add("encoder.phi1", phi1);
    e.trace_add("encoder.phi2", phi2);
    auto phi1c = cross_channel_attention_graph(e, phi1, phi2, p);
    auto fused = e.concat({phi2, phi1c});
    e.trace_add("decoder.input", fused);
    return decode_graph(e, fused, fused, p);
}

// ---- structure tensor / loss ----

// lum is {1,H,W}; result is the normalized response map, still {1,H,W}.
template <class E>
typename E::V st_map_graph(const E& e, typename E::V lum, double rho) {
    auto gx = e.correlate(lum, sobel_kernel_x());
    auto gy = e.correlate(lum, sobel_kernel_y());
    auto jxx = e.mul(gx, gx);
    auto jyy = e.mul(gy, gy);
    if (rho > 0.0) {
        const Tensor g = gaussian_kernel_1d(rho);
        const int n = g.dim(1);
        const Tensor grow = g;                      // {1,n}
        const Tensor gcol = g.reshaped({n, 1});
        jxx = e.correlate(e.correlate(jxx, grow), gcol);
        jyy = e.correlate(e.correlate(jyy, grow), gcol);
    }
    auto resp = e.sqrt(e.add(jxx, jyy));
    return e.percentile_norm(resp, kStPercentile);
}

template <class E>
struct LossGraph {
    typename E::V total;
    typename E::V mse;
    typename E::V st;
};

// Tonemapped MSE plus lam * tonemapped L1 between structure-tensor maps of
// the luminance of the tonemapped images.
template <class E>
LossGraph<E> loss_graph(const E& e, typename E::V h, typename E::V gt, double lam,
                        const TonemapConfig& tc, double rho = kStRho) {
    check_same_shape(E::val(h), E::val(gt), "loss inputs");
    auto th = e.mu_tonemap(h, tc.mu);
    auto tgt = e.mu_tonemap(gt, tc.mu);
    auto mse_term = e.mse(th, tgt);
    auto sh = st_map_graph(e, e.luminance(th), rho);
    auto sgt = st_map_graph(e, e.luminance(tgt), rho);
    auto st_term = e.mae(e.mu_tonemap(sh, tc.mu), e.mu_tonemap(sgt, tc.mu));
    auto total = e.add_weighted(mse_term, st_term, lam);
    return {total, mse_term, st_term};
}

}  // namespace hst::graph
