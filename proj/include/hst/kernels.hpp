#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "hst/tensor.hpp"

// Plain value kernels plus their adjoints. Forward kernels return a fresh
// tensor; backward kernels accumulate into caller-owned gradient buffers
// (null pointer skips that input). Both the eager and the tape execution
// engines are built on these, so every path through the code computes with
// the same summation order.
namespace hst::kern {

// ---- dense layers ----

// Square odd kernel (1x1 or 3x3), stride 1, zero padding of dilation*(k-1)/2
// per side so the spatial size is preserved.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int dilation);
void conv2d_bwd(const Tensor& x, const Tensor& w, const Tensor& gy, int dilation,
                Tensor* gx, Tensor* gw, Tensor* gb);

// y = x*W + b with x {M,K} or {B,T,K} (leading dims folded), W {K,N}, b {N}.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);
void linear_bwd(const Tensor& x, const Tensor& w, const Tensor& gy,
                Tensor* gx, Tensor* gw, Tensor* gb);

// Batched matmul over {B,M,K}x{B,K,N}; trans flags apply per batch slice.
Tensor bmm(const Tensor& a, const Tensor& b, bool trans_a, bool trans_b);
void bmm_bwd(const Tensor& a, const Tensor& b, bool trans_a, bool trans_b,
             const Tensor& gy, Tensor* ga, Tensor* gb);

// Row softmax over the last dim of {B,M,N}. Optional additive mask of shape
// {B/head_groups, M, N}: logit block b uses mask slice b/head_groups.
Tensor softmax_masked(const Tensor& x, const Tensor* mask, int head_groups);
void softmax_bwd(const Tensor& y, const Tensor& gy, Tensor* gx);

struct LayerNormAux {
    Tensor mean;  // one entry per token
    Tensor rstd;
};
// Normalizes the last dim of {...,C}; gamma/beta are {C}.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps, LayerNormAux* aux);
void layer_norm_bwd(const Tensor& x, const Tensor& gamma, const LayerNormAux& aux,
                    const Tensor& gy, Tensor* gx, Tensor* ggamma, Tensor* gbeta);

// ---- elementwise ----

Tensor leaky_relu(const Tensor& x, double slope);
void leaky_relu_bwd(const Tensor& x, double slope, const Tensor& gy, Tensor* gx);

Tensor sigmoid(const Tensor& x);
void sigmoid_bwd(const Tensor& y, const Tensor& gy, Tensor* gx);

Tensor gelu(const Tensor& x);
void gelu_bwd(const Tensor& x, const Tensor& gy, Tensor* gx);

Tensor sqrt_ew(const Tensor& x);
void sqrt_bwd(const Tensor& y, const Tensor& gy, Tensor* gx);

// T(h) = log(1 + mu*h) / log(1 + mu)
Tensor mu_tonemap(const Tensor& x, double mu);
void mu_tonemap_bwd(const Tensor& x, double mu, const Tensor& gy, Tensor* gx);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);

// ---- structure / image ----

// Per-channel 2-D correlation with one fixed kernel {kh,kw} (odd dims),
// replicate-padded borders. Used for Sobel and separable Gaussian passes.
Tensor correlate_fixed(const Tensor& x, const Tensor& kernel);
void correlate_fixed_bwd(const Tensor& kernel, const Tensor& gy, Tensor* gx);

// Rec.709 luma: {3,H,W} -> {1,H,W}.
Tensor luminance709(const Tensor& x);
void luminance709_bwd(const Tensor& gy, Tensor* gx);

struct PercentileAux {
    double q = 0.0;          // selected response
    std::int64_t sel = -1;   // flat index of the selected element
    bool degenerate = false; // all-zero input, output forced to zero
};
// y = clamp(x / percentile(x, pct), 0, 1); all-zero x maps to all-zero y.
Tensor percentile_norm(const Tensor& x, double pct, PercentileAux* aux);
void percentile_norm_bwd(const Tensor& x, const PercentileAux& aux,
                         const Tensor& gy, Tensor* gx);

// Concatenate {C_i,H,W} tensors along dim 0.
Tensor concat_ch(const std::vector<const Tensor*>& xs);
void concat_ch_bwd(const Tensor& gy, const std::vector<Tensor*>& gxs);

// ---- reductions ----

Tensor mse(const Tensor& a, const Tensor& b);  // scalar {1}
void mse_bwd(const Tensor& a, const Tensor& b, const Tensor& gy, Tensor* ga, Tensor* gb);

Tensor mae(const Tensor& a, const Tensor& b);  // scalar {1}
void mae_bwd(const Tensor& a, const Tensor& b, const Tensor& gy, Tensor* ga, Tensor* gb);

// total = a + lam*b on scalars.
Tensor add_weighted(const Tensor& a, const Tensor& b, double lam);
void add_weighted_bwd(double lam, const Tensor& gy, Tensor* ga, Tensor* gb);

// ---- index-map layout ops ----

struct IndexMap {
    std::vector<int> shape;        // output shape
    std::vector<std::int64_t> src; // source flat index per output element
};

Tensor gather(const Tensor& x, const IndexMap& m);
void gather_bwd(const IndexMap& m, const Tensor& gy, Tensor* gx);

IndexMap map_flatten_cn(int c, int h, int w);              // {C,H,W} -> {1,C,H*W}
IndexMap map_unflatten_cn(int c, int h, int w);            // {1,C,H*W} -> {C,H,W}
IndexMap map_win_partition(int c, int h, int w, int win);  // {C,H,W} -> {B,T,C}
IndexMap map_win_merge(int c, int h, int w, int win);      // {B,T,C} -> {C,H,W}
IndexMap map_roll(int c, int h, int w, int dy, int dx);    // out[y] = in[(y+dy) mod H]
IndexMap map_head_split(int b, int t, int c, int heads, int which);  // {B,T,3C} -> {B*h,T,d}
IndexMap map_head_merge(int b, int t, int c, int heads);             // {B*h,T,d} -> {B,T,C}

// Cross-window attention mask for a cyclic shift: {nWin, T, T} with 0 for
// same-region pairs and -1e9 across region boundaries.
Tensor build_shift_mask(int h, int w, int win, int shift);

// ---- misc ----

bool all_finite(const Tensor& t);

}  // namespace hst::kern
