#include "hst/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace hst::kern {

namespace {

void ensure_grad(Tensor* g, const std::vector<int>& shape) {
    if (g && g->v.empty()) *g = Tensor(shape);
}

inline int clampi(int x, int lo, int hi) { return x < lo ? lo : (x > hi ? hi : x); }

}  // namespace

// ---- conv2d ----

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int dilation) {
    require(x.rank() == 3 && w.rank() == 4, errc::invalid_argument, "conv2d expects {C,H,W} and {O,I,k,k}");
    const int ci = x.dim(0), h = x.dim(1), wd = x.dim(2);
    const int co = w.dim(0), k = w.dim(2);
    require(w.dim(1) == ci, errc::dimension_mismatch, "conv2d in-channel mismatch");
    require(k % 2 == 1 && w.dim(3) == k, errc::invalid_argument, "conv2d kernel must be square and odd");
    require(b.numel() == static_cast<std::size_t>(co), errc::dimension_mismatch, "conv2d bias size");
    const int r = (k - 1) / 2;

    Tensor y({co, h, wd});
    for (int o = 0; o < co; ++o) {
        const double bias = b(o);
        for (int yy = 0; yy < h; ++yy) {
            for (int xx = 0; xx < wd; ++xx) {
                double acc = bias;
                for (int i = 0; i < ci; ++i) {
                    const double* xp = &x.v[(static_cast<std::size_t>(i) * h) * wd];
                    const double* wp = &w.v[((static_cast<std::size_t>(o) * ci + i) * k) * k];
                    for (int ky = 0; ky < k; ++ky) {
                        const int sy = yy + (ky - r) * dilation;
                        if (sy < 0 || sy >= h) continue;
                        for (int kx = 0; kx < k; ++kx) {
                            const int sx = xx + (kx - r) * dilation;
                            if (sx < 0 || sx >= wd) continue;
                            acc += wp[ky * k + kx] * xp[sy * wd + sx];
                        }
                    }
                }
                y(o, yy, xx) = acc;
            }
        }
    }
    return y;
}

void conv2d_bwd(const Tensor& x, const Tensor& w, const Tensor& gy, int dilation,
                Tensor* gx, Tensor* gw, Tensor* gb) {
    const int ci = x.dim(0), h = x.dim(1), wd = x.dim(2);
    const int co = w.dim(0), k = w.dim(2);
    const int r = (k - 1) / 2;
    ensure_grad(gx, x.shape);
    ensure_grad(gw, w.shape);
    if (gb && gb->v.empty()) *gb = Tensor({co});

    for (int o = 0; o < co; ++o) {
        for (int yy = 0; yy < h; ++yy) {
            for (int xx = 0; xx < wd; ++xx) {
                const double g = gy(o, yy, xx);
                if (gb) (*gb)(o) += g;
                for (int i = 0; i < ci; ++i) {
                    const double* xp = &x.v[(static_cast<std::size_t>(i) * h) * wd];
                    double* gxp = gx ? &gx->v[(static_cast<std::size_t>(i) * h) * wd] : nullptr;
                    const double* wp = &w.v[((static_cast<std::size_t>(o) * ci + i) * k) * k];
                    double* gwp = gw ? &gw->v[((static_cast<std::size_t>(o) * ci + i) * k) * k] : nullptr;
                    for (int ky = 0; ky < k; ++ky) {
                        const int sy = yy + (ky - r) * dilation;
                        if (sy < 0 || sy >= h) continue;
                        for (int kx = 0; kx < k; ++kx) {
                            const int sx = xx + (kx - r) * dilation;
                            if (sx < 0 || sx >= wd) continue;
                            if (gwp) gwp[ky * k + kx] += g * xp[sy * wd + sx];
                            if (gxp) gxp[sy * wd + sx] += g * wp[ky * k + kx];
                        }
                    }
                }
            }
        }
    }
}

// ---- linear ----

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
    require(w.rank() == 2, errc::invalid_argument, "linear weight must be {K,N}");
    const int kdim = w.dim(0), n = w.dim(1);
    require(x.dim(x.rank() - 1) == kdim, errc::dimension_mismatch, "linear input width");
    require(b.numel() == static_cast<std::size_t>(n), errc::dimension_mismatch, "linear bias size");
    const std::size_t m = x.numel() / static_cast<std::size_t>(kdim);

    std::vector<int> yshape = x.shape;
    yshape.back() = n;
    Tensor y(yshape);
    for (std::size_t row = 0; row < m; ++row) {
        const double* xp = &x.v[row * kdim];
        double* yp = &y.v[row * n];
        for (int j = 0; j < n; ++j) yp[j] = b(j);
        for (int kk = 0; kk < kdim; ++kk) {
            const double xv = xp[kk];
            const double* wp = &w.v[static_cast<std::size_t>(kk) * n];
            for (int j = 0; j < n; ++j) yp[j] += xv * wp[j];
        }
    }
    return y;
}

void linear_bwd(const Tensor& x, const Tensor& w, const Tensor& gy,
                Tensor* gx, Tensor* gw, Tensor* gb) {
    const int kdim = w.dim(0), n = w.dim(1);
    const std::size_t m = x.numel() / static_cast<std::size_t>(kdim);
    ensure_grad(gx, x.shape);
    ensure_grad(gw, w.shape);
    if (gb && gb->v.empty()) *gb = Tensor({n});

    for (std::size_t row = 0; row < m; ++row) {
        const double* xp = &x.v[row * kdim];
        const double* gp = &gy.v[row * n];
        double* gxp = gx ? &gx->v[row * kdim] : nullptr;
        if (gb) {
            for (int j = 0; j < n; ++j) (*gb)(j) += gp[j];
        }
        for (int kk = 0; kk < kdim; ++kk) {
            const double* wp = &w.v[static_cast<std::size_t>(kk) * n];
            double* gwp = gw ? &gw->v[static_cast<std::size_t>(kk) * n] : nullptr;
            double acc = 0.0;
            for (int j = 0; j < n; ++j) {
                acc += gp[j] * wp[j];
                if (gwp) gwp[j] += gp[j] * xp[kk];
            }
            if (gxp) gxp[kk] += acc;
        }
    }
}

// ---- bmm ----

Tensor bmm(const Tensor& a, const Tensor& b, bool trans_a, bool trans_b) {
    require(a.rank() == 3 && b.rank() == 3 && a.dim(0) == b.dim(0),
            errc::dimension_mismatch, "bmm expects matching batch dims");
    const int bt = a.dim(0);
    const int m = trans_a ? a.dim(2) : a.dim(1);
    const int ka = trans_a ? a.dim(1) : a.dim(2);
    const int kb = trans_b ? b.dim(2) : b.dim(1);
    const int n = trans_b ? b.dim(1) : b.dim(2);
    require(ka == kb, errc::dimension_mismatch, "bmm inner dims");

    Tensor y({bt, m, n});
    const std::size_t sa = static_cast<std::size_t>(a.dim(1)) * a.dim(2);
    const std::size_t sb = static_cast<std::size_t>(b.dim(1)) * b.dim(2);
    const std::size_t sy = static_cast<std::size_t>(m) * n;
    for (int bb = 0; bb < bt; ++bb) {
        const double* ap = &a.v[bb * sa];
        const double* bp = &b.v[bb * sb];
        double* yp = &y.v[bb * sy];
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < n; ++j) {
                double acc = 0.0;
                for (int kk = 0; kk < ka; ++kk) {
                    const double av = trans_a ? ap[kk * m + i] : ap[i * ka + kk];
                    const double bv = trans_b ? bp[j * ka + kk] : bp[kk * n + j];
                    acc += av * bv;
                }
                yp[i * n + j] = acc;
            }
        }
    }
    return y;
}

void bmm_bwd(const Tensor& a, const Tensor& b, bool trans_a, bool trans_b,
             const Tensor& gy, Tensor* ga, Tensor* gb) {
    // Only the two layouts used by the model are supported.
    require(!trans_a, errc::invalid_argument, "bmm_bwd: trans_a unsupported");
    if (ga) {
        Tensor t = trans_b ? bmm(gy, b, false, false) : bmm(gy, b, false, true);
        ensure_grad(ga, a.shape);
        for (std::size_t i = 0; i < t.numel(); ++i) ga->v[i] += t.v[i];
    }
    if (gb) {
        ensure_grad(gb, b.shape);
        if (!trans_b) {
            Tensor t = bmm(a, gy, true, false);
            for (std::size_t i = 0; i < t.numel(); ++i) gb->v[i] += t.v[i];
        } else {
            Tensor t = bmm(gy, a, true, false);  // dB = gyT * a
            for (std::size_t i = 0; i < t.numel(); ++i) gb->v[i] += t.v[i];
        }
    }
}

// ---- softmax ----

Tensor softmax_masked(const Tensor& x, const Tensor* mask, int head_groups) {
    require(x.rank() == 3, errc::invalid_argument, "softmax expects {B,M,N}");
    const int bt = x.dim(0), m = x.dim(1), n = x.dim(2);
    if (mask) {
        require(head_groups >= 1 && bt % head_groups == 0, errc::invalid_argument, "softmax head grouping");
        require(mask->dim(0) == bt / head_groups && mask->dim(1) == m && mask->dim(2) == n,
                errc::dimension_mismatch, "softmax mask shape");
    }
    Tensor y(x.shape);
    for (int bb = 0; bb < bt; ++bb) {
        const double* mp = mask ? &mask->v[static_cast<std::size_t>(bb / head_groups) * m * n] : nullptr;
        for (int i = 0; i < m; ++i) {
            const double* xp = &x.v[(static_cast<std::size_t>(bb) * m + i) * n];
            double* yp = &y.v[(static_cast<std::size_t>(bb) * m + i) * n];
            double mx = -1e300;
            for (int j = 0; j < n; ++j) {
                const double l = xp[j] + (mp ? mp[i * n + j] : 0.0);
                if (l > mx) mx = l;
                yp[j] = l;
            }
            double sum = 0.0;
            for (int j = 0; j < n; ++j) {
                yp[j] = std::exp(yp[j] - mx);
                sum += yp[j];
            }
            const double inv = 1.0 / sum;
            for (int j = 0; j < n; ++j) yp[j] *= inv;
        }
    }
    return y;
}

void softmax_bwd(const Tensor& y, const Tensor& gy, Tensor* gx) {
    const int bt = y.dim(0), m = y.dim(1), n = y.dim(2);
    ensure_grad(gx, y.shape);
    for (int bb = 0; bb < bt; ++bb) {
        for (int i = 0; i < m; ++i) {
            const std::size_t off = (static_cast<std::size_t>(bb) * m + i) * n;
            const double* yp = &y.v[off];
            const double* gp = &gy.v[off];
            double dot = 0.0;
            for (int j = 0; j < n; ++j) dot += yp[j] * gp[j];
            double* xp = &gx->v[off];
            for (int j = 0; j < n; ++j) xp[j] += yp[j] * (gp[j] - dot);
        }
    }
}

// ---- layer norm ----

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps, LayerNormAux* aux) {
    const int c = x.dim(x.rank() - 1);
    require(gamma.numel() == static_cast<std::size_t>(c) && beta.numel() == static_cast<std::size_t>(c),
            errc::dimension_mismatch, "layer_norm affine size");
    const std::size_t rows = x.numel() / static_cast<std::size_t>(c);
    Tensor y(x.shape);
    if (aux) {
        aux->mean = Tensor({static_cast<int>(rows)});
        aux->rstd = Tensor({static_cast<int>(rows)});
    }
    for (std::size_t rix = 0; rix < rows; ++rix) {
        const double* xp = &x.v[rix * c];
        double* yp = &y.v[rix * c];
        double mu = 0.0;
        for (int j = 0; j < c; ++j) mu += xp[j];
        mu /= c;
        double var = 0.0;
        for (int j = 0; j < c; ++j) {
            const double d = xp[j] - mu;
            var += d * d;
        }
        var /= c;
        const double rstd = 1.0 / std::sqrt(var + eps);
        for (int j = 0; j < c; ++j) yp[j] = (xp[j] - mu) * rstd * gamma(j) + beta(j);
        if (aux) {
            aux->mean(static_cast<int>(rix)) = mu;
            aux->rstd(static_cast<int>(rix)) = rstd;
        }
    }
    return y;
}

void layer_norm_bwd(const Tensor& x, const Tensor& gamma, const LayerNormAux& aux,
                    const Tensor& gy, Tensor* gx, Tensor* ggamma, Tensor* gbeta) {
    const int c = x.dim(x.rank() - 1);
    const std::size_t rows = x.numel() / static_cast<std::size_t>(c);
    ensure_grad(gx, x.shape);
    if (ggamma && ggamma->v.empty()) *ggamma = Tensor({c});
    if (gbeta && gbeta->v.empty()) *gbeta = Tensor({c});

    for (std::size_t rix = 0; rix < rows; ++rix) {
        const double* xp = &x.v[rix * c];
        const double* gp = &gy.v[rix * c];
        const double mu = aux.mean(static_cast<int>(rix));
        const double rstd = aux.rstd(static_cast<int>(rix));
        double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
        for (int j = 0; j < c; ++j) {
            const double xhat = (xp[j] - mu) * rstd;
            const double dxhat = gp[j] * gamma(j);
            mean_dxhat += dxhat;
            mean_dxhat_xhat += dxhat * xhat;
            if (ggamma) (*ggamma)(j) += gp[j] * xhat;
            if (gbeta) (*gbeta)(j) += gp[j];
        }
        mean_dxhat /= c;
        mean_dxhat_xhat /= c;
        if (gx) {
            double* gxp = &gx->v[rix * c];
            for (int j = 0; j < c; ++j) {
                const double xhat = (xp[j] - mu) * rstd;
                const double dxhat = gp[j] * gamma(j);
                gxp[j] += (dxhat - mean_dxhat - xhat * mean_dxhat_xhat) * rstd;
            }
        }
    }
}

// ---- elementwise ----

Tensor leaky_relu(const Tensor& x, double slope) {
    Tensor y(x.shape);
    for (std::size_t i = 0; i < x.numel(); ++i) y.v[i] = x.v[i] >= 0.0 ? x.v[i] : slope * x.v[i];
    return y;
}

void leaky_relu_bwd(const Tensor& x, double slope, const Tensor& gy, Tensor* gx) {
    ensure_grad(gx, x.shape);
    for (std::size_t i = 0; i < x.numel(); ++i)
        gx->v[i] += gy.v[i] * (x.v[i] >= 0.0 ? 1.0 : slope);
}

Tensor sigmoid(const Tensor& x) {
    Tensor y(x.shape);
    for (std::size_t i = 0; i < x.numel(); ++i) y.v[i] = 1.0 / (1.0 + std::exp(-x.v[i]));
    return y;
}

void sigmoid_bwd(const Tensor& y, const Tensor& gy, Tensor* gx) {
    ensure_grad(gx, y.shape);
    for (std::size_t i = 0; i < y.numel(); ++i) gx->v[i] += gy.v[i] * y.v[i] * (1.0 - y.v[i]);
}

namespace {
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;
}  // namespace

Tensor gelu(const Tensor& x) {
    Tensor y(x.shape);
    for (std::size_t i = 0; i < x.numel(); ++i) {
        const double t = x.v[i];
        y.v[i] = 0.5 * t * (1.0 + std::erf(t * kInvSqrt2));
    }
    return y;
}

void gelu_bwd(const Tensor& x, const Tensor& gy, Tensor* gx) {
    ensure_grad(gx, x.shape);
    for (std::size_t i = 0; i < x.numel(); ++i) {
        const double t = x.v[i];
        const double cdf = 0.5 * (1.0 + std::erf(t * kInvSqrt2));
        const double pdf = kInvSqrt2Pi * std::exp(-0.5 * t * t);
        gx->v[i] += gy.v[i] * (cdf + t * pdf);
    }
}

Tensor sqrt_ew(const Tensor& x) {
    Tensor y(x.shape);
    for (std::size_t i = 0; i < x.numel(); ++i) y.v[i] = std::sqrt(x.v[i]);
    return y;
}

void sqrt_bwd(const Tensor& y, const Tensor& gy, Tensor* gx) {
    ensure_grad(gx, y.shape);
    for (std::size_t i = 0; i < y.numel(); ++i)
        if (y.v[i] > 0.0) gx->v[i] += gy.v[i] * 0.5 / y.v[i];
}

Tensor mu_tonemap(const Tensor& x, double mu) {
    Tensor y(x.shape);
    const double denom = 1.0 / std::log1p(mu);
    for (std::size_t i = 0; i < x.numel(); ++i) y.v[i] = std::log1p(mu * x.v[i]) * denom;
    return y;
}

void mu_tonemap_bwd(const Tensor& x, double mu, const Tensor& gy, Tensor* gx) {
    ensure_grad(gx, x.shape);
    const double denom = 1.0 / std::log1p(mu);
    for (std::size_t i = 0; i < x.numel(); ++i)
        gx->v[i] += gy.v[i] * denom * mu / (1.0 + mu * x.v[i]);
}

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    Tensor y(a.shape);
    for (std::size_t i = 0; i < a.numel(); ++i) y.v[i] = a.v[i] + b.v[i];
    return y;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    Tensor y(a.shape);
    for (std::size_t i = 0; i < a.numel(); ++i) y.v[i] = a.v[i] - b.v[i];
    return y;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    Tensor y(a.shape);
    for (std::size_t i = 0; i < a.numel(); ++i) y.v[i] = a.v[i] * b.v[i];
    return y;
}

Tensor scale(const Tensor& a, double s) {
    Tensor y(a.shape);
    for (std::size_t i = 0; i < a.numel(); ++i) y.v[i] = a.v[i] * s;
    return y;
}

// ---- structure / image ----

Tensor correlate_fixed(const Tensor& x, const Tensor& kernel) {
    require(x.rank() == 3, errc::invalid_argument, "correlate expects {C,H,W}");
    require(kernel.rank() == 2 && kernel.dim(0) % 2 == 1 && kernel.dim(1) % 2 == 1,
            errc::invalid_argument, "kernel dims must be odd");
    const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    const int kh = kernel.dim(0), kw = kernel.dim(1);
    const int ry = (kh - 1) / 2, rx = (kw - 1) / 2;
    Tensor y(x.shape);
    for (int ch = 0; ch < c; ++ch) {
        const double* xp = &x.v[static_cast<std::size_t>(ch) * h * w];
        double* yp = &y.v[static_cast<std::size_t>(ch) * h * w];
        for (int yy = 0; yy < h; ++yy) {
            for (int xx = 0; xx < w; ++xx) {
                double acc = 0.0;
                for (int ky = 0; ky < kh; ++ky) {
                    const int sy = clampi(yy + ky - ry, 0, h - 1);
                    for (int kx = 0; kx < kw; ++kx) {
                        const int sx = clampi(xx + kx - rx, 0, w - 1);
                        acc += kernel(ky, kx) * xp[sy * w + sx];
                    }
                }
                yp[yy * w + xx] = acc;
            }
        }
    }
    return y;
}

void correlate_fixed_bwd(const Tensor& kernel, const Tensor& gy, Tensor* gx) {
    ensure_grad(gx, gy.shape);
    const int c = gy.dim(0), h = gy.dim(1), w = gy.dim(2);
    const int kh = kernel.dim(0), kw = kernel.dim(1);
    const int ry = (kh - 1) / 2, rx = (kw - 1) / 2;
    for (int ch = 0; ch < c; ++ch) {
        const double* gp = &gy.v[static_cast<std::size_t>(ch) * h * w];
        double* xp = &gx->v[static_cast<std::size_t>(ch) * h * w];
        for (int yy = 0; yy < h; ++yy) {
            for (int xx = 0; xx < w; ++xx) {
                const double g = gp[yy * w + xx];
                for (int ky = 0; ky < kh; ++ky) {
                    const int sy = clampi(yy + ky - ry, 0, h - 1);
                    for (int kx = 0; kx < kw; ++kx) {
                        const int sx = clampi(xx + kx - rx, 0, w - 1);
                        xp[sy * w + sx] += g * kernel(ky, kx);
                    }
                }
            }
        }
    }
}

namespace {
constexpr double kLumaR = 0.2126, kLumaG = 0.7152, kLumaB = 0.0722;
}

Tensor luminance709(const Tensor& x) {
    require(x.rank() == 3 && x.dim(0) == 3, errc::unsupported_channels, "luminance expects {3,H,W}");
    const int h = x.dim(1), w = x.dim(2);
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    Tensor y({1, h, w});
    for (std::size_t i = 0; i < plane; ++i)
        y.v[i] = kLumaR * x.v[i] + kLumaG * x.v[plane + i] + kLumaB * x.v[2 * plane + i];
    return y;
}

void luminance709_bwd(const Tensor& gy, Tensor* gx) {
    const int h = gy.dim(1), w = gy.dim(2);
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    ensure_grad(gx, {3, h, w});
    for (std::size_t i = 0; i < plane; ++i) {
        gx->v[i] += kLumaR * gy.v[i];
        gx->v[plane + i] += kLumaG * gy.v[i];
        gx->v[2 * plane + i] += kLumaB * gy.v[i];
    }
}

Tensor percentile_norm(const Tensor& x, double pct, PercentileAux* aux) {
    const std::size_t n = x.numel();
    require(n > 0, errc::invalid_argument, "percentile_norm on empty tensor");
    std::vector<double> sorted(x.v);
    std::size_t rank = static_cast<std::size_t>(std::ceil(pct / 100.0 * static_cast<double>(n)));
    if (rank < 1) rank = 1;
    if (rank > n) rank = n;
    std::nth_element(sorted.begin(), sorted.begin() + (rank - 1), sorted.end());
    const double q = sorted[rank - 1];

    PercentileAux a;
    a.q = q;
    // Rounding residue of exactly-cancelling stencils sits around 1e-17;
    // anything at that scale is a flat image, not a response.
    if (q <= 1e-12) {
        a.degenerate = true;
        if (aux) *aux = a;
        return Tensor(x.shape);
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (x.v[i] == q) {
            a.sel = static_cast<std::int64_t>(i);
            break;
        }
    }
    Tensor y(x.shape);
    const double inv = 1.0 / q;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = x.v[i] * inv;
        y.v[i] = r >= 1.0 ? 1.0 : (r <= 0.0 ? 0.0 : r);
    }
    if (aux) *aux = a;
    return y;
}

void percentile_norm_bwd(const Tensor& x, const PercentileAux& aux,
                         const Tensor& gy, Tensor* gx) {
    ensure_grad(gx, x.shape);
    if (aux.degenerate) return;
    const double q = aux.q;
    const double inv = 1.0 / q;
    double gq = 0.0;
    for (std::size_t i = 0; i < x.numel(); ++i) {
        const double r = x.v[i] * inv;
        if (r >= 1.0 || r <= 0.0) continue;  // clamped: locally flat
        gx->v[i] += gy.v[i] * inv;
        gq += gy.v[i] * (-x.v[i] * inv * inv);
    }
    gx->v[static_cast<std::size_t>(aux.sel)] += gq;
}

Tensor concat_ch(const std::vector<const Tensor*>& xs) {
    require(!xs.empty(), errc::invalid_argument, "concat of nothing");
    const int h = xs[0]->dim(1), w = xs[0]->dim(2);
    int c = 0;
    for (const Tensor* t : xs) {
        require(t->rank() == 3 && t->dim(1) == h && t->dim(2) == w,
                errc::dimension_mismatch, "concat spatial dims");
        c += t->dim(0);
    }
    Tensor y({c, h, w});
    std::size_t off = 0;
    for (const Tensor* t : xs) {
        std::copy(t->v.begin(), t->v.end(), y.v.begin() + off);
        off += t->numel();
    }
    return y;
}

void concat_ch_bwd(const Tensor& gy, const std::vector<Tensor*>& gxs) {
    std::size_t off = 0;
    for (Tensor* g : gxs) {
        if (!g) continue;
        for (std::size_t i = 0; i < g->numel(); ++i) g->v[i] += gy.v[off + i];
        off += g->numel();
    }
}

// ---- reductions ----

Tensor mse(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mse");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) {
        const double d = a.v[i] - b.v[i];
        acc += d * d;
    }
    Tensor y({1});
    y.v[0] = acc / static_cast<double>(a.numel());
    return y;
}

void mse_bwd(const Tensor& a, const Tensor& b, const Tensor& gy, Tensor* ga, Tensor* gb) {
    const double g = gy.v[0] * 2.0 / static_cast<double>(a.numel());
    if (ga) {
        ensure_grad(ga, a.shape);
        for (std::size_t i = 0; i < a.numel(); ++i) ga->v[i] += g * (a.v[i] - b.v[i]);
    }
    if (gb) {
        ensure_grad(gb, b.shape);
        for (std::size_t i = 0; i < a.numel(); ++i) gb->v[i] -= g * (a.v[i] - b.v[i]);
    }
}

Tensor mae(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mae");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) acc += std::abs(a.v[i] - b.v[i]);
    Tensor y({1});
    y.v[0] = acc / static_cast<double>(a.numel());
    return y;
}

void mae_bwd(const Tensor& a, const Tensor& b, const Tensor& gy, Tensor* ga, Tensor* gb) {
    const double g = gy.v[0] / static_cast<double>(a.numel());
    if (ga) ensure_grad(ga, a.shape);
    if (gb) ensure_grad(gb, b.shape);
    for (std::size_t i = 0; i < a.numel(); ++i) {
        const double d = a.v[i] - b.v[i];
        const double s = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
        if (ga) ga->v[i] += g * s;
        if (gb) gb->v[i] -= g * s;
    }
}

Tensor add_weighted(const Tensor& a, const Tensor& b, double lam) {
    require(a.numel() == 1 && b.numel() == 1, errc::invalid_argument, "add_weighted on scalars");
    Tensor y({1});
    y.v[0] = a.v[0] + lam * b.v[0];
    return y;
}

void add_weighted_bwd(double lam, const Tensor& gy, Tensor* ga, Tensor* gb) {
    if (ga) {
        ensure_grad(ga, {1});
        ga->v[0] += gy.v[0];
    }
    if (gb) {
        ensure_grad(gb, {1});
        gb->v[0] += lam * gy.v[0];
    }
}

// ---- index maps ----

Tensor gather(const Tensor& x, const IndexMap& m) {
    Tensor y(m.shape);
    for (std::size_t i = 0; i < y.numel(); ++i) y.v[i] = x.v[static_cast<std::size_t>(m.src[i])];
    return y;
}

void gather_bwd(const IndexMap& m, const Tensor& gy, Tensor* gx) {
    for (std::size_t i = 0; i < gy.numel(); ++i)
        gx->v[static_cast<std::size_t>(m.src[i])] += gy.v[i];
}

IndexMap map_flatten_cn(int c, int h, int w) {
    IndexMap m;
    m.shape = {1, c, h * w};
    m.src.resize(static_cast<std::size_t>(c) * h * w);
    for (std::size_t i = 0; i < m.src.size(); ++i) m.src[i] = static_cast<std::int64_t>(i);
    return m;
}

IndexMap map_unflatten_cn(int c, int h, int w) {
    IndexMap m = map_flatten_cn(c, h, w);
    m.shape = {c, h, w};
    return m;
}

IndexMap map_win_partition(int c, int h, int w, int win) {
    const int wy = h / win, wx = w / win;
    IndexMap m;
    m.shape = {wy * wx, win * win, c};
    m.src.resize(static_cast<std::size_t>(wy * wx) * win * win * c);
    std::size_t o = 0;
    for (int by = 0; by < wy; ++by)
        for (int bx = 0; bx < wx; ++bx)
            for (int ty = 0; ty < win; ++ty)
                for (int tx = 0; tx < win; ++tx)
                    for (int ch = 0; ch < c; ++ch)
                        m.src[o++] = (static_cast<std::int64_t>(ch) * h + (by * win + ty)) * w +
                                     (bx * win + tx);
    return m;
}

IndexMap map_win_merge(int c, int h, int w, int win) {
    const int wx = w / win;
    IndexMap m;
    m.shape = {c, h, w};
    m.src.resize(static_cast<std::size_t>(c) * h * w);
    std::size_t o = 0;
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const int b = (y / win) * wx + (x / win);
                const int t = (y % win) * win + (x % win);
                m.src[o++] = (static_cast<std::int64_t>(b) * win * win + t) * c + ch;
            }
    return m;
}

IndexMap map_roll(int c, int h, int w, int dy, int dx) {
    IndexMap m;
    m.shape = {c, h, w};
    m.src.resize(static_cast<std::size_t>(c) * h * w);
    const int my = ((dy % h) + h) % h;
    const int mx = ((dx % w) + w) % w;
    std::size_t o = 0;
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                m.src[o++] = (static_cast<std::int64_t>(ch) * h + (y + my) % h) * w + (x + mx) % w;
    return m;
}

IndexMap map_head_split(int b, int t, int c, int heads, int which) {
    const int d = c / heads;
    IndexMap m;
    m.shape = {b * heads, t, d};
    m.src.resize(static_cast<std::size_t>(b) * heads * t * d);
    std::size_t o = 0;
    for (int bb = 0; bb < b; ++bb)
        for (int hh = 0; hh < heads; ++hh)
            for (int tt = 0; tt < t; ++tt)
                for (int dd = 0; dd < d; ++dd)
                    m.src[o++] = (static_cast<std::int64_t>(bb) * t + tt) * (3 * c) +
                                 which * c + hh * d + dd;
    return m;
}

IndexMap map_head_merge(int b, int t, int c, int heads) {
    const int d = c / heads;
    IndexMap m;
    m.shape = {b, t, c};
    m.src.resize(static_cast<std::size_t>(b) * t * c);
    std::size_t o = 0;
    for (int bb = 0; bb < b; ++bb)
        for (int tt = 0; tt < t; ++tt)
            for (int ch = 0; ch < c; ++ch) {
                const int hh = ch / d, dd = ch % d;
                m.src[o++] = (static_cast<std::int64_t>(bb * heads + hh) * t + tt) * d + dd;
            }
    return m;
}

Tensor build_shift_mask(int h, int w, int win, int shift) {
    const int wy = h / win, wx = w / win;
    const int t = win * win;
    auto region = [&](int pos, int extent) {
        if (pos < extent - win) return 0;
        if (pos < extent - shift) return 1;
        return 2;
    };
    Tensor mask({wy * wx, t, t});
    std::vector<int> rid(static_cast<std::size_t>(t));
    for (int by = 0; by < wy; ++by) {
        for (int bx = 0; bx < wx; ++bx) {
            for (int ty = 0; ty < win; ++ty)
                for (int tx = 0; tx < win; ++tx)
                    rid[static_cast<std::size_t>(ty * win + tx)] =
                        3 * region(by * win + ty, h) + region(bx * win + tx, w);
            double* mp = &mask.v[static_cast<std::size_t>(by * wx + bx) * t * t];
            for (int i = 0; i < t; ++i)
                for (int j = 0; j < t; ++j)
                    mp[i * t + j] = rid[static_cast<std::size_t>(i)] == rid[static_cast<std::size_t>(j)] ? 0.0 : -1e9;
        }
    }
    return mask;
}

bool all_finite(const Tensor& t) {
    for (double x : t.v)
        if (!std::isfinite(x)) return false;
    return true;
}

}  // namespace hst::kern
