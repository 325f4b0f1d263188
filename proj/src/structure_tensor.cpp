#include "hst/structure_tensor.hpp"

#include <cmath>

#include "hst/kernels.hpp"

namespace hst {

namespace {

Tensor as_plane3(const Tensor& t) { return t.reshaped({1, t.dim(0), t.dim(1)}); }
Tensor as_plane2(const Tensor& t) { return t.reshaped({t.dim(1), t.dim(2)}); }

}  // namespace

Tensor sobel_kernel_x() {
    return Tensor({3, 3}, {-0.125, 0.0, 0.125, -0.25, 0.0, 0.25, -0.125, 0.0, 0.125});
}

Tensor sobel_kernel_y() {
    return Tensor({3, 3}, {-0.125, -0.25, -0.125, 0.0, 0.0, 0.0, 0.125, 0.25, 0.125});
}

Tensor gaussian_kernel_1d(double rho) {
    require(rho > 0.0, errc::invalid_argument, "gaussian kernel needs rho > 0");
    const int r = static_cast<int>(std::ceil(3.0 * rho));
    Tensor k({1, 2 * r + 1});
    double sum = 0.0;
    for (int i = -r; i <= r; ++i) {
        const double w = std::exp(-0.5 * (static_cast<double>(i) * i) / (rho * rho));
        k(0, i + r) = w;
        sum += w;
    }
    for (double& w : k.v) w /= sum;
    return k;
}

Tensor luminance(const Tensor& rgb) {
    require(rgb.rank() == 3 && rgb.dim(0) == 3, errc::unsupported_channels,
            "luminance needs a 3-channel image");
    return as_plane2(kern::luminance709(rgb));
}

GradientField gradients(const Tensor& img) {
    require(img.rank() == 2, errc::invalid_argument, "gradients expects {H,W}");
    require(img.dim(0) >= 3 && img.dim(1) >= 3, errc::image_too_small,
            "gradients need at least 3x3");
    const Tensor x3 = as_plane3(img);
    GradientField g;
    g.gx = as_plane2(kern::correlate_fixed(x3, sobel_kernel_x()));
    g.gy = as_plane2(kern::correlate_fixed(x3, sobel_kernel_y()));
    return g;
}

StTensorField structure_tensor(const GradientField& g, double rho) {
    require(rho >= 0.0, errc::invalid_argument, "rho must be non-negative");
    check_same_shape(g.gx, g.gy, "gradient planes");
    StTensorField f;
    f.jxx = kern::mul(g.gx, g.gx);
    f.jxy = kern::mul(g.gx, g.gy);
    f.jyy = kern::mul(g.gy, g.gy);
    if (rho > 0.0) {
        const Tensor grow = gaussian_kernel_1d(rho);
        const Tensor gcol = grow.reshaped({grow.dim(1), 1});
        auto smooth = [&](Tensor& t) {
            Tensor p = as_plane3(t);
            p = kern::correlate_fixed(p, grow);
            p = kern::correlate_fixed(p, gcol);
            t = as_plane2(p);
        };
        smooth(f.jxx);
        smooth(f.jxy);
        smooth(f.jyy);
    }
    return f;
}

Tensor st_map(const StTensorField& t) {
    check_same_shape(t.jxx, t.jyy, "tensor planes");
    Tensor resp = kern::sqrt_ew(kern::add(t.jxx, t.jyy));
    return kern::percentile_norm(resp, kStPercentile, nullptr);
}

Tensor gradient_magnitude_map(const Tensor& img) {
    GradientField g = gradients(img);
    Tensor resp = kern::sqrt_ew(kern::add(kern::mul(g.gx, g.gx), kern::mul(g.gy, g.gy)));
    return kern::percentile_norm(resp, kStPercentile, nullptr);
}

Tensor st_response_map(const Tensor& lum, double rho) {
    return st_map(structure_tensor(gradients(lum), rho));
}

}  // namespace hst
