#pragma once

#include "hst/tensor.hpp"

namespace hst {

// Horizontal/vertical derivatives from the 1/8-normalized 3x3 Sobel pair,
// replicate-padded.
struct GradientField {
    Tensor gx;  // {H,W}
    Tensor gy;
};

// Gaussian-smoothed gradient products; positive semidefinite per pixel.
struct StTensorField {
    Tensor jxx;  // {H,W}
    Tensor jxy;
    Tensor jyy;
};

inline constexpr double kStRho = 1.5;
inline constexpr double kStPercentile = 99.9;

// Rec.709 luma of a {3,H,W} image -> {H,W}.
Tensor luminance(const Tensor& rgb);

GradientField gradients(const Tensor& img);  // img {H,W}, at least 3x3

// J = G_rho * (gx^2, gx*gy, gy^2); kernel truncated at radius ceil(3*rho)
// and renormalized to sum 1. rho = 0 keeps the raw products.
StTensorField structure_tensor(const GradientField& g, double rho);

// sqrt(jxx + jyy), divided by its 99.9th-percentile response and clamped to
// [0,1]. A field with no response maps to all zeros.
Tensor st_map(const StTensorField& t);

// sqrt(gx^2 + gy^2) with the same normalization; the comparison baseline.
Tensor gradient_magnitude_map(const Tensor& img);

// Full chain on a luminance image: gradients -> smoothing -> response map.
Tensor st_response_map(const Tensor& lum, double rho = kStRho);

Tensor sobel_kernel_x();  // {3,3}, 1/8-normalized
Tensor sobel_kernel_y();
Tensor gaussian_kernel_1d(double rho);  // {1,2r+1}, unit sum

}  // namespace hst
