#pragma once

#include "hst/image.hpp"
#include "hst/radiometry.hpp"

namespace hst {

inline constexpr double kDefaultStLossWeight = 1e-2;
inline constexpr double kPsnrCap = 99.0;

struct LossValue {
    double total = 0.0;
    double mse_term = 0.0;
    double st_term = 0.0;
    double lambda = kDefaultStLossWeight;
};

// total = mean((T(h)-T(gt))^2) + lambda * mean|T(S(h)) - T(S(gt))| where S
// is the structure-tensor map of the luminance of the tonemapped image
// (rho = 1.5).
LossValue loss(const HdrImage& h, const HdrImage& gt, double lambda = kDefaultStLossWeight,
               const TonemapConfig& cfg = {});
LossValue loss(const Tensor& h, const Tensor& gt, double lambda = kDefaultStLossWeight,
               const TonemapConfig& cfg = {});

// 10*log10(1/MSE) against a peak of 1; capped at 99 dB (zero MSE included).
double psnr_l(const HdrImage& h, const HdrImage& gt);
double psnr_l(const Tensor& h, const Tensor& gt);

double psnr_mu(const HdrImage& h, const HdrImage& gt, const TonemapConfig& cfg = {});
double psnr_mu(const Tensor& h, const Tensor& gt, const TonemapConfig& cfg = {});

}  // namespace hst
