#pragma once

#include "hst/image.hpp"
#include "hst/tensor.hpp"

namespace hst {

struct TonemapConfig {
    double mu = 5000.0;
    double gamma = 2.2;
};

inline void validate(const TonemapConfig& cfg) {
    require(cfg.mu > 0.0, errc::invalid_argument, "mu must be positive");
    require(cfg.gamma > 0.0, errc::invalid_argument, "gamma must be positive");
}

// Scalar cores. The image operations below apply these per sample; tests
// check them against a high-precision oracle.
inline double lift_sample(double i, double t, double gamma) {
    return std::pow(i, gamma) / t;
}

inline double tonemap_sample(double h, double mu) {
    return std::log1p(mu * h) / std::log1p(mu);
}

// H = I^gamma / t. Values above 1 are kept; the highlight range is the
// point of the lift.
HdrImage ldr_to_hdr(const LdrImage& img, double gamma);

HdrImage tonemap_mu(const HdrImage& img, const TonemapConfig& cfg = {});

// Per-image network input: channels [0..3) gamma-encoded LDR, [3..6) lifted
// HDR, [6] structure-tensor response map.
struct InputStack {
    Tensor data;  // {7,H,W}
    double ev = 0.0;
};

void validate(const InputStack& x);

// st must be {H,W}, matching the image planes. Pure concatenation.
InputStack assemble_input(const LdrImage& ldr, const HdrImage& hdr, const Tensor& st);

}  // namespace hst
