#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "hst/error.hpp"
#include "hst/tensor.hpp"

namespace hst {

// Gamma-encoded capture in [0,1], interleaved RGB rows, with its exposure
// value. The relative exposure time is always derived as t = 2^ev.
struct LdrImage {
    int width = 0;
    int height = 0;
    std::vector<float> data;  // H*W*3, row-major RGB
    double ev = 0.0;

    double t() const { return std::exp2(ev); }
};

// Linear-radiance image, non-negative samples.
struct HdrImage {
    int width = 0;
    int height = 0;
    std::vector<float> data;  // H*W*3
};

inline void validate(const LdrImage& img) {
    require(img.width >= 8 && img.height >= 8, errc::image_too_small,
            "LDR images must be at least 8x8");
    require(img.data.size() == static_cast<std::size_t>(img.width) * img.height * 3,
            errc::dimension_mismatch, "LDR data size");
    require(std::isfinite(img.ev), errc::invalid_argument, "EV must be finite");
    for (float s : img.data)
        require(s >= 0.0f && s <= 1.0f, errc::invalid_sample, "LDR sample outside [0,1]");
}

inline void validate(const HdrImage& img) {
    require(img.data.size() == static_cast<std::size_t>(img.width) * img.height * 3,
            errc::dimension_mismatch, "HDR data size");
    for (float s : img.data)
        require(std::isfinite(s) && s >= 0.0f, errc::invalid_sample,
                "HDR sample must be finite and non-negative");
}

// Interleaved float rows -> planar {3,H,W} doubles.
template <class Img>
Tensor to_planar(const Img& img) {
    const int h = img.height, w = img.width;
    Tensor t({3, h, w});
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    for (std::size_t i = 0; i < plane; ++i) {
        t.v[i] = img.data[3 * i];
        t.v[plane + i] = img.data[3 * i + 1];
        t.v[2 * plane + i] = img.data[3 * i + 2];
    }
    return t;
}

inline HdrImage hdr_from_planar(const Tensor& t) {
    require(t.rank() == 3 && t.dim(0) == 3, errc::dimension_mismatch, "expected {3,H,W}");
    HdrImage img;
    img.height = t.dim(1);
    img.width = t.dim(2);
    img.data.resize(static_cast<std::size_t>(img.width) * img.height * 3);
    const std::size_t plane = static_cast<std::size_t>(img.height) * img.width;
    for (std::size_t i = 0; i < plane; ++i) {
        img.data[3 * i] = static_cast<float>(t.v[i]);
        img.data[3 * i + 1] = static_cast<float>(t.v[plane + i]);
        img.data[3 * i + 2] = static_cast<float>(t.v[2 * plane + i]);
    }
    return img;
}

}  // namespace hst
