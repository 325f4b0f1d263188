#include "hst/radiometry.hpp"

namespace hst {

HdrImage ldr_to_hdr(const LdrImage& img, double gamma) {
    require(gamma > 0.0, errc::invalid_argument, "gamma must be positive");
    const double t = img.t();
    HdrImage out;
    out.width = img.width;
    out.height = img.height;
    out.data.resize(img.data.size());
    for (std::size_t i = 0; i < img.data.size(); ++i)
        out.data[i] = static_cast<float>(lift_sample(img.data[i], t, gamma));
    return out;
}

HdrImage tonemap_mu(const HdrImage& img, const TonemapConfig& cfg) {
    validate(cfg);
    HdrImage out;
    out.width = img.width;
    out.height = img.height;
    out.data.resize(img.data.size());
    for (std::size_t i = 0; i < img.data.size(); ++i)
        out.data[i] = static_cast<float>(tonemap_sample(img.data[i], cfg.mu));
    return out;
}

void validate(const InputStack& x) {
    require(x.data.rank() == 3 && x.data.dim(0) == 7, errc::dimension_mismatch,
            "input stack must be {7,H,W}");
    require(std::isfinite(x.ev), errc::invalid_argument, "EV must be finite");
    const std::size_t plane = static_cast<std::size_t>(x.data.dim(1)) * x.data.dim(2);
    for (std::size_t c = 0; c < 7; ++c) {
        for (std::size_t i = 0; i < plane; ++i) {
            const double s = x.data.v[c * plane + i];
            require(std::isfinite(s), errc::invalid_sample, "stack sample not finite");
            if (c < 3 || c == 6)
                require(s >= 0.0 && s <= 1.0, errc::invalid_sample, "stack sample outside [0,1]");
            else
                require(s >= 0.0, errc::invalid_sample, "lifted sample negative");
        }
    }
}

InputStack assemble_input(const LdrImage& ldr, const HdrImage& hdr, const Tensor& st) {
    require(ldr.width == hdr.width && ldr.height == hdr.height, errc::dimension_mismatch,
            "LDR/HDR dimensions differ");
    require(st.rank() == 2 && st.dim(0) == ldr.height && st.dim(1) == ldr.width,
            errc::dimension_mismatch, "ST map dimensions differ");

    const int h = ldr.height, w = ldr.width;
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    InputStack out;
    out.ev = ldr.ev;
    out.data = Tensor({7, h, w});
    for (std::size_t i = 0; i < plane; ++i) {
        out.data.v[i] = ldr.data[3 * i];
        out.data.v[plane + i] = ldr.data[3 * i + 1];
        out.data.v[2 * plane + i] = ldr.data[3 * i + 2];
        out.data.v[3 * plane + i] = hdr.data[3 * i];
        out.data.v[4 * plane + i] = hdr.data[3 * i + 1];
        out.data.v[5 * plane + i] = hdr.data[3 * i + 2];
        out.data.v[6 * plane + i] = st.v[i];
    }
    return out;
}

}  // namespace hst
