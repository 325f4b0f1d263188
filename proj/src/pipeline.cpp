#include "hst/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "hst/image_io.hpp"
#include "hst/structure_tensor.hpp"

namespace hst {

void validate(const FusionJob& job) {
    require(!job.inputs.empty(), errc::invalid_argument, "fusion job needs at least one input");
    std::set<std::string> seen;
    for (const auto& [path, ev] : job.inputs) {
        require(std::isfinite(ev), errc::invalid_argument, "EV must be finite: " + path);
        require(seen.insert(path).second, errc::invalid_argument, "duplicate input: " + path);
    }
    require(!job.params_path.empty(), errc::invalid_argument, "params path required");
    require(!job.output_path.empty(), errc::invalid_argument, "output path required");
}

std::size_t select_reference(const std::vector<double>& evs) {
    require(!evs.empty(), errc::invalid_argument, "empty EV list");
    std::vector<double> sorted(evs);
    std::sort(sorted.begin(), sorted.end());
    // Odd: true median. Even: darker of the two middle entries.
    const double target = sorted[(sorted.size() - 1) / 2];
    for (std::size_t i = 0; i < evs.size(); ++i)
        if (evs[i] == target) return i;
    return 0;  // unreachable
}

LdrImage pad_to_multiple(const LdrImage& img, int multiple) {
    require(multiple >= 1, errc::invalid_argument, "pad multiple");
    const int w2 = ((img.width + multiple - 1) / multiple) * multiple;
    const int h2 = ((img.height + multiple - 1) / multiple) * multiple;
    if (w2 == img.width && h2 == img.height) return img;

    LdrImage out;
    out.width = w2;
    out.height = h2;
    out.ev = img.ev;
    out.data.resize(static_cast<std::size_t>(w2) * h2 * 3);
    auto mirror = [](int i, int n) { return i < n ? i : 2 * n - 2 - i; };
    for (int y = 0; y < h2; ++y) {
        const int sy = mirror(y, img.height);
        for (int x = 0; x < w2; ++x) {
            const int sx = mirror(x, img.width);
            for (int c = 0; c < 3; ++c)
                out.data[(static_cast<std::size_t>(y) * w2 + x) * 3 + c] =
                    img.data[(static_cast<std::size_t>(sy) * img.width + sx) * 3 + c];
        }
    }
    return out;
}

HdrImage crop(const HdrImage& img, int width, int height) {
    require(width <= img.width && height <= img.height, errc::dimension_mismatch, "crop size");
    if (width == img.width && height == img.height) return img;
    HdrImage out;
    out.width = width;
    out.height = height;
    out.data.resize(static_cast<std::size_t>(width) * height * 3);
    for (int y = 0; y < height; ++y)
        std::copy_n(&img.data[static_cast<std::size_t>(y) * img.width * 3],
                    static_cast<std::size_t>(width) * 3,
                    &out.data[static_cast<std::size_t>(y) * width * 3]);
    return out;
}

InputStack build_stack(const LdrImage& img, double gamma) {
    const HdrImage lifted = ldr_to_hdr(img, gamma);
    const Tensor st = st_response_map(luminance(to_planar(img)), kStRho);
    return assemble_input(img, lifted, st);
}

HdrImage fuse_pair(const LdrImage& a, const LdrImage& ref, const ParamSet& p) {
    require(a.width == ref.width && a.height == ref.height, errc::dimension_mismatch,
            "pair inputs must share dimensions");
    const int w0 = a.width, h0 = a.height;
    const LdrImage ap = pad_to_multiple(a, p.config.window);
    const LdrImage rp = pad_to_multiple(ref, p.config.window);
    const InputStack xa = build_stack(ap);
    const InputStack xr = build_stack(rp);
    const Tensor out = net_forward(xa.data, xr.data, p);
    return crop(hdr_from_planar(out), w0, h0);
}

LdrImage to_pseudo_ldr(const HdrImage& fused) {
    LdrImage out;
    out.width = fused.width;
    out.height = fused.height;
    out.ev = 0.0;
    out.data.resize(fused.data.size());
    for (std::size_t i = 0; i < fused.data.size(); ++i)
        out.data[i] = std::min(1.0f, std::max(0.0f, fused.data[i]));
    return out;
}

namespace {

HdrImage clamped_lift(const LdrImage& img) {
    HdrImage h = ldr_to_hdr(img, 2.2);
    for (float& s : h.data) s = std::min(1.0f, std::max(0.0f, s));
    return h;
}

}  // namespace

HdrImage fuse_sequence(const std::vector<LdrImage>& inputs, const ParamSet& p,
                       FusionTrace* trace) {
    require(!inputs.empty(), errc::invalid_argument, "fusion needs at least one input");
    for (const LdrImage& img : inputs) {
        require(img.width == inputs[0].width && img.height == inputs[0].height,
                errc::dimension_mismatch, "all inputs must share dimensions");
    }

    if (inputs.size() == 1) return clamped_lift(inputs[0]);

    std::vector<double> evs;
    evs.reserve(inputs.size());
    for (const LdrImage& img : inputs) evs.push_back(img.ev);

    // For a plain pair the darker image is fused into the brighter, which
    // acts as the reference; the median rule needs three or more inputs.
    std::size_t ref_idx;
    if (inputs.size() == 2) {
        ref_idx = evs[0] <= evs[1] ? 1 : 0;
    } else {
        ref_idx = select_reference(evs);
    }

    // Below-reference exposures ascending, then the rest ascending; stable
    // so equal EVs keep list order.
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < inputs.size(); ++i)
        if (i != ref_idx) order.push_back(i);
    const double ref_ev = evs[ref_idx];
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
        const bool bi = evs[i] < ref_ev, bj = evs[j] < ref_ev;
        if (bi != bj) return bi;
        return evs[i] < evs[j];
    });

    LdrImage ref = inputs[ref_idx];
    bool ref_intermediate = false;
    HdrImage fused;
    for (std::size_t k = 0; k < order.size(); ++k) {
        const LdrImage& next = inputs[order[k]];
        if (trace) trace->steps.push_back({next.ev, ref_intermediate});
        fused = fuse_pair(next, ref, p);
        if (k + 1 < order.size()) {
            ref = to_pseudo_ldr(fused);
            ref_intermediate = true;
        }
    }
    return fused;
}

HdrImage fuse_sequence(const FusionJob& job, const ParamSet& p, FusionTrace* trace) {
    validate(job);
    std::vector<LdrImage> inputs;
    inputs.reserve(job.inputs.size());
    for (const auto& [path, ev] : job.inputs) inputs.push_back(load_ldr(path, ev));
    return fuse_sequence(inputs, p, trace);
}

}  // namespace hst
