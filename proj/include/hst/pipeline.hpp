#pragma once

#include <string>
#include <vector>

#include "hst/image.hpp"
#include "hst/network.hpp"
#include "hst/radiometry.hpp"

namespace hst {

struct FusionJob {
    std::vector<std::pair<std::string, double>> inputs;  // (path, ev)
    std::string params_path;
    std::string output_path;
    std::string tonemapped_path;  // optional, empty = skip
};

void validate(const FusionJob& job);

// Index of the median EV; even counts resolve to the darker of the two
// middle values, ties to the earliest list position.
std::size_t select_reference(const std::vector<double>& evs);

// One entry per pair fusion, recorded in execution order.
struct FusionStep {
    double input_ev = 0.0;       // EV of the non-reference input
    bool ref_is_intermediate = false;
};

struct FusionTrace {
    std::vector<FusionStep> steps;
    std::size_t pair_fusions() const { return steps.size(); }
};

// Mirror-pads both images up to multiples of the window size, assembles the
// 7-channel stacks, runs the network with `ref` as the reference input and
// crops back. Pure in (a, ref, params).
HdrImage fuse_pair(const LdrImage& a, const LdrImage& ref, const ParamSet& p);

// A fused result re-entering the pipeline: EV 0, values clamped to [0,1].
LdrImage to_pseudo_ldr(const HdrImage& fused);

// Sequential strategy: reference first absorbs the below-reference
// exposures in ascending EV order, then the ones above, each intermediate
// result becoming the new reference. One input degenerates to its clamped
// lift. N inputs run exactly N-1 pair fusions.
HdrImage fuse_sequence(const std::vector<LdrImage>& inputs, const ParamSet& p,
                       FusionTrace* trace = nullptr);
HdrImage fuse_sequence(const FusionJob& job, const ParamSet& p, FusionTrace* trace = nullptr);

// Reflection padding (mirror without repeating the edge) on the right and
// bottom, up to the next multiple of `multiple`.
LdrImage pad_to_multiple(const LdrImage& img, int multiple);
HdrImage crop(const HdrImage& img, int width, int height);

// 7-channel assembly for one image: gamma LDR, lifted HDR, ST map of the
// LDR luminance.
InputStack build_stack(const LdrImage& img, double gamma = 2.2);

}  // namespace hst
