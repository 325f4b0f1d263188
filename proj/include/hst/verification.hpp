#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hst/image.hpp"
#include "hst/network.hpp"
#include "hst/radiometry.hpp"

namespace hst {

// Three-exposure dynamic scene with ground truth: smooth background plus a
// bright square that moves between exposures. The ground truth matches the
// middle (EV 0) geometry; LDRs are rendered as I = clamp((H*t)^(1/gamma)).
struct SynthScene {
    std::vector<LdrImage> ldr_stack;  // EVs -2, 0, +2
    HdrImage gt;
    int displacement = 0;
    std::uint64_t seed = 0;
};

SynthScene synth_scene(std::uint64_t seed, int size, int displacement);

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::string worst_param_path;
    double epsilon = 0.0;
    int probes = 0;          // finite-difference probes that were compared
    int skipped = 0;         // probes rejected by the smoothness guard
};

// Compares backpropagated gradients of the total loss against central
// finite differences over a random parameter subset. A probe is compared
// only if FD(eps) and FD(eps/2) agree to 0.1%, i.e. only where the FD
// estimate is itself a trustworthy derivative; rejected probes are counted
// and replaced. Relative error uses max(|a|,|b|,1e-8) as denominator.
GradCheckReport grad_check(const ParamSet& p, const SynthScene& scene, double epsilon,
                           int probes = 200, std::uint64_t probe_seed = 1234);

struct TrainStep {
    int step = 0;
    double total = 0.0;
    double mse = 0.0;
    double st = 0.0;
};

struct TrainOptions {
    NetConfig config = tiny_config();
    std::uint64_t seed = 42;
    double lr_max = 1e-4;
    double lr_min = 1e-8;
    double lambda = 1e-2;
    double weight_decay = 1e-2;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    TonemapConfig tonemap;
};

struct TrainResult {
    ParamSet params;
    std::vector<TrainStep> curve;  // pre-update loss per step, plus a final
                                   // post-training entry; empty for steps=0
};

// Overfits the (EV-2, EV0) pair of one scene against its ground truth with
// decoupled-weight-decay Adam and a cosine learning-rate schedule.
// Deterministic for a fixed seed; aborts if the loss turns non-finite.
TrainResult train_toy(const SynthScene& scene, int steps, const TrainOptions& opts = {});

// Central finite difference helper used by tests and the gradient checker.
template <class F>
double fd_central(F&& f, double x, double eps) {
    return (f(x + eps) - f(x - eps)) / (2.0 * eps);
}

}  // namespace hst
