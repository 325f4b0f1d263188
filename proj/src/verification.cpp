#include "hst/verification.hpp"

#include <algorithm>
#include <cmath>

#include "hst/graph.hpp"
#include "hst/loss.hpp"
#include "hst/pipeline.hpp"
#include "hst/rng.hpp"

namespace hst {

namespace {

constexpr double kGamma = 2.2;

// Low-frequency value noise: random grid values, bilinear interpolation.
struct ValueNoise {
    int cells_x, cells_y, cell;
    std::vector<double> grid;

    ValueNoise(int w, int h, int cell_size, Pcg32& rng) : cell(cell_size) {
        cells_x = w / cell_size + 2;
        cells_y = h / cell_size + 2;
        grid.resize(static_cast<std::size_t>(cells_x) * cells_y);
        for (double& g : grid) g = rng.uniform() * 2.0 - 1.0;
    }

    double at(int x, int y) const {
        const double fx = static_cast<double>(x) / cell, fy = static_cast<double>(y) / cell;
        const int ix = static_cast<int>(fx), iy = static_cast<int>(fy);
        const double tx = fx - ix, ty = fy - iy;
        auto g = [&](int cx, int cy) { return grid[static_cast<std::size_t>(cy) * cells_x + cx]; };
        const double a = g(ix, iy) * (1 - tx) + g(ix + 1, iy) * tx;
        const double b = g(ix, iy + 1) * (1 - tx) + g(ix + 1, iy + 1) * tx;
        return a * (1 - ty) + b * ty;
    }
};

// Scene radiance with the square at a given horizontal offset.
HdrImage render_radiance(int size, int offset, const ValueNoise& noise) {
    HdrImage img;
    img.width = size;
    img.height = size;
    img.data.resize(static_cast<std::size_t>(size) * size * 3);

    const int sq = size / 4;
    const int sq_x0 = size / 2 - sq / 2 + offset;
    const int sq_y0 = size / 2 - sq / 2;
    const double tint[3] = {1.0, 0.8, 0.6};

    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const double u = static_cast<double>(x) / (size - 1);
            const double v = static_cast<double>(y) / (size - 1);
            const double tex = 0.05 * noise.at(x, y);
            double rgb[3] = {0.10 + 0.30 * u + 0.10 * v + tex,
                             0.12 + 0.24 * v + 0.12 * u + 0.8 * tex,
                             0.08 + 0.18 * (u + v) * 0.5 + 0.6 * tex};
            const bool in_square = x >= sq_x0 && x < sq_x0 + sq && y >= sq_y0 && y < sq_y0 + sq;
            for (int c = 0; c < 3; ++c) {
                double s = in_square ? 0.95 * tint[c] : rgb[c];
                if (s < 0.0) s = 0.0;
                if (s > 1.0) s = 1.0;
                img.data[(static_cast<std::size_t>(y) * size + x) * 3 + c] =
                    static_cast<float>(s);
            }
        }
    }
    return img;
}

LdrImage render_ldr(const HdrImage& radiance, double ev) {
    LdrImage img;
    img.width = radiance.width;
    img.height = radiance.height;
    img.ev = ev;
    img.data.resize(radiance.data.size());
    const double t = std::exp2(ev);
    for (std::size_t i = 0; i < radiance.data.size(); ++i) {
        double s = std::pow(static_cast<double>(radiance.data[i]) * t, 1.0 / kGamma);
        if (s < 0.0) s = 0.0;
        if (s > 1.0) s = 1.0;
        img.data[i] = static_cast<float>(s);
    }
    return img;
}

}  // namespace

SynthScene synth_scene(std::uint64_t seed, int size, int displacement) {
    require(size >= 32 && size % 8 == 0, errc::invalid_argument,
            "scene size must be a multiple of 8, at least 32");
    Pcg32 rng(mix_seed(seed), 11);
    ValueNoise noise(size, size, 8, rng);

    SynthScene scene;
    scene.seed = seed;
    scene.displacement = displacement;
    const double evs[3] = {-2.0, 0.0, 2.0};
    for (int k = 0; k < 3; ++k) {
        const HdrImage radiance = render_radiance(size, (k - 1) * displacement, noise);
        scene.ldr_stack.push_back(render_ldr(radiance, evs[k]));
        if (k == 1) scene.gt = radiance;
    }
    return scene;
}

namespace {

struct LossEval {
    double total, mse, st;
};

LossEval eval_loss(const ParamSet& p, const Tensor& x1, const Tensor& x2, const Tensor& gt,
                   double lambda, const TonemapConfig& tc,
                   std::uint64_t* decisions = nullptr) {
    EagerEngine e;
    e.decisions = decisions;
    auto bp = graph::bind_params(e, p);
    auto h = graph::net_forward_graph(e, e.lift(x1), e.lift(x2), bp);
    auto parts = graph::loss_graph(e, h, e.lift(gt), lambda, tc);
    return {parts.total->v[0], parts.mse->v[0], parts.st->v[0]};
}

struct TapeRun {
    double total, mse, st;
    std::vector<Tensor> grads;  // one per param entry, empty if untouched
};

TapeRun eval_loss_with_grads(const ParamSet& p, const Tensor& x1, const Tensor& x2,
                             const Tensor& gt, double lambda, const TonemapConfig& tc) {
    ad::Tape tape;
    TapeEngine e(&tape);
    auto bp = graph::bind_params(e, p);
    auto h = graph::net_forward_graph(e, e.constant(x1), e.constant(x2), bp);
    auto parts = graph::loss_graph(e, h, e.constant(gt), lambda, tc);
    tape.backward(parts.total);

    TapeRun run;
    run.total = parts.total->val.v[0];
    run.mse = parts.mse->val.v[0];
    run.st = parts.st->val.v[0];
    run.grads.reserve(p.entries.size());
    for (std::size_t i = 0; i < p.entries.size(); ++i) {
        ad::Node* n = bp.t[i];
        run.grads.push_back(n->grad.v.empty() ? Tensor(n->val.shape) : n->grad);
    }
    return run;
}

struct StackPair {
    Tensor x1, x2, gt;
};

StackPair scene_pair(const SynthScene& scene) {
    require(scene.ldr_stack.size() == 3, errc::invalid_argument, "scene needs 3 exposures");
    StackPair s;
    s.x1 = build_stack(scene.ldr_stack[0]).data;
    s.x2 = build_stack(scene.ldr_stack[1]).data;
    s.gt = to_planar(scene.gt);
    return s;
}

}  // namespace

GradCheckReport grad_check(const ParamSet& p, const SynthScene& scene, double epsilon,
                           int probes, std::uint64_t probe_seed) {
    require(epsilon > 0.0, errc::invalid_argument, "epsilon must be positive");
    const StackPair s = scene_pair(scene);
    const double lambda = kDefaultStLossWeight;
    const TonemapConfig tc;

    const TapeRun analytic = eval_loss_with_grads(p, s.x1, s.x2, s.gt, lambda, tc);
    require(std::isfinite(analytic.total), errc::divergence, "non-finite loss");

    // Flat index -> (entry, offset)
    std::vector<std::size_t> entry_of, offset_of;
    for (std::size_t ei = 0; ei < p.entries.size(); ++ei)
        for (std::size_t k = 0; k < p.entries[ei].value.numel(); ++k) {
            entry_of.push_back(ei);
            offset_of.push_back(k);
        }
    const std::size_t total_params = entry_of.size();

    std::vector<std::size_t> order(total_params);
    for (std::size_t i = 0; i < total_params; ++i) order[i] = i;
    Pcg32 rng(mix_seed(probe_seed ^ p.seed), 3);
    for (std::size_t i = total_params - 1; i > 0; --i) {
        const std::size_t j = rng.next_u64() % (i + 1);
        std::swap(order[i], order[j]);
    }

    ParamSet work = p;
    auto f_at = [&](std::size_t ei, std::size_t k, double value, std::uint64_t* dec) {
        const double saved = work.entries[ei].value.v[k];
        work.entries[ei].value.v[k] = value;
        const double out = eval_loss(work, s.x1, s.x2, s.gt, lambda, tc, dec).total;
        work.entries[ei].value.v[k] = saved;
        return out;
    };

    GradCheckReport report;
    report.epsilon = epsilon;
    for (std::size_t oi = 0; oi < total_params && report.probes < probes; ++oi) {
        const std::size_t ei = entry_of[order[oi]], k = offset_of[order[oi]];
        const double theta = work.entries[ei].value.v[k];

        std::uint64_t hp = 0, hm = 0;
        const double fp = f_at(ei, k, theta + epsilon, &hp);
        const double fm = f_at(ei, k, theta - epsilon, &hm);
        // Both endpoints must lie in the same piecewise-smooth region,
        // otherwise the central difference straddles a kink and is not a
        // derivative estimate at all.
        if (hp != hm) {
            ++report.skipped;
            continue;
        }
        const double fd1 = (fp - fm) / (2.0 * epsilon);
        const double fd2 = (f_at(ei, k, theta + epsilon / 2, nullptr) -
                            f_at(ei, k, theta - epsilon / 2, nullptr)) /
                           epsilon;
        // Second guard: the two step sizes must agree, which rejects probes
        // whose truncation error alone would swamp the tolerance.
        const double fd_scale = std::max(std::abs(fd1), std::abs(fd2));
        if (std::abs(fd1 - fd2) > 1e-3 * std::max(fd_scale, 1e-7)) {
            ++report.skipped;
            continue;
        }

        const double g = analytic.grads[ei].v[k];
        const double denom = std::max({std::abs(g), std::abs(fd1), 1e-8});
        const double rel = std::abs(g - fd1) / denom;
        if (rel > report.max_rel_error) {
            report.max_rel_error = rel;
            report.worst_param_path =
                p.entries[ei].name + "[" + std::to_string(k) + "]";
        }
        ++report.probes;
    }
    return report;
}

TrainResult train_toy(const SynthScene& scene, int steps, const TrainOptions& opts) {
    require(steps >= 0, errc::invalid_argument, "steps must be non-negative");
    validate_config(opts.config);

    TrainResult result;
    result.params = init_params(opts.config, opts.seed);
    if (steps == 0) return result;

    const StackPair s = scene_pair(scene);
    ParamSet& p = result.params;

    std::vector<Tensor> m(p.entries.size()), v(p.entries.size());
    for (std::size_t i = 0; i < p.entries.size(); ++i) {
        m[i] = Tensor(p.entries[i].value.shape);
        v[i] = Tensor(p.entries[i].value.shape);
    }

    for (int step = 0; step < steps; ++step) {
        const TapeRun run = eval_loss_with_grads(p, s.x1, s.x2, s.gt, opts.lambda, opts.tonemap);
        if (!std::isfinite(run.total))
            fail(errc::divergence, "loss diverged at step " + std::to_string(step));
        result.curve.push_back({step, run.total, run.mse, run.st});

        const double phase = steps > 1 ? static_cast<double>(step) / (steps - 1) : 1.0;
        const double lr = opts.lr_min +
                          0.5 * (opts.lr_max - opts.lr_min) * (1.0 + std::cos(M_PI * phase));
        const double bc1 = 1.0 - std::pow(opts.beta1, step + 1);
        const double bc2 = 1.0 - std::pow(opts.beta2, step + 1);

        for (std::size_t i = 0; i < p.entries.size(); ++i) {
            Tensor& theta = p.entries[i].value;
            const Tensor& g = run.grads[i];
            for (std::size_t k = 0; k < theta.numel(); ++k) {
                m[i].v[k] = opts.beta1 * m[i].v[k] + (1.0 - opts.beta1) * g.v[k];
                v[i].v[k] = opts.beta2 * v[i].v[k] + (1.0 - opts.beta2) * g.v[k] * g.v[k];
                const double mhat = m[i].v[k] / bc1;
                const double vhat = v[i].v[k] / bc2;
                theta.v[k] -= lr * (mhat / (std::sqrt(vhat) + opts.adam_eps) +
                                    opts.weight_decay * theta.v[k]);
            }
        }
    }

    const LossEval fin = eval_loss(p, s.x1, s.x2, s.gt, opts.lambda, opts.tonemap);
    if (!std::isfinite(fin.total))
        fail(errc::divergence, "loss diverged at step " + std::to_string(steps));
    result.curve.push_back({steps, fin.total, fin.mse, fin.st});
    return result;
}

}  // namespace hst
