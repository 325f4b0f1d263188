#include "hst/loss.hpp"

#include <cmath>

#include "hst/graph.hpp"

namespace hst {

LossValue loss(const Tensor& h, const Tensor& gt, double lambda, const TonemapConfig& cfg) {
    check_same_shape(h, gt, "loss inputs");
    require(lambda >= 0.0, errc::invalid_argument, "lambda must be non-negative");
    validate(cfg);
    EagerEngine e;
    auto hb = std::make_shared<const Tensor>(h);
    auto gb = std::make_shared<const Tensor>(gt);
    auto parts = graph::loss_graph(e, hb, gb, lambda, cfg);
    LossValue out;
    out.mse_term = parts.mse->v[0];
    out.st_term = parts.st->v[0];
    out.lambda = lambda;
    out.total = parts.total->v[0];
    return out;
}

LossValue loss(const HdrImage& h, const HdrImage& gt, double lambda, const TonemapConfig& cfg) {
    require(h.width == gt.width && h.height == gt.height, errc::dimension_mismatch,
            "loss image dimensions");
    return loss(to_planar(h), to_planar(gt), lambda, cfg);
}

namespace {

double mse_of(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "psnr inputs");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) {
        const double d = a.v[i] - b.v[i];
        acc += d * d;
    }
    return acc / static_cast<double>(a.numel());
}

}  // namespace

double psnr_l(const Tensor& h, const Tensor& gt) {
    const double m = mse_of(h, gt);
    if (m <= 0.0) return kPsnrCap;
    const double db = 10.0 * std::log10(1.0 / m);
    return db > kPsnrCap ? kPsnrCap : db;
}

double psnr_l(const HdrImage& h, const HdrImage& gt) {
    require(h.width == gt.width && h.height == gt.height, errc::dimension_mismatch,
            "psnr image dimensions");
    return psnr_l(to_planar(h), to_planar(gt));
}

double psnr_mu(const Tensor& h, const Tensor& gt, const TonemapConfig& cfg) {
    validate(cfg);
    return psnr_l(kern::mu_tonemap(h, cfg.mu), kern::mu_tonemap(gt, cfg.mu));
}

double psnr_mu(const HdrImage& h, const HdrImage& gt, const TonemapConfig& cfg) {
    require(h.width == gt.width && h.height == gt.height, errc::dimension_mismatch,
            "psnr image dimensions");
    return psnr_mu(to_planar(h), to_planar(gt), cfg);
}

}  // namespace hst
