#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "hst/autodiff.hpp"
#include "hst/kernels.hpp"
#include "hst/tensor.hpp"

namespace hst {

// Named intermediate values captured during a forward pass, for tests and
// diagnostics (attention matrices, feature maps).
struct Trace {
    std::vector<std::pair<std::string, Tensor>> items;

    void add(std::string name, Tensor t) { items.emplace_back(std::move(name), std::move(t)); }
    const Tensor* find(const std::string& name) const {
        for (const auto& [k, v] : items)
            if (k == name) return &v;
        return nullptr;
    }
    std::vector<const Tensor*> find_all(const std::string& prefix) const {
        std::vector<const Tensor*> out;
        for (const auto& [k, v] : items)
            if (k.rfind(prefix, 0) == 0) out.push_back(&v);
        return out;
    }
};

// The model and loss graphs are written once as templates over an engine.
// EagerEngine computes values immediately and lets intermediates die with
// their last reference; TapeEngine records the same kernel calls onto an
// autodiff tape. Both run the identical kernels in identical order, so
// their outputs are bit-identical.
class EagerEngine {
  public:
    using V = std::shared_ptr<const Tensor>;

    Trace* trace = nullptr;

    // When set, every nonsmooth branch decision (activation signs, L1
    // signs, clamp states, percentile selection) is folded into this hash.
    // Two evaluations with equal hashes lie in the same piecewise-smooth
    // region, which is what makes a finite-difference probe trustworthy.
    std::uint64_t* decisions = nullptr;

    static const Tensor& val(const V& v) { return *v; }

    void fold(std::uint64_t bits) const {
        if (decisions) *decisions = (*decisions ^ bits) * 0x2545F4914F6CDD1DULL + 0x9E3779B97F4A7C15ULL;
    }
    void fold_signs(const Tensor& t) const {
        if (!decisions) return;
        std::uint64_t h = 0;
        for (double x : t.v) h = (h << 1 | (h >> 63)) ^ (x >= 0.0 ? 0x5851F42DULL : 0x14057B7EULL);
        fold(h);
    }

    V lift(Tensor t) const { return std::make_shared<const Tensor>(std::move(t)); }
    V constant(Tensor t) const { return lift(std::move(t)); }

    V conv2d(const V& x, const V& w, const V& b, int dil) const {
        return lift(kern::conv2d(*x, *w, *b, dil));
    }
    V linear(const V& x, const V& w, const V& b) const {
        return lift(kern::linear(*x, *w, *b));
    }
    V bmm(const V& a, const V& b, bool ta, bool tb) const {
        return lift(kern::bmm(*a, *b, ta, tb));
    }
    V softmax(const V& x, const Tensor* mask, int head_groups) const {
        return lift(kern::softmax_masked(*x, mask, head_groups));
    }
    V layer_norm(const V& x, const V& g, const V& b, double eps) const {
        return lift(kern::layer_norm(*x, *g, *b, eps, nullptr));
    }
    V leaky_relu(const V& x, double slope) const {
        fold_signs(*x);
        return lift(kern::leaky_relu(*x, slope));
    }
    V sigmoid(const V& x) const { return lift(kern::sigmoid(*x)); }
    V gelu(const V& x) const { return lift(kern::gelu(*x)); }
    V sqrt(const V& x) const { return lift(kern::sqrt_ew(*x)); }
    V mu_tonemap(const V& x, double mu) const { return lift(kern::mu_tonemap(*x, mu)); }
    V add(const V& a, const V& b) const { return lift(kern::add(*a, *b)); }
    V sub(const V& a, const V& b) const { return lift(kern::sub(*a, *b)); }
    V mul(const V& a, const V& b) const { return lift(kern::mul(*a, *b)); }
    V scale(const V& a, double s) const { return lift(kern::scale(*a, s)); }
    V correlate(const V& x, const Tensor& kernel) const {
        return lift(kern::correlate_fixed(*x, kernel));
    }
    V luminance(const V& x) const { return lift(kern::luminance709(*x)); }
    V percentile_norm(const V& x, double pct) const {
        kern::PercentileAux aux;
        V y = lift(kern::percentile_norm(*x, pct, &aux));
        if (decisions) {
            fold(static_cast<std::uint64_t>(aux.sel) ^ (aux.degenerate ? 0xD1B54A32D192ED03ULL : 0));
            std::uint64_t h = 0;
            for (double r : y->v)
                h = (h << 1 | (h >> 63)) ^ (r >= 1.0 ? 0x7F4A7C15ULL : (r <= 0.0 ? 0x2545F491ULL : 0));
            fold(h);
        }
        return y;
    }
    V concat(const std::vector<V>& xs) const {
        std::vector<const Tensor*> ps;
        ps.reserve(xs.size());
        for (const V& x : xs) ps.push_back(x.get());
        return lift(kern::concat_ch(ps));
    }
    V gather(const V& x, const kern::IndexMap& m) const { return lift(kern::gather(*x, m)); }
    V mse(const V& a, const V& b) const { return lift(kern::mse(*a, *b)); }
    V mae(const V& a, const V& b) const {
        if (decisions) fold_signs(kern::sub(*a, *b));
        return lift(kern::mae(*a, *b));
    }
    V add_weighted(const V& a, const V& b, double lam) const {
        return lift(kern::add_weighted(*a, *b, lam));
    }

    void trace_add(const std::string& name, const V& v) const {
        if (trace) trace->add(name, *v);
    }
};

class TapeEngine {
  public:
    using V = ad::Node*;

    ad::Tape* tape = nullptr;
    Trace* trace = nullptr;

    explicit TapeEngine(ad::Tape* t) : tape(t) {}

    static const Tensor& val(const V& v) { return v->val; }

    V constant(Tensor t) const { return tape->leaf(std::move(t), false); }
    V param(Tensor t) const { return tape->leaf(std::move(t), true); }

    V conv2d(V x, V w, V b, int dil) const {
        V n = tape->alloc(kern::conv2d(x->val, w->val, b->val, dil),
                          x->needs_grad || w->needs_grad || b->needs_grad);
        if (n->needs_grad)
            n->back = [=] {
                kern::conv2d_bwd(x->val, w->val, n->grad, dil,
                                 ad::grad_buf(x), ad::grad_buf(w), ad::grad_buf(b));
            };
        return n;
    }

    V linear(V x, V w, V b) const {
        V n = tape->alloc(kern::linear(x->val, w->val, b->val),
                          x->needs_grad || w->needs_grad || b->needs_grad);
        if (n->needs_grad)
            n->back = [=] {
                kern::linear_bwd(x->val, w->val, n->grad,
                                 ad::grad_buf(x), ad::grad_buf(w), ad::grad_buf(b));
            };
        return n;
    }

    V bmm(V a, V b, bool ta, bool tb) const {
        V n = tape->alloc(kern::bmm(a->val, b->val, ta, tb), a->needs_grad || b->needs_grad);
        if (n->needs_grad)
            n->back = [=] {
                kern::bmm_bwd(a->val, b->val, ta, tb, n->grad, ad::grad_buf(a), ad::grad_buf(b));
            };
        return n;
    }

    V softmax(V x, const Tensor* mask, int head_groups) const {
        V n = tape->alloc(kern::softmax_masked(x->val, mask, head_groups), x->needs_grad);
        if (n->needs_grad)
            n->back = [=] { kern::softmax_bwd(n->val, n->grad, ad::grad_buf(x)); };
        return n;
    }

    V layer_norm(V x, V g, V b, double eps) const {
        auto aux = std::make_shared<kern::LayerNormAux>();
        V n = tape->alloc(kern::layer_norm(x->val, g->val, b->val, eps, aux.get()),
                          x->needs_grad || g->needs_grad || b->needs_grad);
        if (n->needs_grad)
            n->back = [=] {
                kern::layer_norm_bwd(x->val, g->val, *aux, n->grad,
                                     ad::grad_buf(x), ad::grad_buf(g), ad::grad_buf(b));
            };
        return n;
    }

    V leaky_relu(V x, double slope) const {
        V n = tape->alloc(kern::leaky_relu(x->val, slope), x->needs_grad);
        if (n->needs_grad)
            n->back = [=] { kern::leaky_relu_bwd(x->val, slope, n->grad, ad::grad_buf(x)); };
        return n;
    }

    V sigmoid(V x) const {
        V n = tape->alloc(kern::sigmoid(x->val), x->needs_grad);
        if (n->needs_grad)
            n->back = [=] { kern::sigmoid_bwd(n->val, n->grad, ad::grad_buf(x)); };
        return n;
    }

    V gelu(V x) const {
        V n = tape->alloc(kern::gelu(x->val), x->needs_grad);
        if (n->needs_grad)
            n->back = [=] { kern::gelu_bwd(x->val, n->grad, ad::grad_buf(x)); };
        return n;
    }

    V sqrt(V x) const {
        V n = tape->alloc(kern::sqrt_ew(x->val), x->needs_grad);
        if (n->needs_grad)
            n->back = [=] { kern::sqrt_bwd(n->val, n->grad, ad::grad_buf(x)); };
        return n;
    }

    V mu_tonemap(V x, double mu) const {
        V n = tape->alloc(kern::mu_tonemap(x->val, mu), x->needs_grad);
        if (n->needs_grad)
            n->back = [=] { kern::mu_tonemap_bwd(x->val, mu, n->grad, ad::grad_buf(x)); };
        return n;
    }

    V add(V a, V b) const {
        V n = tape->alloc(kern::add(a->val, b->val), a->needs_grad || b->needs_grad);
        if (n->needs_grad)
            n->back = [=] {
                if (Tensor* g = ad::grad_buf(a))
                    for (std::size_t i = 0; i < g->numel(); ++i) g->v[i] += n->grad.v[i];
                if (Tensor* g = ad::grad_buf(b))
                    for (std::size_t i = 0; i < g->numel(); ++i) g->v[i] += n->grad.v[i];
            };
        return n;
    }

    V sub(V a, V b) const {
        V n = tape->alloc(kern::sub(a->val, b->val), a->needs_grad || b->needs_grad);
        if (n->needs_grad)
            n->back = [=] {
                if (Tensor* g = ad::grad_buf(a))
                    for (std::size_t i = 0; i < g->numel(); ++i) g->v[i] += n->grad.v[i];
                if (Tensor* g = ad::grad_buf(b))
                    for (std::size_t i = 0; i < g->numel(); ++i) g->v[i] -= n->grad.v[i];
            };
        return n;
    }

    V mul(V a, V b) const {
        V n = tape->alloc(kern::mul(a->val, b->val), a->needs_grad || b->needs_grad);
        if (n->needs_grad)
            n->back = [=] {
                if (Tensor* g = ad::grad_buf(a))
                    for (std::size_t i = 0; i < g->numel(); ++i) g->v[i] += n->grad.v[i] * b->val.v[i];
                if (Tensor* g = ad::grad_buf(b))
                    for (std::size_t i = 0; i < g->numel(); ++i) g->v[i] += n->grad.v[i] * a->val.v[i];
            };
        return n;
    }

    V scale(V a, double s) const {
        V n = tape->alloc(kern::scale(a->val, s), a->needs_grad);
        if (n->needs_grad)
            n->back = [=] {
                if (Tensor* g = ad::grad_buf(a))
                    for (std::size_t i = 0; i < g->numel(); ++i) g->v[i] += n->grad.v[i] * s;
            };
        return n;
    }

    V correlate(V x, const Tensor& kernel) const {
        V n = tape->alloc(kern::correlate_fixed(x->val, kernel), x->needs_grad);
        if (n->needs_grad) {
            auto k = std::make_shared<Tensor>(kernel);
            n->back = [=] { kern::correlate_fixed_bwd(*k, n->grad, ad::grad_buf(x)); };
        }
        return n;
    }

    V luminance(V x) const {
        V n = tape->alloc(kern::luminance709(x->val), x->needs_grad);
        if (n->needs_grad)
            n->back = [=] { kern::luminance709_bwd(n->grad, ad::grad_buf(x)); };
        return n;
    }

    V percentile_norm(V x, double pct) const {
        auto aux = std::make_shared<kern::PercentileAux>();
        V n = tape->alloc(kern::percentile_norm(x->val, pct, aux.get()), x->needs_grad);
        if (n->needs_grad)
            n->back = [=] { kern::percentile_norm_bwd(x->val, *aux, n->grad, ad::grad_buf(x)); };
        return n;
    }

    V concat(const std::vector<V>& xs) const {
        std::vector<const Tensor*> ps;
        bool needs = false;
        for (V x : xs) {
            ps.push_back(&x->val);
            needs = needs || x->needs_grad;
        }
        V n = tape->alloc(kern::concat_ch(ps), needs);
        if (n->needs_grad) {
            auto parents = xs;
            n->back = [=] {
                std::size_t off = 0;
                for (V p : parents) {
                    Tensor* g = ad::grad_buf(p);
                    if (g) {
                        for (std::size_t i = 0; i < g->numel(); ++i) g->v[i] += n->grad.v[off + i];
                    }
                    off += p->val.numel();
                }
            };
        }
        return n;
    }

    V gather(V x, const kern::IndexMap& m) const {
        V n = tape->alloc(kern::gather(x->val, m), x->needs_grad);
        if (n->needs_grad) {
            auto map = std::make_shared<kern::IndexMap>(m);
            n->back = [=] {
                if (Tensor* g = ad::grad_buf(x)) kern::gather_bwd(*map, n->grad, g);
            };
        }
        return n;
    }

    V mse(V a, V b) const {
        V n = tape->alloc(kern::mse(a->val, b->val), a->needs_grad || b->needs_grad);
        if (n->needs_grad)
            n->back = [=] {
                kern::mse_bwd(a->val, b->val, n->grad, ad::grad_buf(a), ad::grad_buf(b));
            };
        return n;
    }

    V mae(V a, V b) const {
        V n = tape->alloc(kern::mae(a->val, b->val), a->needs_grad || b->needs_grad);
        if (n->needs_grad)
            n->back = [=] {
                kern::mae_bwd(a->val, b->val, n->grad, ad::grad_buf(a), ad::grad_buf(b));
            };
        return n;
    }

    V add_weighted(V a, V b, double lam) const {
        V n = tape->alloc(kern::add_weighted(a->val, b->val, lam),
                          a->needs_grad || b->needs_grad);
        if (n->needs_grad)
            n->back = [=] {
                kern::add_weighted_bwd(lam, n->grad, ad::grad_buf(a), ad::grad_buf(b));
            };
        return n;
    }

    void trace_add(const std::string& name, const V& v) const {
        if (trace) trace->add(name, v->val);
    }
};

}  // namespace hst
