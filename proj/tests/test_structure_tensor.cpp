#include <doctest.h>

#include <cmath>

#include "hst/error.hpp"
#include "hst/rng.hpp"
#include "hst/structure_tensor.hpp"

using namespace hst;

namespace {

Tensor constant_image(int h, int w, double v) { return full({h, w}, v); }

Tensor transpose2d(const Tensor& t) {
    Tensor out({t.dim(1), t.dim(0)});
    for (int y = 0; y < t.dim(0); ++y)
        for (int x = 0; x < t.dim(1); ++x) out(x, y) = t(y, x);
    return out;
}

Tensor step_edge(int n, double lo, double hi) {
    Tensor img({n, n});
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) img(y, x) = x < n / 2 ? lo : hi;
    return img;
}

void add_noise(Tensor& img, double sigma, std::uint64_t seed) {
    Pcg32 rng(seed, 5);
    for (double& v : img.v) v += sigma * rng.normal();
}

double band_mean(const Tensor& m, int x0, int x1, int margin = 2) {
    double acc = 0;
    int cnt = 0;
    for (int y = margin; y < m.dim(0) - margin; ++y)
        for (int x = x0; x <= x1; ++x) {
            acc += m(y, x);
            ++cnt;
        }
    return acc / cnt;
}

}  // namespace

TEST_CASE("luminance uses the Rec.709 weights") {
    Tensor rgb({3, 2, 2});
    // pixel 0 white, pixel 1 black, pixel 2 pure red
    rgb(0, 0, 0) = 1.0;
    rgb(1, 0, 0) = 1.0;
    rgb(2, 0, 0) = 1.0;
    rgb(0, 1, 0) = 1.0;
    Tensor y = luminance(rgb);
    CHECK(y(0, 0) == doctest::Approx(1.0));
    CHECK(y(0, 1) == 0.0);
    CHECK(y(1, 0) == doctest::Approx(0.2126));
    CHECK_THROWS_AS(luminance(Tensor({2, 4, 4})), Error);
}

TEST_CASE("gradients of a constant image vanish") {
    GradientField g = gradients(constant_image(8, 8, 0.7));
    for (double v : g.gx.v) CHECK(std::abs(v) < 1e-15);
    for (double v : g.gy.v) CHECK(std::abs(v) < 1e-15);
}

TEST_CASE("gradients of a horizontal ramp match the stencil") {
    const int w = 9, h = 6;
    Tensor img({h, w});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) img(y, x) = static_cast<double>(x) / (w - 1);
    GradientField g = gradients(img);
    for (int y = 0; y < h; ++y)
        for (int x = 1; x < w - 1; ++x) {
            CHECK(g.gx(y, x) == doctest::Approx(1.0 / (w - 1)).epsilon(1e-12));
            CHECK(g.gy(y, x) == doctest::Approx(0.0));
        }
}

TEST_CASE("gradients of the transpose swap and transpose") {
    Pcg32 rng(31);
    Tensor img({7, 5});
    for (double& v : img.v) v = rng.uniform();
    GradientField g = gradients(img);
    GradientField gt = gradients(transpose2d(img));
    for (int y = 0; y < 7; ++y)
        for (int x = 0; x < 5; ++x) {
            CHECK(gt.gx(x, y) == doctest::Approx(g.gy(y, x)).epsilon(1e-12));
            CHECK(gt.gy(x, y) == doctest::Approx(g.gx(y, x)).epsilon(1e-12));
        }
}

TEST_CASE("gradients reject tiny images") {
    CHECK_THROWS_AS(gradients(Tensor({2, 8})), Error);
}

TEST_CASE("structure tensor without smoothing is the raw products") {
    GradientField g;
    g.gx = Tensor({5, 5});
    g.gy = Tensor({5, 5});
    g.gx(2, 2) = 1.0;
    StTensorField f = structure_tensor(g, 0.0);
    CHECK(f.jxx(2, 2) == 1.0);
    CHECK(f.jxy(2, 2) == 0.0);
    CHECK(f.jyy(2, 2) == 0.0);
    CHECK(f.jxx(1, 2) == 0.0);
}

TEST_CASE("zero gradients give a zero tensor field") {
    GradientField g;
    g.gx = Tensor({6, 6});
    g.gy = Tensor({6, 6});
    StTensorField f = structure_tensor(g, 1.5);
    for (double v : f.jxx.v) CHECK(v == 0.0);
    for (double v : f.jyy.v) CHECK(v == 0.0);
}

TEST_CASE("impulse smoothing matches a brute-force 2-D convolution") {
    const int n = 16;
    GradientField g;
    g.gx = Tensor({n, n});
    g.gy = Tensor({n, n});
    g.gx(8, 8) = 1.0;  // jxx gets a unit impulse
    StTensorField f = structure_tensor(g, 1.5);

    // Independent oracle: direct 2-D truncated, renormalized Gaussian.
    const int r = static_cast<int>(std::ceil(3 * 1.5));
    std::vector<double> k1(static_cast<std::size_t>(2 * r + 1));
    double sum = 0;
    for (int i = -r; i <= r; ++i) {
        k1[static_cast<std::size_t>(i + r)] = std::exp(-0.5 * i * i / (1.5 * 1.5));
        sum += k1[static_cast<std::size_t>(i + r)];
    }
    for (double& v : k1) v /= sum;
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            const int dy = y - 8, dx = x - 8;
            const double want = (std::abs(dy) <= r && std::abs(dx) <= r)
                                    ? k1[static_cast<std::size_t>(dy + r)] *
                                          k1[static_cast<std::size_t>(dx + r)]
                                    : 0.0;
            CHECK(f.jxx(y, x) == doctest::Approx(want).epsilon(1e-12));
        }
}

TEST_CASE("smoothed field stays positive semidefinite") {
    Pcg32 rng(77);
    Tensor img({24, 24});
    for (double& v : img.v) v = rng.uniform();
    StTensorField f = structure_tensor(gradients(img), 1.5);
    for (std::size_t i = 0; i < f.jxx.numel(); ++i) {
        CHECK(f.jxx.v[i] >= 0.0);
        CHECK(f.jyy.v[i] >= 0.0);
        CHECK(f.jxy.v[i] * f.jxy.v[i] <= f.jxx.v[i] * f.jyy.v[i] + 1e-9);
    }
}

TEST_CASE("constant image maps to an all-zero response map") {
    Tensor m = st_response_map(constant_image(16, 16, 0.7), 1.5);
    for (double v : m.v) CHECK(v == 0.0);
}

TEST_CASE("a strong vertical edge normalizes to response 1 on the edge") {
    Tensor img = step_edge(32, 0.1, 0.9);
    Tensor m = st_response_map(img, 1.5);
    double best = 0.0;
    for (int y = 4; y < 28; ++y)
        for (int x = 14; x <= 17; ++x) best = std::max(best, m(y, x));
    CHECK(best == doctest::Approx(1.0));
    for (double v : m.v) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("gradient magnitude map equals the rho=0 response map pointwise") {
    Pcg32 rng(91);
    Tensor img({16, 16});
    for (double& v : img.v) v = rng.uniform();
    Tensor a = gradient_magnitude_map(img);
    Tensor b = st_map(structure_tensor(gradients(img), 0.0));
    REQUIRE(a.numel() == b.numel());
    for (std::size_t i = 0; i < a.numel(); ++i) CHECK(a.v[i] == b.v[i]);
}

TEST_CASE("response map of the transpose is the transposed response map") {
    Pcg32 rng(13);
    Tensor img({20, 12});
    for (double& v : img.v) v = rng.uniform();
    Tensor m = st_response_map(img, 1.5);
    Tensor mt = st_response_map(transpose2d(img), 1.5);
    for (int y = 0; y < 20; ++y)
        for (int x = 0; x < 12; ++x) CHECK(mt(x, y) == doctest::Approx(m(y, x)).epsilon(1e-9));
}

TEST_CASE("smoothing suppresses flat-region noise response relative to raw gradients") {
    // Step edge plus noise; both maps normalized to unit mean response over
    // the edge band, then compared on the flat remainder.
    const int n = 64;
    Tensor img = step_edge(n, 0.25, 0.75);
    add_noise(img, 0.02, 42);

    Tensor st = st_response_map(img, 1.5);
    Tensor gm = gradient_magnitude_map(img);

    const int e0 = n / 2 - 7, e1 = n / 2 + 6;
    const double st_edge = band_mean(st, e0, e1);
    const double gm_edge = band_mean(gm, e0, e1);
    const double st_flat = (band_mean(st, 2, e0 - 3) + band_mean(st, e1 + 3, n - 3)) / 2;
    const double gm_flat = (band_mean(gm, 2, e0 - 3) + band_mean(gm, e1 + 3, n - 3)) / 2;

    CHECK(st_flat / st_edge < gm_flat / gm_edge);
}

TEST_CASE("noise raises the gradient map strictly more than the smoothed map") {
    const int n = 64;
    for (std::uint64_t seed : {7ull, 21ull, 99ull}) {
        Tensor clean = step_edge(n, 0.25, 0.75);
        Tensor noisy = clean;
        add_noise(noisy, 0.02, seed);

        const int e0 = n / 2 - 7, e1 = n / 2 + 6;
        auto flat_over_edge = [&](const Tensor& m) {
            const double edge = band_mean(m, e0, e1);
            const double flat = (band_mean(m, 2, e0 - 3) + band_mean(m, e1 + 3, n - 3)) / 2;
            return flat / edge;
        };

        const double st_raise = flat_over_edge(st_response_map(noisy, 1.5)) -
                                flat_over_edge(st_response_map(clean, 1.5));
        const double gm_raise = flat_over_edge(gradient_magnitude_map(noisy)) -
                                flat_over_edge(gradient_magnitude_map(clean));
        CHECK(gm_raise > st_raise);
        CHECK(st_raise > 0.0);
    }
}
