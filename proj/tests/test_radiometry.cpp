#include <doctest.h>

#include <cmath>

#include "hst/error.hpp"
#include "hst/radiometry.hpp"
#include "hst/rng.hpp"

using namespace hst;

namespace {

LdrImage flat_ldr(int w, int h, float value, double ev) {
    LdrImage img;
    img.width = w;
    img.height = h;
    img.ev = ev;
    img.data.assign(static_cast<std::size_t>(w) * h * 3, value);
    return img;
}

// Extended-precision references for the scalar cores.
long double lift_oracle(long double i, long double t, long double gamma) {
    return powl(i, gamma) / t;
}

long double tonemap_oracle(long double h, long double mu) {
    return logl(1.0L + mu * h) / logl(1.0L + mu);
}

}  // namespace

TEST_CASE("domain lift endpoints") {
    CHECK(lift_sample(1.0, 1.0, 2.2) == 1.0);
    CHECK(lift_sample(0.0, 4.0, 2.2) == 0.0);
    CHECK(lift_sample(0.5, 1.0, 2.2) ==
          doctest::Approx(static_cast<double>(lift_oracle(0.5L, 1.0L, 2.2L))).epsilon(1e-12));
}

TEST_CASE("lift matches the high-precision oracle over a grid") {
    for (double t : {0.25, 1.0, 4.0}) {
        for (int i = 0; i <= 1000; ++i) {
            const double x = i / 1000.0;
            const double got = lift_sample(x, t, 2.2);
            const double want = static_cast<double>(
                lift_oracle(static_cast<long double>(x), static_cast<long double>(t), 2.2L));
            const double rel = std::abs(got - want) / std::max(std::abs(want), 1e-300);
            if (x > 0.0) CHECK(rel < 1e-6);
        }
    }
}

TEST_CASE("lift output can exceed 1 for short exposures and stays unclamped") {
    LdrImage img = flat_ldr(8, 8, 1.0f, -2.0);  // t = 0.25
    HdrImage h = ldr_to_hdr(img, 2.2);
    CHECK(h.data[0] == doctest::Approx(4.0));
}

TEST_CASE("lift rejects non-positive gamma") {
    CHECK_THROWS_AS(ldr_to_hdr(flat_ldr(8, 8, 0.5f, 0.0), 0.0), Error);
    CHECK_THROWS_AS(ldr_to_hdr(flat_ldr(8, 8, 0.5f, 0.0), -1.0), Error);
}

TEST_CASE("lift then inverse map recovers the input") {
    Pcg32 rng(17);
    for (double ev : {-2.0, 0.0, 2.0}) {
        LdrImage img = flat_ldr(8, 8, 0.0f, ev);
        for (float& s : img.data) s = static_cast<float>(0.001 + 0.999 * rng.uniform());
        HdrImage h = ldr_to_hdr(img, 2.2);
        const double t = img.t();
        bool ok = true;
        for (std::size_t i = 0; i < img.data.size(); ++i) {
            const double back = std::pow(static_cast<double>(h.data[i]) * t, 1.0 / 2.2);
            ok = ok && std::abs(back - img.data[i]) / img.data[i] < 1e-6;
        }
        CHECK(ok);
    }
}

TEST_CASE("mu-law tonemap endpoints and oracle grid") {
    CHECK(tonemap_sample(0.0, 5000.0) == 0.0);
    CHECK(tonemap_sample(1.0, 5000.0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(tonemap_sample(0.1, 5000.0) ==
          doctest::Approx(static_cast<double>(tonemap_oracle(0.1L, 5000.0L))).epsilon(1e-12));
    // ln(501)/ln(5001)
    CHECK(tonemap_sample(0.1, 5000.0) == doctest::Approx(0.7299).epsilon(1e-4));

    for (int i = 0; i <= 1000; ++i) {
        const double h = 4.0 * i / 1000.0;
        const double got = tonemap_sample(h, 5000.0);
        const double want =
            static_cast<double>(tonemap_oracle(static_cast<long double>(h), 5000.0L));
        if (h > 0.0) CHECK(std::abs(got - want) / want < 1e-6);
    }
}

TEST_CASE("tonemap is strictly monotone") {
    Pcg32 rng(55);
    for (int trial = 0; trial < 200; ++trial) {
        double a = rng.uniform() * 4.0;
        double b = rng.uniform() * 4.0;
        if (a == b) continue;
        if (a > b) std::swap(a, b);
        CHECK(tonemap_sample(a, 5000.0) < tonemap_sample(b, 5000.0));
    }
}

TEST_CASE("tonemap validates its config") {
    HdrImage img;
    img.width = img.height = 8;
    img.data.assign(8 * 8 * 3, 0.5f);
    TonemapConfig bad;
    bad.mu = 0.0;
    CHECK_THROWS_AS(tonemap_mu(img, bad), Error);
}

TEST_CASE("7-channel assembly lays out LDR, lifted HDR and the ST plane") {
    const int n = 16;
    LdrImage ldr = flat_ldr(n, n, 0.25f, 0.0);
    HdrImage hdr = ldr_to_hdr(ldr, 2.2);
    Tensor st({n, n});
    for (int i = 0; i < n * n; ++i) st.v[static_cast<std::size_t>(i)] = (i % 7) / 7.0;

    InputStack stack = assemble_input(ldr, hdr, st);
    REQUIRE(stack.data.shape == std::vector<int>{7, n, n});
    validate(stack);

    const std::size_t plane = n * n;
    CHECK(stack.data.v[0] == doctest::Approx(0.25));
    CHECK(stack.data.v[3 * plane] == doctest::Approx(lift_sample(0.25, 1.0, 2.2)));
    // Channel 6 is the ST plane verbatim.
    bool same = true;
    for (std::size_t i = 0; i < plane; ++i) same = same && stack.data.v[6 * plane + i] == st.v[i];
    CHECK(same);
}

TEST_CASE("assembly rejects mismatched dimensions") {
    LdrImage ldr = flat_ldr(16, 16, 0.5f, 0.0);
    HdrImage hdr = ldr_to_hdr(ldr, 2.2);
    CHECK_THROWS_AS(assemble_input(ldr, hdr, Tensor({8, 8})), Error);

    LdrImage small = flat_ldr(8, 8, 0.5f, 0.0);
    HdrImage small_hdr = ldr_to_hdr(small, 2.2);
    CHECK_THROWS_AS(assemble_input(ldr, small_hdr, Tensor({16, 16})), Error);
}
