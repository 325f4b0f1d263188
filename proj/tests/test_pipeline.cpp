#include <doctest.h>

#include <cmath>
#include <cstring>

#include "hst/error.hpp"
#include "hst/pipeline.hpp"
#include "hst/rng.hpp"
#include "hst/verification.hpp"

using namespace hst;

namespace {

LdrImage random_ldr(int w, int h, double ev, Pcg32& rng) {
    LdrImage img;
    img.width = w;
    img.height = h;
    img.ev = ev;
    img.data.resize(static_cast<std::size_t>(w) * h * 3);
    for (float& s : img.data) s = static_cast<float>(rng.uniform());
    return img;
}

bool images_equal(const HdrImage& a, const HdrImage& b) {
    return a.width == b.width && a.height == b.height &&
           std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(float)) == 0;
}

}  // namespace

TEST_CASE("reference selection follows the median-EV rule") {
    CHECK(select_reference({-2.0, 0.0, 2.0}) == 1);
    CHECK(select_reference({-3.0, -1.0, 1.0, 3.0}) == 1);  // darker middle
    CHECK(select_reference({0.0}) == 0);
    CHECK(select_reference({2.0, -2.0, 0.0}) == 2);
    CHECK(select_reference({1.0, 1.0, 1.0}) == 0);  // ties resolve to list order
    CHECK_THROWS_AS(select_reference({}), Error);
}

TEST_CASE("reference selection is permutation-invariant up to the tie rule") {
    Pcg32 rng(71);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> evs;
        const int n = 3 + static_cast<int>(rng.next_u32() % 4);
        for (int i = 0; i < n; ++i)
            evs.push_back(std::round((rng.uniform() * 8.0 - 4.0) * 2.0) / 2.0);
        const double chosen = evs[select_reference(evs)];

        std::vector<double> shuffled = evs;
        for (std::size_t i = shuffled.size() - 1; i > 0; --i)
            std::swap(shuffled[i], shuffled[rng.next_u64() % (i + 1)]);
        CHECK(shuffled[select_reference(shuffled)] == chosen);
    }
}

TEST_CASE("padding mirrors without repeating the edge and crop undoes it") {
    Pcg32 rng(72);
    LdrImage img = random_ldr(10, 9, 0.0, rng);
    LdrImage padded = pad_to_multiple(img, 4);
    CHECK(padded.width == 12);
    CHECK(padded.height == 12);
    // Mirrored column: x = 10 reflects to x = 8.
    for (int c = 0; c < 3; ++c)
        CHECK(padded.data[(0 * 12 + 10) * 3 + c] == img.data[(0 * 10 + 8) * 3 + c]);
    // Untouched interior.
    for (int c = 0; c < 3; ++c)
        CHECK(padded.data[(3 * 12 + 4) * 3 + c] == img.data[(3 * 10 + 4) * 3 + c]);

    LdrImage same = pad_to_multiple(img, 1);
    CHECK(same.width == 10);
}

TEST_CASE("pair fusion pads, fuses and crops back to the input size") {
    const ParamSet p = init_params(tiny_config(), 73);
    Pcg32 rng(73);

    SUBCASE("aligned input size") {
        LdrImage a = random_ldr(16, 16, -2.0, rng);
        LdrImage ref = random_ldr(16, 16, 0.0, rng);
        HdrImage out = fuse_pair(a, ref, p);
        CHECK(out.width == 16);
        CHECK(out.height == 16);
    }

    SUBCASE("unaligned input size gets padded and cropped") {
        LdrImage a = random_ldr(13, 10, -2.0, rng);
        LdrImage ref = random_ldr(13, 10, 0.0, rng);
        HdrImage out = fuse_pair(a, ref, p);
        CHECK(out.width == 13);
        CHECK(out.height == 10);
    }

    SUBCASE("deterministic across runs") {
        LdrImage a = random_ldr(12, 12, -2.0, rng);
        LdrImage ref = random_ldr(12, 12, 0.0, rng);
        CHECK(images_equal(fuse_pair(a, ref, p), fuse_pair(a, ref, p)));
    }

    SUBCASE("mismatched dims are rejected") {
        LdrImage a = random_ldr(16, 16, -2.0, rng);
        LdrImage ref = random_ldr(8, 8, 0.0, rng);
        CHECK_THROWS_AS(fuse_pair(a, ref, p), Error);
    }
}

TEST_CASE("single-input fusion returns the clamped lift") {
    const ParamSet p = init_params(tiny_config(), 74);
    Pcg32 rng(74);
    // Underexposed capture: the lift multiplies by 1/t = 4, so bright codes
    // land above 1 and must be clamped.
    LdrImage img = random_ldr(16, 16, -2.0, rng);
    img.data[0] = 1.0f;
    img.data[1] = 0.99f;

    FusionTrace trace;
    HdrImage out = fuse_sequence(std::vector<LdrImage>{img}, p, &trace);
    CHECK(trace.pair_fusions() == 0);

    const HdrImage lifted = ldr_to_hdr(img, 2.2);
    bool any_clamped = false;
    bool all_match = true;
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        const float expect = std::min(1.0f, lifted.data[i]);
        all_match = all_match && out.data[i] == expect;
        any_clamped = any_clamped || lifted.data[i] > 1.0f;
    }
    CHECK(all_match);
    CHECK(any_clamped);
}

TEST_CASE("two-input fusion fuses the darker image into the brighter reference") {
    const ParamSet p = init_params(tiny_config(), 75);
    Pcg32 rng(75);
    LdrImage dark = random_ldr(16, 16, -2.0, rng);
    LdrImage bright = random_ldr(16, 16, 0.0, rng);

    FusionTrace trace;
    HdrImage seq = fuse_sequence({bright, dark}, p, &trace);
    CHECK(trace.pair_fusions() == 1);
    CHECK(images_equal(seq, fuse_pair(dark, bright, p)));
}

TEST_CASE("three-input fusion follows the darker-first chain bit-exactly") {
    const ParamSet p = init_params(tiny_config(), 76);
    SynthScene scene = synth_scene(76, 32, 3);
    const LdrImage& under = scene.ldr_stack[0];
    const LdrImage& mid = scene.ldr_stack[1];
    const LdrImage& over = scene.ldr_stack[2];

    FusionTrace trace;
    HdrImage seq = fuse_sequence(scene.ldr_stack, p, &trace);

    REQUIRE(trace.pair_fusions() == 2);
    CHECK(trace.steps[0].input_ev == -2.0);
    CHECK(!trace.steps[0].ref_is_intermediate);
    CHECK(trace.steps[1].input_ev == 2.0);
    CHECK(trace.steps[1].ref_is_intermediate);

    // Manual chain: fuse (EV-2, EV0), re-enter as the new reference, fuse EV+2.
    HdrImage first = fuse_pair(under, mid, p);
    HdrImage manual = fuse_pair(over, to_pseudo_ldr(first), p);
    CHECK(images_equal(seq, manual));
}

TEST_CASE("N-input fusion runs exactly N-1 pair fusions in EV order") {
    const ParamSet p = init_params(tiny_config(), 77);
    Pcg32 rng(77);
    std::vector<LdrImage> inputs;
    for (double ev : {3.0, -1.0, 0.0, -3.0, 1.0}) inputs.push_back(random_ldr(8, 8, ev, rng));

    FusionTrace trace;
    fuse_sequence(inputs, p, &trace);
    REQUIRE(trace.pair_fusions() == 4);
    // Reference is EV 0; below-reference ascending, then above ascending.
    CHECK(trace.steps[0].input_ev == -3.0);
    CHECK(trace.steps[1].input_ev == -1.0);
    CHECK(trace.steps[2].input_ev == 1.0);
    CHECK(trace.steps[3].input_ev == 3.0);
}

TEST_CASE("fusion jobs validate their inputs") {
    FusionJob job;
    job.params_path = "p.bin";
    job.output_path = "o.pfm";
    CHECK_THROWS_AS(validate(job), Error);  // no inputs

    job.inputs = {{"a.png", 0.0}, {"a.png", 1.0}};
    CHECK_THROWS_AS(validate(job), Error);  // duplicate path

    job.inputs = {{"a.png", 0.0}, {"b.png", std::nan("")}};
    CHECK_THROWS_AS(validate(job), Error);  // non-finite EV

    job.inputs = {{"a.png", 0.0}, {"b.png", 2.0}};
    CHECK_NOTHROW(validate(job));
}

TEST_CASE("stack assembly in the pipeline matches its parts") {
    Pcg32 rng(78);
    LdrImage img = random_ldr(16, 16, -2.0, rng);
    InputStack stack = build_stack(img);
    validate(stack);
    CHECK(stack.ev == -2.0);

    const std::size_t plane = 16 * 16;
    const HdrImage lifted = ldr_to_hdr(img, 2.2);
    CHECK(stack.data.v[3 * plane] == doctest::Approx(lifted.data[0]).epsilon(1e-12));
}
