#include <doctest.h>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "hst/error.hpp"
#include "hst/image_io.hpp"
#include "hst/rng.hpp"

using namespace hst;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    static fs::path dir = [] {
        fs::path d = fs::temp_directory_path() / "hst_io_tests";
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

std::string tmp(const std::string& name) { return (temp_dir() / name).string(); }

HdrImage random_hdr(int w, int h, Pcg32& rng) {
    HdrImage img;
    img.width = w;
    img.height = h;
    img.data.resize(static_cast<std::size_t>(w) * h * 3);
    for (float& s : img.data) s = static_cast<float>(rng.uniform() * 8.0);
    return img;
}

// Any finite non-negative float, including denormals and exact zero.
HdrImage random_hdr_bitpattern(int w, int h, Pcg32& rng) {
    HdrImage img;
    img.width = w;
    img.height = h;
    img.data.resize(static_cast<std::size_t>(w) * h * 3);
    for (float& s : img.data) {
        for (;;) {
            std::uint32_t bits = rng.next_u32() & 0x7fffffffu;  // clear sign
            float f;
            std::memcpy(&f, &bits, 4);
            if (std::isfinite(f)) {
                s = f;
                break;
            }
        }
    }
    return img;
}

void write_ppm(const std::string& path, int w, int h, int maxval,
               const std::vector<unsigned>& codes) {
    std::ofstream out(path, std::ios::binary);
    out << "P6\n# test data\n" << w << " " << h << "\n" << maxval << "\n";
    for (unsigned c : codes) {
        if (maxval > 255) out.put(static_cast<char>(c >> 8));
        out.put(static_cast<char>(c & 0xff));
    }
}

}  // namespace

TEST_CASE("PPM codes map to [0,1] by division with the max code") {
    std::vector<unsigned> codes(8 * 8 * 3, 0);
    codes[0] = 255;
    codes[1] = 0;
    codes[2] = 128;
    write_ppm(tmp("codes.ppm"), 8, 8, 255, codes);
    LdrImage img = load_ldr(tmp("codes.ppm"), 0.0);
    CHECK(img.data[0] == 1.0f);
    CHECK(img.data[1] == 0.0f);
    CHECK(img.data[2] == static_cast<float>(128.0 / 255.0));
    CHECK(img.ev == 0.0);
    CHECK(img.t() == 1.0);
}

TEST_CASE("16-bit PPM uses the 16-bit denominator") {
    std::vector<unsigned> codes(8 * 8 * 3, 65535);
    codes[1] = 32768;
    write_ppm(tmp("codes16.ppm"), 8, 8, 65535, codes);
    LdrImage img = load_ldr(tmp("codes16.ppm"), -2.0);
    CHECK(img.data[0] == 1.0f);
    CHECK(img.data[1] == static_cast<float>(32768.0 / 65535.0));
    CHECK(img.t() == doctest::Approx(0.25));
}

TEST_CASE("LDR load errors carry distinct codes") {
    auto code_of = [](auto&& fn) -> std::string {
        try {
            fn();
        } catch (const Error& e) {
            return e.code();
        }
        return "";
    };

    CHECK(code_of([] { load_ldr(tmp("nope.png"), 0.0); }) == errc::missing_file);

    std::ofstream(tmp("garbage.bin"), std::ios::binary) << "XYZW garbage";
    CHECK(code_of([] { load_ldr(tmp("garbage.bin"), 0.0); }) == errc::unsupported_format);

    std::ofstream(tmp("trunc.ppm"), std::ios::binary) << "P6\n8 8\n255\nshort";
    CHECK(code_of([] { load_ldr(tmp("trunc.ppm"), 0.0); }) == errc::corrupt_header);

    std::vector<unsigned> codes(8 * 8 * 3, 10);
    write_ppm(tmp("maxval.ppm"), 8, 8, 1023, codes);
    CHECK(code_of([] { load_ldr(tmp("maxval.ppm"), 0.0); }) == errc::unsupported_bitdepth);

    write_ppm(tmp("small.ppm"), 4, 4, 255, std::vector<unsigned>(4 * 4 * 3, 0));
    CHECK(code_of([] { load_ldr(tmp("small.ppm"), 0.0); }) == errc::image_too_small);
}

TEST_CASE("PFM round trip is bit-exact") {
    Pcg32 rng(21);

    SUBCASE("single gray pixel") {
        HdrImage img;
        img.width = 1;
        img.height = 1;
        img.data = {0.5f, 0.5f, 0.5f};
        save_hdr(img, tmp("one.pfm"));
        HdrImage back = load_hdr(tmp("one.pfm"));
        CHECK(back.data == img.data);
    }

    SUBCASE("2x2 ramp, byte-level comparison") {
        HdrImage img;
        img.width = 2;
        img.height = 2;
        img.data = {0.0f, 0.25f, 0.5f, 0.75f, 1.0f, 1.25f, 1.5f, 1.75f, 2.0f, 2.25f, 2.5f, 2.75f};
        save_hdr(img, tmp("ramp.pfm"));
        HdrImage back = load_hdr(tmp("ramp.pfm"));
        REQUIRE(back.data.size() == img.data.size());
        CHECK(std::memcmp(back.data.data(), img.data.data(), img.data.size() * 4) == 0);
        // Saving the loaded image reproduces the file byte for byte.
        save_hdr(back, tmp("ramp2.pfm"));
        std::ifstream a(tmp("ramp.pfm"), std::ios::binary), b(tmp("ramp2.pfm"), std::ios::binary);
        std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
        std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
        CHECK(sa == sb);
    }

    SUBCASE("zero image") {
        HdrImage img;
        img.width = 3;
        img.height = 2;
        img.data.assign(18, 0.0f);
        save_hdr(img, tmp("zero.pfm"));
        CHECK(load_hdr(tmp("zero.pfm")).data == img.data);
    }

    SUBCASE("random float bit patterns") {
        for (int trial = 0; trial < 20; ++trial) {
            HdrImage img = random_hdr_bitpattern(5, 4, rng);
            save_hdr(img, tmp("bits.pfm"));
            HdrImage back = load_hdr(tmp("bits.pfm"));
            REQUIRE(back.data.size() == img.data.size());
            CHECK(std::memcmp(back.data.data(), img.data.data(), img.data.size() * 4) == 0);
        }
    }
}

TEST_CASE("PFM rejects NaN and malformed headers") {
    Pcg32 rng(3);
    HdrImage img = random_hdr(4, 4, rng);
    save_hdr(img, tmp("nan.pfm"));
    // Patch one sample to NaN on disk.
    {
        std::fstream f(tmp("nan.pfm"), std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(-4, std::ios::end);
        const std::uint32_t nan_bits = 0x7fc00000u;
        f.write(reinterpret_cast<const char*>(&nan_bits), 4);
    }
    CHECK_THROWS_AS(load_hdr(tmp("nan.pfm")), Error);

    std::ofstream(tmp("badmagic.pfm"), std::ios::binary) << "PX\n2 2\n-1.0\n";
    CHECK_THROWS_AS(load_hdr(tmp("badmagic.pfm")), Error);

    std::ofstream(tmp("baddims.pfm"), std::ios::binary) << "PF\n-3 2\n-1.0\n";
    CHECK_THROWS_AS(load_hdr(tmp("baddims.pfm")), Error);
}

TEST_CASE("PNG write/read preserves quantized codes at both depths") {
    LdrImage img;
    img.width = 8;
    img.height = 8;
    img.ev = 1.0;
    img.data.resize(8 * 8 * 3);
    Pcg32 rng(5);
    for (float& s : img.data) s = static_cast<float>(rng.uniform());

    for (int depth : {8, 16}) {
        const std::string path = tmp("rt" + std::to_string(depth) + ".png");
        save_png(img, path, depth);
        LdrImage back = load_ldr(path, 1.0);
        REQUIRE(back.width == img.width);
        REQUIRE(back.height == img.height);
        const double denom = depth == 8 ? 255.0 : 65535.0;
        bool ok = true;
        for (std::size_t i = 0; i < img.data.size(); ++i)
            ok = ok && back.data[i] >= 0.0f && back.data[i] <= 1.0f &&
                 std::abs(back.data[i] - img.data[i]) <= 0.5 / denom + 1e-7;
        CHECK(ok);
    }
}

TEST_CASE("EV sidecar round trip and absence") {
    const std::string img_path = tmp("withside.png");
    write_ev_sidecar(img_path, -2.0);
    auto ev = read_ev_sidecar(img_path);
    REQUIRE(ev.has_value());
    CHECK(*ev == -2.0);
    CHECK(!read_ev_sidecar(tmp("nosidecar.png")).has_value());

    std::ofstream(img_path + ".json") << "{\"exposure\": 1}";
    CHECK_THROWS_AS(read_ev_sidecar(img_path), Error);
}
