#include <doctest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "hst/image_io.hpp"
#include "hst/loss.hpp"

namespace fs = std::filesystem;

namespace {

struct RunResult {
    int status = -1;
    std::string out;
};

RunResult run_cli(const std::string& args) {
    const std::string cmd = std::string(HST_CLI_PATH) + " " + args + " 2>&1";
    std::array<char, 512> buf{};
    RunResult r;
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    while (fgets(buf.data(), buf.size(), pipe)) r.out += buf.data();
    const int rc = pclose(pipe);
    r.status = WEXITSTATUS(rc);
    return r;
}

fs::path work_dir() {
    static fs::path dir = [] {
        fs::path d = fs::temp_directory_path() / "hst_cli_tests";
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

std::string wd(const std::string& name) { return (work_dir() / name).string(); }

}  // namespace

TEST_CASE("synth, train-toy, fuse, tonemap, metrics chain end to end") {
    const std::string scene_dir = wd("scene");
    RunResult r = run_cli("synth --out " + scene_dir + " --seed 7 --size 32 --displacement 3");
    CHECK(r.status == 0);
    CHECK(fs::exists(scene_dir + "/ldr_ev_m2.png"));
    CHECK(fs::exists(scene_dir + "/ldr_ev_0.png.json"));
    CHECK(fs::exists(scene_dir + "/gt.pfm"));

    // Very short run: the chain, not convergence, is under test here.
    r = run_cli("train-toy --seed 7 --steps 3 --out " + wd("curve.csv") +
                " --save-params " + wd("toy.bin"));
    CHECK(r.status == 0);
    std::ifstream csv(wd("curve.csv"));
    std::string header;
    std::getline(csv, header);
    CHECK(header == "step,loss,mse,st");
    int rows = 0;
    for (std::string line; std::getline(csv, line);)
        if (!line.empty()) ++rows;
    CHECK(rows == 4);

    r = run_cli("fuse --in " + scene_dir + "/ldr_ev_m2.png:-2 --in " + scene_dir +
                "/ldr_ev_0.png:0 --in " + scene_dir + "/ldr_ev_p2.png:2 --params " +
                wd("toy.bin") + " --out " + wd("fused.pfm") + " --tonemapped " + wd("fused.png"));
    CHECK(r.status == 0);
    CHECK(fs::exists(wd("fused.pfm")));
    CHECK(fs::exists(wd("fused.png")));

    const hst::HdrImage fused = hst::load_hdr(wd("fused.pfm"));
    CHECK(fused.width == 32);
    CHECK(fused.height == 32);

    r = run_cli("tonemap --in " + wd("fused.pfm") + " --out " + wd("tm.png") + " --mu 5000");
    CHECK(r.status == 0);

    r = run_cli("metrics --a " + wd("fused.pfm") + " --b " + scene_dir + "/gt.pfm");
    CHECK(r.status == 0);
    CHECK(r.out.find("psnr_l=") != std::string::npos);
    CHECK(r.out.find("psnr_mu=") != std::string::npos);
}

TEST_CASE("fuse reads EV from sidecars when the spec has no suffix") {
    const std::string scene_dir = wd("scene_side");
    REQUIRE(run_cli("synth --out " + scene_dir + " --seed 9 --size 32 --displacement 2").status == 0);
    REQUIRE(run_cli("train-toy --seed 9 --steps 1 --out " + wd("c2.csv") + " --save-params " +
                    wd("toy2.bin")).status == 0);

    RunResult r = run_cli("fuse --in " + scene_dir + "/ldr_ev_m2.png --in " + scene_dir +
                          "/ldr_ev_0.png --params " + wd("toy2.bin") + " --out " +
                          wd("fused2.pfm"));
    CHECK(r.status == 0);
    CHECK(fs::exists(wd("fused2.pfm")));
}

TEST_CASE("st-map produces a grayscale PNG") {
    const std::string scene_dir = wd("scene_st");
    REQUIRE(run_cli("synth --out " + scene_dir + " --seed 5 --size 32 --displacement 2").status == 0);
    RunResult r = run_cli("st-map --in " + scene_dir + "/ldr_ev_0.png --out " + wd("map.png"));
    CHECK(r.status == 0);
    CHECK(fs::exists(wd("map.png")));
}

TEST_CASE("gradcheck emits key=value lines") {
    RunResult r = run_cli("gradcheck --seed 3 --probes 10 --epsilon 1e-3");
    CHECK(r.status == 0);
    CHECK(r.out.find("max_rel_error=") != std::string::npos);
    CHECK(r.out.find("worst_param_path=") != std::string::npos);
    CHECK(r.out.find("epsilon=") != std::string::npos);
}

TEST_CASE("failures exit nonzero with a one-line error") {
    RunResult r = run_cli("metrics --a " + wd("missing_a.pfm") + " --b " + wd("missing_b.pfm"));
    CHECK(r.status == 1);
    CHECK(r.out.rfind("error: ", 0) == 0);
    CHECK(r.out.find("missing_file") != std::string::npos);

    // Missing EV (no suffix, no sidecar) is a usage error, not a crash.
    {
        std::ofstream ppm(wd("noev.ppm"), std::ios::binary);
        ppm << "P6\n8 8\n255\n";
        for (int i = 0; i < 8 * 8 * 3; ++i) ppm.put('\0');
    }
    r = run_cli("fuse --in " + wd("noev.ppm") + " --params x --out y.pfm");
    CHECK(r.status == 1);
    CHECK(r.out.find("error: invalid_argument") != std::string::npos);

    r = run_cli("synth --out " + wd("bad") + " --size 20");
    CHECK(r.status == 1);
    CHECK(r.out.rfind("error: ", 0) == 0);
}
