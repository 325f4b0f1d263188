#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "hst/error.hpp"
#include "hst/image_io.hpp"
#include "hst/loss.hpp"
#include "hst/pipeline.hpp"
#include "hst/structure_tensor.hpp"
#include "hst/verification.hpp"

namespace {

// "--in path:ev" with the EV optionally coming from a JSON sidecar.
std::pair<std::string, double> parse_input_spec(const std::string& spec) {
    const std::size_t colon = spec.rfind(':');
    if (colon != std::string::npos && colon + 1 < spec.size()) {
        try {
            std::size_t used = 0;
            const double ev = std::stod(spec.substr(colon + 1), &used);
            if (used == spec.size() - colon - 1) return {spec.substr(0, colon), ev};
        } catch (...) {
            // fall through to the sidecar path
        }
    }
    const auto ev = hst::read_ev_sidecar(spec);
    if (!ev)
        hst::fail(hst::errc::invalid_argument,
                  "no EV given for " + spec + " (use path:ev or a " + spec + ".json sidecar)");
    return {spec, *ev};
}

int run_fuse(const std::vector<std::string>& specs, const std::string& params_path,
             const std::string& out_path, const std::string& tonemapped_path) {
    hst::FusionJob job;
    for (const std::string& spec : specs) job.inputs.push_back(parse_input_spec(spec));
    job.params_path = params_path;
    job.output_path = out_path;
    job.tonemapped_path = tonemapped_path;
    hst::validate(job);

    const hst::ParamSet params = hst::load_params(params_path);
    const hst::HdrImage fused = hst::fuse_sequence(job, params);
    hst::save_hdr(fused, out_path);
    if (!tonemapped_path.empty()) {
        const hst::HdrImage tm = hst::tonemap_mu(fused);
        hst::save_png(hst::to_planar(tm), tonemapped_path, 8);
    }
    std::printf("inputs=%zu output=%s\n", job.inputs.size(), out_path.c_str());
    return 0;
}

int run_st_map(const std::string& in_path, const std::string& out_path) {
    const hst::LdrImage img = hst::load_ldr(in_path, 0.0);  // EV irrelevant for the map
    const hst::Tensor map = hst::st_response_map(hst::luminance(hst::to_planar(img)));
    hst::save_png(map, out_path, 8);
    std::printf("output=%s\n", out_path.c_str());
    return 0;
}

int run_tonemap(const std::string& in_path, const std::string& out_path, double mu) {
    const hst::HdrImage img = hst::load_hdr(in_path);
    hst::TonemapConfig cfg;
    cfg.mu = mu;
    hst::validate(cfg);
    hst::save_png(hst::to_planar(hst::tonemap_mu(img, cfg)), out_path, 8);
    std::printf("output=%s\n", out_path.c_str());
    return 0;
}

int run_metrics(const std::string& a_path, const std::string& b_path) {
    const hst::HdrImage a = hst::load_hdr(a_path);
    const hst::HdrImage b = hst::load_hdr(b_path);
    std::printf("psnr_l=%.6f\n", hst::psnr_l(a, b));
    std::printf("psnr_mu=%.6f\n", hst::psnr_mu(a, b));
    return 0;
}

int run_gradcheck(std::uint64_t seed, double epsilon, int probes) {
    const hst::SynthScene scene = hst::synth_scene(seed, 32, 3);
    const hst::ParamSet params = hst::init_params(hst::tiny_config(), seed);
    const hst::GradCheckReport r = hst::grad_check(params, scene, epsilon, probes);
    std::printf("max_rel_error=%.6e\n", r.max_rel_error);
    std::printf("worst_param_path=%s\n", r.worst_param_path.c_str());
    std::printf("epsilon=%.6e\n", r.epsilon);
    std::printf("probes=%d\n", r.probes);
    std::printf("skipped=%d\n", r.skipped);
    return 0;
}

int run_train_toy(std::uint64_t seed, int steps, const std::string& out_csv,
                  const std::string& save_params_path) {
    const hst::SynthScene scene = hst::synth_scene(seed, 32, 3);
    hst::TrainOptions opts;
    opts.seed = seed;
    const hst::TrainResult r = hst::train_toy(scene, steps, opts);

    std::ostream* out = &std::cout;
    std::ofstream file;
    if (!out_csv.empty() && out_csv != "-") {
        file.open(out_csv);
        hst::require(static_cast<bool>(file), hst::errc::io_error, "cannot write: " + out_csv);
        out = &file;
    }
    (*out) << "step,loss,mse,st\n";
    char line[160];
    for (const hst::TrainStep& s : r.curve) {
        std::snprintf(line, sizeof(line), "%d,%.9e,%.9e,%.9e\n", s.step, s.total, s.mse, s.st);
        (*out) << line;
    }
    if (!save_params_path.empty()) hst::save_params(r.params, save_params_path);
    return 0;
}

int run_synth(const std::string& out_dir, std::uint64_t seed, int size, int displacement) {
    const hst::SynthScene scene = hst::synth_scene(seed, size, displacement);
    std::filesystem::create_directories(out_dir);
    const char* names[3] = {"ldr_ev_m2.png", "ldr_ev_0.png", "ldr_ev_p2.png"};
    for (int k = 0; k < 3; ++k) {
        const std::string path = out_dir + "/" + names[k];
        hst::save_png(scene.ldr_stack[static_cast<std::size_t>(k)], path, 16);
        hst::write_ev_sidecar(path, scene.ldr_stack[static_cast<std::size_t>(k)].ev);
    }
    hst::save_hdr(scene.gt, out_dir + "/gt.pfm");
    std::printf("output=%s\n", out_dir.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ghost-free HDR fusion toolkit"};
    app.require_subcommand(1);

    // fuse
    auto* fuse = app.add_subcommand("fuse", "fuse LDR exposures into an HDR image");
    std::vector<std::string> fuse_inputs;
    std::string fuse_params, fuse_out, fuse_tm;
    fuse->add_option("--in", fuse_inputs, "input image as path:ev (repeatable)")->required();
    fuse->add_option("--params", fuse_params, "network parameter file")->required();
    fuse->add_option("--out", fuse_out, "output PFM path")->required();
    fuse->add_option("--tonemapped", fuse_tm, "optional tonemapped PNG path");

    // st-map
    auto* stmap = app.add_subcommand("st-map", "structure-tensor response map of an image");
    std::string st_in, st_out;
    stmap->add_option("--in", st_in, "input LDR image")->required();
    stmap->add_option("--out", st_out, "output PNG path")->required();

    // tonemap
    auto* tonemap = app.add_subcommand("tonemap", "mu-law tonemap a PFM to PNG");
    std::string tm_in, tm_out;
    double tm_mu = 5000.0;
    tonemap->add_option("--in", tm_in, "input PFM path")->required();
    tonemap->add_option("--out", tm_out, "output PNG path")->required();
    tonemap->add_option("--mu", tm_mu, "compression constant");

    // metrics
    auto* metrics = app.add_subcommand("metrics", "PSNR metrics between two PFM images");
    std::string m_a, m_b;
    metrics->add_option("--a", m_a, "first PFM")->required();
    metrics->add_option("--b", m_b, "second PFM")->required();

    // gradcheck
    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient audit");
    std::uint64_t gc_seed = 42;
    double gc_eps = 1e-3;
    int gc_probes = 200;
    gradcheck->add_option("--seed", gc_seed, "scene and parameter seed");
    gradcheck->add_option("--epsilon", gc_eps, "finite-difference step");
    gradcheck->add_option("--probes", gc_probes, "sampled parameter count");

    // train-toy
    auto* train = app.add_subcommand("train-toy", "overfit the tiny model on one scene");
    std::uint64_t tr_seed = 42;
    int tr_steps = 500;
    std::string tr_out = "-", tr_save;
    train->add_option("--seed", tr_seed, "scene and init seed");
    train->add_option("--steps", tr_steps, "optimizer steps");
    train->add_option("--out", tr_out, "loss curve CSV path ('-' for stdout)");
    train->add_option("--save-params", tr_save, "write trained parameters here");

    // synth
    auto* synth = app.add_subcommand("synth", "write a synthetic three-exposure scene");
    std::string sy_out;
    std::uint64_t sy_seed = 42;
    int sy_size = 64, sy_disp = 6;
    synth->add_option("--out", sy_out, "output directory")->required();
    synth->add_option("--seed", sy_seed, "scene seed");
    synth->add_option("--size", sy_size, "square image size (multiple of 8, at least 32)");
    synth->add_option("--displacement", sy_disp, "object motion in pixels per exposure");

    CLI11_PARSE(app, argc, argv);

    try {
        if (fuse->parsed()) return run_fuse(fuse_inputs, fuse_params, fuse_out, fuse_tm);
        if (stmap->parsed()) return run_st_map(st_in, st_out);
        if (tonemap->parsed()) return run_tonemap(tm_in, tm_out, tm_mu);
        if (metrics->parsed()) return run_metrics(m_a, m_b);
        if (gradcheck->parsed()) return run_gradcheck(gc_seed, gc_eps, gc_probes);
        if (train->parsed()) return run_train_toy(tr_seed, tr_steps, tr_out, tr_save);
        if (synth->parsed()) return run_synth(sy_out, sy_seed, sy_size, sy_disp);
    } catch (const hst::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: internal: %s\n", e.what());
        return 2;
    }
    return 0;
}
