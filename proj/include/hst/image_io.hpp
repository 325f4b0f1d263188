#pragma once

#include <optional>
#include <string>

#include "hst/image.hpp"
#include "hst/tensor.hpp"

namespace hst {

// Inputs: 8/16-bit RGB PNG or binary PPM (P6, maxval 255 or 65535).
// Integer codes map to [0,1] by division with 2^bits - 1.
LdrImage load_ldr(const std::string& path, double ev);

// PFM, color "PF", negative scale (little-endian floats), rows stored
// bottom-to-top. Save/load round-trips samples bit-exactly.
void save_hdr(const HdrImage& img, const std::string& path);
HdrImage load_hdr(const std::string& path);

// 8- or 16-bit PNG. Samples are clamped to [0,1] and quantized by rounding.
void save_png(const Tensor& rgb_or_gray, const std::string& path, int bit_depth = 8);
void save_png(const LdrImage& img, const std::string& path, int bit_depth = 16);

// `<path>.json` holding {"ev": <number>}.
std::optional<double> read_ev_sidecar(const std::string& image_path);
void write_ev_sidecar(const std::string& image_path, double ev);

}  // namespace hst
