#include "hst/image_io.hpp"

#include <png.h>

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <vector>

#include <json.hpp>

namespace hst {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::string& path, const char* mode, const char* missing_code) {
    FilePtr fp(std::fopen(path.c_str(), mode));
    require(fp != nullptr, missing_code, "cannot open: " + path);
    return fp;
}

// ---- PNG ----

struct PngReader {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngReader() {
        if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    }
};

struct PngWriter {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngWriter() {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    }
};

LdrImage load_png_ldr(const std::string& path, double ev) {
    FilePtr fp = open_file(path, "rb", errc::missing_file);

    unsigned char sig[8];
    require(std::fread(sig, 1, 8, fp.get()) == 8 && png_sig_cmp(sig, 0, 8) == 0,
            errc::corrupt_header, "not a PNG file: " + path);

    PngReader r;
    r.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    require(r.png != nullptr, errc::io_error, "png read struct");
    r.info = png_create_info_struct(r.png);
    require(r.info != nullptr, errc::io_error, "png info struct");
    if (setjmp(png_jmpbuf(r.png))) fail(errc::corrupt_header, "corrupt PNG: " + path);

    png_init_io(r.png, fp.get());
    png_set_sig_bytes(r.png, 8);
    png_read_info(r.png, r.info);

    const int width = static_cast<int>(png_get_image_width(r.png, r.info));
    const int height = static_cast<int>(png_get_image_height(r.png, r.info));
    const int bit_depth = png_get_bit_depth(r.png, r.info);
    const int color_type = png_get_color_type(r.png, r.info);

    require(color_type == PNG_COLOR_TYPE_RGB, errc::unsupported_channels,
            "PNG must be 3-channel RGB: " + path);
    require(bit_depth == 8 || bit_depth == 16, errc::unsupported_bitdepth,
            "PNG must be 8- or 16-bit: " + path);

    png_set_interlace_handling(r.png);
    png_read_update_info(r.png, r.info);

    const std::size_t rowbytes = png_get_rowbytes(r.png, r.info);
    std::vector<unsigned char> raw(rowbytes * static_cast<std::size_t>(height));
    std::vector<png_bytep> rows(static_cast<std::size_t>(height));
    for (int y = 0; y < height; ++y) rows[static_cast<std::size_t>(y)] = raw.data() + rowbytes * y;
    png_read_image(r.png, rows.data());
    png_read_end(r.png, nullptr);

    LdrImage img;
    img.width = width;
    img.height = height;
    img.ev = ev;
    img.data.resize(static_cast<std::size_t>(width) * height * 3);
    const double denom = bit_depth == 8 ? 255.0 : 65535.0;
    for (int y = 0; y < height; ++y) {
        const unsigned char* row = rows[static_cast<std::size_t>(y)];
        for (int x = 0; x < width * 3; ++x) {
            unsigned code;
            if (bit_depth == 8)
                code = row[x];
            else
                code = (static_cast<unsigned>(row[2 * x]) << 8) | row[2 * x + 1];  // PNG is big-endian
            img.data[(static_cast<std::size_t>(y) * width * 3) + x] =
                static_cast<float>(code / denom);
        }
    }
    validate(img);
    return img;
}

// ---- PPM ----

int ppm_token(std::FILE* fp, std::string* tok) {
    tok->clear();
    int c;
    for (;;) {
        c = std::fgetc(fp);
        if (c == '#') {
            while (c != EOF && c != '\n') c = std::fgetc(fp);
        } else if (c == EOF || !std::isspace(c)) {
            break;
        }
    }
    while (c != EOF && !std::isspace(c)) {
        tok->push_back(static_cast<char>(c));
        c = std::fgetc(fp);
    }
    return tok->empty() ? EOF : 0;
}

long parse_dim(const std::string& tok) {
    std::size_t pos = 0;
    long v = -1;
    try {
        v = std::stol(tok, &pos);
    } catch (...) {
        fail(errc::corrupt_header, "bad PPM header token: " + tok);
    }
    require(pos == tok.size() && v > 0, errc::corrupt_header, "bad PPM header token: " + tok);
    return v;
}

LdrImage load_ppm_ldr(const std::string& path, double ev) {
    FilePtr fp = open_file(path, "rb", errc::missing_file);
    char magic[2];
    require(std::fread(magic, 1, 2, fp.get()) == 2 && magic[0] == 'P' && magic[1] == '6',
            errc::corrupt_header, "not a binary PPM: " + path);

    std::string tok;
    require(ppm_token(fp.get(), &tok) == 0, errc::corrupt_header, "truncated PPM header");
    const long width = parse_dim(tok);
    require(ppm_token(fp.get(), &tok) == 0, errc::corrupt_header, "truncated PPM header");
    const long height = parse_dim(tok);
    require(ppm_token(fp.get(), &tok) == 0, errc::corrupt_header, "truncated PPM header");
    const long maxval = parse_dim(tok);
    require(maxval == 255 || maxval == 65535, errc::unsupported_bitdepth,
            "PPM maxval must be 255 or 65535: " + path);

    const int bytes = maxval == 255 ? 1 : 2;
    const std::size_t n = static_cast<std::size_t>(width) * height * 3;
    std::vector<unsigned char> raw(n * static_cast<std::size_t>(bytes));
    require(std::fread(raw.data(), 1, raw.size(), fp.get()) == raw.size(),
            errc::corrupt_header, "truncated PPM data: " + path);

    LdrImage img;
    img.width = static_cast<int>(width);
    img.height = static_cast<int>(height);
    img.ev = ev;
    img.data.resize(n);
    const double denom = static_cast<double>(maxval);
    for (std::size_t i = 0; i < n; ++i) {
        unsigned code = bytes == 1
                            ? raw[i]
                            : ((static_cast<unsigned>(raw[2 * i]) << 8) | raw[2 * i + 1]);
        img.data[i] = static_cast<float>(code / denom);
    }
    validate(img);
    return img;
}

}  // namespace

LdrImage load_ldr(const std::string& path, double ev) {
    require(std::isfinite(ev), errc::invalid_argument, "EV must be finite");
    FilePtr probe(std::fopen(path.c_str(), "rb"));
    require(probe != nullptr, errc::missing_file, "cannot open: " + path);
    unsigned char head[2] = {0, 0};
    const std::size_t got = std::fread(head, 1, 2, probe.get());
    probe.reset();
    require(got == 2, errc::corrupt_header, "file too short: " + path);

    if (head[0] == 0x89 && head[1] == 'P') return load_png_ldr(path, ev);
    if (head[0] == 'P' && head[1] == '6') return load_ppm_ldr(path, ev);
    fail(errc::unsupported_format, "expected PNG or binary PPM: " + path);
}

// ---- PFM ----

void save_hdr(const HdrImage& img, const std::string& path) {
    validate(img);
    FilePtr fp = open_file(path, "wb", errc::io_error);
    std::fprintf(fp.get(), "PF\n%d %d\n-1.0\n", img.width, img.height);
    // Bottom-to-top rows, little-endian 32-bit floats.
    std::vector<float> row(static_cast<std::size_t>(img.width) * 3);
    for (int y = img.height - 1; y >= 0; --y) {
        const float* src = &img.data[static_cast<std::size_t>(y) * img.width * 3];
        std::memcpy(row.data(), src, row.size() * sizeof(float));
        const std::size_t wrote = std::fwrite(row.data(), sizeof(float), row.size(), fp.get());
        require(wrote == row.size(), errc::io_error, "short write: " + path);
    }
    require(std::fflush(fp.get()) == 0, errc::io_error, "flush failed: " + path);
}

HdrImage load_hdr(const std::string& path) {
    FilePtr fp = open_file(path, "rb", errc::missing_file);
    char m0 = 0, m1 = 0;
    require(std::fread(&m0, 1, 1, fp.get()) == 1 && std::fread(&m1, 1, 1, fp.get()) == 1,
            errc::corrupt_header, "file too short: " + path);
    if (m0 == 'P' && m1 == 'f')
        fail(errc::unsupported_channels, "grayscale PFM not supported: " + path);
    require(m0 == 'P' && m1 == 'F', errc::corrupt_header, "not a color PFM: " + path);

    std::string tok;
    require(ppm_token(fp.get(), &tok) == 0, errc::corrupt_header, "truncated PFM header");
    const long width = parse_dim(tok);
    require(ppm_token(fp.get(), &tok) == 0, errc::corrupt_header, "truncated PFM header");
    const long height = parse_dim(tok);
    require(ppm_token(fp.get(), &tok) == 0, errc::corrupt_header, "truncated PFM header");
    double scale = 0.0;
    try {
        scale = std::stod(tok);
    } catch (...) {
        fail(errc::corrupt_header, "bad PFM scale: " + tok);
    }
    require(scale != 0.0, errc::corrupt_header, "PFM scale must be nonzero");
    const bool little_endian = scale < 0.0;

    HdrImage img;
    img.width = static_cast<int>(width);
    img.height = static_cast<int>(height);
    img.data.resize(static_cast<std::size_t>(width) * height * 3);
    std::vector<unsigned char> raw(static_cast<std::size_t>(width) * 3 * 4);
    for (long y = height - 1; y >= 0; --y) {
        require(std::fread(raw.data(), 1, raw.size(), fp.get()) == raw.size(),
                errc::corrupt_header, "truncated PFM data: " + path);
        float* dst = &img.data[static_cast<std::size_t>(y) * width * 3];
        for (std::size_t i = 0; i < static_cast<std::size_t>(width) * 3; ++i) {
            unsigned char b[4];
            if (little_endian) {
                std::memcpy(b, &raw[4 * i], 4);
            } else {
                b[0] = raw[4 * i + 3];
                b[1] = raw[4 * i + 2];
                b[2] = raw[4 * i + 1];
                b[3] = raw[4 * i];
            }
            std::memcpy(&dst[i], b, 4);
        }
    }
    for (float s : img.data) {
        require(!std::isnan(s), errc::invalid_sample, "NaN sample in PFM: " + path);
        require(std::isfinite(s) && s >= 0.0f, errc::invalid_sample,
                "PFM sample must be finite and non-negative: " + path);
    }
    return img;
}

// ---- PNG output ----

namespace {

void write_png_rows(const std::string& path, int width, int height, int channels,
                    int bit_depth, const std::vector<unsigned char>& raw) {
    FilePtr fp = open_file(path, "wb", errc::io_error);
    PngWriter w;
    w.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    require(w.png != nullptr, errc::io_error, "png write struct");
    w.info = png_create_info_struct(w.png);
    require(w.info != nullptr, errc::io_error, "png info struct");
    if (setjmp(png_jmpbuf(w.png))) fail(errc::io_error, "PNG write failed: " + path);

    png_init_io(w.png, fp.get());
    png_set_IHDR(w.png, w.info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height),
                 bit_depth, channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(w.png, w.info);

    const std::size_t rowbytes = static_cast<std::size_t>(width) * channels * (bit_depth / 8);
    std::vector<png_bytep> rows(static_cast<std::size_t>(height));
    for (int y = 0; y < height; ++y)
        rows[static_cast<std::size_t>(y)] = const_cast<unsigned char*>(raw.data()) + rowbytes * y;
    png_write_image(w.png, rows.data());
    png_write_end(w.png, nullptr);
}

unsigned quantize(double v, unsigned maxcode) {
    if (v < 0.0) v = 0.0;
    if (v > 1.0) v = 1.0;
    return static_cast<unsigned>(std::lround(v * maxcode));
}

}  // namespace

void save_png(const Tensor& img, const std::string& path, int bit_depth) {
    require(bit_depth == 8 || bit_depth == 16, errc::unsupported_bitdepth, "PNG bit depth");
    int channels, height, width;
    if (img.rank() == 2) {
        channels = 1;
        height = img.dim(0);
        width = img.dim(1);
    } else {
        require(img.rank() == 3 && (img.dim(0) == 1 || img.dim(0) == 3),
                errc::unsupported_channels, "PNG output must be 1- or 3-channel");
        channels = img.dim(0);
        height = img.dim(1);
        width = img.dim(2);
    }
    const unsigned maxcode = bit_depth == 8 ? 255u : 65535u;
    const std::size_t plane = static_cast<std::size_t>(height) * width;
    std::vector<unsigned char> raw(plane * channels * (bit_depth / 8));
    std::size_t o = 0;
    for (std::size_t i = 0; i < plane; ++i) {
        for (int c = 0; c < channels; ++c) {
            const unsigned code = quantize(img.v[c * plane + i], maxcode);
            if (bit_depth == 8) {
                raw[o++] = static_cast<unsigned char>(code);
            } else {
                raw[o++] = static_cast<unsigned char>(code >> 8);
                raw[o++] = static_cast<unsigned char>(code & 0xff);
            }
        }
    }
    write_png_rows(path, width, height, channels, bit_depth, raw);
}

void save_png(const LdrImage& img, const std::string& path, int bit_depth) {
    save_png(to_planar(img), path, bit_depth);
}

// ---- EV sidecar ----

std::optional<double> read_ev_sidecar(const std::string& image_path) {
    const std::string side = image_path + ".json";
    std::ifstream in(side);
    if (!in) return std::nullopt;
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception&) {
        fail(errc::corrupt_header, "bad sidecar JSON: " + side);
    }
    require(j.is_object() && j.contains("ev") && j["ev"].is_number(), errc::corrupt_header,
            "sidecar must be {\"ev\": <number>}: " + side);
    return j["ev"].get<double>();
}

void write_ev_sidecar(const std::string& image_path, double ev) {
    const std::string side = image_path + ".json";
    std::ofstream out(side);
    require(static_cast<bool>(out), errc::io_error, "cannot write sidecar: " + side);
    nlohmann::json j;
    j["ev"] = ev;
    out << j.dump() << "\n";
}

}  // namespace hst
