#include "pointseg/io.hpp"

#include <png.h>

#include <csetjmp>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>

#include <json.hpp>

namespace pointseg {

using nlohmann::json;

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::string& path, const char* mode) {
    FilePtr f(std::fopen(path.c_str(), mode));
    if (!f) throw Error("cannot open " + path);
    return f;
}

thread_local std::string png_error_message;

void png_fail(png_structp png, png_const_charp msg) {
    png_error_message = msg ? msg : "unknown error";
    png_longjmp(png, 1);
}

void png_warn(png_structp, png_const_charp) {}

struct RawPng {
    int width = 0;
    int height = 0;
    int channels = 0;
    int bit_depth = 0;
    std::vector<std::uint8_t> bytes;  // row-major, big-endian for 16-bit samples
};

// Writes without timestamps or text chunks so identical inputs give identical files.
void write_png(const std::string& path, int width, int height, int color_type, int bit_depth,
               const std::vector<std::uint8_t>& bytes) {
    FilePtr f = open_file(path, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
    if (!png) throw Error("png: cannot create write struct");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw Error("png: cannot create info struct");
    }
    const int channels = color_type == PNG_COLOR_TYPE_RGB ? 3 : 1;
    const std::size_t stride = static_cast<std::size_t>(width) * channels * (bit_depth / 8);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error(path + ": " + png_error_message);
    }
    {
        png_init_io(png, f.get());
        png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), bit_depth,
                     color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
        png_write_info(png, info);
        for (int r = 0; r < height; ++r) {
            png_write_row(png, const_cast<png_bytep>(bytes.data() + stride * static_cast<std::size_t>(r)));
        }
        png_write_end(png, nullptr);
    }
    png_destroy_write_struct(&png, &info);
}

RawPng read_png(const std::string& path) {
    FilePtr f = open_file(path, "rb");
    png_byte sig[8];
    if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) throw Error(path + ": not a PNG file");
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
    if (!png) throw Error("png: cannot create read struct");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw Error("png: cannot create info struct");
    }
    RawPng raw;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error(path + ": " + png_error_message);
    }
    {
        png_init_io(png, f.get());
        png_set_sig_bytes(png, 8);
        png_read_info(png, info);
        const int color = png_get_color_type(png, info);
        raw.bit_depth = png_get_bit_depth(png, info);
        if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
        if (color == PNG_COLOR_TYPE_GRAY && raw.bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
        if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
        png_read_update_info(png, info);
        raw.width = static_cast<int>(png_get_image_width(png, info));
        raw.height = static_cast<int>(png_get_image_height(png, info));
        raw.channels = png_get_channels(png, info);
        raw.bit_depth = png_get_bit_depth(png, info);
        const std::size_t stride = png_get_rowbytes(png, info);
        raw.bytes.resize(stride * static_cast<std::size_t>(raw.height));
        for (int r = 0; r < raw.height; ++r) png_read_row(png, raw.bytes.data() + stride * static_cast<std::size_t>(r), nullptr);
        png_read_end(png, nullptr);
    }
    png_destroy_read_struct(&png, &info, nullptr);
    return raw;
}

Grid<std::uint16_t> raw_to_gray16(const RawPng& raw, const std::string& path) {
    if (raw.channels != 1) throw Error(path + ": expected a single-channel PNG");
    Grid<std::uint16_t> out(raw.height, raw.width);
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = raw.bit_depth == 16
                     ? static_cast<std::uint16_t>((raw.bytes[2 * i] << 8) | raw.bytes[2 * i + 1])
                     : raw.bytes[i];
    }
    return out;
}

}  // namespace

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    out << text;
}

ImageRGB read_png_rgb(const std::string& path) {
    const RawPng raw = read_png(path);
    if (raw.bit_depth != 8) throw Error(path + ": expected an 8-bit PNG");
    ImageRGB img(raw.height, raw.width);
    for (std::size_t i = 0; i < img.size(); ++i) {
        if (raw.channels == 3) {
            img[i] = {raw.bytes[3 * i], raw.bytes[3 * i + 1], raw.bytes[3 * i + 2]};
        } else if (raw.channels == 1) {
            img[i] = {raw.bytes[i], raw.bytes[i], raw.bytes[i]};
        } else {
            throw Error(path + ": unsupported channel count");
        }
    }
    return img;
}

void write_png_rgb(const std::string& path, const ImageRGB& image) {
    std::vector<std::uint8_t> bytes(image.size() * 3);
    for (std::size_t i = 0; i < image.size(); ++i) {
        bytes[3 * i] = image[i].r;
        bytes[3 * i + 1] = image[i].g;
        bytes[3 * i + 2] = image[i].b;
    }
    write_png(path, image.width(), image.height(), PNG_COLOR_TYPE_RGB, 8, bytes);
}

Grid<std::uint8_t> read_png_gray8(const std::string& path) {
    const RawPng raw = read_png(path);
    if (raw.channels != 1 || raw.bit_depth != 8) throw Error(path + ": expected an 8-bit single-channel PNG");
    Grid<std::uint8_t> out(raw.height, raw.width);
    std::copy(raw.bytes.begin(), raw.bytes.end(), out.begin());
    return out;
}

void write_png_gray8(const std::string& path, const Grid<std::uint8_t>& image) {
    write_png(path, image.width(), image.height(), PNG_COLOR_TYPE_GRAY, 8, image.data());
}

Grid<std::uint16_t> read_png_gray16(const std::string& path) { return raw_to_gray16(read_png(path), path); }

void write_png_gray16(const std::string& path, const Grid<std::uint16_t>& image) {
    std::vector<std::uint8_t> bytes(image.size() * 2);
    for (std::size_t i = 0; i < image.size(); ++i) {
        bytes[2 * i] = static_cast<std::uint8_t>(image[i] >> 8);
        bytes[2 * i + 1] = static_cast<std::uint8_t>(image[i] & 0xff);
    }
    write_png(path, image.width(), image.height(), PNG_COLOR_TYPE_GRAY, 16, bytes);
}

void write_label_map(const std::string& path, const TriStateLabelMap& labels) {
    Grid<std::uint8_t> g(labels.dims());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = static_cast<std::uint8_t>(labels[i]);
    write_png_gray8(path, g);
}

TriStateLabelMap read_label_map(const std::string& path) {
    const Grid<std::uint8_t> g = read_png_gray8(path);
    TriStateLabelMap out(g.dims());
    for (std::size_t i = 0; i < g.size(); ++i) {
        switch (g[i]) {
            case 0: out[i] = Label::Background; break;
            case 1: out[i] = Label::Foreground; break;
            case 255: out[i] = Label::Ignored; break;
            default: throw Error(path + ": invalid label value " + std::to_string(g[i]));
        }
    }
    return out;
}

void write_repel_map(const std::string& path, const RepelMap& map, const RepelParams& params) {
    Grid<std::uint16_t> g(map.dims());
    for (std::size_t i = 0; i < g.size(); ++i) {
        g[i] = static_cast<std::uint16_t>(std::lround(std::clamp(map[i], 0.0, 1.0) * kRepelScale));
    }
    write_png_gray16(path, g);
    const json meta = {{"alpha", params.alpha}, {"r", params.radius}, {"scale", kRepelScale}};
    write_text(path + ".json", meta.dump(2) + "\n");
}

RepelMap read_repel_map(const std::string& path) {
    const Grid<std::uint16_t> g = read_png_gray16(path);
    double scale = kRepelScale;
    std::ifstream sidecar(path + ".json");
    if (sidecar) scale = json::parse(sidecar).value("scale", kRepelScale);
    RepelMap out(g.dims());
    for (std::size_t i = 0; i < g.size(); ++i) out[i] = g[i] / scale;
    return out;
}

void write_instances(const std::string& path, const InstanceMask& instances) {
    Grid<std::uint16_t> g(instances.dims());
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (instances[i] < 0 || instances[i] > 65535) throw Error("instance id out of 16-bit range");
        g[i] = static_cast<std::uint16_t>(instances[i]);
    }
    write_png_gray16(path, g);
}

InstanceMask read_instances(const std::string& path) {
    const Grid<std::uint16_t> g = read_png_gray16(path);
    InstanceMask out(g.dims());
    for (std::size_t i = 0; i < g.size(); ++i) out[i] = g[i];
    return out;
}

std::string points_to_csv(const PointSet& points) {
    std::ostringstream out;
    out << std::setprecision(17);
    for (const Point& p : points) {
        out << p.x << "," << p.y;
        if (p.cls >= 0) out << "," << p.cls;
        out << "\n";
    }
    return out.str();
}

std::string detections_to_csv(const DetectionSet& detections) {
    std::ostringstream out;
    out << "x,y,score\n" << std::setprecision(9);
    for (const Detection& d : detections) out << d.x << "," << d.y << "," << d.score << "\n";
    return out.str();
}

std::string params_to_json(const ModelParams& params) {
    json arch = json::array();
    for (const ConvShape& s : kArchitecture) arch.push_back({s.in, s.out});
    const json j = {{"architecture", arch}, {"values", params.values}};
    return j.dump() + "\n";
}

ModelParams params_from_json(const std::string& text) {
    const json j = json::parse(text);
    json arch = json::array();
    for (const ConvShape& s : kArchitecture) arch.push_back({s.in, s.out});
    if (j.at("architecture") != arch) throw Error("model file architecture does not match");
    ModelParams p;
    const auto values = j.at("values").get<std::vector<float>>();
    if (values.size() != p.values.size()) throw Error("model file has the wrong parameter count");
    p.values = values;
    return p;
}

std::string stats_to_json(const NormStats& stats) {
    const json j = {{"mean", stats.mean}, {"std", stats.std}};
    return j.dump(2) + "\n";
}

NormStats stats_from_json(const std::string& text) {
    const json j = json::parse(text);
    NormStats s;
    s.mean = j.at("mean").get<std::array<double, 3>>();
    s.std = j.at("std").get<std::array<double, 3>>();
    return s;
}

}  // namespace pointseg
