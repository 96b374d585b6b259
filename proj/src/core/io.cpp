#include "irid/core/io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <memory>
#include <vector>

#include "irid/core/error.hpp"

namespace irid {
namespace {

struct FileCloser {
    void operator()(FILE* f) const { if (f) std::fclose(f); }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

FilePtr open_file(const std::string& path, const char* mode) {
    FilePtr f(std::fopen(path.c_str(), mode));
    if (!f) raise("cannot open '" + path + "'");
    return f;
}

bool host_little_endian() {
    uint16_t probe = 1;
    uint8_t byte;
    std::memcpy(&byte, &probe, 1);
    return byte == 1;
}

} // namespace

void save_png(const std::string& path, const Image& img) {
    require(!img.empty() && (img.channels == 1 || img.channels == 3),
            "save_png: need a 1- or 3-channel image");
    FilePtr f = open_file(path, "wb");

    png_structp pngp = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(pngp);
    if (!pngp || !info) raise("save_png: libpng init failed");
    if (setjmp(png_jmpbuf(pngp))) {
        png_destroy_write_struct(&pngp, &info);
        raise("save_png: libpng error writing '" + path + "'");
    }
    png_init_io(pngp, f.get());
    png_set_IHDR(pngp, info, img.width, img.height, 8,
                 img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(pngp, info);

    std::vector<png_byte> row(static_cast<size_t>(img.width) * img.channels);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < img.channels; ++c) {
                float v = std::clamp(img.at(x, y, c), 0.f, 1.f);
                row[static_cast<size_t>(x) * img.channels + c] =
                    static_cast<png_byte>(std::lround(v * 255.f));
            }
        png_write_row(pngp, row.data());
    }
    png_write_end(pngp, nullptr);
    png_destroy_write_struct(&pngp, &info);
}

Image load_png(const std::string& path) {
    FilePtr f = open_file(path, "rb");
    png_byte sig[8];
    if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8))
        raise("load_png: '" + path + "' is not a PNG file");

    png_structp pngp = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(pngp);
    if (!pngp || !info) raise("load_png: libpng init failed");
    if (setjmp(png_jmpbuf(pngp))) {
        png_destroy_read_struct(&pngp, &info, nullptr);
        raise("load_png: libpng error reading '" + path + "'");
    }
    png_init_io(pngp, f.get());
    png_set_sig_bytes(pngp, 8);
    png_read_info(pngp, info);

    png_uint_32 w, h;
    int bit_depth, color_type;
    png_get_IHDR(pngp, info, &w, &h, &bit_depth, &color_type, nullptr, nullptr, nullptr);

    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(pngp);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(pngp);
    if (png_get_valid(pngp, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(pngp);
    if (bit_depth == 16) png_set_strip_16(pngp);
    png_set_strip_alpha(pngp);
    png_read_update_info(pngp, info);

    int channels = png_get_channels(pngp, info);
    require(channels == 1 || channels == 3, "load_png: unsupported channel count");

    Image img(static_cast<int>(w), static_cast<int>(h), channels);
    std::vector<png_byte> row(static_cast<size_t>(w) * channels);
    for (png_uint_32 y = 0; y < h; ++y) {
        png_read_row(pngp, row.data(), nullptr);
        for (png_uint_32 x = 0; x < w; ++x)
            for (int c = 0; c < channels; ++c)
                img.at(static_cast<int>(x), static_cast<int>(y), c) =
                    row[static_cast<size_t>(x) * channels + c] / 255.f;
    }
    png_read_end(pngp, nullptr);
    png_destroy_read_struct(&pngp, &info, nullptr);
    return img;
}

void save_pfm(const std::string& path, const Image& img) {
    require(!img.empty() && (img.channels == 1 || img.channels == 3),
            "save_pfm: need a 1- or 3-channel image");
    require(host_little_endian(), "save_pfm: big-endian hosts unsupported");
    FilePtr f = open_file(path, "wb");
    std::fprintf(f.get(), "%s\n%d %d\n-1.0\n", img.channels == 3 ? "PF" : "Pf",
                 img.width, img.height);
    // PFM stores rows bottom-to-top.
    for (int y = img.height - 1; y >= 0; --y) {
        const float* row = &img.data[static_cast<size_t>(y) * img.width * img.channels];
        size_t n = static_cast<size_t>(img.width) * img.channels;
        if (std::fwrite(row, sizeof(float), n, f.get()) != n)
            raise("save_pfm: short write to '" + path + "'");
    }
}

namespace {

// Reads one whitespace-delimited token, skipping comments is not in the PFM spec.
std::string pfm_token(FILE* f, const std::string& path) {
    std::string tok;
    int c;
    while ((c = std::fgetc(f)) != EOF && std::isspace(c)) {}
    if (c == EOF) raise("load_pfm: truncated header in '" + path + "'");
    do { tok.push_back(static_cast<char>(c)); } while ((c = std::fgetc(f)) != EOF && !std::isspace(c));
    return tok;
}

} // namespace

Image load_pfm(const std::string& path) {
    FilePtr f = open_file(path, "rb");
    std::string magic = pfm_token(f.get(), path);
    int channels;
    if (magic == "PF") channels = 3;
    else if (magic == "Pf") channels = 1;
    else raise("load_pfm: '" + path + "' is not a PFM file");

    int w = std::stoi(pfm_token(f.get(), path));
    int h = std::stoi(pfm_token(f.get(), path));
    float scale = std::stof(pfm_token(f.get(), path));
    require(w > 0 && h > 0, "load_pfm: bad dimensions in '" + path + "'");
    require(scale < 0.f, "load_pfm: big-endian PFM unsupported in '" + path + "'");

    Image img(w, h, channels);
    for (int y = h - 1; y >= 0; --y) {
        float* row = &img.data[static_cast<size_t>(y) * w * channels];
        size_t n = static_cast<size_t>(w) * channels;
        if (std::fread(row, sizeof(float), n, f.get()) != n)
            raise("load_pfm: truncated data in '" + path + "'");
    }
    float inv = 1.f / -scale;
    if (inv != 1.f)
        for (float& v : img.data) v *= inv;
    return img;
}

std::pair<int, int> probe_image_size(const std::string& path) {
    if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".pfm") == 0) {
        FilePtr f = open_file(path, "rb");
        std::string magic = pfm_token(f.get(), path);
        require(magic == "PF" || magic == "Pf", "probe: '" + path + "' is not a PFM file");
        int w = std::stoi(pfm_token(f.get(), path));
        int h = std::stoi(pfm_token(f.get(), path));
        return {w, h};
    }
    // PNG: IHDR width/height live at fixed offsets 16..23, big-endian.
    FilePtr f = open_file(path, "rb");
    uint8_t head[24];
    if (std::fread(head, 1, 24, f.get()) != 24)
        raise("probe: '" + path + "' too short");
    static const uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    require(std::memcmp(head, sig, 8) == 0, "probe: '" + path + "' is not a PNG file");
    auto be32 = [&](int off) {
        return (head[off] << 24) | (head[off + 1] << 16) | (head[off + 2] << 8) | head[off + 3];
    };
    return {be32(16), be32(20)};
}

} // namespace irid
