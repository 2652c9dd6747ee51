#include "geobench/image.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

#include <png.h>

#include <fmt/core.h>

#include "geobench/errors.hpp"

namespace geobench {

Image::Image(int width, int height, Rgb fill) : width_(width), height_(height) {
    if (width < 0 || height < 0) throw std::invalid_argument("negative image size");
    data_.resize(static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3);
    for (std::size_t i = 0; i < data_.size(); i += 3) {
        data_[i] = fill.r;
        data_[i + 1] = fill.g;
        data_[i + 2] = fill.b;
    }
}

Rgb Image::at(int x, int y) const {
    const auto i = (static_cast<std::size_t>(y) * width_ + x) * 3;
    return {data_[i], data_[i + 1], data_[i + 2]};
}

void Image::set(int x, int y, Rgb c) {
    if (x < 0 || y < 0 || x >= width_ || y >= height_) return;
    const auto i = (static_cast<std::size_t>(y) * width_ + x) * 3;
    data_[i] = c.r;
    data_[i + 1] = c.g;
    data_[i + 2] = c.b;
}

void Image::blend(int x, int y, Rgb c, double alpha) {
    if (x < 0 || y < 0 || x >= width_ || y >= height_) return;
    alpha = std::clamp(alpha, 0.0, 1.0);
    if (alpha <= 0.0) return;
    const auto old = at(x, y);
    auto mix = [alpha](std::uint8_t under, std::uint8_t over) {
        return static_cast<std::uint8_t>(std::lround(under * (1.0 - alpha) + over * alpha));
    };
    set(x, y, {mix(old.r, c.r), mix(old.g, c.g), mix(old.b, c.b)});
}

void Image::fill_rect(int x0, int y0, int x1, int y1, Rgb c, double alpha) {
    x0 = std::max(x0, 0);
    y0 = std::max(y0, 0);
    x1 = std::min(x1, width_);
    y1 = std::min(y1, height_);
    for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
            if (alpha >= 1.0) {
                set(x, y, c);
            } else {
                blend(x, y, c, alpha);
            }
        }
    }
}

void Image::blit(const Image& src, int x, int y) {
    for (int sy = 0; sy < src.height(); ++sy) {
        for (int sx = 0; sx < src.width(); ++sx) set(x + sx, y + sy, src.at(sx, sy));
    }
}

namespace {

bool is_png(std::span<const std::uint8_t> bytes) {
    return bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0;
}

Image decode_png(std::span<const std::uint8_t> bytes) {
    png_image img;
    std::memset(&img, 0, sizeof img);
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size())) {
        throw UndecodableImage(fmt::format("invalid PNG: {}", img.message));
    }
    img.format = PNG_FORMAT_RGB;
    std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(img));
    const png_color white{255, 255, 255};
    if (!png_image_finish_read(&img, &white, buffer.data(), 0, nullptr)) {
        png_image_free(&img);
        throw UndecodableImage(fmt::format("invalid PNG: {}", img.message));
    }
    Image out(static_cast<int>(img.width), static_cast<int>(img.height));
    for (int y = 0; y < out.height(); ++y) {
        for (int x = 0; x < out.width(); ++x) {
            const auto i = (static_cast<std::size_t>(y) * out.width() + x) * 3;
            out.set(x, y, {buffer[i], buffer[i + 1], buffer[i + 2]});
        }
    }
    return out;
}

// Binary PPM (P6, maxval 255).
Image decode_ppm(std::span<const std::uint8_t> bytes) {
    std::size_t pos = 2;
    auto next_int = [&]() -> long {
        for (;;) {
            while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
            if (pos < bytes.size() && bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
                continue;
            }
            break;
        }
        long v = 0;
        bool any = false;
        while (pos < bytes.size() && std::isdigit(bytes[pos])) {
            v = v * 10 + (bytes[pos++] - '0');
            any = true;
            if (v > 1'000'000) throw UndecodableImage("PPM header value out of range");
        }
        if (!any) throw UndecodableImage("truncated PPM header");
        return v;
    };
    const long w = next_int();
    const long h = next_int();
    const long maxval = next_int();
    if (maxval != 255 || w <= 0 || h <= 0) throw UndecodableImage("unsupported PPM");
    ++pos;
    const auto need = static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3;
    if (bytes.size() < pos + need) throw UndecodableImage("truncated PPM data");
    Image out(static_cast<int>(w), static_cast<int>(h));
    for (long y = 0; y < h; ++y) {
        for (long x = 0; x < w; ++x) {
            const auto i = pos + (static_cast<std::size_t>(y) * w + x) * 3;
            out.set(static_cast<int>(x), static_cast<int>(y), {bytes[i], bytes[i + 1], bytes[i + 2]});
        }
    }
    return out;
}

} // namespace

Image decode_image(std::span<const std::uint8_t> bytes) {
    if (is_png(bytes)) return decode_png(bytes);
    if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6') return decode_ppm(bytes);
    throw UndecodableImage("unrecognized image format");
}

Image read_image(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw UndecodableImage(fmt::format("cannot read image '{}'", file.string()));
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return decode_image(bytes);
}

std::vector<std::uint8_t> encode_png(const Image& image) {
    png_image img;
    std::memset(&img, 0, sizeof img);
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(image.width());
    img.height = static_cast<png_uint_32>(image.height());
    img.format = PNG_FORMAT_RGB;
    png_alloc_size_t size = 0;
    const auto* pixels = image.pixels().data();
    if (!png_image_write_to_memory(&img, nullptr, &size, 0, pixels, 0, nullptr)) {
        throw std::runtime_error(fmt::format("PNG encoding failed: {}", img.message));
    }
    std::vector<std::uint8_t> out(size);
    if (!png_image_write_to_memory(&img, out.data(), &size, 0, pixels, 0, nullptr)) {
        throw std::runtime_error(fmt::format("PNG encoding failed: {}", img.message));
    }
    out.resize(size);
    return out;
}

void write_png(const Image& image, const std::filesystem::path& file) {
    const auto bytes = encode_png(image);
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", file.string()));
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Image resize_bilinear(const Image& src, int width, int height) {
    if (src.empty()) throw std::invalid_argument("cannot resize an empty image");
    Image out(width, height);
    const double sx = static_cast<double>(src.width()) / width;
    const double sy = static_cast<double>(src.height()) / height;
    for (int y = 0; y < height; ++y) {
        const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, src.height() - 1.0);
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, src.height() - 1);
        const double ty = fy - y0;
        for (int x = 0; x < width; ++x) {
            const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, src.width() - 1.0);
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, src.width() - 1);
            const double tx = fx - x0;
            auto lerp = [&](auto channel) {
                const double top = channel(src.at(x0, y0)) * (1 - tx) + channel(src.at(x1, y0)) * tx;
                const double bot = channel(src.at(x0, y1)) * (1 - tx) + channel(src.at(x1, y1)) * tx;
                return static_cast<std::uint8_t>(std::lround(top * (1 - ty) + bot * ty));
            };
            out.set(x, y, {lerp([](Rgb c) { return c.r; }), lerp([](Rgb c) { return c.g; }),
                           lerp([](Rgb c) { return c.b; })});
        }
    }
    return out;
}

namespace {

constexpr int kGlyphW = 5;
constexpr int kGlyphH = 7;

// Rows top to bottom; bit 4 is the leftmost column.
const std::map<char, std::array<std::uint8_t, kGlyphH>>& font() {
    static const std::map<char, std::array<std::uint8_t, kGlyphH>> glyphs{
        {'A', {0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
        {'B', {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E}},
        {'C', {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}},
        {'D', {0x1E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x1E}},
        {'E', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}},
        {'F', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10}},
        {'G', {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F}},
        {'H', {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
        {'I', {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}},
        {'J', {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C}},
        {'K', {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}},
        {'L', {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F}},
        {'M', {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11}},
        {'N', {0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11}},
        {'O', {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
        {'P', {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10}},
        {'Q', {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D}},
        {'R', {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11}},
        {'S', {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}},
        {'T', {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
        {'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
        {'V', {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04}},
        {'W', {0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A}},
        {'X', {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11}},
        {'Y', {0x11, 0x11, 0x11, 0x0A, 0x04, 0x04, 0x04}},
        {'Z', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F}},
        {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}},
        {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
        {'2', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}},
        {'3', {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}},
        {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}},
        {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
        {'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}},
        {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
        {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}},
        {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
        {'-', {0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00}},
        {'_', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x1F}},
        {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C}},
        {',', {0x00, 0x00, 0x00, 0x00, 0x0C, 0x04, 0x08}},
        {':', {0x00, 0x0C, 0x0C, 0x00, 0x0C, 0x0C, 0x00}},
        {'/', {0x00, 0x01, 0x02, 0x04, 0x08, 0x10, 0x00}},
        {'(', {0x02, 0x04, 0x08, 0x08, 0x08, 0x04, 0x02}},
        {')', {0x08, 0x04, 0x02, 0x02, 0x02, 0x04, 0x08}},
        {'%', {0x18, 0x19, 0x02, 0x04, 0x08, 0x13, 0x03}},
        {'+', {0x00, 0x04, 0x04, 0x1F, 0x04, 0x04, 0x00}},
    };
    return glyphs;
}

} // namespace

int text_height(int scale) { return kGlyphH * scale; }

int text_width(std::string_view text, int scale) {
    if (text.empty()) return 0;
    return static_cast<int>(text.size()) * (kGlyphW + 1) * scale - scale;
}

void draw_text(Image& image, int x, int y, std::string_view text, Rgb color, int scale) {
    const auto& glyphs = font();
    for (char raw : text) {
        const char c = static_cast<char>(std::toupper(static_cast<unsigned char>(raw)));
        if (auto it = glyphs.find(c); it != glyphs.end()) {
            for (int row = 0; row < kGlyphH; ++row) {
                for (int col = 0; col < kGlyphW; ++col) {
                    if (it->second[row] & (0x10 >> col)) {
                        image.fill_rect(x + col * scale, y + row * scale, x + (col + 1) * scale,
                                        y + (row + 1) * scale, color);
                    }
                }
            }
        }
        x += (kGlyphW + 1) * scale;
    }
}

} // namespace geobench
