#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace geobench {

struct Rgb {
    std::uint8_t r = 0, g = 0, b = 0;
    bool operator==(const Rgb&) const = default;
};

// 8-bit RGB raster, row-major.
class Image {
public:
    Image() = default;
    Image(int width, int height, Rgb fill = {255, 255, 255});

    int width() const { return width_; }
    int height() const { return height_; }
    bool empty() const { return width_ == 0 || height_ == 0; }

    Rgb at(int x, int y) const;
    void set(int x, int y, Rgb c);
    // Alpha-blends `c` over the pixel; alpha in [0,1]. Out-of-range coordinates are ignored.
    void blend(int x, int y, Rgb c, double alpha);
    void fill_rect(int x0, int y0, int x1, int y1, Rgb c, double alpha = 1.0);
    void blit(const Image& src, int x, int y);

    std::span<const std::uint8_t> pixels() const { return data_; }

    bool operator==(const Image&) const = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> data_;
};

// Decodes PNG (any bit depth / color type) or binary PPM. Throws UndecodableImage.
Image decode_image(std::span<const std::uint8_t> bytes);
Image read_image(const std::filesystem::path& file);
std::vector<std::uint8_t> encode_png(const Image& image);
void write_png(const Image& image, const std::filesystem::path& file);

Image resize_bilinear(const Image& src, int width, int height);

// Height of a text line drawn with draw_text at the given scale.
int text_height(int scale);
int text_width(std::string_view text, int scale);
// Draws uppercase ASCII text with a built-in 5x7 font; unsupported glyphs render blank.
void draw_text(Image& image, int x, int y, std::string_view text, Rgb color, int scale = 1);

} // namespace geobench
