#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace scrl::plot {

// Small RGB raster with just enough drawing for run diagnostics.
struct Canvas {
    int w = 0, h = 0;
    std::vector<uint8_t> rgb;  // row-major, 3 bytes per pixel

    Canvas(int width, int height, uint8_t r = 255, uint8_t g = 255,
           uint8_t b = 255);
    void set(int x, int y, uint8_t r, uint8_t g, uint8_t b);
    void line(double x0, double y0, double x1, double y1, uint8_t r, uint8_t g,
              uint8_t b);
    void fill_rect(int x, int y, int w, int h, uint8_t r, uint8_t g,
                   uint8_t b);
    // 3x5 bitmap font (digits, '.', '-', lowercase letters); scale
    // multiplies the glyph size.
    void text(int x, int y, const std::string& s, int scale, uint8_t r,
              uint8_t g, uint8_t b);
};

// 8-bit RGB PNG, zlib-compressed, single IDAT.
void write_png(const std::string& path, const Canvas& canvas);

void write_loss_curve(const std::string& path,
                      const std::vector<double>& losses);

// Labeled vertical bars; values are annotated above each bar.
void write_bar_chart(const std::string& path,
                     const std::vector<std::string>& labels,
                     const std::vector<double>& values,
                     const std::string& title);

}  // namespace scrl::plot
