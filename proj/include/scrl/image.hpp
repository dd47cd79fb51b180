#pragma once

#include <string>
#include <vector>

#include "scrl/geometry.hpp"

namespace scrl {

// RGB image, float64 in [0,1], CHW layout.
struct Image {
    int h = 0;
    int w = 0;
    std::vector<double> pix;  // 3 * h * w

    Image() = default;
    Image(int height, int width) : h(height), w(width), pix(3ull * height * width, 0.0) {}

    double& at(int c, int y, int x) { return pix[(size_t(c) * h + y) * w + x]; }
    double at(int c, int y, int x) const {
        return pix[(size_t(c) * h + y) * w + x];
    }
    void clamp01();
};

// Bilinear sample of one channel at continuous (x, y), pixel centers at
// integer+0.5, border clamp. Matches the RoIAlign convention.
double sample_bilinear(const Image& img, int c, double y, double x);

// Crops `rect` (source coordinates) and resizes to out_w x out_h via
// bilinear sampling; optionally mirrors horizontally afterwards.
Image crop_resize(const Image& img, const geom::Box& rect, int out_w,
                  int out_h, bool hflip);

// Draws a 1px rectangle outline (clipped to the image).
void draw_box(Image& img, const geom::Box& b, double r, double g, double bl);

// Binary PPM (P6) I/O, 8-bit.
void write_ppm(const std::string& path, const Image& img);
Image read_ppm(const std::string& path);

}  // namespace scrl
