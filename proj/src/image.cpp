#include "scrl/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace scrl {

void Image::clamp01() {
    for (double& v : pix) v = std::clamp(v, 0.0, 1.0);
}

double sample_bilinear(const Image& img, int c, double y, double x) {
    double u = std::clamp(x - 0.5, 0.0, double(img.w - 1));
    double v = std::clamp(y - 0.5, 0.0, double(img.h - 1));
    int x0 = int(u), y0 = int(v);
    int x1 = std::min(x0 + 1, img.w - 1), y1 = std::min(y0 + 1, img.h - 1);
    double tx = u - x0, ty = v - y0;
    return (1 - ty) * ((1 - tx) * img.at(c, y0, x0) + tx * img.at(c, y0, x1)) +
           ty * ((1 - tx) * img.at(c, y1, x0) + tx * img.at(c, y1, x1));
}

Image crop_resize(const Image& img, const geom::Box& rect, int out_w,
                  int out_h, bool hflip) {
    Image out(out_h, out_w);
    double sx = rect.w / out_w;
    double sy = rect.h / out_h;
    for (int c = 0; c < 3; ++c)
        for (int oy = 0; oy < out_h; ++oy)
            for (int ox = 0; ox < out_w; ++ox) {
                int tx = hflip ? out_w - 1 - ox : ox;
                double srcx = rect.x + (ox + 0.5) * sx;
                double srcy = rect.y + (oy + 0.5) * sy;
                out.at(c, oy, tx) = sample_bilinear(img, c, srcy, srcx);
            }
    return out;
}

void draw_box(Image& img, const geom::Box& b, double r, double g, double bl) {
    int x0 = std::clamp(int(std::lround(b.x)), 0, img.w - 1);
    int y0 = std::clamp(int(std::lround(b.y)), 0, img.h - 1);
    int x1 = std::clamp(int(std::lround(b.x2())) - 1, 0, img.w - 1);
    int y1 = std::clamp(int(std::lround(b.y2())) - 1, 0, img.h - 1);
    for (int x = x0; x <= x1; ++x) {
        for (int y : {y0, y1}) {
            img.at(0, y, x) = r;
            img.at(1, y, x) = g;
            img.at(2, y, x) = bl;
        }
    }
    for (int y = y0; y <= y1; ++y) {
        for (int x : {x0, x1}) {
            img.at(0, y, x) = r;
            img.at(1, y, x) = g;
            img.at(2, y, x) = bl;
        }
    }
}

void write_ppm(const std::string& path, const Image& img) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("write_ppm: cannot open " + path);
    os << "P6\n" << img.w << " " << img.h << "\n255\n";
    std::vector<unsigned char> row(3ull * img.w);
    for (int y = 0; y < img.h; ++y) {
        for (int x = 0; x < img.w; ++x)
            for (int c = 0; c < 3; ++c)
                row[3 * x + c] = (unsigned char)std::lround(
                    std::clamp(img.at(c, y, x), 0.0, 1.0) * 255.0);
        os.write(reinterpret_cast<const char*>(row.data()), row.size());
    }
    if (!os) throw std::runtime_error("write_ppm: write failed for " + path);
}

Image read_ppm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("read_ppm: cannot open " + path);
    std::string magic;
    int w, h, maxval;
    is >> magic >> w >> h >> maxval;
    if (magic != "P6" || maxval != 255)
        throw std::runtime_error("read_ppm: unsupported format in " + path);
    is.get();  // single whitespace after header
    Image img(h, w);
    std::vector<unsigned char> row(3ull * w);
    for (int y = 0; y < h; ++y) {
        is.read(reinterpret_cast<char*>(row.data()), row.size());
        if (!is) throw std::runtime_error("read_ppm: truncated " + path);
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                img.at(c, y, x) = row[3 * x + c] / 255.0;
    }
    return img;
}

}  // namespace scrl
