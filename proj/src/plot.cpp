#include "scrl/plot.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace scrl::plot {

Canvas::Canvas(int width, int height, uint8_t r, uint8_t g, uint8_t b)
    : w(width), h(height), rgb(size_t(3) * width * height) {
    for (size_t i = 0; i < rgb.size(); i += 3) {
        rgb[i] = r;
        rgb[i + 1] = g;
        rgb[i + 2] = b;
    }
}

void Canvas::set(int x, int y, uint8_t r, uint8_t g, uint8_t b) {
    if (x < 0 || y < 0 || x >= w || y >= h) return;
    size_t i = 3 * (size_t(y) * w + x);
    rgb[i] = r;
    rgb[i + 1] = g;
    rgb[i + 2] = b;
}

void Canvas::line(double x0, double y0, double x1, double y1, uint8_t r,
                  uint8_t g, uint8_t b) {
    double dx = x1 - x0, dy = y1 - y0;
    int n = int(std::ceil(std::max(std::fabs(dx), std::fabs(dy)))) + 1;
    for (int i = 0; i <= n; ++i) {
        double t = double(i) / n;
        set(int(std::lround(x0 + t * dx)), int(std::lround(y0 + t * dy)), r, g,
            b);
    }
}

void Canvas::fill_rect(int x, int y, int rw, int rh, uint8_t r, uint8_t g,
                       uint8_t b) {
    for (int yy = y; yy < y + rh; ++yy)
        for (int xx = x; xx < x + rw; ++xx) set(xx, yy, r, g, b);
}

namespace {

// 3x5 glyphs, rows top to bottom, '1' = lit.
const char* glyph_rows(char c) {
    switch (c) {
        case '0': return "111101101101111";
        case '1': return "010110010010111";
        case '2': return "111001111100111";
        case '3': return "111001111001111";
        case '4': return "101101111001001";
        case '5': return "111100111001111";
        case '6': return "111100111101111";
        case '7': return "111001001010010";
        case '8': return "111101111101111";
        case '9': return "111101111001111";
        case '.': return "000000000000010";
        case '-': return "000000111000000";
        case '+': return "000010111010000";
        case '_': return "000000000000111";
        case 'a': return "111101111101101";
        case 'b': return "110101110101110";
        case 'c': return "111100100100111";
        case 'd': return "110101101101110";
        case 'e': return "111100111100111";
        case 'f': return "111100111100100";
        case 'g': return "111100101101111";
        case 'h': return "101101111101101";
        case 'i': return "111010010010111";
        case 'j': return "001001001101111";
        case 'k': return "101101110101101";
        case 'l': return "100100100100111";
        case 'm': return "101111111101101";
        case 'n': return "101111101101101";
        case 'o': return "111101101101111";
        case 'p': return "111101111100100";
        case 'q': return "111101101111001";
        case 'r': return "111101110101101";
        case 's': return "111100111001111";
        case 't': return "111010010010010";
        case 'u': return "101101101101111";
        case 'v': return "101101101101010";
        case 'w': return "101101111111101";
        case 'x': return "101101010101101";
        case 'y': return "101101010010010";
        case 'z': return "111001010100111";
        default: return "000000000000000";
    }
}

void push_be32(std::vector<uint8_t>& v, uint32_t x) {
    v.push_back(uint8_t(x >> 24));
    v.push_back(uint8_t(x >> 16));
    v.push_back(uint8_t(x >> 8));
    v.push_back(uint8_t(x));
}

void write_chunk(std::ofstream& os, const char type[4],
                 const std::vector<uint8_t>& payload) {
    std::vector<uint8_t> head;
    push_be32(head, uint32_t(payload.size()));
    os.write(reinterpret_cast<const char*>(head.data()), 4);
    os.write(type, 4);
    if (!payload.empty())
        os.write(reinterpret_cast<const char*>(payload.data()),
                 std::streamsize(payload.size()));
    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, reinterpret_cast<const Bytef*>(type), 4);
    if (!payload.empty())
        crc = crc32(crc, payload.data(), uInt(payload.size()));
    std::vector<uint8_t> tail;
    push_be32(tail, uint32_t(crc));
    os.write(reinterpret_cast<const char*>(tail.data()), 4);
}

std::string fmt_val(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

}  // namespace

void Canvas::text(int x, int y, const std::string& s, int scale, uint8_t r,
                  uint8_t g, uint8_t b) {
    int cx = x;
    for (char ch : s) {
        const char* rows =
            glyph_rows(char(std::tolower(static_cast<unsigned char>(ch))));
        for (int ry = 0; ry < 5; ++ry)
            for (int rx = 0; rx < 3; ++rx)
                if (rows[ry * 3 + rx] == '1')
                    fill_rect(cx + rx * scale, y + ry * scale, scale, scale, r,
                              g, b);
        cx += 4 * scale;
    }
}

void write_png(const std::string& path, const Canvas& canvas) {
    // Filter byte 0 per scanline, then one zlib stream in a single IDAT.
    std::vector<uint8_t> raw;
    raw.reserve(size_t(canvas.h) * (1 + size_t(canvas.w) * 3));
    for (int y = 0; y < canvas.h; ++y) {
        raw.push_back(0);
        const uint8_t* row = canvas.rgb.data() + size_t(3) * y * canvas.w;
        raw.insert(raw.end(), row, row + size_t(3) * canvas.w);
    }
    uLongf bound = compressBound(uLong(raw.size()));
    std::vector<uint8_t> packed(bound);
    if (compress2(packed.data(), &bound, raw.data(), uLong(raw.size()), 9) !=
        Z_OK)
        throw std::runtime_error("png: zlib compression failed");
    packed.resize(bound);

    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("png: cannot open " + path);
    static const uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a,
                                   '\n'};
    os.write(reinterpret_cast<const char*>(sig), 8);

    std::vector<uint8_t> ihdr;
    push_be32(ihdr, uint32_t(canvas.w));
    push_be32(ihdr, uint32_t(canvas.h));
    ihdr.push_back(8);  // bit depth
    ihdr.push_back(2);  // color type: truecolor
    ihdr.push_back(0);  // compression
    ihdr.push_back(0);  // filter
    ihdr.push_back(0);  // interlace
    write_chunk(os, "IHDR", ihdr);
    write_chunk(os, "IDAT", packed);
    write_chunk(os, "IEND", {});
    if (!os) throw std::runtime_error("png: write failed for " + path);
}

void write_loss_curve(const std::string& path,
                      const std::vector<double>& losses) {
    const int W = 640, H = 400, ml = 56, mr = 16, mt = 24, mb = 36;
    Canvas c(W, H);
    int px = ml, py = mt, pw = W - ml - mr, ph = H - mt - mb;
    c.line(px, py + ph, px + pw, py + ph, 0, 0, 0);
    c.line(px, py, px, py + ph, 0, 0, 0);
    c.text(px, 8, "training loss", 2, 0, 0, 0);
    if (losses.empty()) {
        write_png(path, c);
        return;
    }
    double lo = losses[0], hi = losses[0];
    for (double v : losses) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (hi - lo < 1e-12) hi = lo + 1e-12;
    auto X = [&](size_t i) {
        return px + pw * double(i) /
                        double(std::max<size_t>(1, losses.size() - 1));
    };
    auto Y = [&](double v) { return py + ph * (1.0 - (v - lo) / (hi - lo)); };
    for (int g = 0; g <= 4; ++g) {
        double v = lo + (hi - lo) * g / 4.0;
        int y = int(Y(v));
        c.line(px, y, px + pw, y, 220, 220, 220);
        c.text(4, y - 2, fmt_val(v), 1, 0, 0, 0);
    }
    for (size_t i = 1; i < losses.size(); ++i)
        c.line(X(i - 1), Y(losses[i - 1]), X(i), Y(losses[i]), 70, 130, 220);
    // Running mean over ~2% of the run, drawn on top of the raw trace.
    size_t win = std::max<size_t>(1, losses.size() / 50);
    double acc = 0.0;
    std::vector<double> mean(losses.size());
    for (size_t i = 0; i < losses.size(); ++i) {
        acc += losses[i];
        if (i >= win) acc -= losses[i - win];
        mean[i] = acc / double(std::min(i + 1, win));
    }
    for (size_t i = 1; i < mean.size(); ++i)
        c.line(X(i - 1), Y(mean[i - 1]), X(i), Y(mean[i]), 200, 60, 60);
    c.text(px, H - 16, "step 0 - " + std::to_string(losses.size() - 1), 1, 0,
           0, 0);
    write_png(path, c);
}

void write_bar_chart(const std::string& path,
                     const std::vector<std::string>& labels,
                     const std::vector<double>& values,
                     const std::string& title) {
    if (labels.size() != values.size())
        throw std::invalid_argument("bar chart: label/value count mismatch");
    const int W = 640, H = 400, ml = 56, mr = 16, mt = 32, mb = 48;
    Canvas c(W, H);
    int px = ml, py = mt, pw = W - ml - mr, ph = H - mt - mb;
    c.line(px, py + ph, px + pw, py + ph, 0, 0, 0);
    c.line(px, py, px, py + ph, 0, 0, 0);
    c.text(px, 8, title, 2, 0, 0, 0);
    double hi = 1e-12;
    for (double v : values) hi = std::max(hi, v);
    int n = int(values.size());
    if (n == 0) {
        write_png(path, c);
        return;
    }
    int slot = pw / n;
    int bw = std::max(4, slot * 6 / 10);
    for (int i = 0; i < n; ++i) {
        int bh = int(ph * values[i] / hi);
        int bx = px + i * slot + (slot - bw) / 2;
        c.fill_rect(bx, py + ph - bh, bw, bh, 70, 130, 220);
        c.text(bx, py + ph - bh - 10, fmt_val(values[i]), 1, 0, 0, 0);
        c.text(px + i * slot + 2, py + ph + 8, labels[i], 1, 0, 0, 0);
    }
    write_png(path, c);
}

}  // namespace scrl::plot
