#include "scrl/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace scrl::data {

const char* const kClassNames[kNumClasses] = {"circle", "square", "triangle",
                                              "cross"};

namespace {

struct Shape {
    int class_id;
    double cx, cy, size;  // size = full extent of the tight box
    double color[3];
};

// Coverage test at a continuous point, shape-local.
bool inside_shape(const Shape& s, double x, double y) {
    double dx = x - s.cx;
    double dy = y - s.cy;
    double r = s.size / 2.0;
    switch (s.class_id) {
        case 0:  // circle
            return dx * dx + dy * dy <= r * r;
        case 1:  // square
            return std::fabs(dx) <= r && std::fabs(dy) <= r;
        case 2: {  // isoceles triangle, apex up
            if (dy < -r || dy > r) return false;
            double half_width = (dy + r) / 2.0;  // 0 at apex, r at base
            return std::fabs(dx) <= half_width;
        }
        case 3: {  // plus sign, bar width size/3
            double bar = s.size / 6.0;
            return (std::fabs(dx) <= bar && std::fabs(dy) <= r) ||
                   (std::fabs(dy) <= bar && std::fabs(dx) <= r);
        }
        default:
            return false;
    }
}

geom::Box tight_box(const Shape& s) {
    double r = s.size / 2.0;
    return geom::Box{s.cx - r, s.cy - r, s.size, s.size};
}

void paint_background(Image& img, int canvas, Rng& rng) {
    // Dim textured background: a smooth two-corner gradient plus pixel
    // noise, kept below the shape intensity range.
    double base[3], slope[3];
    for (int c = 0; c < 3; ++c) {
        base[c] = rng.uniform(0.05, 0.25);
        slope[c] = rng.uniform(-0.15, 0.15);
    }
    for (int y = 0; y < canvas; ++y)
        for (int x = 0; x < canvas; ++x) {
            double t = double(x + y) / (2.0 * canvas);
            for (int c = 0; c < 3; ++c)
                img.at(c, y, x) = std::clamp(
                    base[c] + slope[c] * t + rng.uniform(-0.03, 0.03), 0.0,
                    0.45);
        }
}

void random_color(Shape& s, Rng& rng) {
    // Bright saturated color, independent of the class.
    int hi = int(rng.uniform_int(3));
    for (int c = 0; c < 3; ++c)
        s.color[c] = c == hi ? rng.uniform(0.75, 1.0) : rng.uniform(0.0, 0.45);
}

void rasterize(SyntheticImage& out, const std::vector<Shape>& shapes,
               int canvas) {
    // 2x2 supersampling; later shapes draw on top.
    for (const Shape& s : shapes) {
        geom::Box b = tight_box(s);
        int x0 = std::max(0, int(std::floor(b.x)));
        int y0 = std::max(0, int(std::floor(b.y)));
        int x1 = std::min(canvas - 1, int(std::ceil(b.x2())));
        int y1 = std::min(canvas - 1, int(std::ceil(b.y2())));
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) {
                double cover = 0.0;
                for (double oy : {0.25, 0.75})
                    for (double ox : {0.25, 0.75})
                        if (inside_shape(s, x + ox, y + oy)) cover += 0.25;
                if (cover == 0.0) continue;
                for (int c = 0; c < 3; ++c)
                    out.pixels.at(c, y, x) =
                        (1.0 - cover) * out.pixels.at(c, y, x) +
                        cover * s.color[c];
            }
        out.gt.push_back({b, s.class_id});
    }
}

}  // namespace

SyntheticImage generate_image(const SceneConfig& cfg, Rng& rng) {
    if (cfg.canvas < 64)
        throw std::invalid_argument("generate_image: canvas must be >= 64");
    int n = cfg.min_shapes +
            int(rng.uniform_int(cfg.max_shapes - cfg.min_shapes + 1));

    SyntheticImage out;
    out.pixels = Image(cfg.canvas, cfg.canvas);
    paint_background(out.pixels, cfg.canvas, rng);

    std::vector<Shape> shapes;
    for (int i = 0; i < n; ++i) {
        Shape s;
        s.class_id = int(rng.uniform_int(kNumClasses));
        random_color(s, rng);
        bool placed = false;
        for (int attempt = 0; attempt < 20 && !placed; ++attempt) {
            s.size = rng.uniform(cfg.min_size, cfg.max_size);
            double r = s.size / 2.0;
            s.cx = rng.uniform(r, cfg.canvas - r);
            s.cy = rng.uniform(r, cfg.canvas - r);
            placed = true;
            for (const Shape& other : shapes)
                if (geom::iou(tight_box(s), tight_box(other)) > 0.2)
                    placed = false;
        }
        if (!placed) continue;  // crowded canvas, skip this shape
        shapes.push_back(s);
    }
    rasterize(out, shapes, cfg.canvas);
    return out;
}

SyntheticImage render_single_shape(const SceneConfig& cfg, int class_id,
                                   double cx, double cy, double size,
                                   Rng& rng) {
    SyntheticImage out;
    out.pixels = Image(cfg.canvas, cfg.canvas);
    paint_background(out.pixels, cfg.canvas, rng);
    Shape s;
    s.class_id = class_id;
    s.cx = cx;
    s.cy = cy;
    s.size = size;
    random_color(s, rng);
    rasterize(out, {s}, cfg.canvas);
    return out;
}

std::vector<SyntheticImage> generate_dataset(const SceneConfig& cfg, int count,
                                             uint64_t seed) {
    Rng root(seed);
    std::vector<SyntheticImage> out;
    out.reserve(count);
    for (int i = 0; i < count; ++i) {
        // Per-image child stream: images are independent of one another.
        Rng rng = root.split(uint64_t(i));
        out.push_back(generate_image(cfg, rng));
    }
    return out;
}

void dump_dataset(const std::string& dir,
                  const std::vector<SyntheticImage>& images) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    std::ofstream gt(fs::path(dir) / "gt.jsonl");
    if (!gt) throw std::runtime_error("dump_dataset: cannot write gt.jsonl");
    for (size_t i = 0; i < images.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "img_%05zu.ppm", i);
        write_ppm((fs::path(dir) / name).string(), images[i].pixels);
        nlohmann::json rec;
        rec["path"] = name;
        rec["boxes"] = nlohmann::json::array();
        rec["classes"] = nlohmann::json::array();
        for (const GtBox& g : images[i].gt) {
            rec["boxes"].push_back({g.box.x, g.box.y, g.box.w, g.box.h});
            rec["classes"].push_back(g.class_id);
        }
        gt << rec.dump() << "\n";
    }
}

nn::Tensor images_to_tensor(const std::vector<const Image*>& images) {
    if (images.empty()) throw std::invalid_argument("images_to_tensor: empty");
    int h = images[0]->h, w = images[0]->w;
    std::vector<double> d;
    d.reserve(images.size() * 3ull * h * w);
    for (const Image* img : images) {
        if (img->h != h || img->w != w)
            throw std::invalid_argument("images_to_tensor: mixed sizes");
        d.insert(d.end(), img->pix.begin(), img->pix.end());
    }
    return nn::Tensor::from_data({int(images.size()), 3, h, w}, std::move(d));
}

}  // namespace scrl::data
