#include "scrl/augment.hpp"

#include <algorithm>
#include <cmath>

namespace scrl::data {

namespace {

double luma(double r, double g, double b) {
    return 0.299 * r + 0.587 * g + 0.114 * b;
}

}  // namespace

AugmentParams AugmentParams::view1(int out_size) {
    AugmentParams p;
    p.out_size = out_size;
    p.blur_p = 1.0;
    p.solarize_p = 0.0;
    return p;
}

AugmentParams AugmentParams::view2(int out_size) {
    AugmentParams p;
    p.out_size = out_size;
    p.blur_p = 0.1;
    p.solarize_p = 0.2;
    return p;
}

AugmentParams AugmentParams::photometrics_off() const {
    AugmentParams p = *this;
    p.color_jitter_p = 0.0;
    p.grayscale_p = 0.0;
    p.blur_p = 0.0;
    p.solarize_p = 0.0;
    return p;
}

AugmentedView sample_view(const Image& img, const AugmentParams& params,
                          Rng& rng) {
    const double W = img.w, H = img.h;

    // Random resized crop: sample target area and log-aspect, retry when
    // the rectangle does not fit, fall back to the full image.
    geom::Box crop{0, 0, W, H};
    for (int attempt = 0; attempt < 10; ++attempt) {
        double area =
            rng.uniform(params.crop_area_min, params.crop_area_max) * W * H;
        double aspect = std::exp(
            rng.uniform(std::log(params.aspect_min), std::log(params.aspect_max)));
        double w = std::sqrt(area * aspect);
        double h = std::sqrt(area / aspect);
        if (w <= W && h <= H) {
            crop = geom::Box{rng.uniform(0.0, W - w), rng.uniform(0.0, H - h),
                             w, h};
            break;
        }
    }
    bool flip = rng.bernoulli(params.flip_p);

    AugmentedView view;
    view.geometry =
        geom::ViewGeometry{crop, params.out_size, params.out_size, flip};
    view.pixels = crop_resize(img, crop, params.out_size, params.out_size, flip);

    // Photometric chain; fixed composition order.
    if (rng.bernoulli(params.color_jitter_p)) {
        adjust_brightness(view.pixels,
                          rng.uniform(std::max(0.0, 1.0 - params.brightness),
                                      1.0 + params.brightness));
        adjust_contrast(view.pixels,
                        rng.uniform(std::max(0.0, 1.0 - params.contrast),
                                    1.0 + params.contrast));
        adjust_saturation(view.pixels,
                          rng.uniform(std::max(0.0, 1.0 - params.saturation),
                                      1.0 + params.saturation));
        adjust_hue(view.pixels, rng.uniform(-params.hue, params.hue));
    }
    if (rng.bernoulli(params.grayscale_p)) to_grayscale(view.pixels);
    if (rng.bernoulli(params.blur_p))
        gaussian_blur(view.pixels, rng.uniform(0.1, 2.0));
    if (rng.bernoulli(params.solarize_p)) solarize(view.pixels, 0.5);
    return view;
}

void adjust_brightness(Image& img, double factor) {
    for (double& v : img.pix) v = std::clamp(v * factor, 0.0, 1.0);
}

void adjust_contrast(Image& img, double factor) {
    double mean = 0.0;
    size_t plane = size_t(img.h) * img.w;
    for (size_t i = 0; i < plane; ++i)
        mean += luma(img.pix[i], img.pix[plane + i], img.pix[2 * plane + i]);
    mean /= double(plane);
    for (double& v : img.pix)
        v = std::clamp((v - mean) * factor + mean, 0.0, 1.0);
}

void adjust_saturation(Image& img, double factor) {
    size_t plane = size_t(img.h) * img.w;
    for (size_t i = 0; i < plane; ++i) {
        double g = luma(img.pix[i], img.pix[plane + i], img.pix[2 * plane + i]);
        for (int c = 0; c < 3; ++c) {
            double& v = img.pix[c * plane + i];
            v = std::clamp(g + (v - g) * factor, 0.0, 1.0);
        }
    }
}

void adjust_hue(Image& img, double shift) {
    size_t plane = size_t(img.h) * img.w;
    for (size_t i = 0; i < plane; ++i) {
        double r = img.pix[i], g = img.pix[plane + i], b = img.pix[2 * plane + i];
        double mx = std::max({r, g, b});
        double mn = std::min({r, g, b});
        double d = mx - mn;
        double h = 0.0;
        if (d > 0.0) {
            if (mx == r)
                h = std::fmod((g - b) / d, 6.0) / 6.0;
            else if (mx == g)
                h = ((b - r) / d + 2.0) / 6.0;
            else
                h = ((r - g) / d + 4.0) / 6.0;
            if (h < 0.0) h += 1.0;
        }
        double s = mx > 0.0 ? d / mx : 0.0;
        double v = mx;
        h = std::fmod(h + shift + 1.0, 1.0);  // hue wraps around
        double c = v * s;
        double hp = h * 6.0;
        double x = c * (1.0 - std::fabs(std::fmod(hp, 2.0) - 1.0));
        double rr = 0, gg = 0, bb = 0;
        switch (int(hp) % 6) {
            case 0: rr = c; gg = x; break;
            case 1: rr = x; gg = c; break;
            case 2: gg = c; bb = x; break;
            case 3: gg = x; bb = c; break;
            case 4: rr = x; bb = c; break;
            default: rr = c; bb = x; break;
        }
        double m = v - c;
        img.pix[i] = std::clamp(rr + m, 0.0, 1.0);
        img.pix[plane + i] = std::clamp(gg + m, 0.0, 1.0);
        img.pix[2 * plane + i] = std::clamp(bb + m, 0.0, 1.0);
    }
}

void to_grayscale(Image& img) {
    size_t plane = size_t(img.h) * img.w;
    for (size_t i = 0; i < plane; ++i) {
        double g = luma(img.pix[i], img.pix[plane + i], img.pix[2 * plane + i]);
        img.pix[i] = img.pix[plane + i] = img.pix[2 * plane + i] = g;
    }
}

void gaussian_blur(Image& img, double sigma) {
    int radius = std::max(1, int(std::ceil(2.0 * sigma)));
    std::vector<double> kernel(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
        sum += kernel[i + radius];
    }
    for (double& k : kernel) k /= sum;

    Image tmp = img;
    // Horizontal pass with replicated borders.
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < img.h; ++y)
            for (int x = 0; x < img.w; ++x) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i)
                    acc += kernel[i + radius] *
                           img.at(c, y, std::clamp(x + i, 0, img.w - 1));
                tmp.at(c, y, x) = acc;
            }
    // Vertical pass.
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < img.h; ++y)
            for (int x = 0; x < img.w; ++x) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i)
                    acc += kernel[i + radius] *
                           tmp.at(c, std::clamp(y + i, 0, img.h - 1), x);
                img.at(c, y, x) = acc;
            }
    img.clamp01();
}

void solarize(Image& img, double threshold) {
    for (double& v : img.pix)
        if (v >= threshold) v = 1.0 - v;
}

}  // namespace scrl::data
