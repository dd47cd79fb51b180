#pragma once

#include "scrl/image.hpp"
#include "scrl/rng.hpp"

namespace scrl::data {

// Photometric + geometric augmentation parameters for one view. The two
// views share everything except blur/solarize probability.
struct AugmentParams {
    double crop_area_min = 0.2;
    double crop_area_max = 1.0;
    double aspect_min = 3.0 / 4.0;   // log-sampled
    double aspect_max = 4.0 / 3.0;
    double flip_p = 0.5;
    double color_jitter_p = 0.8;
    double brightness = 0.4;
    double contrast = 0.4;
    double saturation = 0.2;
    double hue = 0.1;
    double grayscale_p = 0.2;
    double blur_p = 1.0;
    double solarize_p = 0.0;
    int out_size = 64;

    static AugmentParams view1(int out_size);
    static AugmentParams view2(int out_size);  // blur_p 0.1, solarize_p 0.2

    // Zeroes every photometric probability; geometry is untouched.
    AugmentParams photometrics_off() const;
};

struct AugmentedView {
    Image pixels;
    geom::ViewGeometry geometry;
};

// Random resized crop (area and log-aspect sampled, 10 attempts then
// full-image fallback), bilinear resize, optional flip, then the
// photometric chain. Geometric draws always precede photometric draws on
// the stream, so box correspondence is independent of photometric
// settings.
AugmentedView sample_view(const Image& img, const AugmentParams& params,
                          Rng& rng);

// Photometric primitives; all clamp output into [0,1].
void adjust_brightness(Image& img, double factor);
void adjust_contrast(Image& img, double factor);
void adjust_saturation(Image& img, double factor);
void adjust_hue(Image& img, double shift);  // fraction of a full turn
void to_grayscale(Image& img);
void gaussian_blur(Image& img, double sigma);
void solarize(Image& img, double threshold);

}  // namespace scrl::data
