#pragma once

#include <string>
#include <vector>

#include "scrl/image.hpp"
#include "scrl/rng.hpp"
#include "scrl/tensor.hpp"

namespace scrl::data {

inline constexpr int kNumClasses = 4;
// Class ids: 0 circle, 1 square, 2 triangle, 3 cross.
extern const char* const kClassNames[kNumClasses];

struct GtBox {
    geom::Box box;  // image coordinates, tight around the shape
    int class_id = 0;
};

struct SyntheticImage {
    Image pixels;
    std::vector<GtBox> gt;
};

struct SceneConfig {
    int canvas = 64;      // square canvas, >= 64
    int min_shapes = 1;
    int max_shapes = 4;
    double min_size = 12.0;
    double max_size = 28.0;
};

// Renders colored geometric shapes on a textured background. Shape class
// and color are independent, so a classifier cannot shortcut through
// color statistics.
SyntheticImage generate_image(const SceneConfig& cfg, Rng& rng);

std::vector<SyntheticImage> generate_dataset(const SceneConfig& cfg, int count,
                                             uint64_t seed);

// Deterministic single-shape scene at an explicit position; the rng only
// feeds the background texture and shape color.
SyntheticImage render_single_shape(const SceneConfig& cfg, int class_id,
                                   double cx, double cy, double size,
                                   Rng& rng);

// Writes img_%05d.ppm files plus gt.jsonl (one record per image: path,
// boxes, classes).
void dump_dataset(const std::string& dir,
                  const std::vector<SyntheticImage>& images);

// Stacks images into a [N,3,H,W] tensor.
nn::Tensor images_to_tensor(const std::vector<const Image*>& images);

}  // namespace scrl::data
