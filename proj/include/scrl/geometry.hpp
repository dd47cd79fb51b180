#pragma once

#include <optional>
#include <stdexcept>
#include <vector>

#include "scrl/rng.hpp"

namespace scrl::geom {

// Axis-aligned rectangle in continuous pixel coordinates, origin top-left,
// half-open extent [x, x+w) x [y, y+h). The coordinate frame (source image,
// augmented view, or feature grid) is tracked by the caller.
struct Box {
    double x = 0.0;
    double y = 0.0;
    double w = 0.0;
    double h = 0.0;

    double x2() const { return x + w; }
    double y2() const { return y + h; }
    double area() const { return w * h; }
    bool valid() const;
    bool contains(const Box& inner, double tol = 1e-9) const;
};

// Geometric half of one augmentation: a crop rectangle in source-image
// coordinates, the resize target, and an optional horizontal flip.
// Photometric ops never change geometry.
struct ViewGeometry {
    Box crop;
    int out_w = 0;
    int out_h = 0;
    bool hflip = false;
};

// Rectangle visible in both views, in source-image coordinates.
struct IntersectionRegion {
    Box rect;
    double width() const { return rect.w; }
    double height() const { return rect.h; }
};

// Shape of an encoder's spatial output relative to its input.
struct FeatureGridSpec {
    int in_w = 0;
    int in_h = 0;
    int feat_w = 0;
    int feat_h = 0;

    double stride_x() const { return double(in_w) / feat_w; }
    double stride_y() const { return double(in_h) / feat_h; }
    // Smallest box (in view pixels) that still spans one feature cell.
    double min_box_w() const { return stride_x(); }
    double min_box_h() const { return stride_y(); }
};

// One matched region: the sampled source box and its images in each view.
struct RoiPair {
    Box box_src;
    Box box_v1;
    Box box_v2;
};

struct GeometryError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Rectangle intersection of the two crops, in source coordinates.
// Empty (zero-area) overlap is reported as nullopt.
std::optional<IntersectionRegion> intersect_views(const ViewGeometry& v1,
                                                  const ViewGeometry& v2);

// Samples one box inside the intersection region:
//   w ~ U(min_w, W-hat), x ~ U(0, W-hat - w)  (same for h/y),
// then offsets into source coordinates. Throws GeometryError when the
// region is smaller than the minimum box.
Box sample_box(const IntersectionRegion& is, double min_w, double min_h,
               Rng& rng);

double iou(const Box& a, const Box& b);

struct RoiSample {
    std::vector<Box> boxes;
    bool truncated = false;  // max_attempts hit before reaching K
};

// Draws up to K boxes via sample_box with pairwise-IoU rejection: a
// candidate is rejected when its IoU with any accepted box exceeds
// iou_thr. Throws GeometryError when no box is accepted at all.
RoiSample sample_rois(const IntersectionRegion& is, int k,
                      std::optional<double> iou_thr, double min_w,
                      double min_h, int max_attempts, Rng& rng);

// Maps a source-coordinate box into view coordinates (crop offset, scale
// to the output size, then mirror if the view is flipped). The box must
// be visible in the view.
Box map_box_to_view(const Box& b, const ViewGeometry& v);

// Inverse of map_box_to_view.
Box map_view_to_source(const Box& b, const ViewGeometry& v);

// View pixels -> feature-grid cells (continuous, no rounding).
Box map_box_to_grid(const Box& b, const FeatureGridSpec& g);

// Perturbs a box: width/height scaled by (1+u) and center shifted by a
// fraction of the extent, u ~ U(-magnitude, magnitude) per component,
// clamped into bounds with at least 1px extent. magnitude = infinity
// draws a fresh random box inside bounds instead (correspondence is
// destroyed on purpose).
Box jitter_box(const Box& b, double magnitude, const Box& bounds, Rng& rng);

}  // namespace scrl::geom
