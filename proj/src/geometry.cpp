#include "scrl/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace scrl::geom {

bool Box::valid() const {
    return w > 0.0 && h > 0.0 && std::isfinite(x) && std::isfinite(y) &&
           std::isfinite(w) && std::isfinite(h);
}

bool Box::contains(const Box& inner, double tol) const {
    return inner.x >= x - tol && inner.y >= y - tol &&
           inner.x2() <= x2() + tol && inner.y2() <= y2() + tol;
}

std::optional<IntersectionRegion> intersect_views(const ViewGeometry& v1,
                                                  const ViewGeometry& v2) {
    double x1 = std::max(v1.crop.x, v2.crop.x);
    double y1 = std::max(v1.crop.y, v2.crop.y);
    double x2 = std::min(v1.crop.x2(), v2.crop.x2());
    double y2 = std::min(v1.crop.y2(), v2.crop.y2());
    if (x2 <= x1 || y2 <= y1) return std::nullopt;
    return IntersectionRegion{Box{x1, y1, x2 - x1, y2 - y1}};
}

Box sample_box(const IntersectionRegion& is, double min_w, double min_h,
               Rng& rng) {
    if (is.width() < min_w || is.height() < min_h)
        throw GeometryError("sample_box: intersection too small");
    double w = rng.uniform(min_w, is.width());
    double x = rng.uniform(0.0, is.width() - w);
    double h = rng.uniform(min_h, is.height());
    double y = rng.uniform(0.0, is.height() - h);
    return Box{is.rect.x + x, is.rect.y + y, w, h};
}

double iou(const Box& a, const Box& b) {
    double ix = std::min(a.x2(), b.x2()) - std::max(a.x, b.x);
    double iy = std::min(a.y2(), b.y2()) - std::max(a.y, b.y);
    if (ix <= 0.0 || iy <= 0.0) return 0.0;
    double inter = ix * iy;
    return inter / (a.area() + b.area() - inter);
}

RoiSample sample_rois(const IntersectionRegion& is, int k,
                      std::optional<double> iou_thr, double min_w,
                      double min_h, int max_attempts, Rng& rng) {
    RoiSample out;
    out.boxes.reserve(k);
    for (int attempt = 0; attempt < max_attempts && int(out.boxes.size()) < k;
         ++attempt) {
        Box cand = sample_box(is, min_w, min_h, rng);
        bool accept = true;
        if (iou_thr) {
            for (const Box& b : out.boxes) {
                if (iou(cand, b) > *iou_thr) {
                    accept = false;
                    break;
                }
            }
        }
        if (accept) out.boxes.push_back(cand);
    }
    if (out.boxes.empty())
        throw GeometryError("sample_rois: sampling starved");
    out.truncated = int(out.boxes.size()) < k;
    return out;
}

Box map_box_to_view(const Box& b, const ViewGeometry& v) {
    if (!v.crop.contains(b, 1e-6))
        throw GeometryError("map_box_to_view: box not visible in view");
    double sx = v.out_w / v.crop.w;
    double sy = v.out_h / v.crop.h;
    Box r{(b.x - v.crop.x) * sx, (b.y - v.crop.y) * sy, b.w * sx, b.h * sy};
    if (v.hflip) r.x = v.out_w - (r.x + r.w);
    return r;
}

Box map_view_to_source(const Box& b, const ViewGeometry& v) {
    Box r = b;
    if (v.hflip) r.x = v.out_w - (r.x + r.w);
    double sx = v.crop.w / v.out_w;
    double sy = v.crop.h / v.out_h;
    return Box{v.crop.x + r.x * sx, v.crop.y + r.y * sy, r.w * sx, r.h * sy};
}

Box map_box_to_grid(const Box& b, const FeatureGridSpec& g) {
    double sx = g.stride_x();
    double sy = g.stride_y();
    return Box{b.x / sx, b.y / sy, b.w / sx, b.h / sy};
}

Box jitter_box(const Box& b, double magnitude, const Box& bounds, Rng& rng) {
    if (magnitude < 0.0) throw GeometryError("jitter_box: negative magnitude");
    Box r;
    if (std::isinf(magnitude)) {
        // Fresh box inside bounds, independent of b.
        IntersectionRegion region{bounds};
        double min_w = std::min(1.0, bounds.w);
        double min_h = std::min(1.0, bounds.h);
        return sample_box(region, min_w, min_h, rng);
    }
    r.w = b.w * (1.0 + rng.uniform(-magnitude, magnitude));
    r.h = b.h * (1.0 + rng.uniform(-magnitude, magnitude));
    r.x = b.x + b.w * rng.uniform(-magnitude, magnitude);
    r.y = b.y + b.h * rng.uniform(-magnitude, magnitude);
    // Clamp into bounds, keeping at least 1px (or the bounds extent if
    // the bounds themselves are smaller).
    r.w = std::clamp(r.w, std::min(1.0, bounds.w), bounds.w);
    r.h = std::clamp(r.h, std::min(1.0, bounds.h), bounds.h);
    r.x = std::clamp(r.x, bounds.x, bounds.x2() - r.w);
    r.y = std::clamp(r.y, bounds.y, bounds.y2() - r.h);
    return r;
}

}  // namespace scrl::geom
