#pragma once

#include <optional>
#include <vector>

#include "scrl/geometry.hpp"
#include "scrl/tensor.hpp"

namespace scrl::nn {

// One pooling request: which batch item and where on its feature grid.
// Box coordinates are continuous feature-grid cells.
struct Roi {
    int batch = 0;
    geom::Box box;
};

// Cross-correlation, NCHW layout. bias may be an undefined Tensor.
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias,
              int stride, int padding);

// y = x * w^T + b with x:[N,D], w:[M,D], b:[M].
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

Tensor relu(const Tensor& x);

// Channel-wise batch norm over [N,C,H,W]. Training mode normalizes with
// batch statistics and updates the running buffers in place; eval mode
// uses the running buffers. Training requires N >= 2.
Tensor batch_norm2d(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                    std::vector<double>& running_mean,
                    std::vector<double>& running_var, double momentum,
                    double eps, bool training);

// Feature-wise batch norm over [N,D]. Training requires N >= 2.
Tensor batch_norm1d(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                    std::vector<double>& running_mean,
                    std::vector<double>& running_var, double momentum,
                    double eps, bool training);

// 1x1 RoIAlign: each RoI is pooled into a single C-vector by averaging
// sampling_ratio^2 bilinear samples placed on a regular grid inside the
// box. Pixel centers sit at integer+0.5; samples outside the map clamp
// to the border. Differentiable w.r.t. features only; boxes are data.
Tensor roi_align_1x1(const Tensor& features, const std::vector<Roi>& rois,
                     int sampling_ratio);

// [N,C,H,W] -> [N,C]
Tensor global_avg_pool(const Tensor& x);

// Divides each last-axis vector by max(norm, eps).
Tensor l2_normalize(const Tensor& x, double eps = 1e-12);

// Mean softmax cross-entropy over rows of logits:[N,K].
Tensor cross_entropy_logits(const Tensor& logits,
                            const std::vector<int>& labels);

// Scalar bilinear read used by the RoIAlign forward; exposed so tests can
// compare against an independent oracle with the same clamping rules.
double bilinear_at(const double* plane, int h, int w, double y, double x);

}  // namespace scrl::nn
