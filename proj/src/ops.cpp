#include "scrl/ops.hpp"

#include <algorithm>
#include <cmath>

#include "scrl/detail/autodiff_utils.hpp"

namespace scrl::nn {

using detail::make_op;

namespace {

struct ConvDims {
    int n, c, h, w, f, kh, kw, oh, ow, stride, pad;
};

ConvDims conv_dims(const Tensor& x, const Tensor& weight, int stride,
                   int padding) {
    if (x.ndim() != 4 || weight.ndim() != 4)
        throw ShapeError("conv2d: expected 4-d input and weight, got " +
                         shape_str(x.shape()) + " and " +
                         shape_str(weight.shape()));
    ConvDims d;
    d.n = x.dim(0);
    d.c = x.dim(1);
    d.h = x.dim(2);
    d.w = x.dim(3);
    d.f = weight.dim(0);
    d.kh = weight.dim(2);
    d.kw = weight.dim(3);
    d.stride = stride;
    d.pad = padding;
    if (weight.dim(1) != d.c)
        throw ShapeError("conv2d: input channels " + std::to_string(d.c) +
                         " vs weight channels " + std::to_string(weight.dim(1)));
    d.oh = (d.h + 2 * padding - d.kh) / stride + 1;
    d.ow = (d.w + 2 * padding - d.kw) / stride + 1;
    if (d.oh <= 0 || d.ow <= 0 ||
        (d.oh - 1) * stride + d.kh > d.h + 2 * padding ||
        stride <= 0)
        throw ShapeError("conv2d: spatial dims incompatible with stride/padding");
    return d;
}

// Valid output range [lo, hi) so that i = o*stride - pad + k stays in [0, limit).
inline void valid_range(int k, int stride, int pad, int limit, int out_limit,
                        int& lo, int& hi) {
    // o*stride >= pad - k
    int num = pad - k;
    lo = num <= 0 ? 0 : (num + stride - 1) / stride;
    // o*stride <= limit - 1 + pad - k
    int top = limit - 1 + pad - k;
    hi = top < 0 ? 0 : std::min(out_limit, top / stride + 1);
    if (lo > hi) lo = hi;
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias,
              int stride, int padding) {
    ConvDims d = conv_dims(x, weight, stride, padding);
    bool has_bias = bias.defined();
    if (has_bias && (bias.ndim() != 1 || bias.dim(0) != d.f))
        throw ShapeError("conv2d: bias shape " + shape_str(bias.shape()));

    std::vector<double> out(size_t(d.n) * d.f * d.oh * d.ow, 0.0);
    const double* xd = x.data().data();
    const double* wd = weight.data().data();
    for (int n = 0; n < d.n; ++n) {
        for (int f = 0; f < d.f; ++f) {
            double* op = out.data() + (size_t(n) * d.f + f) * d.oh * d.ow;
            if (has_bias) {
                double b = bias.data()[f];
                for (int i = 0; i < d.oh * d.ow; ++i) op[i] = b;
            }
            for (int c = 0; c < d.c; ++c) {
                const double* xp = xd + (size_t(n) * d.c + c) * d.h * d.w;
                const double* wp = wd + (size_t(f) * d.c + c) * d.kh * d.kw;
                for (int ky = 0; ky < d.kh; ++ky) {
                    int oh_lo, oh_hi;
                    valid_range(ky, d.stride, d.pad, d.h, d.oh, oh_lo, oh_hi);
                    for (int kx = 0; kx < d.kw; ++kx) {
                        double wv = wp[ky * d.kw + kx];
                        int ow_lo, ow_hi;
                        valid_range(kx, d.stride, d.pad, d.w, d.ow, ow_lo, ow_hi);
                        for (int oh = oh_lo; oh < oh_hi; ++oh) {
                            int ih = oh * d.stride - d.pad + ky;
                            const double* xrow = xp + ih * d.w - d.pad + kx;
                            double* orow = op + oh * d.ow;
                            for (int ow = ow_lo; ow < ow_hi; ++ow)
                                orow[ow] += wv * xrow[ow * d.stride];
                        }
                    }
                }
            }
        }
    }

    std::vector<Tensor> parents = {x, weight};
    if (has_bias) parents.push_back(bias);
    return make_op(
        {d.n, d.f, d.oh, d.ow}, std::move(out), parents,
        [d, has_bias](Tensor::Node& nd) {
            auto& px = *nd.parents[0];
            auto& pw = *nd.parents[1];
            const double* g = nd.grad.data();
            if (px.requires_grad) {
                px.ensure_grad();
                for (int n = 0; n < d.n; ++n)
                    for (int f = 0; f < d.f; ++f) {
                        const double* gp =
                            g + (size_t(n) * d.f + f) * d.oh * d.ow;
                        for (int c = 0; c < d.c; ++c) {
                            double* dxp = px.grad.data() +
                                          (size_t(n) * d.c + c) * d.h * d.w;
                            const double* wp = pw.data.data() +
                                               (size_t(f) * d.c + c) * d.kh * d.kw;
                            for (int ky = 0; ky < d.kh; ++ky) {
                                int oh_lo, oh_hi;
                                valid_range(ky, d.stride, d.pad, d.h, d.oh,
                                            oh_lo, oh_hi);
                                for (int kx = 0; kx < d.kw; ++kx) {
                                    double wv = wp[ky * d.kw + kx];
                                    int ow_lo, ow_hi;
                                    valid_range(kx, d.stride, d.pad, d.w, d.ow,
                                                ow_lo, ow_hi);
                                    for (int oh = oh_lo; oh < oh_hi; ++oh) {
                                        int ih = oh * d.stride - d.pad + ky;
                                        double* dxrow =
                                            dxp + ih * d.w - d.pad + kx;
                                        const double* grow = gp + oh * d.ow;
                                        for (int ow = ow_lo; ow < ow_hi; ++ow)
                                            dxrow[ow * d.stride] += wv * grow[ow];
                                    }
                                }
                            }
                        }
                    }
            }
            if (pw.requires_grad) {
                pw.ensure_grad();
                for (int n = 0; n < d.n; ++n)
                    for (int f = 0; f < d.f; ++f) {
                        const double* gp =
                            g + (size_t(n) * d.f + f) * d.oh * d.ow;
                        for (int c = 0; c < d.c; ++c) {
                            const double* xp = px.data.data() +
                                               (size_t(n) * d.c + c) * d.h * d.w;
                            double* dwp = pw.grad.data() +
                                          (size_t(f) * d.c + c) * d.kh * d.kw;
                            for (int ky = 0; ky < d.kh; ++ky) {
                                int oh_lo, oh_hi;
                                valid_range(ky, d.stride, d.pad, d.h, d.oh,
                                            oh_lo, oh_hi);
                                for (int kx = 0; kx < d.kw; ++kx) {
                                    int ow_lo, ow_hi;
                                    valid_range(kx, d.stride, d.pad, d.w, d.ow,
                                                ow_lo, ow_hi);
                                    double acc = 0.0;
                                    for (int oh = oh_lo; oh < oh_hi; ++oh) {
                                        int ih = oh * d.stride - d.pad + ky;
                                        const double* xrow =
                                            xp + ih * d.w - d.pad + kx;
                                        const double* grow = gp + oh * d.ow;
                                        for (int ow = ow_lo; ow < ow_hi; ++ow)
                                            acc += grow[ow] * xrow[ow * d.stride];
                                    }
                                    dwp[ky * d.kw + kx] += acc;
                                }
                            }
                        }
                    }
            }
            if (has_bias && nd.parents[2]->requires_grad) {
                auto& pb = *nd.parents[2];
                pb.ensure_grad();
                for (int n = 0; n < d.n; ++n)
                    for (int f = 0; f < d.f; ++f) {
                        const double* gp =
                            g + (size_t(n) * d.f + f) * d.oh * d.ow;
                        double acc = 0.0;
                        for (int i = 0; i < d.oh * d.ow; ++i) acc += gp[i];
                        pb.grad[f] += acc;
                    }
            }
        });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
    if (x.ndim() != 2 || weight.ndim() != 2)
        throw ShapeError("linear: expected 2-d input and weight");
    int n = x.dim(0), dIn = x.dim(1), m = weight.dim(0);
    if (weight.dim(1) != dIn)
        throw ShapeError("linear: input dim " + std::to_string(dIn) +
                         " vs weight dim " + std::to_string(weight.dim(1)));
    bool has_bias = bias.defined();
    if (has_bias && (bias.ndim() != 1 || bias.dim(0) != m))
        throw ShapeError("linear: bias shape " + shape_str(bias.shape()));

    std::vector<double> out(size_t(n) * m, 0.0);
    const double* xd = x.data().data();
    const double* wd = weight.data().data();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) {
            const double* xr = xd + size_t(i) * dIn;
            const double* wr = wd + size_t(j) * dIn;
            double acc = has_bias ? bias.data()[j] : 0.0;
            for (int k = 0; k < dIn; ++k) acc += xr[k] * wr[k];
            out[size_t(i) * m + j] = acc;
        }

    std::vector<Tensor> parents = {x, weight};
    if (has_bias) parents.push_back(bias);
    return make_op({n, m}, std::move(out), parents,
                   [n, m, dIn, has_bias](Tensor::Node& nd) {
                       auto& px = *nd.parents[0];
                       auto& pw = *nd.parents[1];
                       const double* g = nd.grad.data();
                       if (px.requires_grad) {
                           px.ensure_grad();
                           for (int i = 0; i < n; ++i)
                               for (int j = 0; j < m; ++j) {
                                   double gv = g[size_t(i) * m + j];
                                   const double* wr =
                                       pw.data.data() + size_t(j) * dIn;
                                   double* dxr = px.grad.data() + size_t(i) * dIn;
                                   for (int k = 0; k < dIn; ++k)
                                       dxr[k] += gv * wr[k];
                               }
                       }
                       if (pw.requires_grad) {
                           pw.ensure_grad();
                           for (int i = 0; i < n; ++i)
                               for (int j = 0; j < m; ++j) {
                                   double gv = g[size_t(i) * m + j];
                                   const double* xr =
                                       px.data.data() + size_t(i) * dIn;
                                   double* dwr = pw.grad.data() + size_t(j) * dIn;
                                   for (int k = 0; k < dIn; ++k)
                                       dwr[k] += gv * xr[k];
                               }
                       }
                       if (has_bias && nd.parents[2]->requires_grad) {
                           auto& pb = *nd.parents[2];
                           pb.ensure_grad();
                           for (int i = 0; i < n; ++i)
                               for (int j = 0; j < m; ++j)
                                   pb.grad[j] += g[size_t(i) * m + j];
                       }
                   });
}

Tensor relu(const Tensor& x) {
    std::vector<double> out(x.numel());
    for (size_t i = 0; i < out.size(); ++i)
        out[i] = x.data()[i] > 0.0 ? x.data()[i] : 0.0;
    return make_op(x.shape(), std::move(out), {x}, [](Tensor::Node& nd) {
        auto& p = *nd.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        for (size_t i = 0; i < nd.grad.size(); ++i)
            if (p.data[i] > 0.0) p.grad[i] += nd.grad[i];
    });
}

namespace {

// Shared batch-norm core. `index_of_channel` maps a flat element index to
// its channel; `count` is the number of elements per channel.
Tensor batch_norm_impl(const Tensor& x, const Tensor& gamma,
                       const Tensor& beta, std::vector<double>& running_mean,
                       std::vector<double>& running_var, double momentum,
                       double eps, bool training, int channels,
                       std::vector<int> chan_of, size_t count) {
    if (gamma.numel() != size_t(channels) || beta.numel() != size_t(channels))
        throw ShapeError("batch_norm: gamma/beta size mismatch");
    if (running_mean.size() != size_t(channels) ||
        running_var.size() != size_t(channels))
        throw ShapeError("batch_norm: running stats size mismatch");

    size_t total = x.numel();
    std::vector<double> mean(channels, 0.0), var(channels, 0.0);
    if (training) {
        for (size_t i = 0; i < total; ++i) mean[chan_of[i]] += x.data()[i];
        for (int c = 0; c < channels; ++c) mean[c] /= double(count);
        for (size_t i = 0; i < total; ++i) {
            double d = x.data()[i] - mean[chan_of[i]];
            var[chan_of[i]] += d * d;
        }
        for (int c = 0; c < channels; ++c) var[c] /= double(count);
        // Running buffers keep the unbiased estimate.
        double unbias = double(count) / double(count - 1);
        for (int c = 0; c < channels; ++c) {
            running_mean[c] =
                (1.0 - momentum) * running_mean[c] + momentum * mean[c];
            running_var[c] = (1.0 - momentum) * running_var[c] +
                             momentum * var[c] * unbias;
        }
    } else {
        mean = running_mean;
        var = running_var;
    }

    std::vector<double> inv_std(channels);
    for (int c = 0; c < channels; ++c) inv_std[c] = 1.0 / std::sqrt(var[c] + eps);

    std::vector<double> xhat(total), out(total);
    for (size_t i = 0; i < total; ++i) {
        int c = chan_of[i];
        xhat[i] = (x.data()[i] - mean[c]) * inv_std[c];
        out[i] = gamma.data()[c] * xhat[i] + beta.data()[c];
    }

    return make_op(
        x.shape(), std::move(out), {x, gamma, beta},
        [channels, chan_of = std::move(chan_of), count, training,
         inv_std = std::move(inv_std),
         xhat = std::move(xhat)](Tensor::Node& nd) {
            auto& px = *nd.parents[0];
            auto& pg = *nd.parents[1];
            auto& pb = *nd.parents[2];
            size_t total = nd.grad.size();
            std::vector<double> sum_g(channels, 0.0), sum_gx(channels, 0.0);
            for (size_t i = 0; i < total; ++i) {
                int c = chan_of[i];
                sum_g[c] += nd.grad[i];
                sum_gx[c] += nd.grad[i] * xhat[i];
            }
            if (pg.requires_grad) {
                pg.ensure_grad();
                for (int c = 0; c < channels; ++c) pg.grad[c] += sum_gx[c];
            }
            if (pb.requires_grad) {
                pb.ensure_grad();
                for (int c = 0; c < channels; ++c) pb.grad[c] += sum_g[c];
            }
            if (px.requires_grad) {
                px.ensure_grad();
                if (training) {
                    double inv_n = 1.0 / double(count);
                    for (size_t i = 0; i < total; ++i) {
                        int c = chan_of[i];
                        double dxhat = nd.grad[i] * pg.data[c];
                        px.grad[i] += inv_std[c] *
                                      (dxhat - inv_n * pg.data[c] *
                                                   (sum_g[c] +
                                                    xhat[i] * sum_gx[c]));
                    }
                } else {
                    for (size_t i = 0; i < total; ++i) {
                        int c = chan_of[i];
                        px.grad[i] += nd.grad[i] * pg.data[c] * inv_std[c];
                    }
                }
            }
        });
}

}  // namespace

Tensor batch_norm2d(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                    std::vector<double>& running_mean,
                    std::vector<double>& running_var, double momentum,
                    double eps, bool training) {
    if (x.ndim() != 4) throw ShapeError("batch_norm2d: expected 4-d input");
    int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (training && n < 2)
        throw ShapeError("batch_norm2d: training mode needs batch >= 2");
    std::vector<int> chan_of(x.numel());
    size_t i = 0;
    for (int ni = 0; ni < n; ++ni)
        for (int ci = 0; ci < c; ++ci)
            for (int s = 0; s < h * w; ++s) chan_of[i++] = ci;
    return batch_norm_impl(x, gamma, beta, running_mean, running_var, momentum,
                           eps, training, c, std::move(chan_of),
                           size_t(n) * h * w);
}

Tensor batch_norm1d(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                    std::vector<double>& running_mean,
                    std::vector<double>& running_var, double momentum,
                    double eps, bool training) {
    if (x.ndim() != 2) throw ShapeError("batch_norm1d: expected 2-d input");
    int n = x.dim(0), d = x.dim(1);
    if (training && n < 2)
        throw ShapeError("batch_norm1d: training mode needs batch >= 2");
    std::vector<int> chan_of(x.numel());
    size_t i = 0;
    for (int ni = 0; ni < n; ++ni)
        for (int di = 0; di < d; ++di) chan_of[i++] = di;
    return batch_norm_impl(x, gamma, beta, running_mean, running_var, momentum,
                           eps, training, d, std::move(chan_of), size_t(n));
}

double bilinear_at(const double* plane, int h, int w, double y, double x) {
    // Continuous coords with pixel centers at integer+0.5; clamp to the
    // border so samples just outside the map read the edge pixel.
    double u = std::clamp(x - 0.5, 0.0, double(w - 1));
    double v = std::clamp(y - 0.5, 0.0, double(h - 1));
    int x0 = int(u);
    int y0 = int(v);
    int x1 = std::min(x0 + 1, w - 1);
    int y1 = std::min(y0 + 1, h - 1);
    double tx = u - x0;
    double ty = v - y0;
    return (1 - ty) * ((1 - tx) * plane[y0 * w + x0] + tx * plane[y0 * w + x1]) +
           ty * ((1 - tx) * plane[y1 * w + x0] + tx * plane[y1 * w + x1]);
}

namespace {

// The four corner contributions of one bilinear sample.
struct BilinearTap {
    int idx[4];
    double wgt[4];
};

BilinearTap bilinear_tap(int h, int w, double y, double x) {
    double u = std::clamp(x - 0.5, 0.0, double(w - 1));
    double v = std::clamp(y - 0.5, 0.0, double(h - 1));
    int x0 = int(u);
    int y0 = int(v);
    int x1 = std::min(x0 + 1, w - 1);
    int y1 = std::min(y0 + 1, h - 1);
    double tx = u - x0;
    double ty = v - y0;
    BilinearTap t;
    t.idx[0] = y0 * w + x0;
    t.idx[1] = y0 * w + x1;
    t.idx[2] = y1 * w + x0;
    t.idx[3] = y1 * w + x1;
    t.wgt[0] = (1 - ty) * (1 - tx);
    t.wgt[1] = (1 - ty) * tx;
    t.wgt[2] = ty * (1 - tx);
    t.wgt[3] = ty * tx;
    return t;
}

}  // namespace

Tensor roi_align_1x1(const Tensor& features, const std::vector<Roi>& rois,
                     int sampling_ratio) {
    if (features.ndim() != 4)
        throw ShapeError("roi_align_1x1: expected 4-d features");
    if (sampling_ratio < 1)
        throw ShapeError("roi_align_1x1: sampling_ratio must be >= 1");
    int n = features.dim(0), c = features.dim(1);
    int fh = features.dim(2), fw = features.dim(3);
    int r = int(rois.size());
    int s = sampling_ratio;
    double inv_samples = 1.0 / double(s * s);

    // Precompute all taps once; forward and backward share them.
    std::vector<BilinearTap> taps(size_t(r) * s * s);
    for (int ri = 0; ri < r; ++ri) {
        const Roi& roi = rois[ri];
        if (roi.batch < 0 || roi.batch >= n)
            throw ShapeError("roi_align_1x1: batch index " +
                             std::to_string(roi.batch) + " out of range");
        for (int iy = 0; iy < s; ++iy)
            for (int ix = 0; ix < s; ++ix) {
                double sy = roi.box.y + (iy + 0.5) * roi.box.h / s;
                double sx = roi.box.x + (ix + 0.5) * roi.box.w / s;
                taps[(size_t(ri) * s + iy) * s + ix] =
                    bilinear_tap(fh, fw, sy, sx);
            }
    }
    std::vector<int> batch_of(r);
    for (int ri = 0; ri < r; ++ri) batch_of[ri] = rois[ri].batch;

    std::vector<double> out(size_t(r) * c, 0.0);
    const double* fd = features.data().data();
    for (int ri = 0; ri < r; ++ri)
        for (int ci = 0; ci < c; ++ci) {
            const double* plane =
                fd + (size_t(batch_of[ri]) * c + ci) * fh * fw;
            double acc = 0.0;
            for (int t = 0; t < s * s; ++t) {
                const BilinearTap& tap = taps[size_t(ri) * s * s + t];
                acc += tap.wgt[0] * plane[tap.idx[0]] +
                       tap.wgt[1] * plane[tap.idx[1]] +
                       tap.wgt[2] * plane[tap.idx[2]] +
                       tap.wgt[3] * plane[tap.idx[3]];
            }
            out[size_t(ri) * c + ci] = acc * inv_samples;
        }

    return make_op(
        {r, c}, std::move(out), {features},
        [r, c, fh, fw, s, inv_samples, taps = std::move(taps),
         batch_of = std::move(batch_of)](Tensor::Node& nd) {
            auto& p = *nd.parents[0];
            if (!p.requires_grad) return;
            p.ensure_grad();
            for (int ri = 0; ri < r; ++ri)
                for (int ci = 0; ci < c; ++ci) {
                    double g = nd.grad[size_t(ri) * c + ci] * inv_samples;
                    double* plane = p.grad.data() +
                                    (size_t(batch_of[ri]) * c + ci) * fh * fw;
                    for (int t = 0; t < s * s; ++t) {
                        const BilinearTap& tap = taps[size_t(ri) * s * s + t];
                        plane[tap.idx[0]] += g * tap.wgt[0];
                        plane[tap.idx[1]] += g * tap.wgt[1];
                        plane[tap.idx[2]] += g * tap.wgt[2];
                        plane[tap.idx[3]] += g * tap.wgt[3];
                    }
                }
        });
}

Tensor global_avg_pool(const Tensor& x) {
    if (x.ndim() != 4) throw ShapeError("global_avg_pool: expected 4-d input");
    int n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
    std::vector<double> out(size_t(n) * c, 0.0);
    for (int i = 0; i < n * c; ++i) {
        const double* p = x.data().data() + size_t(i) * hw;
        double acc = 0.0;
        for (int j = 0; j < hw; ++j) acc += p[j];
        out[i] = acc / hw;
    }
    return make_op({n, c}, std::move(out), {x}, [hw](Tensor::Node& nd) {
        auto& p = *nd.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        double inv = 1.0 / hw;
        for (size_t i = 0; i < nd.grad.size(); ++i) {
            double g = nd.grad[i] * inv;
            double* gp = p.grad.data() + i * hw;
            for (int j = 0; j < hw; ++j) gp[j] += g;
        }
    });
}

Tensor l2_normalize(const Tensor& x, double eps) {
    int d = x.shape().back();
    size_t rows = x.numel() / d;
    std::vector<double> out(x.numel());
    std::vector<double> norms(rows);
    for (size_t i = 0; i < rows; ++i) {
        const double* p = x.data().data() + i * d;
        double sq = 0.0;
        for (int j = 0; j < d; ++j) sq += p[j] * p[j];
        double n = std::max(std::sqrt(sq), eps);
        norms[i] = n;
        for (int j = 0; j < d; ++j) out[i * d + j] = p[j] / n;
    }
    return make_op(
        x.shape(), std::move(out), {x},
        [d, rows, eps, norms = std::move(norms)](Tensor::Node& nd) {
            auto& p = *nd.parents[0];
            if (!p.requires_grad) return;
            p.ensure_grad();
            for (size_t i = 0; i < rows; ++i) {
                const double* xv = p.data.data() + i * d;
                const double* g = nd.grad.data() + i * d;
                double* dx = p.grad.data() + i * d;
                double n = norms[i];
                double raw = 0.0;
                for (int j = 0; j < d; ++j) raw += xv[j] * xv[j];
                if (std::sqrt(raw) <= eps) {
                    // Below the guard the op is x/eps, a constant scale.
                    for (int j = 0; j < d; ++j) dx[j] += g[j] / eps;
                } else {
                    double dot = 0.0;
                    for (int j = 0; j < d; ++j) dot += g[j] * xv[j];
                    double n3 = n * n * n;
                    for (int j = 0; j < d; ++j)
                        dx[j] += g[j] / n - xv[j] * dot / n3;
                }
            }
        });
}

Tensor cross_entropy_logits(const Tensor& logits,
                            const std::vector<int>& labels) {
    if (logits.ndim() != 2) throw ShapeError("cross_entropy: expected 2-d logits");
    int n = logits.dim(0), k = logits.dim(1);
    if (int(labels.size()) != n)
        throw ShapeError("cross_entropy: label count mismatch");
    std::vector<double> probs(size_t(n) * k);
    double loss = 0.0;
    for (int i = 0; i < n; ++i) {
        const double* row = logits.data().data() + size_t(i) * k;
        double mx = row[0];
        for (int j = 1; j < k; ++j) mx = std::max(mx, row[j]);
        double z = 0.0;
        for (int j = 0; j < k; ++j) {
            probs[size_t(i) * k + j] = std::exp(row[j] - mx);
            z += probs[size_t(i) * k + j];
        }
        for (int j = 0; j < k; ++j) probs[size_t(i) * k + j] /= z;
        int y = labels[i];
        if (y < 0 || y >= k) throw ShapeError("cross_entropy: label out of range");
        loss -= std::log(std::max(probs[size_t(i) * k + y], 1e-300));
    }
    loss /= n;
    return make_op(
        {1}, {loss}, {logits},
        [n, k, labels, probs = std::move(probs)](Tensor::Node& nd) {
            auto& p = *nd.parents[0];
            if (!p.requires_grad) return;
            p.ensure_grad();
            double g = nd.grad[0] / n;
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < k; ++j)
                    p.grad[size_t(i) * k + j] +=
                        g * (probs[size_t(i) * k + j] -
                             (j == labels[i] ? 1.0 : 0.0));
        });
}

}  // namespace scrl::nn
